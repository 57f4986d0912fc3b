//! Batch interface to textprof: profiling, wrangling scripts, table export,
//! benchmarks and the HTTP service.

pub mod bench;

use std::error::Error;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use textprof_core::ingest::{HeuristicProvider, LanguageModelProvider, ParsingProvider};
use textprof_core::profile::ProfileRun;
use textprof_core::wrangle::{CellSelector, DiffPreview, WrangleOp, Workspace};
use textprof_core::{Pipeline, PipelineConfig, RawDataset};

pub type CliResult<T = ()> = Result<T, Box<dyn Error>>;

#[derive(Debug, Parser)]
#[command(name = "textprof", version, about = "Profile and wrangle semi-structured text")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProviderChoice {
    Heuristic,
    Llm,
}

#[derive(Clone, Debug, Args)]
pub struct PipelineArgs {
    /// Parsing provider; `llm` reads TEXTPROF_LLM_* from the environment.
    #[arg(long, value_enum, default_value = "heuristic")]
    pub provider: ProviderChoice,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// DBSCAN neighborhood radius on normalized Hamming distance.
    #[arg(long, default_value_t = 0.3)]
    pub eps: f64,
    /// Maximum characters sampled in total.
    #[arg(long = "sample-chars", default_value_t = textprof_core::ingest::DEFAULT_MAX_SAMPLE_CHARS)]
    pub sample_chars: usize,
    /// Number of sampled substrings.
    #[arg(long = "samples", default_value_t = textprof_core::ingest::DEFAULT_SAMPLE_COUNT)]
    pub samples: usize,
}

impl PipelineArgs {
    pub fn config(&self) -> PipelineConfig {
        let mut c = PipelineConfig { seed: self.seed, max_sample_chars: self.sample_chars, sample_count: self.samples, ..Default::default() };
        c.dbscan.eps = self.eps;
        c
    }

    pub fn provider(&self) -> Box<dyn ParsingProvider> {
        match self.provider {
            ProviderChoice::Heuristic => Box::new(HeuristicProvider::new()),
            ProviderChoice::Llm => Box::new(LanguageModelProvider::from_env()),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the profile JSON of a file.
    Profile {
        file: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a JSON list of wrangling operations and write the result text.
    Wrangle {
        file: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the diff preview of every op as a JSON list.
        #[arg(long)]
        previews: Option<PathBuf>,
    },
    /// Export a table of aligned columns, optionally after a script.
    Table {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        columns: Vec<usize>,
        #[arg(long, value_enum, default_value = "csv")]
        format: TableFormat,
        #[arg(long)]
        script: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List subfields and subfield cluster ids of a column or field position.
    Subfields {
        file: PathBuf,
        #[arg(long, conflicts_with = "field")]
        column: Option<usize>,
        #[arg(long)]
        field: Option<usize>,
        #[arg(long)]
        script: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Profile every file of a directory several times and report a CSV.
    Bench {
        dir: PathBuf,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "TEXTPROF_ADDR", default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, env = "TEXTPROF_STORAGE", default_value = "textprof-data")]
        storage: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn load(file: &Path) -> CliResult<RawDataset> {
    let content = std::fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
    let id = file.file_name().and_then(|n| n.to_str()).unwrap_or("dataset").to_string();
    Ok(RawDataset::new(id, content))
}

pub fn profile_run(file: &Path, args: &PipelineArgs) -> CliResult<(ProfileRun, PipelineConfig)> {
    let dataset = load(file)?;
    let provider = args.provider();
    let config = args.config();
    let run = Pipeline::new(config.clone(), provider.as_ref()).run(&dataset)?;
    Ok((run, config))
}

pub fn read_script(path: &Path) -> CliResult<Vec<WrangleOp>> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?)
}

/// Profiles `file`, then applies `ops` in order. Returns the workspace and
/// the preview of every op.
pub fn replay(file: &Path, ops: &[WrangleOp], args: &PipelineArgs) -> CliResult<(Workspace, Vec<DiffPreview>)> {
    let (run, config) = profile_run(file, args)?;
    let mut ws = Workspace::new(run.parsed, run.sample_fields, config.dbscan);
    let mut previews = Vec::with_capacity(ops.len());
    for (i, op) in ops.iter().enumerate() {
        let (_, p) = ws.apply(op).map_err(|e| format!("op {i}: {e}"))?;
        previews.push(p);
    }
    Ok((ws, previews))
}

fn workspace_for(file: &Path, script: Option<&Path>, args: &PipelineArgs) -> CliResult<Workspace> {
    let ops = match script {
        Some(s) => read_script(s)?,
        None => Vec::new(),
    };
    Ok(replay(file, &ops, args)?.0)
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Profile { file, pipeline, out } => {
            let (run, _) = profile_run(&file, &pipeline)?;
            emit(out.as_deref(), &(run.profile.to_json() + "\n"))
        }
        Command::Wrangle { file, script, pipeline, out, previews } => {
            let ops = read_script(&script)?;
            let (ws, ps) = replay(&file, &ops, &pipeline)?;
            if let Some(p) = previews {
                std::fs::write(p, serde_json::to_string_pretty(&ps)? + "\n")?;
            }
            emit(out.as_deref(), ws.dataset().content())
        }
        Command::Table { file, columns, format, script, pipeline, out } => {
            let ws = workspace_for(&file, script.as_deref(), &pipeline)?;
            let table = ws.build_table(&columns)?;
            let text = match format {
                TableFormat::Csv => table.to_csv(),
                TableFormat::Json => table.to_json() + "\n",
            };
            emit(out.as_deref(), &text)
        }
        Command::Subfields { file, column, field, script, pipeline } => {
            let ws = workspace_for(&file, script.as_deref(), &pipeline)?;
            let target = CellSelector { column, field, ..Default::default() };
            let subs = ws.subfield_clusters(&target)?;
            emit(None, &(serde_json::to_string_pretty(&subs)? + "\n"))
        }
        Command::Bench { dir, runs, pipeline, out } => {
            let provider = pipeline.provider();
            let rows = bench::bench_dir(&dir, runs, &pipeline.config(), provider.as_ref())?;
            let rho = bench::spearman(
                &rows.iter().map(|r| r.complexity).collect::<Vec<_>>(),
                &rows.iter().map(|r| r.runtime_mean_ms).collect::<Vec<_>>(),
            );
            eprintln!("spearman(complexity, runtime) = {rho:.4} over {} files", rows.len());
            emit(out.as_deref(), &bench::to_csv(&rows))
        }
        Command::Serve { addr, storage } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(textprof_service::serve(&addr, textprof_service::ServiceConfig::from_env(storage)))?;
            Ok(())
        }
    }
}
