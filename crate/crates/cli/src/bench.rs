//! Corpus benchmark: repeated profiling runs per file with timing and
//! accuracy proxies.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;
use textprof_core::ingest::ParsingProvider;
use textprof_core::mine::{self, ComplexityInputs, CorpusBounds};
use textprof_core::{Pipeline, PipelineConfig, RawDataset};

/// Ground truth shipped next to a fixture as `<file>.truth.json`.
#[derive(Clone, Debug, Deserialize)]
pub struct Truth {
    pub category: String,
    /// Character spans of the true records.
    pub records: Vec<[usize; 2]>,
}

impl Truth {
    pub fn load(file: &Path) -> Option<Truth> {
        let mut p = file.as_os_str().to_owned();
        p.push(".truth.json");
        let text = std::fs::read_to_string(PathBuf::from(p)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn starts(&self) -> BTreeSet<usize> {
        self.records.iter().map(|r| r[0]).collect()
    }
}

/// Precision and recall of predicted record start offsets.
pub fn start_precision_recall(predicted: &BTreeSet<usize>, truth: &BTreeSet<usize>) -> (f64, f64) {
    let hit = predicted.intersection(truth).count() as f64;
    let p = if predicted.is_empty() { 0.0 } else { hit / predicted.len() as f64 };
    let r = if truth.is_empty() { 0.0 } else { hit / truth.len() as f64 };
    (p, r)
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub file: String,
    pub category: String,
    pub size: usize,
    pub runs: usize,
    pub runtime_mean_ms: f64,
    pub runtime_min_ms: f64,
    pub inputs: ComplexityInputs,
    pub complexity: f64,
    pub records: usize,
    pub residue_ratio: f64,
    pub f: f64,
    pub mf: usize,
    pub uc: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// Fixture files of a directory, sorted by name, skipping sidecars.
pub fn corpus_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            !name.ends_with(".truth.json") && !name.starts_with('.')
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn bench_file(
    path: &Path,
    runs: usize,
    config: &PipelineConfig,
    provider: &dyn ParsingProvider,
) -> Result<BenchRow, Box<dyn std::error::Error>> {
    let content = std::fs::read_to_string(path)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("").to_string();
    let dataset = RawDataset::new(name.clone(), content);
    let pipeline = Pipeline::new(config.clone(), provider);
    let mut times = Vec::with_capacity(runs);
    let mut last = None;
    for _ in 0..runs.max(1) {
        let t = Instant::now();
        let run = pipeline.run(&dataset)?;
        times.push(t.elapsed().as_secs_f64() * 1e3);
        last = Some(run);
    }
    let run = last.expect("at least one run");
    let m = &run.profile.metrics;
    let truth = Truth::load(path);
    let (precision, recall) = match &truth {
        Some(t) => {
            let predicted = run.parsed.records.iter().map(|r| r.span.start).collect();
            let (p, r) = start_precision_recall(&predicted, &t.starts());
            (Some(p), Some(r))
        }
        None => (None, None),
    };
    let size = dataset.char_len();
    Ok(BenchRow {
        file: name,
        category: truth.map_or_else(|| "unlabeled".to_string(), |t| t.category),
        size,
        runs: times.len(),
        runtime_mean_ms: times.iter().sum::<f64>() / times.len() as f64,
        runtime_min_ms: times.iter().copied().fold(f64::INFINITY, f64::min),
        inputs: m.complexity_inputs(),
        complexity: m.complexity.value,
        records: m.record_count,
        residue_ratio: if size == 0 { 0.0 } else { m.residue_chars as f64 / size as f64 },
        f: run.profile.match_summary.f,
        mf: run.profile.match_summary.mf,
        uc: run.profile.match_summary.uc,
        precision,
        recall,
    })
}

/// Replaces raw complexity products by corpus-normalized scores.
pub fn normalize_complexity(rows: &mut [BenchRow]) {
    let inputs: Vec<ComplexityInputs> = rows.iter().map(|r| r.inputs).collect();
    let bounds = CorpusBounds::from_inputs(&inputs);
    for r in rows {
        r.complexity = mine::structural_complexity(&r.inputs, bounds.as_ref()).value;
    }
}

pub fn bench_dir(
    dir: &Path,
    runs: usize,
    config: &PipelineConfig,
    provider: &dyn ParsingProvider,
) -> Result<Vec<BenchRow>, Box<dyn std::error::Error>> {
    let mut rows = corpus_files(dir)?
        .iter()
        .map(|p| bench_file(p, runs, config, provider))
        .collect::<Result<Vec<_>, _>>()?;
    normalize_complexity(&mut rows);
    Ok(rows)
}

pub const CSV_HEADER: [&str; 17] = [
    "file",
    "category",
    "size_chars",
    "runs",
    "runtime_mean_ms",
    "runtime_min_ms",
    "avg_record_len",
    "field_clusters",
    "complexity",
    "records",
    "residue_ratio",
    "f",
    "mf",
    "uc",
    "start_precision",
    "start_recall",
    "complexity_rank",
];

pub fn to_csv(rows: &[BenchRow]) -> String {
    let ranks = average_ranks(&rows.iter().map(|r| r.complexity).collect::<Vec<_>>());
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.4}"));
    let mut out = CSV_HEADER.join(",");
    out.push('\n');
    for (r, rank) in rows.iter().zip(ranks) {
        let cells = [
            r.file.clone(),
            r.category.clone(),
            r.size.to_string(),
            r.runs.to_string(),
            format!("{:.3}", r.runtime_mean_ms),
            format!("{:.3}", r.runtime_min_ms),
            format!("{:.2}", r.inputs.avg_record_len),
            r.inputs.field_clusters.to_string(),
            format!("{:.6}", r.complexity),
            r.records.to_string(),
            format!("{:.6}", r.residue_ratio),
            format!("{:.2}", r.f),
            r.mf.to_string(),
            r.uc.to_string(),
            opt(r.precision),
            opt(r.recall),
            format!("{rank}"),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// 1-based ranks with ties sharing their mean rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = mean;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn spearman_extremes() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // monotone but non-linear is still perfect
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 8.0, 27.0, 1000.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn precision_recall() {
        let p: BTreeSet<usize> = [0, 10, 20, 25].into();
        let t: BTreeSet<usize> = [0, 10, 20, 30, 40].into();
        assert_eq!(start_precision_recall(&p, &t), (0.75, 0.6));
    }
}
