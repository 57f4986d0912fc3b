//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the web UI.

mod common;

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textprof_cli::bench;
use textprof_core::cluster::{self, DbscanParams};
use textprof_core::ingest::HeuristicProvider;
use textprof_core::layout::{self, LayoutConfig};
use textprof_core::matching::{self, MatchConfig};
use textprof_core::mine;
use textprof_core::model::{reconstruct, AlignedTable, ClusterId, ParsedDataset, Record, Segment, TableColumn};
use textprof_core::profile::Profile;
use textprof_core::wrangle::{
    CellSelector, CombineInto, Case, Position, Predicate, RecordSet, Transform, WrangleError, WrangleOp, Workspace,
};
use textprof_core::{Pipeline, PipelineConfig, RawDataset};

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let checks: [(&str, Check); 9] = [
        ("round-trip losslessness over corpus, stages and versions", round_trip),
        ("similarity formula vs brute force on 1000 column pairs", similarity_oracle),
        ("greedy alignment steps vs exhaustive optimal matching", alignment_oracle),
        ("DBSCAN vs reference on 100 instances, monotone in eps", dbscan_oracle),
        ("template matching recovery with injected noise", matching_recovery),
        ("layout height law", layout_law),
        ("citation walkthrough replay and fold conservation", scenario_replay),
        ("500 random op/undo/redo sequences", undo_redo),
        ("bench harness runtime trend vs complexity", bench_trend),
    ];
    let filter = std::env::args().nth(1).filter(|a| !a.starts_with('-'));
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in checks {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}  ({detail}; {secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}  ({detail}; {secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn check_parse(p: &ParsedDataset, what: &str) -> Result<(), String> {
    p.verify().map_err(|e| format!("{what}: {e}"))?;
    let rebuilt = p.reconstruct().map_err(|e| format!("{what}: {e}"))?;
    ensure!(rebuilt == p.dataset.content(), "{what}: reconstruct differs from content");
    Ok(())
}

fn round_trip() -> Result<String, String> {
    let files = bench::corpus_files(&common::fixtures_dir()).map_err(|e| e.to_string())?;
    let mut categories = BTreeSet::new();
    let provider = HeuristicProvider::new();
    let config = PipelineConfig::default();
    let pipeline = Pipeline::new(config.clone(), &provider);
    let mut versions = 0;
    for path in &files {
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        if let Some(t) = bench::Truth::load(path) {
            categories.insert(t.category);
        }
        let content = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        let ds = RawDataset::new(name.clone(), content.clone());

        let (samples, set) = pipeline.sample(&ds).map_err(|e| format!("{name}: {e}"))?;
        for s in &samples {
            ensure!(ds.slice(s.span) == s.text, "{name}: sample {} is not a slice", s.span);
        }
        for (r, span) in set.records.iter().zip(&set.source_intervals) {
            ensure!(ds.slice(*span) == r, "{name}: sample record at {span} is not a slice");
        }
        let run = pipeline.run_with_sample(&ds, samples, set, &[]).map_err(|e| format!("{name}: {e}"))?;
        check_parse(&run.parsed, &format!("{name} promote"))?;

        let back = Profile::from_json(&run.profile.to_json()).map_err(|e| format!("{name}: {e}"))?;
        let rebuilt = reconstruct(&ds, &back.records, &back.residue).map_err(|e| format!("{name} profile: {e}"))?;
        ensure!(rebuilt == content, "{name}: profile JSON does not reconstruct");

        let mut ws = Workspace::new(run.parsed, run.sample_fields, config.dbscan);
        check_parse(&ws.analysis().parsed, &format!("{name} analysis"))?;
        let ops = [
            WrangleOp::Delete { target: CellSelector::records(RecordSet::Duplicates) },
            WrangleOp::Replace {
                target: CellSelector::records(RecordSet::All),
                transform: Transform::Case { to: Case::Upper },
            },
            WrangleOp::Delete {
                target: CellSelector { field: Some(0), predicate: Some(Predicate::Matches("[0-9].*".into())), ..Default::default() },
            },
            WrangleOp::Filter { target: CellSelector::records(RecordSet::Cluster(0)) },
        ];
        for op in &ops {
            // ops that do not apply to a file (e.g. no cluster 0) are skipped
            let _ = ws.apply(op);
        }
        let _ = ws.undo();
        let _ = ws.redo();
        let _ = ws.undo();
        for v in ws.versions().collect::<Vec<_>>() {
            let snap = ws.snapshot(v).map_err(|e| e.to_string())?;
            check_parse(&snap.parsed, &format!("{name} v{v}"))?;
            ensure!(ws.export(v).unwrap() == snap.parsed.dataset.content(), "{name} v{v}: export differs");
            let p = pipeline.profile_parsed(&snap.parsed, &snap.overrides).map_err(|e| format!("{name} v{v}: {e}"))?;
            let p = Profile::from_json(&p.to_json()).map_err(|e| e.to_string())?;
            let rebuilt = reconstruct(&snap.parsed.dataset, &p.records, &p.residue).map_err(|e| e.to_string())?;
            ensure!(rebuilt == snap.parsed.dataset.content(), "{name} v{v}: profile does not reconstruct");
            versions += 1;
        }
    }
    ensure!(files.len() >= 15, "only {} fixture files", files.len());
    for c in ["log", "kv", "csv", "fixed", "misc"] {
        ensure!(categories.contains(c), "no {c} fixture");
    }
    Ok(format!("{} files, {} versions", files.len(), versions))
}

fn random_value(rng: &mut ChaCha8Rng) -> String {
    const ALPHABET: &[char] = &['a', 'b', 'c', 'x', 'Y', '1', '2', '-', ' ', 'é'];
    let len = rng.random_range(0..=20);
    (0..len).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())]).collect()
}

fn similarity_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(0..=50);
        let col = |rng: &mut ChaCha8Rng| -> Vec<Option<String>> {
            (0..n).map(|_| rng.random_bool(0.8).then(|| random_value(rng))).collect()
        };
        let (a, b) = (col(&mut rng), col(&mut rng));
        let ar: Vec<Option<&str>> = a.iter().map(|x| x.as_deref()).collect();
        let br: Vec<Option<&str>> = b.iter().map(|x| x.as_deref()).collect();
        let (engine, _) = mine::field_similarity(&ar, &br);
        let oracle = common::similarity(&a, &b);
        worst = worst.max((engine - oracle).abs());
        ensure!((engine - oracle).abs() <= 1e-9, "engine {engine} vs oracle {oracle}");
    }
    let same: Vec<Option<&str>> = (0..10).map(|i| Some(if i % 2 == 0 { "abc" } else { "xyz" })).collect();
    let (s, n) = mine::field_similarity(&same, &same);
    ensure!(n == 10 && (s - 1.0).abs() <= 1e-9, "identical 10-record columns gave {s}");
    let one = [Some("a"), None, None];
    let other = [Some("a"), Some("b"), None];
    ensure!(mine::field_similarity(&one, &other).0 == 0.0, "support 1 must give 0");
    ensure!(mine::field_similarity(&[], &[]).0 == 0.0, "support 0 must give 0");
    Ok(format!("max deviation {worst:.1e}"))
}

/// All sequences over `symbols` cluster ids with length in `0..=max_len`.
fn sequences(symbols: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for c in 0..symbols {
                let mut t: Vec<usize> = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn records_of(seqs: &[&Vec<usize>]) -> Vec<Record> {
    let mut out = Vec::new();
    let mut start = 0;
    for seq in seqs {
        let parts: Vec<String> = seq.iter().map(|c| format!("{c}")).collect();
        let mut r = Record::from_parts(start, &parts);
        start = r.span.end;
        for (f, &c) in r.fields.iter_mut().zip(seq.iter()) {
            f.field_cluster = ClusterId::Id(c);
        }
        out.push(r);
    }
    out
}

fn check_alignment(seqs: &[&Vec<usize>], patterns: &[textprof_core::SyntacticPattern]) -> Result<(), String> {
    let mut records = records_of(seqs);
    let full = textprof_core::align::align(&mut records, patterns);
    full.table.validate(&records).map_err(|e| format!("{seqs:?}: {e}"))?;
    for k in 0..seqs.len() {
        let mut prefix = records_of(&seqs[..k]);
        let before = textprof_core::align::align(&mut prefix, patterns);
        let columns: Vec<usize> = before.table.columns.iter().map(|c| c.field_cluster).collect();
        let best = common::max_matching(seqs[k], &columns);
        ensure!(full.step_matches[k] == best, "{seqs:?} step {k}: {} matched, optimum {best}", full.step_matches[k]);
    }
    Ok(())
}

fn alignment_oracle() -> Result<String, String> {
    let patterns = vec![textprof_core::SyntacticPattern::default(); 3];
    let mut cases = 0u64;
    // every single step: fields up to 6 against column sequences up to 6
    let six = sequences(3, 6);
    for f in &six {
        for c in &six {
            let engine = textprof_core::align::align_step(f, c);
            let mut last = None;
            for (i, m) in engine.iter().enumerate() {
                if let Some(col) = *m {
                    ensure!(c[col] == f[i], "{f:?} vs {c:?}: mismatched symbols");
                    ensure!(last.is_none_or(|l| col > l), "{f:?} vs {c:?}: order violated");
                    last = Some(col);
                }
            }
            let count = engine.iter().flatten().count();
            ensure!(count == common::max_matching(f, c), "{f:?} vs {c:?}: {count} not optimal");
            cases += 1;
        }
    }
    // every record set of up to 4 records from the small universe
    let short = sequences(3, 2);
    let mid = sequences(3, 3);
    let long = sequences(3, 4);
    for a in &long {
        for b in &long {
            check_alignment(&[a, b], &patterns)?;
            cases += 1;
        }
    }
    for a in &mid {
        for b in &mid {
            for c in &mid {
                check_alignment(&[a, b, c], &patterns)?;
                cases += 1;
            }
        }
    }
    for a in &short {
        for b in &short {
            for c in &short {
                for d in &short {
                    check_alignment(&[a, b, c, d], &patterns)?;
                    cases += 1;
                }
            }
        }
    }
    // random larger sets within the stated bounds
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20_000 {
        let k = rng.random_range(1..=4);
        let set: Vec<Vec<usize>> =
            (0..k).map(|_| (0..rng.random_range(0..=6)).map(|_| rng.random_range(0..3)).collect()).collect();
        let refs: Vec<&Vec<usize>> = set.iter().collect();
        check_alignment(&refs, &patterns)?;
        cases += 1;
    }
    Ok(format!("{cases} cases"))
}

fn table_of(rows: &[Vec<bool>]) -> AlignedTable {
    let m = rows[0].len();
    AlignedTable {
        columns: (0..m).map(|c| TableColumn { field_cluster: c, pattern: Default::default() }).collect(),
        rows: (0..rows.len()).collect(),
        occupancy: rows.iter().map(|r| r.iter().enumerate().map(|(i, &b)| b.then_some(i)).collect()).collect(),
    }
}

fn dbscan_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut comparisons = 0;
    for inst in 0..100 {
        let m = rng.random_range(3..=12);
        let n = rng.random_range(1..=200);
        let protos: Vec<Vec<bool>> =
            (0..rng.random_range(1..=5)).map(|_| (0..m).map(|_| rng.random_bool(0.5)).collect()).collect();
        let flip = rng.random_range(0.0..0.3);
        let rows: Vec<Vec<bool>> = (0..n)
            .map(|_| {
                let p = &protos[rng.random_range(0..protos.len())];
                p.iter().map(|&b| if rng.random_bool(flip) { !b } else { b }).collect()
            })
            .collect();
        let table = table_of(&rows);
        for min_pts in [1, 2, 5] {
            let mut counts = Vec::new();
            for eps in [0.1, 0.3, 0.5] {
                let engine = cluster::cluster_records(&table, DbscanParams { eps, min_pts }).map_err(|e| e.to_string())?;
                let engine: Vec<Option<usize>> = engine.iter().map(ClusterId::id).collect();
                let reference = common::dbscan(&rows, eps, min_pts);
                ensure!(engine == reference, "instance {inst}, eps {eps}, minPts {min_pts}: labels differ");
                counts.push(reference.iter().flatten().max().map_or(0, |x| x + 1));
                comparisons += 1;
            }
            if min_pts == DbscanParams::default().min_pts {
                ensure!(counts.windows(2).all(|w| w[1] <= w[0]), "instance {inst}: counts {counts:?} increase with eps");
            }
        }
    }
    Ok(format!("{comparisons} labelings equal"))
}

const LETTERS: &[u8] = b"abcdefghij";

fn word(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    (0..rng.random_range(lo..=hi)).map(|_| LETTERS[rng.random_range(0..LETTERS.len())] as char).collect()
}

fn digits(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    (0..rng.random_range(lo..=hi)).map(|_| char::from(b'0' + rng.random_range(0..10u8))).collect()
}

/// Field lists of one synthetic record of shape `t`.
fn synthetic_record(rng: &mut ChaCha8Rng, t: usize) -> Vec<String> {
    match t {
        0 => vec![digits(rng, 4, 4), "-".into(), word(rng, 3, 8), ",".into(), digits(rng, 1, 3), "\n".into()],
        1 => vec![word(rng, 3, 8), ": ".into(), digits(rng, 2, 5), "\n".into()],
        _ => vec!["[".into(), word(rng, 2, 6), "]".into(), " ".into(), word(rng, 3, 9), " ".into(), digits(rng, 1, 4), "\n".into()],
    }
}

fn matching_recovery() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sample: Vec<Vec<String>> = (0..60).map(|i| synthetic_record(&mut rng, i % 3)).collect();
    let templates = matching::build_templates(&sample);
    ensure!(templates.len() == 3, "expected 3 templates, got {}", templates.len());
    let config = MatchConfig::default();
    let mut files = 0;
    for rate in [0.0, 0.01, 0.03, 0.05, 0.1] {
        for _ in 0..10 {
            let n = rng.random_range(20..120);
            let records: Vec<Vec<String>> = (0..n).map(|_| {
                let t = rng.random_range(0..3);
                synthetic_record(&mut rng, t)
            }).collect();
            let total: usize = records.iter().flatten().map(|f| f.chars().count()).sum();
            let budget = (total as f64 * rate).round() as usize;
            // noise runs go in front of random records or at the end
            let mut noise_at = vec![String::new(); n + 1];
            let mut used = 0;
            while used < budget {
                let len = rng.random_range(1..=6).min(budget - used);
                let run: String = (0..len).map(|_| ['#', '~', '^', '!', '%'][rng.random_range(0..5)]).collect();
                noise_at[rng.random_range(0..=n)].push_str(&run);
                used += len;
            }
            let mut text = String::new();
            let mut cursor = 0;
            let mut truth_records = Vec::new();
            let mut truth_noise = Vec::new();
            for (i, noise) in noise_at.iter().enumerate() {
                if !noise.is_empty() {
                    let l = noise.chars().count();
                    truth_noise.push((cursor, cursor + l));
                    text.push_str(noise);
                    cursor += l;
                }
                if let Some(r) = records.get(i) {
                    let l: usize = r.iter().map(|f| f.chars().count()).sum();
                    truth_records.push(((cursor, cursor + l), r.len()));
                    text.extend(r.iter().map(String::as_str));
                    cursor += l;
                }
            }
            let out = matching::parse_remaining(&templates, &text, &config);
            let got: Vec<((usize, usize), usize)> =
                out.matches.iter().map(|m| ((m.record_span.start, m.record_span.end), m.matched_fields)).collect();
            ensure!(got == truth_records, "rate {rate}: recovered records differ from truth");
            let residue: Vec<(usize, usize)> = out.residue.iter().map(|s| (s.start, s.end)).collect();
            ensure!(residue == truth_noise, "rate {rate}: residue {residue:?} vs noise {truth_noise:?}");
            ensure!(
                out.matches.iter().all(|m| m.edits_per_field.iter().all(|&e| e <= config.max_edits)),
                "a field exceeds {} edits",
                config.max_edits
            );
            let mf: usize = truth_records.iter().map(|r| r.1).sum();
            let uc: usize = truth_noise.iter().map(|s| s.1 - s.0).sum();
            let expected = mf as f64 - 0.01 * uc as f64;
            ensure!((out.f - expected).abs() <= 1e-9, "f {} vs ground truth {expected}", out.f);
            ensure!(out.mf == mf && out.uc == uc, "MF/UC {}/{} vs {mf}/{uc}", out.mf, out.uc);
            files += 1;
        }
    }

    // labeled log-like and CSV-like fixtures with the heuristic provider
    let provider = HeuristicProvider::new();
    let pipeline = Pipeline::new(PipelineConfig::default(), &provider);
    let mut worst: f64 = 1.0;
    for path in bench::corpus_files(&common::fixtures_dir()).map_err(|e| e.to_string())? {
        let Some(truth) = bench::Truth::load(&path) else { continue };
        if truth.category != "log" && truth.category != "csv" {
            continue;
        }
        let ds = RawDataset::new("f", std::fs::read_to_string(&path).map_err(|e| e.to_string())?);
        let run = pipeline.run(&ds).map_err(|e| e.to_string())?;
        let predicted = run.parsed.records.iter().map(|r| r.span.start).collect();
        let (p, r) = bench::start_precision_recall(&predicted, &truth.starts());
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        ensure!(p >= 0.9 && r >= 0.9, "{name}: precision {p:.3} recall {r:.3}");
        worst = worst.min(p).min(r);
    }
    Ok(format!("{files} synthetic files exact; fixture precision/recall >= {worst:.3}"))
}

fn layout_law() -> Result<String, String> {
    let LayoutConfig { c, min_height, .. } = LayoutConfig::default();
    let h100 = layout::sub_cell_height(100, c, min_height);
    let h1000 = layout::sub_cell_height(1000, c, min_height);
    ensure!(((h1000 - h100) - c).abs() <= 1e-9, "decade step {} != c", h1000 - h100);
    ensure!((layout::sub_cell_height(1, c, min_height) - min_height).abs() <= 1e-9, "size-1 height");

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let rows = rng.random_range(1..60);
        let cols = rng.random_range(1..6);
        let cells: Vec<Vec<Option<&str>>> = (0..rows)
            .map(|_| (0..cols).map(|_| rng.random_bool(0.7).then_some(["a", "b"][rng.random_range(0..2)])).collect())
            .collect();
        let clusters: Vec<ClusterId> = (0..rows).map(|r| ClusterId::Id(r / rng.random_range(3..10).max(1))).collect();
        let mut blocks = layout::merge_cells(&cells, &clusters, cols);
        layout::compute_heights(&mut blocks, c, min_height);
        for b in blocks.iter().flatten() {
            ensure!(b.sub_cell_sizes.iter().sum::<usize>() == b.rows(), "sub-cell sizes do not sum to block size");
            let expect: f64 = b.sub_cell_sizes.iter().map(|&s| min_height.max(c * (s as f64).log10())).sum();
            ensure!((b.height - expect).abs() <= 1e-9, "block height {} vs {expect}", b.height);
        }
    }
    let cells: Vec<Vec<Option<&str>>> = vec![vec![Some("v")]; 1000];
    let mut blocks = layout::merge_cells(&cells, &vec![ClusterId::Id(0); 1000], 1);
    layout::compute_heights(&mut blocks, c, min_height);
    ensure!(blocks[0].len() == 1 && (blocks[0][0].height - h1000).abs() <= 1e-9, "unsplit 1000-row block");
    Ok(format!("h(100)={h100}, h(1000)={h1000}"))
}

fn scenario_replay() -> Result<String, String> {
    let dir = common::fixtures_dir();
    let scenario = dir.join("scenario");
    let ops = textprof_cli::read_script(&scenario.join("citations.ops.json")).map_err(|e| e.to_string())?;
    let args = default_args();
    let (mut ws, previews) = textprof_cli::replay(&dir.join("citations.txt"), &ops[..2], &args).map_err(|e| e.to_string())?;
    ensure!(previews[0].records_removed == 9, "duplicate delete removed {}", previews[0].records_removed);

    // fold conservation, counted independently from the subfield listing
    let WrangleOp::Fold { target, group, drop: _ } = &ops[2] else { return Err("op 2 is not a fold".into()) };
    let before = ws.current().parsed.records.len();
    let subs = ws.subfield_clusters(target).map_err(|e| e.to_string())?;
    let mut folded = 0;
    let mut copies = 0;
    for cell in &subs.cells {
        let k = cell.clusters.iter().filter(|c| group.contains(c)).count();
        if k > 0 {
            folded += 1;
            copies += k;
        }
    }
    let preview = ws.preview(&ops[2]).map_err(|e| e.to_string())?;
    let (_, applied) = ws.apply(&ops[2]).map_err(|e| e.to_string())?;
    ensure!(preview == applied, "fold preview differs from apply");
    let after = ws.current().parsed.records.len();
    ensure!(after == before - folded + copies, "fold: {before} - {folded} + {copies} != {after}");
    ensure!(after == before + applied.records_added - applied.records_removed, "diff counts disagree with records");
    for op in &ops[3..] {
        ws.apply(op).map_err(|e| e.to_string())?;
    }

    let golden = std::fs::read_to_string(scenario.join("citations.cleaned.txt")).map_err(|e| e.to_string())?;
    ensure!(ws.dataset().content() == golden, "cleaned text differs from golden");
    let request: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(scenario.join("citations.table.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let columns: Vec<usize> = serde_json::from_value(request["columns"].clone()).map_err(|e| e.to_string())?;
    ensure!(columns.len() == 3, "table request must name 3 columns");
    let table = ws.build_table(&columns).map_err(|e| e.to_string())?;
    let golden_csv = std::fs::read_to_string(scenario.join("citations.table.csv")).map_err(|e| e.to_string())?;
    ensure!(table.to_csv() == golden_csv, "table CSV differs from golden");
    Ok(format!("{before} records -> {after} after fold ({folded} folded into {copies})"))
}

fn default_args() -> textprof_cli::PipelineArgs {
    use clap::Parser;
    #[derive(Parser)]
    struct A {
        #[command(flatten)]
        p: textprof_cli::PipelineArgs,
    }
    A::parse_from(["x"]).p
}

fn random_dataset(rng: &mut ChaCha8Rng) -> ParsedDataset {
    let mut segs = Vec::new();
    if rng.random_bool(0.3) {
        segs.push(Segment::Residue("# header\n".into()));
    }
    let pool: Vec<Vec<String>> = (0..rng.random_range(2..6))
        .map(|_| {
            let mut f = vec![word(rng, 1, 4)];
            for _ in 0..rng.random_range(0..4) {
                f.push([",", ";"][rng.random_range(0..2)].into());
                f.push(if rng.random_bool(0.5) { digits(rng, 1, 3) } else { format!("{} and {}", word(rng, 1, 3), word(rng, 1, 3)) });
            }
            f.push("\n".into());
            f
        })
        .collect();
    for _ in 0..rng.random_range(1..14) {
        segs.push(Segment::Record(pool[rng.random_range(0..pool.len())].clone()));
        if rng.random_bool(0.1) {
            segs.push(Segment::Residue("~~\n".into()));
        }
    }
    ParsedDataset::from_segments("u", 0, &segs)
}

fn random_selector(rng: &mut ChaCha8Rng, ws: &Workspace) -> CellSelector {
    let n = ws.current().parsed.records.len().max(1);
    let cols = ws.analysis().table.column_count().max(1);
    let records = match rng.random_range(0..4) {
        0 => RecordSet::All,
        1 => RecordSet::Duplicates,
        2 => RecordSet::Cluster(rng.random_range(0..3)),
        _ => RecordSet::Ids((0..rng.random_range(1..4)).map(|_| rng.random_range(0..n)).collect()),
    };
    let predicate = match rng.random_range(0..4) {
        0 => Some(Predicate::Matches("[0-9]+".into())),
        1 => Some(Predicate::Equals(",".into())),
        _ => None,
    };
    match rng.random_range(0..3) {
        0 => CellSelector { column: Some(rng.random_range(0..cols)), records, predicate, ..Default::default() },
        1 => CellSelector { field: Some(rng.random_range(0..5)), records, predicate, ..Default::default() },
        _ => CellSelector { records, ..Default::default() },
    }
}

fn random_op(rng: &mut ChaCha8Rng, ws: &Workspace) -> WrangleOp {
    let target = random_selector(rng, ws);
    let n = ws.current().parsed.records.len();
    match rng.random_range(0..10) {
        0 => WrangleOp::Delete { target },
        1 => WrangleOp::Replace {
            target,
            transform: match rng.random_range(0..4) {
                0 => Transform::Case { to: Case::Upper },
                1 => Transform::Replace { find: "[aeiou]".into(), with: "_".into(), regex: true },
                2 => Transform::Substring { start: 1, end: None },
                _ => Transform::Set { value: "Z".into() },
            },
        },
        2 => WrangleOp::Add {
            target,
            value: "+".into(),
            position: if rng.random_bool(0.5) { Position::Before } else { Position::After },
        },
        3 => WrangleOp::Separate { target, pattern: " and ".into() },
        4 => WrangleOp::Combine {
            target,
            columns: vec![rng.random_range(0..3), rng.random_range(0..4)],
            into: if rng.random_bool(0.5) { CombineInto::Cell } else { CombineInto::Record },
        },
        5 => WrangleOp::Filter { target },
        6 => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            WrangleOp::Reorder { order }
        }
        7 => WrangleOp::Fold { target, group: vec![rng.random_range(0..3)], drop: vec![rng.random_range(0..4)] },
        8 => WrangleOp::EditRecord {
            edits: vec![textprof_core::wrangle::RecordEdit {
                record: rng.random_range(0..n.max(1)),
                fields: if rng.random_bool(0.3) { Vec::new() } else { vec!["q".into(), "\n".into()] },
            }],
        },
        _ => WrangleOp::Delete { target: CellSelector::records(RecordSet::Duplicates) },
    }
}

fn undo_redo() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut applied = 0;
    let mut undone = 0;
    for seq in 0..500 {
        let mut ws = Workspace::new(random_dataset(&mut rng), Vec::new(), DbscanParams::default());
        let mut undo_model: Vec<ParsedDataset> = Vec::new();
        let mut redo_model: Vec<ParsedDataset> = Vec::new();
        for step in 0..rng.random_range(4..12) {
            let here = ws.current().parsed.clone();
            match rng.random_range(0..5) {
                0..=2 => {
                    let op = random_op(&mut rng, &ws);
                    let preview = ws.preview(&op);
                    match (preview, ws.apply(&op)) {
                        (Ok(p), Ok((_, d))) => {
                            ensure!(p == d, "seq {seq} step {step}: preview differs from apply for {op:?}");
                            undo_model.push(here);
                            redo_model.clear();
                            applied += 1;
                        }
                        (Err(a), Err(b)) => {
                            ensure!(a == b, "seq {seq}: preview and apply fail differently");
                            ensure!(ws.current().parsed == here, "seq {seq}: failed op changed state");
                        }
                        _ => return Err(format!("seq {seq} step {step}: preview and apply disagree on {op:?}")),
                    }
                }
                3 => match (ws.undo(), undo_model.pop()) {
                    (Ok(_), Some(expect)) => {
                        ensure!(ws.current().parsed == expect, "seq {seq} step {step}: undo did not restore");
                        ensure!(ws.dataset().content() == expect.dataset.content(), "undo text differs");
                        redo_model.push(here);
                        undone += 1;
                    }
                    (Err(WrangleError::NothingToUndo), None) => {}
                    _ => return Err(format!("seq {seq} step {step}: undo availability differs")),
                },
                _ => match (ws.redo(), redo_model.pop()) {
                    (Ok(_), Some(expect)) => {
                        ensure!(ws.current().parsed == expect, "seq {seq} step {step}: redo did not restore");
                        undo_model.push(here);
                    }
                    (Err(WrangleError::NothingToRedo), None) => {}
                    _ => return Err(format!("seq {seq} step {step}: redo availability differs")),
                },
            }
            check_parse(&ws.current().parsed, &format!("seq {seq} step {step}"))?;
        }
    }
    Ok(format!("{applied} applies, {undone} undos checked"))
}

fn bench_trend() -> Result<String, String> {
    let provider = HeuristicProvider::new();
    let rows = bench::bench_dir(&common::fixtures_dir(), 5, &PipelineConfig::default(), &provider)
        .map_err(|e| e.to_string())?;
    ensure!(rows.iter().all(|r| r.runs == 5), "every file needs 5 runs");
    let csv = bench::to_csv(&rows);
    ensure!(csv.lines().count() == rows.len() + 1, "CSV rows");
    ensure!(csv.starts_with(&bench::CSV_HEADER.join(",")), "CSV header");
    let rho = bench::spearman(
        &rows.iter().map(|r| r.complexity).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.runtime_mean_ms).collect::<Vec<_>>(),
    );
    ensure!(rho > 0.0, "spearman rho {rho:.3} not positive");
    Ok(format!("{} files, spearman rho {rho:.3}", rows.len()))
}

