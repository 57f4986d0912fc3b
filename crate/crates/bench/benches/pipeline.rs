use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use textprof_bench::{fixture, synthetic_log};
use textprof_core::ingest::HeuristicProvider;
use textprof_core::matching::{build_templates, parse_remaining, MatchConfig};
use textprof_core::{Pipeline, PipelineConfig, RawDataset};

fn profile_fixtures(c: &mut Criterion) {
    let provider = HeuristicProvider::new();
    let pipeline = Pipeline::new(PipelineConfig::default(), &provider);
    let mut group = c.benchmark_group("profile");
    group.sample_size(10);
    for name in ["sales.csv", "app.log", "citations.txt", "hdfs.log"] {
        let ds = RawDataset::new(name, fixture(name));
        group.throughput(Throughput::Bytes(ds.content().len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(name), &ds, |b, ds| b.iter(|| pipeline.run(ds).unwrap()));
    }
    group.finish();
}

fn matching_scales(c: &mut Criterion) {
    let sample: Vec<Vec<String>> = synthetic_log(30)
        .lines()
        .map(|l| {
            let mut fields: Vec<String> = l.split(' ').flat_map(|w| [w.to_string(), " ".to_string()]).collect();
            fields.pop();
            fields.push("\n".into());
            fields
        })
        .collect();
    let templates = build_templates(&sample);
    let config = MatchConfig::default();
    let mut group = c.benchmark_group("match");
    group.sample_size(10);
    for n in [300, 3000] {
        let text = synthetic_log(n);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &text, |b, t| b.iter(|| parse_remaining(&templates, t, &config)));
    }
    group.finish();
}

criterion_group!(benches, profile_fixtures, matching_scales);
criterion_main!(benches);
