use proptest::prelude::*;
use textprof_core::align::align;
use textprof_core::ingest::{sample_dataset, HeuristicProvider};
use textprof_core::matching::{build_templates, parse_remaining, MatchConfig};
use textprof_core::model::{ClusterId, ParsedDataset, Record, Segment};
use textprof_core::pattern::infer;
use textprof_core::{Pipeline, PipelineConfig, RawDataset, SyntacticPattern};

fn value() -> impl Strategy<Value = String> {
    "[a-c0-9 ,:.\\-é]{0,12}"
}

fn record_fields() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop_oneof!["[a-z]{1,6}", "[0-9]{1,4}", Just(",".to_string()), Just(" ".to_string())], 1..6)
        .prop_map(|mut f| {
            f.push("\n".into());
            f
        })
}

fn segments() -> impl Strategy<Value = Vec<Segment>> {
    prop::collection::vec(
        prop_oneof![
            3 => record_fields().prop_map(Segment::Record),
            1 => "[#~ ]{1,5}\n?".prop_map(Segment::Residue),
        ],
        0..20,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn inferred_pattern_accepts_its_inputs(values in prop::collection::vec(value(), 1..10)) {
        let refs: Vec<&str> = values.iter().map(String::as_str).collect();
        let p = infer(&refs);
        for v in &values {
            prop_assert!(p.matches(v), "{:?} rejects {:?}", p.to_regex(), v);
        }
    }

    #[test]
    fn segments_round_trip(segs in segments()) {
        let parsed = ParsedDataset::from_segments("d", 0, &segs);
        parsed.verify().unwrap();
        prop_assert_eq!(parsed.reconstruct().unwrap(), parsed.dataset.content());
        let again = ParsedDataset::from_segments("d", 0, &parsed.segments());
        prop_assert_eq!(again, parsed);
    }

    #[test]
    fn samples_are_slices(text in "[a-z0-9,\n ]{0,400}", k in 1usize..6, seed in any::<u64>()) {
        let ds = RawDataset::new("d", text.clone());
        for s in sample_dataset(&text, 60, k, seed) {
            prop_assert_eq!(ds.slice(s.span), s.text.as_str());
        }
    }

    #[test]
    fn matching_tiles_the_text(
        sample in prop::collection::vec(record_fields(), 1..5),
        text in "[a-z0-9,# \n]{0,200}",
    ) {
        let templates = build_templates(&sample);
        let config = MatchConfig::default();
        let out = parse_remaining(&templates, &text, &config);
        let mut pieces: Vec<(usize, usize)> = out.residue.iter().map(|s| (s.start, s.end)).collect();
        for m in &out.matches {
            pieces.push((m.record_span.start, m.record_span.end));
            let mut at = m.record_span.start;
            for f in &m.field_spans {
                prop_assert_eq!(f.start, at);
                prop_assert!(f.end > f.start);
                at = f.end;
            }
            prop_assert_eq!(at, m.record_span.end);
            prop_assert!(m.edits_per_field.iter().all(|&e| e <= config.max_edits));
        }
        pieces.sort();
        let mut at = 0;
        for (s, e) in pieces {
            prop_assert_eq!(s, at);
            at = e;
        }
        prop_assert_eq!(at, text.chars().count());
        let uc: usize = out.residue.iter().map(|s| s.end - s.start).sum();
        prop_assert_eq!(out.uc, uc);
        prop_assert!((out.f - (out.mf as f64 - out.alpha * uc as f64)).abs() < 1e-9);
    }

    #[test]
    fn alignment_table_is_valid(seqs in prop::collection::vec(prop::collection::vec(0usize..4, 0..7), 0..8)) {
        let mut records = Vec::new();
        let mut start = 0;
        for seq in &seqs {
            let parts: Vec<String> = seq.iter().map(|c| c.to_string()).collect();
            let mut r = Record::from_parts(start, &parts);
            start = r.span.end;
            for (f, &c) in r.fields.iter_mut().zip(seq) {
                f.field_cluster = ClusterId::Id(c);
            }
            records.push(r);
        }
        let patterns = vec![SyntacticPattern::default(); 4];
        let out = align(&mut records, &patterns);
        out.table.validate(&records).unwrap();
        prop_assert_eq!(out.step_matches.len(), records.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pipeline_is_lossless(segs in segments()) {
        let content = ParsedDataset::from_segments("d", 0, &segs).dataset.content().to_string();
        let provider = HeuristicProvider::new();
        let pipeline = Pipeline::new(PipelineConfig::default(), &provider);
        let ds = RawDataset::new("d", content.clone());
        if let Ok(run) = pipeline.run(&ds) {
            prop_assert_eq!(run.parsed.reconstruct().unwrap(), content.clone());
            let rebuilt = textprof_core::model::reconstruct(&ds, &run.profile.records, &run.profile.residue).unwrap();
            prop_assert_eq!(rebuilt, content);
        }
    }
}
