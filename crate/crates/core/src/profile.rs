//! End-to-end profiling pipeline and the [`Profile`] document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{self, FieldCluster};
use crate::cluster::{self, DbscanParams};
use crate::ingest::{self, ParsingProvider, Sample, SampleSet};
use crate::layout::{self, Layout, LayoutConfig};
use crate::matching::{self, MatchConfig, MatchOutcome, StructuralTemplate};
use crate::mine::{
    self, AffixReport, Complexity, ComplexityInputs, Distribution, FormatLabel, SimilarityMatrix,
};
use crate::model::{AlignedTable, ClusterId, ParsedDataset, RawDataset, Record, Span};
use crate::pattern::{self, SyntacticPattern};
use crate::Result;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("pipeline stage missing: {0}")]
    IncompletePipeline(&'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PipelineConfig {
    pub max_sample_chars: usize,
    pub sample_count: usize,
    pub seed: u64,
    pub dbscan: DbscanParams,
    pub matching: MatchConfig,
    pub layout: LayoutConfig,
    pub min_affix_support: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_sample_chars: ingest::DEFAULT_MAX_SAMPLE_CHARS,
            sample_count: ingest::DEFAULT_SAMPLE_COUNT,
            seed: 0,
            dbscan: DbscanParams::default(),
            matching: MatchConfig::default(),
            layout: LayoutConfig::default(),
            min_affix_support: mine::DEFAULT_MIN_SUPPORT,
        }
    }
}

/// A user-supplied pattern for the field cluster with the given signature.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaOverride {
    pub signature: String,
    pub pattern: SyntacticPattern,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Flag {
    pub kind: FlagKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<usize>,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FlagKind {
    /// Provider output did not tile its source and was repaired.
    RepairedParse,
    /// A field no longer matches its column's user-edited pattern.
    PatternMismatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchSummary {
    pub mf: usize,
    pub uc: usize,
    pub alpha: f64,
    pub f: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Metrics {
    pub record_count: usize,
    pub field_cluster_count: usize,
    pub record_cluster_count: usize,
    pub avg_record_length: f64,
    pub size: usize,
    pub residue_chars: usize,
    pub complexity: Complexity,
}

impl Metrics {
    pub fn complexity_inputs(&self) -> ComplexityInputs {
        ComplexityInputs {
            avg_record_len: self.avg_record_length,
            field_clusters: self.field_cluster_count,
            size: self.size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Profile {
    pub schema_version: String,
    pub dataset_id: String,
    pub version: u64,
    pub content_length: usize,
    pub records: Vec<Record>,
    pub residue: Vec<Span>,
    pub field_clusters: Vec<FieldCluster>,
    pub table: AlignedTable,
    pub record_clusters: Vec<ClusterId>,
    pub similarity: SimilarityMatrix,
    pub distributions: Vec<Distribution>,
    pub affixes: Vec<AffixReport>,
    pub formats: Vec<FormatLabel>,
    pub positional: Vec<Vec<usize>>,
    pub layout: Layout,
    pub templates: Vec<StructuralTemplate>,
    #[serde(rename = "match")]
    pub match_summary: MatchSummary,
    pub metrics: Metrics,
    pub flags: Vec<Flag>,
}

impl Profile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// Text of every cell of a column, by table row.
    pub fn column_values<'a>(&self, dataset: &'a RawDataset, column: usize) -> Vec<Option<&'a str>> {
        column_values(dataset, &self.records, &self.table, column)
    }
}

pub fn column_values<'a>(
    dataset: &'a RawDataset,
    records: &[Record],
    table: &AlignedTable,
    column: usize,
) -> Vec<Option<&'a str>> {
    table
        .rows
        .iter()
        .zip(&table.occupancy)
        .map(|(&r, cells)| cells[column].map(|f| records[r].field_text(dataset, f)))
        .collect()
}

/// Structure derived from a parse: field clusters, alignment and record clusters.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub parsed: ParsedDataset,
    pub field_clusters: Vec<FieldCluster>,
    pub table: AlignedTable,
    pub step_matches: Vec<usize>,
    pub record_clusters: Vec<ClusterId>,
    pub flags: Vec<Flag>,
}

/// Clusters fields, aligns records and clusters records. Schema overrides
/// replace the inferred pattern of matching clusters and flag members that
/// do not match the replacement.
pub fn analyze(mut parsed: ParsedDataset, overrides: &[SchemaOverride], dbscan: DbscanParams) -> Analysis {
    let mut field_clusters = align::assign_field_clusters(&parsed.dataset, &mut parsed.records);
    let mut flags = Vec::new();
    for fc in &mut field_clusters {
        if let Some(o) = overrides.iter().find(|o| o.signature == fc.key) {
            fc.pattern = o.pattern.clone();
            let matcher = fc.pattern.matcher();
            for m in &fc.members {
                let text = parsed.records[m.record].field_text(&parsed.dataset, m.field);
                if matcher.distance(text, 0) != Some(0) {
                    flags.push(Flag {
                        kind: FlagKind::PatternMismatch,
                        record: Some(m.record),
                        field: Some(m.field),
                        message: format!("{text:?} does not match {}", fc.pattern),
                    });
                }
            }
        }
    }
    let patterns: Vec<SyntacticPattern> = field_clusters.iter().map(|c| c.pattern.clone()).collect();
    let alignment = align::align(&mut parsed.records, &patterns);
    let record_clusters = if parsed.records.is_empty() {
        Vec::new()
    } else {
        cluster::cluster_records(&alignment.table, dbscan).expect("non-empty table")
    };
    for (r, c) in parsed.records.iter_mut().zip(&record_clusters) {
        r.cluster = *c;
    }
    Analysis {
        parsed,
        field_clusters,
        table: alignment.table,
        step_matches: alignment.step_matches,
        record_clusters,
        flags,
    }
}

/// Assembles a [`Profile`] from its stages; each stage must be supplied.
#[derive(Default)]
pub struct ProfileBuilder {
    analysis: Option<Analysis>,
    outcome: Option<MatchSummary>,
    templates: Vec<StructuralTemplate>,
    layout: Option<LayoutConfig>,
    min_support: Option<f64>,
    extra_flags: Vec<Flag>,
}

impl ProfileBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn analysis(mut self, a: Analysis) -> Self {
        self.analysis = Some(a);
        self
    }

    pub fn matching(mut self, summary: MatchSummary, templates: Vec<StructuralTemplate>) -> Self {
        self.outcome = Some(summary);
        self.templates = templates;
        self
    }

    pub fn layout(mut self, config: LayoutConfig) -> Self {
        self.layout = Some(config);
        self
    }

    pub fn min_affix_support(mut self, s: f64) -> Self {
        self.min_support = Some(s);
        self
    }

    pub fn flags(mut self, flags: Vec<Flag>) -> Self {
        self.extra_flags = flags;
        self
    }

    pub fn build(self) -> std::result::Result<Profile, ProfileError> {
        let analysis = self.analysis.ok_or(ProfileError::IncompletePipeline("analysis"))?;
        let summary = self.outcome.ok_or(ProfileError::IncompletePipeline("matching"))?;
        let lc = self.layout.ok_or(ProfileError::IncompletePipeline("layout configuration"))?;
        let min_support = self.min_support.unwrap_or(mine::DEFAULT_MIN_SUPPORT);
        Ok(assemble(analysis, summary, self.templates, lc, min_support, self.extra_flags))
    }
}

fn assemble(
    analysis: Analysis,
    summary: MatchSummary,
    templates: Vec<StructuralTemplate>,
    lc: LayoutConfig,
    min_support: f64,
    extra_flags: Vec<Flag>,
) -> Profile {
    let Analysis { parsed, field_clusters, table, record_clusters, mut flags, .. } = analysis;
    let ds = &parsed.dataset;
    let records = &parsed.records;
    let m = table.column_count();

    let columns: Vec<Vec<Option<&str>>> = (0..m).map(|c| column_values(ds, records, &table, c)).collect();
    let similarity = SimilarityMatrix::compute(&columns);
    let present: Vec<Vec<&str>> = columns.iter().map(|c| c.iter().flatten().copied().collect()).collect();
    let distributions = present.iter().map(|v| mine::value_distribution(v)).collect();
    let affixes = present
        .iter()
        .map(|v| if v.is_empty() { AffixReport::default() } else { mine::mine_affixes(v, min_support) })
        .collect();
    let formats = present.iter().map(|v| mine::detect_format(v)).collect();
    let positional = (0..m)
        .map(|c| {
            let spans: Vec<Span> = table
                .rows
                .iter()
                .zip(&table.occupancy)
                .filter(|(_, cells)| cells[c].is_some())
                .map(|(&r, _)| records[r].span)
                .collect();
            layout::positional_series(&spans, ds.char_len(), lc.bins)
        })
        .collect();

    // rows are grouped by cluster, then by occupancy shape, then by position
    let mut row_order: Vec<usize> = (0..table.row_count()).collect();
    row_order.sort_by(|&a, &b| {
        let ca = record_clusters.get(a).copied().unwrap_or_default();
        let cb = record_clusters.get(b).copied().unwrap_or_default();
        let shape = |r: usize| table.occupancy[r].iter().map(|c| c.is_none()).collect::<Vec<bool>>();
        cluster_order(ca).cmp(&cluster_order(cb)).then_with(|| shape(a).cmp(&shape(b))).then(a.cmp(&b))
    });
    let cells: Vec<Vec<Option<&str>>> =
        row_order.iter().map(|&r| (0..m).map(|c| columns[c][r]).collect()).collect();
    let ordered_clusters: Vec<ClusterId> =
        row_order.iter().map(|&r| record_clusters.get(r).copied().unwrap_or_default()).collect();
    let mut blocks = layout::merge_cells(&cells, &ordered_clusters, m);
    layout::compute_heights(&mut blocks, lc.c, lc.min_height);
    let edges = layout::block_edges(&blocks, row_order.len());
    let row_segments = layout::row_segments(&blocks, row_order.len(), lc.c, lc.min_height);

    let record_chars: usize = records.iter().map(|r| r.span.len()).sum();
    let avg_record_length = if records.is_empty() { 0.0 } else { record_chars as f64 / records.len() as f64 };
    let inputs = ComplexityInputs { avg_record_len: avg_record_length, field_clusters: field_clusters.len(), size: ds.char_len() };
    let metrics = Metrics {
        record_count: records.len(),
        field_cluster_count: field_clusters.len(),
        record_cluster_count: cluster::cluster_count(&record_clusters),
        avg_record_length,
        size: ds.char_len(),
        residue_chars: parsed.residue.iter().map(Span::len).sum(),
        complexity: mine::structural_complexity(&inputs, None),
    };
    flags.extend(extra_flags);

    Profile {
        schema_version: SCHEMA_VERSION.to_string(),
        dataset_id: ds.id.clone(),
        version: ds.version,
        content_length: ds.char_len(),
        records: parsed.records.clone(),
        residue: parsed.residue.clone(),
        field_clusters,
        table,
        record_clusters,
        similarity,
        distributions,
        affixes,
        formats,
        positional,
        layout: Layout { row_order, blocks, row_segments, edges },
        templates,
        match_summary: summary,
        metrics,
        flags,
    }
}

fn cluster_order(c: ClusterId) -> (usize, usize) {
    match c {
        ClusterId::Id(i) => (0, i),
        ClusterId::Unassigned => (1, 0),
    }
}

/// Everything produced by one profiling run.
#[derive(Clone, Debug)]
pub struct ProfileRun {
    pub profile: Profile,
    pub parsed: ParsedDataset,
    pub samples: Vec<Sample>,
    pub sample: SampleSet,
    /// Field lists of the sample records after repair.
    pub sample_fields: Vec<Vec<String>>,
    pub outcome: MatchOutcome,
}

pub struct Pipeline<'p> {
    pub config: PipelineConfig,
    provider: &'p dyn ParsingProvider,
}

impl<'p> Pipeline<'p> {
    pub fn new(config: PipelineConfig, provider: &'p dyn ParsingProvider) -> Self {
        Pipeline { config, provider }
    }

    pub fn provider(&self) -> &dyn ParsingProvider {
        self.provider
    }

    /// Draws samples and extracts complete records. When fewer than two
    /// records come back, retries with half as many (longer) substrings.
    pub fn sample(&self, dataset: &RawDataset) -> Result<(Vec<Sample>, SampleSet)> {
        let mut k = self.config.sample_count.max(1);
        loop {
            let samples = ingest::sample_dataset(dataset.content(), self.config.max_sample_chars, k, self.config.seed);
            let set = ingest::extract_complete_records(&samples, self.provider)?;
            if set.records.len() >= 2 || k == 1 || samples.len() <= 1 {
                return Ok((samples, set));
            }
            k /= 2;
        }
    }

    /// Field lists for the sample records, plus a flag for every repaired record.
    pub fn parse_sample(&self, set: &SampleSet) -> Result<(Vec<Vec<String>>, Vec<Flag>)> {
        let records: Vec<&str> = set.records.iter().map(String::as_str).collect();
        let segs = ingest::parse_records_to_fields(&records, self.provider)?;
        let flags = segs
            .iter()
            .enumerate()
            .filter(|(_, s)| s.repaired)
            .map(|(i, _)| Flag {
                kind: FlagKind::RepairedParse,
                record: None,
                field: None,
                message: format!("sample record {i} was re-segmented to preserve its text"),
            })
            .collect();
        Ok((segs.into_iter().map(|s| s.parts).collect(), flags))
    }

    /// Matches the sample templates against the whole content.
    pub fn promote(&self, dataset: &RawDataset, sample_fields: &[Vec<String>]) -> (ParsedDataset, MatchOutcome, Vec<StructuralTemplate>) {
        let templates = matching::build_templates(sample_fields);
        let outcome = matching::parse_remaining(&templates, dataset.content(), &self.config.matching);
        let records = outcome.matches.iter().map(|m| m.to_record()).collect();
        let parsed = ParsedDataset { dataset: dataset.clone(), records, residue: outcome.residue.clone() };
        (parsed, outcome, templates)
    }

    pub fn run(&self, dataset: &RawDataset) -> Result<ProfileRun> {
        let (samples, sample) = self.sample(dataset)?;
        self.run_with_sample(dataset, samples, sample, &[])
    }

    /// Runs everything after sampling, using the given (possibly edited) sample.
    pub fn run_with_sample(
        &self,
        dataset: &RawDataset,
        samples: Vec<Sample>,
        sample: SampleSet,
        overrides: &[SchemaOverride],
    ) -> Result<ProfileRun> {
        let (sample_fields, flags) = self.parse_sample(&sample)?;
        self.run_with_fields(dataset, samples, sample, sample_fields, flags, overrides)
    }

    pub fn run_with_fields(
        &self,
        dataset: &RawDataset,
        samples: Vec<Sample>,
        sample: SampleSet,
        sample_fields: Vec<Vec<String>>,
        flags: Vec<Flag>,
        overrides: &[SchemaOverride],
    ) -> Result<ProfileRun> {
        let (parsed, outcome, templates) = self.promote(dataset, &sample_fields);
        parsed.verify()?;
        let summary = MatchSummary { mf: outcome.mf, uc: outcome.uc, alpha: outcome.alpha, f: outcome.f };
        let analysis = analyze(parsed.clone(), overrides, self.config.dbscan);
        let profile = ProfileBuilder::new()
            .analysis(analysis)
            .matching(summary, templates)
            .layout(self.config.layout)
            .min_affix_support(self.config.min_affix_support)
            .flags(flags)
            .build()?;
        Ok(ProfileRun { profile, parsed, samples, sample, sample_fields, outcome })
    }

    /// Profiles an already parsed dataset without matching, as done after a
    /// wrangling step. The objective is recomputed from the parse.
    pub fn profile_parsed(&self, parsed: &ParsedDataset, overrides: &[SchemaOverride]) -> Result<Profile> {
        parsed.verify()?;
        let mf = parsed.records.iter().map(|r| r.fields.len()).sum();
        let uc = parsed.residue.iter().map(Span::len).sum();
        let alpha = self.config.matching.alpha;
        let summary = MatchSummary { mf, uc, alpha, f: matching::objective(mf, uc, alpha) };
        let analysis = analyze(parsed.clone(), overrides, self.config.dbscan);
        Ok(ProfileBuilder::new()
            .analysis(analysis)
            .matching(summary, Vec::new())
            .layout(self.config.layout)
            .min_affix_support(self.config.min_affix_support)
            .build()?)
    }
}

/// Subfield table of one column: each occupied cell split into subfields,
/// which are clustered and aligned like fields of a record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubfieldTable {
    pub column: usize,
    /// Record index of each row.
    pub records: Vec<usize>,
    pub cells: Vec<Vec<crate::model::Subfield>>,
    pub table: AlignedTable,
    pub clusters: Vec<FieldCluster>,
}

/// Splits the cells of `column` into subfields on request.
pub fn subfield_table(
    provider: &dyn ParsingProvider,
    parsed: &ParsedDataset,
    table: &AlignedTable,
    column: usize,
) -> Result<SubfieldTable> {
    let ds = &parsed.dataset;
    let mut refs = Vec::new();
    let mut texts = Vec::new();
    for (&r, cells) in table.rows.iter().zip(&table.occupancy) {
        if let Some(f) = cells.get(column).copied().flatten() {
            refs.push(r);
            texts.push(parsed.records[r].field_text(ds, f));
        }
    }
    let segs = ingest::parse_fields_to_subfields(&texts, provider)?;
    // treat every cell as a pseudo-record so that subfields align like fields
    let mut pseudo: Vec<Record> = Vec::new();
    let mut offset = 0;
    let mut content = String::new();
    for seg in &segs {
        let rec = Record::from_parts(offset, &seg.parts);
        offset = rec.span.end;
        content.extend(seg.parts.iter().map(String::as_str));
        pseudo.push(rec);
    }
    let pseudo_ds = RawDataset::new("subfields", content);
    let clusters = align::assign_field_clusters(&pseudo_ds, &mut pseudo);
    let patterns: Vec<SyntacticPattern> = clusters.iter().map(|c| c.pattern.clone()).collect();
    let alignment = align::align(&mut pseudo, &patterns);
    let cells = pseudo
        .iter()
        .map(|r| {
            r.fields
                .iter()
                .map(|f| crate::model::Subfield {
                    span: f.span,
                    pattern: patterns[f.field_cluster.id().unwrap_or(0)].clone(),
                })
                .collect()
        })
        .collect();
    Ok(SubfieldTable { column, records: refs, cells, table: alignment.table, clusters })
}

/// Per-column summary for quick inspection.
pub fn column_summary(profile: &Profile) -> BTreeMap<usize, String> {
    profile.table.columns.iter().enumerate().map(|(i, c)| (i, pattern::SyntacticPattern::to_string(&c.pattern))).collect()
}
