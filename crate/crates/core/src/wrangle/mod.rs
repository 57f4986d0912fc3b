//! Wrangling operations over a parsed dataset with snapshot history.

mod engine;
mod op;
mod table;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use engine::{
    parse_date, resolve, separate, subfield_clusters, Cell, CompiledTransform, DiffEntry, DiffPreview, FlaggedCell,
    RecordText, SubfieldCell, SubfieldClusters,
};
pub use op::{Case, CellSelector, CombineInto, Position, Predicate, RecordEdit, RecordSet, Transform, WrangleOp};
pub use table::{build_table, TableRow, WrangledTable};

use crate::cluster::DbscanParams;
use crate::model::{ParsedDataset, RawDataset};
use crate::profile::{analyze, Analysis, FlagKind, Pipeline, SchemaOverride};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WrangleError {
    #[error("invalid operation: {0}")]
    InvalidOp(String),
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("nothing to redo")]
    NothingToRedo,
    #[error("unknown version {0}")]
    UnknownVersion(u64),
}

/// Full state of one dataset version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Snapshot {
    pub version: u64,
    pub parsed: ParsedDataset,
    #[serde(default)]
    pub overrides: Vec<SchemaOverride>,
    /// Field lists of the sample records that templates are built from.
    #[serde(default)]
    pub sample_fields: Vec<Vec<String>>,
    /// The op that produced this version from `parent`.
    pub op: Option<WrangleOp>,
    pub parent: Option<u64>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct WorkspaceRepr {
    snapshots: BTreeMap<u64, Snapshot>,
    current: u64,
    undo: Vec<u64>,
    redo: Vec<u64>,
    #[serde(default)]
    staged: BTreeMap<usize, Vec<String>>,
    dbscan: DbscanParams,
}

impl From<WorkspaceRepr> for Workspace {
    fn from(r: WorkspaceRepr) -> Self {
        let analysis = analyze_snapshot(&r.snapshots[&r.current], r.dbscan);
        Workspace {
            snapshots: r.snapshots,
            current: r.current,
            undo: r.undo,
            redo: r.redo,
            staged: r.staged,
            dbscan: r.dbscan,
            analysis,
        }
    }
}

fn analyze_snapshot(s: &Snapshot, dbscan: DbscanParams) -> Analysis {
    analyze(s.parsed.clone(), &s.overrides, dbscan)
}

/// A dataset under wrangling: every version is kept as a snapshot, and the
/// undo and redo stacks hold version ids.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", from = "WorkspaceRepr")]
pub struct Workspace {
    snapshots: BTreeMap<u64, Snapshot>,
    current: u64,
    undo: Vec<u64>,
    redo: Vec<u64>,
    staged: BTreeMap<usize, Vec<String>>,
    dbscan: DbscanParams,
    #[serde(skip)]
    analysis: Analysis,
}

impl Workspace {
    pub fn new(parsed: ParsedDataset, sample_fields: Vec<Vec<String>>, dbscan: DbscanParams) -> Self {
        let version = parsed.dataset.version;
        let snap = Snapshot { version, parsed, overrides: Vec::new(), sample_fields, op: None, parent: None };
        let analysis = analyze_snapshot(&snap, dbscan);
        Workspace {
            snapshots: BTreeMap::from([(version, snap)]),
            current: version,
            undo: Vec::new(),
            redo: Vec::new(),
            staged: BTreeMap::new(),
            dbscan,
            analysis,
        }
    }

    pub fn version(&self) -> u64 {
        self.current
    }

    pub fn current(&self) -> &Snapshot {
        &self.snapshots[&self.current]
    }

    pub fn snapshot(&self, version: u64) -> Result<&Snapshot, WrangleError> {
        self.snapshots.get(&version).ok_or(WrangleError::UnknownVersion(version))
    }

    pub fn versions(&self) -> impl Iterator<Item = u64> + '_ {
        self.snapshots.keys().copied()
    }

    /// Structure of the current version, which selectors resolve against.
    pub fn analysis(&self) -> &Analysis {
        &self.analysis
    }

    pub fn dataset(&self) -> &RawDataset {
        &self.current().parsed.dataset
    }

    pub fn can_undo(&self) -> bool {
        !self.undo.is_empty()
    }

    pub fn can_redo(&self) -> bool {
        !self.redo.is_empty()
    }

    fn evaluate(&self, op: &WrangleOp) -> Result<(ParsedDataset, Vec<SchemaOverride>, DiffPreview), WrangleError> {
        let snap = self.current();
        let ev = engine::evaluate(&self.analysis, &snap.overrides, op)?;
        let mut preview = engine::diff(&engine::items(&snap.parsed), &ev.items);
        let next = self.next_version();
        let parsed = ParsedDataset::from_segments(&snap.parsed.dataset.id, next, &engine::to_segments(&ev.items));
        if !ev.overrides.is_empty() {
            let a = analyze(parsed.clone(), &ev.overrides, self.dbscan);
            preview.flagged = a
                .flags
                .iter()
                .filter(|f| f.kind == FlagKind::PatternMismatch)
                .filter_map(|f| {
                    let (r, k) = (f.record?, f.field?);
                    Some(FlaggedCell { record: r, field: k, text: a.parsed.records[r].field_text(&a.parsed.dataset, k).to_string() })
                })
                .collect();
        }
        Ok((parsed, ev.overrides, preview))
    }

    fn next_version(&self) -> u64 {
        self.snapshots.keys().next_back().map_or(0, |v| v + 1)
    }

    /// The effect of `op` on the current version, without applying it.
    pub fn preview(&self, op: &WrangleOp) -> Result<DiffPreview, WrangleError> {
        Ok(self.evaluate(op)?.2)
    }

    /// Applies `op`, producing a new version; returns its id and the diff.
    pub fn apply(&mut self, op: &WrangleOp) -> Result<(u64, DiffPreview), WrangleError> {
        let (parsed, overrides, preview) = self.evaluate(op)?;
        let sample_fields = self.current().sample_fields.clone();
        let v = self.commit(parsed, overrides, sample_fields, Some(op.clone()));
        Ok((v, preview))
    }

    fn commit(
        &mut self,
        parsed: ParsedDataset,
        overrides: Vec<SchemaOverride>,
        sample_fields: Vec<Vec<String>>,
        op: Option<WrangleOp>,
    ) -> u64 {
        let version = parsed.dataset.version;
        let snap = Snapshot { version, parsed, overrides, sample_fields, op, parent: Some(self.current) };
        self.analysis = analyze_snapshot(&snap, self.dbscan);
        self.snapshots.insert(version, snap);
        self.undo.push(self.current);
        self.redo.clear();
        self.staged.clear();
        self.current = version;
        version
    }

    fn switch(&mut self, version: u64) {
        self.current = version;
        self.staged.clear();
        self.analysis = analyze_snapshot(&self.snapshots[&version], self.dbscan);
    }

    pub fn undo(&mut self) -> Result<u64, WrangleError> {
        let prev = self.undo.pop().ok_or(WrangleError::NothingToUndo)?;
        self.redo.push(self.current);
        self.switch(prev);
        Ok(prev)
    }

    pub fn redo(&mut self) -> Result<u64, WrangleError> {
        let next = self.redo.pop().ok_or(WrangleError::NothingToRedo)?;
        self.undo.push(self.current);
        self.switch(next);
        Ok(next)
    }

    /// Records a pending edit of one record; an empty list deletes it.
    pub fn stage_edit(&mut self, record: usize, fields: Vec<String>) -> Result<(), WrangleError> {
        if record >= self.current().parsed.records.len() {
            return Err(WrangleError::InvalidOp(format!("record {record} out of range")));
        }
        self.staged.insert(record, fields);
        Ok(())
    }

    pub fn staged(&self) -> &BTreeMap<usize, Vec<String>> {
        &self.staged
    }

    /// Commits staged edits, adds the edited records to the sample, and
    /// re-runs template matching over the edited text. Returns `None` when
    /// nothing was staged.
    pub fn apply_changes(&mut self, pipeline: &Pipeline) -> Result<Option<u64>, WrangleError> {
        if self.staged.is_empty() {
            return Ok(None);
        }
        let edits: Vec<RecordEdit> =
            self.staged.iter().map(|(&record, fields)| RecordEdit { record, fields: fields.clone() }).collect();
        let op = WrangleOp::EditRecord { edits: edits.clone() };
        let (parsed, overrides, _) = self.evaluate(&op)?;
        let mut sample_fields = self.current().sample_fields.clone();
        sample_fields.extend(edits.into_iter().map(|e| e.fields).filter(|f| f.iter().any(|s| !s.is_empty())));
        let parsed = if sample_fields.is_empty() {
            parsed
        } else {
            pipeline.promote(&parsed.dataset, &sample_fields).0
        };
        Ok(Some(self.commit(parsed, overrides, sample_fields, Some(op))))
    }

    /// Replaces the parse of the current text, e.g. after the sample was
    /// edited, as a new undoable version without an op.
    pub fn reparse(&mut self, mut parsed: ParsedDataset, sample_fields: Vec<Vec<String>>) -> Result<u64, WrangleError> {
        if parsed.dataset.content() != self.dataset().content() {
            return Err(WrangleError::InvalidOp("a reparse must keep the text".into()));
        }
        let ds = &parsed.dataset;
        parsed.dataset = RawDataset::with_version(ds.id.clone(), ds.content(), self.next_version());
        let overrides = self.current().overrides.clone();
        Ok(self.commit(parsed, overrides, sample_fields, None))
    }

    /// Records a FILTER would keep, without changing anything.
    pub fn highlight(&self, target: &CellSelector) -> Result<Vec<usize>, WrangleError> {
        let mut ids: Vec<usize> = resolve(&self.analysis, target)?.into_iter().map(|c| c.record).collect();
        ids.dedup();
        Ok(ids)
    }

    pub fn build_table(&self, columns: &[usize]) -> Result<WrangledTable, WrangleError> {
        build_table(&self.analysis, columns)
    }

    pub fn subfield_clusters(&self, target: &CellSelector) -> Result<SubfieldClusters, WrangleError> {
        subfield_clusters(&self.analysis, target)
    }

    pub fn export(&self, version: u64) -> Result<&str, WrangleError> {
        Ok(self.snapshot(version)?.parsed.dataset.content())
    }
}
