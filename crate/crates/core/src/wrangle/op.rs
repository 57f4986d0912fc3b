//! Serializable wrangling operations and their targets.

use serde::{Deserialize, Serialize};

use crate::pattern::SyntacticPattern;

/// Which records a selector covers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RecordSet {
    #[default]
    #[serde(rename = "ALL")]
    All,
    /// Records whose full text equals that of an earlier record.
    #[serde(rename = "DUPLICATES")]
    Duplicates,
    Cluster(usize),
    Ids(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Predicate {
    Equals(String),
    /// Regular expression that must match the whole text.
    Matches(String),
    InSet(Vec<String>),
}

/// Cells of one table column, or the field at one position of each record,
/// or whole records when neither is given.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CellSelector {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    /// Field position within the record; ignored when `column` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<usize>,
    #[serde(default)]
    pub records: RecordSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<Predicate>,
}

impl CellSelector {
    pub fn column(column: usize) -> Self {
        CellSelector { column: Some(column), ..Default::default() }
    }

    pub fn field(field: usize) -> Self {
        CellSelector { field: Some(field), ..Default::default() }
    }

    pub fn targets_cells(&self) -> bool {
        self.column.is_some() || self.field.is_some()
    }

    pub fn records(records: RecordSet) -> Self {
        CellSelector { records, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Position {
    Before,
    After,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Case {
    Upper,
    Lower,
    Title,
}

/// One-to-one rewrite of a cell text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum Transform {
    Set { value: String },
    Replace {
        find: String,
        with: String,
        #[serde(default)]
        regex: bool,
    },
    Case { to: Case },
    /// Character range `[start, end)`; `end` defaults to the text end.
    Substring {
        start: usize,
        #[serde(default)]
        end: Option<usize>,
    },
    /// Rewrites recognizable dates with a chrono format string; other text is kept.
    StandardizeDate { format: String },
    Trim,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CombineInto {
    Cell,
    Record,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecordEdit {
    pub record: usize,
    /// New field texts; an empty list deletes the record.
    pub fields: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WrangleOp {
    /// Inserts `value` as a new field next to every selected cell. Without a
    /// column the new field goes first (BEFORE) or before the trailing line
    /// break (AFTER).
    Add {
        target: CellSelector,
        value: String,
        position: Position,
    },
    /// Removes selected cells, or whole records when no cell is targeted.
    Delete { target: CellSelector },
    /// Rewrites selected cells, or every field of the selected records.
    Replace { target: CellSelector, transform: Transform },
    /// Splits selected cells at every match of `pattern`, keeping the
    /// matched text as separate fields.
    Separate { target: CellSelector, pattern: String },
    /// CELL joins the fields from the first to the last of `columns` in each
    /// selected record. RECORD joins runs of consecutive selected records.
    Combine {
        target: CellSelector,
        #[serde(default)]
        columns: Vec<usize>,
        into: CombineInto,
    },
    /// Replaces the pattern of a column's field cluster; cells that do not
    /// match are flagged.
    SchemaEdit { column: usize, pattern: SyntacticPattern },
    /// Emits one copy of each selected record per group subfield of the
    /// target cell. Subfield cluster ids are those reported for the same
    /// target; `drop` clusters are removed from every copy.
    Fold {
        target: CellSelector,
        #[serde(rename = "groupClusters")]
        group: Vec<usize>,
        #[serde(rename = "dropClusters", default)]
        drop: Vec<usize>,
    },
    /// Keeps only the selected records.
    Filter { target: CellSelector },
    /// New record order, a permutation of record ids. Residue stays in place.
    Reorder { order: Vec<usize> },
    EditRecord { edits: Vec<RecordEdit> },
}

impl WrangleOp {
    /// Whether the op may change field structure (as opposed to cell texts
    /// or record membership only).
    pub fn changes_structure(&self) -> bool {
        matches!(
            self,
            WrangleOp::Add { .. }
                | WrangleOp::Separate { .. }
                | WrangleOp::Combine { .. }
                | WrangleOp::Fold { .. }
                | WrangleOp::SchemaEdit { .. }
        )
    }
}
