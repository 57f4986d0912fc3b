//! Shared data model: datasets, span-based parse trees and aligned tables.
//!
//! Every span is a half-open interval of *character* indices. Record spans
//! index into the dataset content, field spans index into their record and
//! subfield spans index into their field, so concatenating the children of
//! any node reproduces the node's text exactly.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::pattern::SyntacticPattern;

/// Half-open character interval `[start, end)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "inverted span {start}..{end}");
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// Translate a span relative to `origin` into an absolute one.
    pub fn offset(&self, origin: usize) -> Span {
        Span::new(self.start + origin, self.end + origin)
    }

    pub fn midpoint(&self) -> f64 {
        (self.start + self.end) as f64 / 2.0
    }
}

impl From<[usize; 2]> for Span {
    fn from([start, end]: [usize; 2]) -> Self {
        Span { start, end }
    }
}

impl From<Span> for [usize; 2] {
    fn from(span: Span) -> Self {
        [span.start, span.end]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

macro_rules! sentinel_id {
    ($(#[$meta:meta])* $name:ident, $unset:ident, $tag:literal) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            #[default]
            $unset,
            Id(usize),
        }

        impl $name {
            pub fn id(&self) -> Option<usize> {
                match self {
                    $name::Id(id) => Some(*id),
                    $name::$unset => None,
                }
            }
        }

        impl From<usize> for $name {
            fn from(id: usize) -> Self {
                $name::Id(id)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                match self {
                    $name::Id(id) => s.serialize_u64(*id as u64),
                    $name::$unset => s.serialize_str($tag),
                }
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                #[derive(Deserialize)]
                #[serde(untagged)]
                enum Repr {
                    Id(usize),
                    Tag(String),
                }
                match Repr::deserialize(d)? {
                    Repr::Id(id) => Ok($name::Id(id)),
                    Repr::Tag(t) if t == $tag => Ok($name::$unset),
                    Repr::Tag(t) => Err(serde::de::Error::custom(format!(
                        "expected an integer or \"{}\", found \"{}\"",
                        $tag, t
                    ))),
                }
            }
        }
    };
}

sentinel_id!(
    /// Cluster membership of a record or field; serialized as an integer or `"UNASSIGNED"`.
    ClusterId,
    Unassigned,
    "UNASSIGNED"
);

sentinel_id!(
    /// Column position of a field in the aligned table; serialized as an integer or `"UNALIGNED"`.
    ColumnIndex,
    Unaligned,
    "UNALIGNED"
);

/// The imported text plus its identity and version.
///
/// Content is never edited in place; wrangling produces a new dataset value
/// with a higher version.
#[derive(Clone, Serialize, Deserialize)]
#[serde(from = "DatasetRepr")]
pub struct RawDataset {
    pub id: String,
    pub version: u64,
    content: String,
    #[serde(skip)]
    offsets: Vec<usize>,
}

#[derive(Deserialize)]
struct DatasetRepr {
    id: String,
    version: u64,
    content: String,
}

impl From<DatasetRepr> for RawDataset {
    fn from(r: DatasetRepr) -> Self {
        RawDataset::with_version(r.id, r.content, r.version)
    }
}

impl fmt::Debug for RawDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RawDataset")
            .field("id", &self.id)
            .field("version", &self.version)
            .field("chars", &self.char_len())
            .finish()
    }
}

impl PartialEq for RawDataset {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.version == other.version && self.content == other.content
    }
}

impl RawDataset {
    /// Version 0 of a freshly imported file.
    pub fn new(id: impl Into<String>, content: impl Into<String>) -> Self {
        Self::with_version(id, content, 0)
    }

    pub fn with_version(id: impl Into<String>, content: impl Into<String>, version: u64) -> Self {
        let content = content.into();
        let mut offsets: Vec<usize> = content.char_indices().map(|(b, _)| b).collect();
        offsets.push(content.len());
        RawDataset {
            id: id.into(),
            version,
            content,
            offsets,
        }
    }

    pub fn content(&self) -> &str {
        &self.content
    }

    pub fn char_len(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Text covered by a character span. Panics when the span is out of range.
    pub fn slice(&self, span: Span) -> &str {
        &self.content[self.offsets[span.start]..self.offsets[span.end]]
    }

    pub fn chars(&self) -> Vec<char> {
        self.content.chars().collect()
    }
}

/// A semantic unit of the dataset, tiled by its fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub span: Span,
    pub fields: Vec<Field>,
    #[serde(default)]
    pub cluster: ClusterId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Field {
    /// Relative to the start of the parent record.
    pub span: Span,
    #[serde(default)]
    pub field_cluster: ClusterId,
    #[serde(default)]
    pub column: ColumnIndex,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subfields: Option<Vec<Subfield>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subfield {
    /// Relative to the start of the parent field.
    pub span: Span,
    pub pattern: SyntacticPattern,
}

impl Field {
    pub fn new(span: Span) -> Self {
        Field {
            span,
            field_cluster: ClusterId::Unassigned,
            column: ColumnIndex::Unaligned,
            subfields: None,
        }
    }
}

impl Record {
    /// Builds a record at `start` whose fields are the given consecutive texts.
    pub fn from_parts<S: AsRef<str>>(start: usize, parts: &[S]) -> Self {
        let mut cursor = 0;
        let fields = parts
            .iter()
            .map(|p| {
                let len = p.as_ref().chars().count();
                let f = Field::new(Span::new(cursor, cursor + len));
                cursor += len;
                f
            })
            .collect();
        Record {
            span: Span::new(start, start + cursor),
            fields,
            cluster: ClusterId::Unassigned,
        }
    }

    pub fn text<'a>(&self, dataset: &'a RawDataset) -> &'a str {
        dataset.slice(self.span)
    }

    pub fn field_span(&self, index: usize) -> Span {
        self.fields[index].span.offset(self.span.start)
    }

    pub fn field_text<'a>(&self, dataset: &'a RawDataset, index: usize) -> &'a str {
        dataset.slice(self.field_span(index))
    }

    pub fn field_texts<'a>(&self, dataset: &'a RawDataset) -> Vec<&'a str> {
        (0..self.fields.len()).map(|i| self.field_text(dataset, i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TableColumn {
    pub field_cluster: usize,
    pub pattern: SyntacticPattern,
}

/// Rows are records, columns are field clusters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignedTable {
    pub columns: Vec<TableColumn>,
    /// Record index of each row.
    pub rows: Vec<usize>,
    /// `occupancy[row][column]` is the index of the field occupying that cell.
    pub occupancy: Vec<Vec<Option<usize>>>,
}

impl AlignedTable {
    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Checks the structural invariants against the records the table was built from.
    pub fn validate(&self, records: &[Record]) -> Result<(), ModelError> {
        if self.occupancy.len() != self.rows.len() {
            return Err(ModelError::InvalidTable(format!(
                "{} occupancy rows for {} table rows",
                self.occupancy.len(),
                self.rows.len()
            )));
        }
        for (row, (&rec, cells)) in self.rows.iter().zip(&self.occupancy).enumerate() {
            if cells.len() != self.columns.len() {
                return Err(ModelError::InvalidTable(format!("row {row} has {} cells", cells.len())));
            }
            let record = records
                .get(rec)
                .ok_or_else(|| ModelError::InvalidTable(format!("row {row} names record {rec}")))?;
            let mut seen = vec![false; record.fields.len()];
            let mut last_field = None;
            for (col, cell) in cells.iter().enumerate() {
                let Some(f) = *cell else { continue };
                let field = record
                    .fields
                    .get(f)
                    .ok_or_else(|| ModelError::InvalidTable(format!("row {row} names field {f}")))?;
                if seen[f] {
                    return Err(ModelError::InvalidTable(format!("row {row} places field {f} twice")));
                }
                seen[f] = true;
                if last_field.is_some_and(|l| l >= f) {
                    return Err(ModelError::InvalidTable(format!(
                        "row {row}: field order not increasing at column {col}"
                    )));
                }
                last_field = Some(f);
                if field.field_cluster != ClusterId::Id(self.columns[col].field_cluster) {
                    return Err(ModelError::InvalidTable(format!(
                        "row {row}: field {f} in column {col} has cluster {:?}",
                        field.field_cluster
                    )));
                }
            }
            if let Some(missing) = seen.iter().position(|s| !s) {
                return Err(ModelError::InvalidTable(format!("row {row}: field {missing} not placed")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("intervals {0} and {1} overlap")]
    Overlap(Span, Span),
    #[error("content not covered at character {0}")]
    Gap(usize),
    #[error("interval {0} extends past the end of the content ({1} characters)")]
    OutOfBounds(Span, usize),
    #[error("record {record}: {detail}")]
    Hierarchy { record: usize, detail: String },
    #[error("invalid aligned table: {0}")]
    InvalidTable(String),
}

/// Concatenates record and residue texts in position order.
///
/// Fails unless the intervals tile the content exactly.
pub fn reconstruct(dataset: &RawDataset, records: &[Record], residue: &[Span]) -> Result<String, ModelError> {
    let len = dataset.char_len();
    let mut intervals: Vec<Span> = records
        .iter()
        .map(|r| r.span)
        .chain(residue.iter().copied())
        .filter(|s| !s.is_empty())
        .collect();
    intervals.sort();
    let mut out = String::with_capacity(dataset.content().len());
    let mut cursor = 0;
    let mut prev: Option<Span> = None;
    for span in intervals {
        if span.end > len {
            return Err(ModelError::OutOfBounds(span, len));
        }
        if let Some(p) = prev {
            if span.start < p.end {
                return Err(ModelError::Overlap(p, span));
            }
        }
        if span.start > cursor {
            return Err(ModelError::Gap(cursor));
        }
        out.push_str(dataset.slice(span));
        cursor = span.end;
        prev = Some(span);
    }
    if cursor < len {
        return Err(ModelError::Gap(cursor));
    }
    Ok(out)
}

/// Checks that fields tile each record and subfields tile each field.
pub fn check_hierarchy(records: &[Record]) -> Result<(), ModelError> {
    for (i, record) in records.iter().enumerate() {
        let mut cursor = 0;
        for field in &record.fields {
            if field.span.start != cursor {
                return Err(ModelError::Hierarchy {
                    record: i,
                    detail: format!("field {} does not start at {cursor}", field.span),
                });
            }
            cursor = field.span.end;
            if let Some(subs) = &field.subfields {
                let mut sc = 0;
                for sub in subs {
                    if sub.span.start != sc {
                        return Err(ModelError::Hierarchy {
                            record: i,
                            detail: format!("subfield {} does not start at {sc}", sub.span),
                        });
                    }
                    sc = sub.span.end;
                }
                if sc != field.span.len() {
                    return Err(ModelError::Hierarchy {
                        record: i,
                        detail: format!("subfields cover {sc} of {} characters", field.span.len()),
                    });
                }
            }
        }
        if cursor != record.span.len() {
            return Err(ModelError::Hierarchy {
                record: i,
                detail: format!("fields cover {cursor} of {} characters", record.span.len()),
            });
        }
    }
    for pair in records.windows(2) {
        if pair[1].span.start < pair[0].span.end {
            return Err(ModelError::Overlap(pair[0].span, pair[1].span));
        }
    }
    Ok(())
}

/// A dataset version together with its parse: records plus the residue between them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsedDataset {
    pub dataset: RawDataset,
    pub records: Vec<Record>,
    pub residue: Vec<Span>,
}

impl ParsedDataset {
    pub fn reconstruct(&self) -> Result<String, ModelError> {
        reconstruct(&self.dataset, &self.records, &self.residue)
    }

    /// Both losslessness checks: the tiling of the content and the field hierarchy.
    pub fn verify(&self) -> Result<(), ModelError> {
        check_hierarchy(&self.records)?;
        let rebuilt = self.reconstruct()?;
        debug_assert_eq!(rebuilt, self.dataset.content());
        Ok(())
    }

    /// Builds a dataset by concatenating residue strings and record field lists in order.
    pub fn from_segments(id: &str, version: u64, segments: &[Segment]) -> Self {
        let mut content = String::new();
        let mut records = Vec::new();
        let mut residue: Vec<Span> = Vec::new();
        let mut cursor = 0;
        for seg in segments {
            match seg {
                Segment::Residue(text) => {
                    let n = text.chars().count();
                    if n == 0 {
                        continue;
                    }
                    match residue.last_mut() {
                        Some(last) if last.end == cursor => last.end += n,
                        _ => residue.push(Span::new(cursor, cursor + n)),
                    }
                    content.push_str(text);
                    cursor += n;
                }
                Segment::Record(parts) => {
                    let parts: Vec<&String> = parts.iter().filter(|p| !p.is_empty()).collect();
                    if parts.is_empty() {
                        continue;
                    }
                    let record = Record::from_parts(cursor, &parts);
                    for p in &parts {
                        content.push_str(p);
                    }
                    cursor = record.span.end;
                    records.push(record);
                }
            }
        }
        ParsedDataset {
            dataset: RawDataset::with_version(id, content, version),
            records,
            residue,
        }
    }

    /// The inverse of [`ParsedDataset::from_segments`].
    pub fn segments(&self) -> Vec<Segment> {
        let mut out = Vec::with_capacity(self.records.len() + self.residue.len());
        let mut ri = 0;
        let mut si = 0;
        while ri < self.records.len() || si < self.residue.len() {
            let take_record = match (self.records.get(ri), self.residue.get(si)) {
                (Some(r), Some(s)) => r.span.start < s.start,
                (Some(_), None) => true,
                _ => false,
            };
            if take_record {
                let r = &self.records[ri];
                out.push(Segment::Record(
                    r.field_texts(&self.dataset).into_iter().map(str::to_owned).collect(),
                ));
                ri += 1;
            } else {
                out.push(Segment::Residue(self.dataset.slice(self.residue[si]).to_owned()));
                si += 1;
            }
        }
        out
    }
}

/// One piece of a dataset laid out in position order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Segment {
    Residue(String),
    Record(Vec<String>),
}
