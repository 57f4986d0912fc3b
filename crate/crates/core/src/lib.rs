//! Structure profiling and wrangling for ad-hoc semi-structured text.
//!
//! The pipeline samples a dataset, parses the sample into records and
//! fields, aligns fields into a table, clusters records, mines column
//! patterns, promotes the sample templates to the whole file and lays the
//! result out as a [`Profile`] document. [`wrangle`] applies edits on top
//! of a parse and keeps an undo history.

pub mod align;
pub mod cluster;
pub mod error;
pub mod ingest;
pub mod layout;
pub mod matching;
pub mod mine;
pub mod model;
pub mod pattern;
pub mod profile;
pub mod wrangle;

pub use error::{Error, Result};
pub use model::{
    reconstruct, AlignedTable, ClusterId, ColumnIndex, Field, ParsedDataset, RawDataset, Record, Segment, Span,
    Subfield, TableColumn,
};
pub use pattern::{SyntacticPattern, Token, TokenClass};
pub use profile::{Pipeline, PipelineConfig, Profile};
