//! Relational tables joined from aligned columns.

use serde::{Deserialize, Serialize};

use crate::profile::Analysis;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TableRow {
    /// Source record, for navigation back to the data.
    pub record: usize,
    pub cells: Vec<Option<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WrangledTable {
    pub columns: Vec<usize>,
    pub headers: Vec<String>,
    pub rows: Vec<TableRow>,
}

/// One row per record occupying at least one of `columns`, in record order.
pub fn build_table(analysis: &Analysis, columns: &[usize]) -> Result<WrangledTable, super::WrangleError> {
    if columns.is_empty() {
        return Err(super::WrangleError::InvalidOp("table needs at least one column".into()));
    }
    let table = &analysis.table;
    if let Some(c) = columns.iter().find(|&&c| c >= table.column_count()) {
        return Err(super::WrangleError::InvalidOp(format!("column {c} out of range")));
    }
    let ds = &analysis.parsed.dataset;
    let mut rows: Vec<TableRow> = table
        .rows
        .iter()
        .zip(&table.occupancy)
        .filter(|(_, occ)| columns.iter().any(|&c| occ[c].is_some()))
        .map(|(&r, occ)| TableRow {
            record: r,
            cells: columns
                .iter()
                .map(|&c| occ[c].map(|f| analysis.parsed.records[r].field_text(ds, f).to_string()))
                .collect(),
        })
        .collect();
    rows.sort_by_key(|r| r.record);
    let headers = columns.iter().map(|&c| format!("c{c}")).collect();
    Ok(WrangledTable { columns: columns.to_vec(), headers, rows })
}

impl WrangledTable {
    /// CSV with a header row; empty cells are empty strings.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.cells.iter().map(|c| c.as_deref().unwrap_or(""))).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 input")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}
