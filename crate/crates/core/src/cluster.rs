//! Record clustering: DBSCAN over normalized Hamming distance between
//! column-occupancy vectors.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AlignedTable, ClusterId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClusterError {
    #[error("occupancy vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("the aligned table has no rows")]
    EmptyTable,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OccupancyVector {
    pub record: usize,
    pub bits: Vec<bool>,
}

pub fn occupancy_vectors(table: &AlignedTable) -> Vec<OccupancyVector> {
    table
        .rows
        .iter()
        .zip(&table.occupancy)
        .map(|(&record, cells)| OccupancyVector { record, bits: cells.iter().map(Option::is_some).collect() })
        .collect()
}

pub fn record_distance(a: &OccupancyVector, b: &OccupancyVector) -> Result<usize, ClusterError> {
    if a.bits.len() != b.bits.len() {
        return Err(ClusterError::LengthMismatch(a.bits.len(), b.bits.len()));
    }
    Ok(a.bits.iter().zip(&b.bits).filter(|(x, y)| x != y).count())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        DbscanParams { eps: 0.3, min_pts: 1 }
    }
}

/// Cluster label per table row; noise rows are `Unassigned`.
///
/// Rows with identical occupancy are collapsed into one weighted point before
/// the neighborhood search, which keeps the quadratic part proportional to
/// the number of distinct shapes rather than the number of records.
pub fn cluster_records(table: &AlignedTable, params: DbscanParams) -> Result<Vec<ClusterId>, ClusterError> {
    if table.rows.is_empty() {
        return Err(ClusterError::EmptyTable);
    }
    let vectors = occupancy_vectors(table);
    let m = table.column_count();

    let mut index: HashMap<&[bool], usize> = HashMap::new();
    let mut points: Vec<&[bool]> = Vec::new();
    let mut weight: Vec<usize> = Vec::new();
    let row_point: Vec<usize> = vectors
        .iter()
        .map(|v| {
            let next = points.len();
            let p = *index.entry(&v.bits).or_insert(next);
            if p == next {
                points.push(&v.bits);
                weight.push(0);
            }
            weight[p] += 1;
            p
        })
        .collect();

    let n = points.len();
    let within = |a: usize, b: usize| -> bool {
        let d = points[a].iter().zip(points[b]).filter(|(x, y)| x != y).count();
        normalized(d, m) <= params.eps
    };
    let neighbors: Vec<Vec<usize>> = (0..n).map(|a| (0..n).filter(|&b| within(a, b)).collect()).collect();
    let core: Vec<bool> = neighbors
        .iter()
        .map(|nb| nb.iter().map(|&b| weight[b]).sum::<usize>() >= params.min_pts)
        .collect();

    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut next_label = 0;
    // a border row may precede its cluster seed, hence the renumbering below
    for p in 0..n {
        if label[p].is_some() || !core[p] {
            continue;
        }
        let c = next_label;
        next_label += 1;
        label[p] = Some(c);
        let mut queue = vec![p];
        while let Some(q) = queue.pop() {
            if !core[q] {
                continue;
            }
            for &r in &neighbors[q] {
                if label[r].is_none() {
                    label[r] = Some(c);
                    queue.push(r);
                }
            }
        }
    }
    let labels: Vec<ClusterId> = row_point
        .iter()
        .map(|&p| label[p].map_or(ClusterId::Unassigned, ClusterId::Id))
        .collect();
    Ok(renumber(&labels))
}

pub fn normalized(distance: usize, columns: usize) -> f64 {
    if columns == 0 {
        0.0
    } else {
        distance as f64 / columns as f64
    }
}

/// Relabels clusters so ids follow first appearance in row order.
pub fn renumber(labels: &[ClusterId]) -> Vec<ClusterId> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|l| match l {
            ClusterId::Id(c) => {
                let next = map.len();
                ClusterId::Id(*map.entry(*c).or_insert(next))
            }
            ClusterId::Unassigned => ClusterId::Unassigned,
        })
        .collect()
}

pub fn cluster_count(labels: &[ClusterId]) -> usize {
    labels.iter().filter_map(ClusterId::id).max().map_or(0, |m| m + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&[bool]]) -> AlignedTable {
        let m = rows.first().map_or(0, |r| r.len());
        AlignedTable {
            columns: (0..m)
                .map(|c| crate::model::TableColumn { field_cluster: c, pattern: Default::default() })
                .collect(),
            rows: (0..rows.len()).collect(),
            occupancy: rows.iter().map(|r| r.iter().map(|&b| b.then_some(0)).collect()).collect(),
        }
    }

    fn ov(bits: &[bool]) -> OccupancyVector {
        OccupancyVector { record: 0, bits: bits.to_vec() }
    }

    #[test]
    fn hamming_examples() {
        let a = ov(&[true, true, true, false, false, false]);
        let b = ov(&[true, true, false, true, false, false]);
        assert_eq!(record_distance(&a, &a).unwrap(), 0);
        assert_eq!(record_distance(&a, &b).unwrap(), 2);
        assert_eq!(record_distance(&ov(&[true; 6]), &ov(&[false; 6])).unwrap(), 6);
        assert_eq!(record_distance(&ov(&[true]), &ov(&[true, false])), Err(ClusterError::LengthMismatch(1, 2)));
    }

    #[test]
    fn two_separated_groups() {
        let t = table(&[&[true, false], &[true, false], &[false, true], &[false, true]]);
        let labels = cluster_records(&t, DbscanParams::default()).unwrap();
        assert_eq!(labels, vec![ClusterId::Id(0), ClusterId::Id(0), ClusterId::Id(1), ClusterId::Id(1)]);
        let labels = cluster_records(&t, DbscanParams { eps: 1.0, min_pts: 1 }).unwrap();
        assert_eq!(cluster_count(&labels), 1);
    }

    #[test]
    fn noise_when_min_pts_unmet() {
        let t = table(&[&[true, false], &[true, false], &[false, true]]);
        let labels = cluster_records(&t, DbscanParams { eps: 0.3, min_pts: 2 }).unwrap();
        assert_eq!(labels, vec![ClusterId::Id(0), ClusterId::Id(0), ClusterId::Unassigned]);
    }

    #[test]
    fn empty_table() {
        assert_eq!(cluster_records(&table(&[]), DbscanParams::default()), Err(ClusterError::EmptyTable));
    }
}
