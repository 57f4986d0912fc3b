//! Field clustering by token signature and greedy record alignment.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::model::{AlignedTable, ClusterId, ColumnIndex, RawDataset, Record, TableColumn};
use crate::pattern::{self, RunKind, SyntacticPattern};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldRef {
    pub record: usize,
    pub field: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldCluster {
    pub id: usize,
    pub pattern: SyntacticPattern,
    pub size: usize,
    /// Text form of the token signature shared by all members.
    pub key: String,
    #[serde(skip)]
    pub signature: Vec<RunKind>,
    #[serde(skip)]
    pub members: Vec<FieldRef>,
}

/// Groups texts by signature. Returns the cluster of each text and one
/// inferred pattern per cluster; ids follow first appearance.
pub fn cluster_fields(texts: &[&str]) -> (Vec<usize>, Vec<SyntacticPattern>) {
    let mut ids: HashMap<Vec<RunKind>, usize> = HashMap::new();
    let mut members: Vec<Vec<&str>> = Vec::new();
    let assignment = texts
        .iter()
        .map(|t| {
            let next = ids.len();
            let id = *ids.entry(pattern::signature(t)).or_insert(next);
            if id == members.len() {
                members.push(Vec::new());
            }
            members[id].push(t);
            id
        })
        .collect();
    let patterns = members.iter().map(|m| pattern::infer(m)).collect();
    (assignment, patterns)
}

/// Assigns `field_cluster` on every field and returns the clusters.
pub fn assign_field_clusters(dataset: &RawDataset, records: &mut [Record]) -> Vec<FieldCluster> {
    let mut refs = Vec::new();
    let mut texts = Vec::new();
    for (r, record) in records.iter().enumerate() {
        for f in 0..record.fields.len() {
            refs.push(FieldRef { record: r, field: f });
            texts.push(record.field_text(dataset, f));
        }
    }
    let (assignment, patterns) = cluster_fields(&texts);
    let mut clusters: Vec<FieldCluster> = patterns
        .into_iter()
        .enumerate()
        .map(|(id, pattern)| FieldCluster { id, pattern, size: 0, key: String::new(), signature: Vec::new(), members: Vec::new() })
        .collect();
    for ((fr, &c), text) in refs.iter().zip(&assignment).zip(&texts) {
        records[fr.record].fields[fr.field].field_cluster = ClusterId::Id(c);
        let cluster = &mut clusters[c];
        if cluster.members.is_empty() {
            cluster.signature = pattern::signature(text);
            cluster.key = signature_key(&cluster.signature);
        }
        cluster.members.push(*fr);
        cluster.size += 1;
    }
    clusters
}

/// Stable text form of a token signature, used to key schema overrides.
pub fn signature_key(sig: &[RunKind]) -> String {
    sig.iter()
        .map(|k| match k {
            RunKind::Digit => "D".to_string(),
            RunKind::Letter => "L".to_string(),
            RunKind::Other(c) => format!("{c:?}"),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Order-preserving maximum matching of a field cluster sequence against the
/// current column clusters. Among optimal alignments it picks the one that
/// matches the earliest possible field to the leftmost possible column.
///
/// Returns, for each field, the matched column position.
pub fn align_step(fields: &[usize], columns: &[usize]) -> Vec<Option<usize>> {
    let n = fields.len();
    let m = columns.len();
    // suffix LCS table
    let mut lcs = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if fields[i] == columns[j] {
                (1 + lcs[i + 1][j + 1]).max(lcs[i + 1][j]).max(lcs[i][j + 1])
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }
    let mut out = vec![None; n];
    let mut j = 0;
    for i in 0..n {
        let target = lcs[i][j];
        if target == 0 {
            break;
        }
        let hit = (j..m).find(|&c| columns[c] == fields[i] && 1 + lcs[i + 1][c + 1] == target);
        if let Some(c) = hit {
            out[i] = Some(c);
            j = c + 1;
        }
    }
    out
}

/// Table plus the number of fields matched to existing columns at each greedy step.
#[derive(Clone, Debug)]
pub struct Alignment {
    pub table: AlignedTable,
    pub step_matches: Vec<usize>,
}

/// Greedy alignment in record order. Sets `column` on every field.
///
/// Every field must already carry a field cluster; `patterns` is indexed by cluster id.
pub fn align(records: &mut [Record], patterns: &[SyntacticPattern]) -> Alignment {
    // columns are kept as stable ids; positions are resolved at the end
    let mut order: Vec<usize> = Vec::new();
    let mut column_cluster: Vec<usize> = Vec::new();
    let mut placement: Vec<Vec<usize>> = Vec::with_capacity(records.len());
    let mut step_matches = Vec::with_capacity(records.len());

    for record in records.iter() {
        let seq: Vec<usize> = record
            .fields
            .iter()
            .map(|f| f.field_cluster.id().expect("field cluster assigned before alignment"))
            .collect();
        let current: Vec<usize> = order.iter().map(|&c| column_cluster[c]).collect();
        let matched = align_step(&seq, &current);
        step_matches.push(matched.iter().flatten().count());

        let mut next_order = Vec::with_capacity(order.len() + seq.len());
        let mut cursor = 0;
        let mut cols = Vec::with_capacity(seq.len());
        for (i, m) in matched.iter().enumerate() {
            match m {
                Some(pos) => {
                    next_order.extend_from_slice(&order[cursor..=*pos]);
                    cursor = pos + 1;
                    cols.push(order[*pos]);
                }
                None => {
                    let id = column_cluster.len();
                    column_cluster.push(seq[i]);
                    next_order.push(id);
                    cols.push(id);
                }
            }
        }
        next_order.extend_from_slice(&order[cursor..]);
        order = next_order;
        placement.push(cols);
    }

    let mut position = vec![0; column_cluster.len()];
    for (p, &id) in order.iter().enumerate() {
        position[id] = p;
    }
    let columns = order
        .iter()
        .map(|&id| TableColumn {
            field_cluster: column_cluster[id],
            pattern: patterns.get(column_cluster[id]).cloned().unwrap_or_default(),
        })
        .collect();
    let mut occupancy = Vec::with_capacity(records.len());
    for (record, cols) in records.iter_mut().zip(&placement) {
        let mut row = vec![None; order.len()];
        for (f, &id) in cols.iter().enumerate() {
            row[position[id]] = Some(f);
            record.fields[f].column = ColumnIndex::Id(position[id]);
        }
        occupancy.push(row);
    }
    Alignment {
        table: AlignedTable { columns, rows: (0..records.len()).collect(), occupancy },
        step_matches,
    }
}
