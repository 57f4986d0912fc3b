//! Geometry of the structure view: merged cell blocks, their heights,
//! block connections, and per-column positional series.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::model::{ClusterId, Span};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LayoutConfig {
    pub c: f64,
    pub min_height: f64,
    pub bins: usize,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig { c: 10.0, min_height: 2.0, bins: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CellBlock {
    pub id: usize,
    pub column: usize,
    /// Inclusive range of display rows.
    pub first_row: usize,
    pub last_row: usize,
    pub cluster: ClusterId,
    pub display_text: String,
    pub unique_ratio: f64,
    pub height: f64,
    pub sub_cell_sizes: Vec<usize>,
    pub sub_cell_heights: Vec<f64>,
}

impl CellBlock {
    pub fn rows(&self) -> usize {
        self.last_row - self.first_row + 1
    }
}

/// Merges maximal runs of occupied rows with the same cluster, per column.
///
/// `cells[row][column]` holds the cell text; rows are in display order and
/// `clusters[row]` is the row's record cluster. Unassigned rows never merge.
pub fn merge_cells(cells: &[Vec<Option<&str>>], clusters: &[ClusterId], columns: usize) -> Vec<Vec<CellBlock>> {
    let mut out: Vec<Vec<CellBlock>> = vec![Vec::new(); columns];
    let mut next_id = 0;
    for (col, blocks) in out.iter_mut().enumerate() {
        let mut row = 0;
        while row < cells.len() {
            let Some(text) = cells[row][col] else {
                row += 1;
                continue;
            };
            let cluster = clusters[row];
            let mut last = row;
            while cluster != ClusterId::Unassigned
                && last + 1 < cells.len()
                && clusters[last + 1] == cluster
                && cells[last + 1][col].is_some()
            {
                last += 1;
            }
            let distinct: HashSet<&str> = (row..=last).filter_map(|r| cells[r][col]).collect();
            blocks.push(CellBlock {
                id: next_id,
                column: col,
                first_row: row,
                last_row: last,
                cluster,
                display_text: text.to_string(),
                unique_ratio: distinct.len() as f64 / (last - row + 1) as f64,
                height: 0.0,
                sub_cell_sizes: Vec::new(),
                sub_cell_heights: Vec::new(),
            });
            next_id += 1;
            row = last + 1;
        }
    }
    out
}

pub fn sub_cell_height(size: usize, c: f64, min_height: f64) -> f64 {
    min_height.max(c * (size as f64).log10())
}

/// Half-open row boundaries collected from every block of the table.
pub fn boundaries(blocks: &[Vec<CellBlock>]) -> BTreeSet<usize> {
    blocks.iter().flatten().flat_map(|b| [b.first_row, b.last_row + 1]).collect()
}

/// Splits every block at all table-wide boundaries and sizes the pieces
/// logarithmically.
pub fn compute_heights(blocks: &mut [Vec<CellBlock>], c: f64, min_height: f64) {
    let cuts = boundaries(blocks);
    for b in blocks.iter_mut().flatten() {
        let mut sizes = Vec::new();
        let mut start = b.first_row;
        for &cut in cuts.range(b.first_row + 1..b.last_row + 1) {
            sizes.push(cut - start);
            start = cut;
        }
        sizes.push(b.last_row + 1 - start);
        b.sub_cell_heights = sizes.iter().map(|&s| sub_cell_height(s, c, min_height)).collect();
        b.height = b.sub_cell_heights.iter().sum();
        b.sub_cell_sizes = sizes;
    }
}

/// Row ranges between consecutive boundaries, with their heights, so that
/// empty cells can be drawn at the same scale as blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RowSegment {
    pub first_row: usize,
    pub last_row: usize,
    pub height: f64,
}

pub fn row_segments(blocks: &[Vec<CellBlock>], rows: usize, c: f64, min_height: f64) -> Vec<RowSegment> {
    let mut cuts = boundaries(blocks);
    cuts.insert(0);
    cuts.insert(rows);
    let cuts: Vec<usize> = cuts.into_iter().filter(|&x| x <= rows).collect();
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| RowSegment { first_row: w[0], last_row: w[1] - 1, height: sub_cell_height(w[1] - w[0], c, min_height) })
        .collect()
}

/// Pairs of blocks holding consecutive occupied cells of the same row.
pub fn block_edges(blocks: &[Vec<CellBlock>], rows: usize) -> Vec<(usize, usize)> {
    let mut at: Vec<Vec<(usize, usize)>> = vec![Vec::new(); rows];
    for b in blocks.iter().flatten() {
        for row in &mut at[b.first_row..=b.last_row] {
            row.push((b.column, b.id));
        }
    }
    let mut edges = BTreeSet::new();
    for row in &mut at {
        row.sort_unstable();
        for w in row.windows(2) {
            edges.insert((w[0].1, w[1].1));
        }
    }
    edges.into_iter().collect()
}

/// Counts of record midpoints per equal-width character bin.
pub fn positional_series(spans: &[Span], content_len: usize, bins: usize) -> Vec<usize> {
    let bins = bins.max(1);
    let mut series = vec![0; bins];
    if content_len == 0 {
        return series;
    }
    for s in spans {
        let i = ((s.midpoint() / content_len as f64) * bins as f64) as usize;
        series[i.min(bins - 1)] += 1;
    }
    series
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Layout {
    /// Table row index shown at each display position.
    pub row_order: Vec<usize>,
    pub blocks: Vec<Vec<CellBlock>>,
    pub row_segments: Vec<RowSegment>,
    pub edges: Vec<(usize, usize)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_column(values: &[&str], clusters: &[usize]) -> Vec<Vec<CellBlock>> {
        let cells: Vec<Vec<Option<&str>>> = values.iter().map(|v| vec![Some(*v)]).collect();
        let cl: Vec<ClusterId> = clusters.iter().map(|&c| ClusterId::Id(c)).collect();
        merge_cells(&cells, &cl, 1)
    }

    #[test]
    fn merge_examples() {
        let b = one_column(&["x"; 5], &[0; 5]);
        assert_eq!(b[0].len(), 1);
        assert!((b[0][0].unique_ratio - 0.2).abs() < 1e-12);
        let b = one_column(&["a", "b", "c", "d"], &[0, 1, 0, 1]);
        assert_eq!(b[0].len(), 4);
        let b = one_column(&["a", "a", "b", "c"], &[0; 4]);
        assert!((b[0][0].unique_ratio - 0.75).abs() < 1e-12);
    }

    #[test]
    fn heights_follow_log_scale() {
        assert_eq!(sub_cell_height(1, 10.0, 2.0), 2.0);
        assert!((sub_cell_height(100, 10.0, 2.0) - 20.0).abs() < 1e-9);
        assert!((sub_cell_height(1000, 10.0, 2.0) - 30.0).abs() < 1e-9);
    }

    #[test]
    fn blocks_split_at_foreign_boundaries() {
        let cells: Vec<Vec<Option<&str>>> = (0..10).map(|r| vec![Some("a"), (r < 4).then_some("b")]).collect();
        let mut blocks = merge_cells(&cells, &[ClusterId::Id(0); 10], 2);
        compute_heights(&mut blocks, 10.0, 2.0);
        assert_eq!(blocks[0][0].sub_cell_sizes, vec![4, 6]);
        assert_eq!(blocks[1][0].sub_cell_sizes, vec![4]);
        assert_eq!(block_edges(&blocks, 10), vec![(0, 1)]);
        let segs = row_segments(&blocks, 10, 10.0, 2.0);
        assert_eq!(segs.len(), 2);
    }

    #[test]
    fn positional_counts() {
        let spans: Vec<Span> = (0..10).map(|i| Span::new(i * 10, i * 10 + 10)).collect();
        let s = positional_series(&spans, 100, 10);
        assert_eq!(s, vec![1; 10]);
        assert_eq!(positional_series(&[], 100, 5), vec![0; 5]);
    }
}
