//! Independent reference implementations used by the integration tests.
//! None of these call into the engine's own algorithms.

#![allow(dead_code)]

use std::path::PathBuf;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Column similarity by direct evaluation of the formula, with strsim as
/// the edit distance.
pub fn similarity(a: &[Option<String>], b: &[Option<String>]) -> f64 {
    let mut n = 0usize;
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            n += 1;
            let longest = x.chars().count().max(y.chars().count());
            sum += if longest == 0 { 1.0 } else { 1.0 - strsim::levenshtein(x, y) as f64 / longest as f64 };
        }
    }
    if n <= 1 {
        return 0.0;
    }
    (n as f64).log10() / n as f64 * sum
}

/// Largest order-preserving matching by trying every subset of `fields`,
/// largest first, and checking it embeds in `columns`.
pub fn max_matching(fields: &[usize], columns: &[usize]) -> usize {
    let n = fields.len();
    let mut best = 0;
    for mask in 0u32..(1 << n) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        let mut j = 0;
        let mut ok = true;
        for (i, f) in fields.iter().enumerate() {
            if mask & (1 << i) == 0 {
                continue;
            }
            while j < columns.len() && columns[j] != *f {
                j += 1;
            }
            if j == columns.len() {
                ok = false;
                break;
            }
            j += 1;
        }
        if ok {
            best = size;
        }
    }
    best
}

/// Textbook DBSCAN over rows: seeds in row order, breadth-first expansion,
/// labels renumbered by first appearance. `None` is noise.
pub fn dbscan(rows: &[Vec<bool>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    let dist = |a: usize, b: usize| {
        let d = rows[a].iter().zip(&rows[b]).filter(|(x, y)| x != y).count();
        if m == 0 {
            0.0
        } else {
            d as f64 / m as f64
        }
    };
    let region = |p: usize| -> Vec<usize> { (0..n).filter(|&q| dist(p, q) <= eps).collect() };
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut c = 0;
    for p in 0..n {
        if visited[p] {
            continue;
        }
        let nb = region(p);
        if nb.len() < min_pts {
            continue;
        }
        visited[p] = true;
        label[p] = Some(c);
        let mut queue: std::collections::VecDeque<usize> = nb.into_iter().collect();
        while let Some(q) = queue.pop_front() {
            if label[q].is_none() {
                label[q] = Some(c);
            }
            if visited[q] {
                continue;
            }
            let nq = region(q);
            if nq.len() >= min_pts {
                visited[q] = true;
                queue.extend(nq);
            }
        }
        c += 1;
    }
    let mut map = std::collections::HashMap::new();
    label
        .into_iter()
        .map(|l| {
            l.map(|x| {
                let next = map.len();
                *map.entry(x).or_insert(next)
            })
        })
        .collect()
}
