//! Single-node and single-head field statistics.
//!
//! A field matrix is normalized by its maximum, clipped at a threshold and its
//! columns are permuted so that as many above-threshold entries as possible
//! sit on the diagonal. Diagonal labels joined by above-threshold entries form
//! diagonal clusters; everything above threshold outside the cluster blocks is
//! noise.
//!
//! Maximizing the diagonal is a maximum bipartite matching between row labels
//! and column labels. Among maximum matchings, noise is the number of ones in
//! unmatched rows plus the number in unmatched columns (a one joining an
//! unmatched row to an unmatched column would extend the matching). The row
//! sets covered by maximum matchings are the bases of a transversal matroid,
//! so the greedy basis by row degree minimizes the first term; the same holds
//! for columns, and a maximum matching covering both chosen sets exists.

use crate::error::{Error, Result};
use crate::percolation::UnionFind;
use crate::stats::{pearson, stable_mean};
use crate::types::{BinaryMatrix, BinaryProvenance, LabelFieldMatrix, TokenId};

pub const DEFAULT_THRESHOLD: f64 = 0.6;

/// Divides every entry by the largest entry.
pub fn normalize_fields(m: &LabelFieldMatrix) -> Result<LabelFieldMatrix> {
    let max = m.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_nan() || max <= 0.0 {
        return Err(Error::AllZeroField {
            unit_index: m.unit_index,
        });
    }
    let values = m.values().iter().map(|v| v / max).collect();
    LabelFieldMatrix::new(m.unit, m.unit_index, m.n_labels, values)
}

/// Entry `(i, j)` set iff the field exceeds `threshold`.
pub fn clip(m: &LabelFieldMatrix, threshold: f64) -> BinaryMatrix {
    let n = m.n_labels;
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| m.get(i, j) > threshold)
                .map(|j| j as TokenId)
                .collect()
        })
        .collect();
    BinaryMatrix::from_rows(n, rows, BinaryProvenance::Threshold(threshold))
        .expect("row count matches label count")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnpStats {
    pub unit_index: u32,
    pub diag: usize,
    pub n_c: usize,
    /// `diag / n_c`, `None` when there is no cluster.
    pub c_s: Option<f64>,
    pub noise: usize,
    /// `permutation[i]` is the column placed at diagonal position `i`.
    pub permutation: Vec<u32>,
    /// Row labels of each diagonal cluster, canonical order.
    pub clusters: Vec<Vec<u32>>,
}

/// Diagonal statistics of a clipped label matrix. Equal-degree labels are
/// ordered by label.
pub fn diagonalize(b: &BinaryMatrix) -> Result<SnpStats> {
    diagonalize_with(b, 0, |_, _| 1.0)
}

/// Clips a normalized field matrix and diagonalizes it; equal-degree labels
/// are ordered by their largest above-threshold field, then by label.
pub fn diagonalize_fields(m: &LabelFieldMatrix, threshold: f64) -> Result<SnpStats> {
    let b = clip(m, threshold);
    diagonalize_with(&b, m.unit_index, |i, j| m.get(i, j))
}

struct Matcher<'a> {
    adj: &'a [Vec<u32>],
    allowed: &'a [bool],
    mate_of_col: Vec<Option<u32>>,
    seen: Vec<bool>,
}

impl Matcher<'_> {
    fn augment(&mut self, r: u32) -> bool {
        for &c in &self.adj[r as usize] {
            if !self.allowed[c as usize] || self.seen[c as usize] {
                continue;
            }
            self.seen[c as usize] = true;
            let free = match self.mate_of_col[c as usize] {
                None => true,
                Some(r2) => self.augment(r2),
            };
            if free {
                self.mate_of_col[c as usize] = Some(r);
                return true;
            }
        }
        false
    }

    fn try_add(&mut self, r: u32) -> bool {
        self.seen.iter_mut().for_each(|s| *s = false);
        self.augment(r)
    }
}

/// Greedy maximum-weight basis of the transversal matroid on the rows of
/// `adj`, visiting rows in `order`.
fn greedy_rows(adj: &[Vec<u32>], n: usize, order: &[u32]) -> Vec<bool> {
    let all = vec![true; n];
    let mut m = Matcher {
        adj,
        allowed: &all,
        mate_of_col: vec![None; n],
        seen: vec![false; n],
    };
    let mut chosen = vec![false; n];
    for &r in order {
        chosen[r as usize] = m.try_add(r);
    }
    chosen
}

/// Rows by degree descending, then largest value descending, then label.
fn greedy_order(adj: &[Vec<u32>], best: &[f64]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..adj.len() as u32).collect();
    order.sort_by(|&a, &b| {
        adj[b as usize]
            .len()
            .cmp(&adj[a as usize].len())
            .then(best[b as usize].total_cmp(&best[a as usize]))
            .then(a.cmp(&b))
    });
    order
}

fn diagonalize_with(
    b: &BinaryMatrix,
    unit_index: u32,
    value: impl Fn(usize, usize) -> f64,
) -> Result<SnpStats> {
    let n = b.t_number();
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    // neighbour lists ordered by value descending, then label
    let sorted = |mut v: Vec<u32>, key: &dyn Fn(u32) -> f64| {
        v.sort_by(|&x, &y| key(y).total_cmp(&key(x)).then(x.cmp(&y)));
        v
    };
    let rows: Vec<Vec<u32>> = (0..n)
        .map(|i| sorted(b.row(i as TokenId).to_vec(), &|j| value(i, j as usize)))
        .collect();
    let mut cols_raw: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, j) in b.edges() {
        cols_raw[j as usize].push(i);
    }
    let cols: Vec<Vec<u32>> = cols_raw
        .into_iter()
        .enumerate()
        .map(|(j, v)| sorted(v, &|i| value(i as usize, j)))
        .collect();
    let best = |lists: &[Vec<u32>], f: &dyn Fn(usize, u32) -> f64| -> Vec<f64> {
        lists
            .iter()
            .enumerate()
            .map(|(a, l)| l.iter().map(|&x| f(a, x)).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    };
    let row_best = best(&rows, &|i, j| value(i, j as usize));
    let col_best = best(&cols, &|j, i| value(i as usize, j));

    let row_set = greedy_rows(&rows, n, &greedy_order(&rows, &row_best));
    let col_set = greedy_rows(&cols, n, &greedy_order(&cols, &col_best));

    let mut m = Matcher {
        adj: &rows,
        allowed: &col_set,
        mate_of_col: vec![None; n],
        seen: vec![false; n],
    };
    let mut diag = 0;
    for r in 0..n as u32 {
        if row_set[r as usize] && m.try_add(r) {
            diag += 1;
        }
    }
    debug_assert_eq!(diag, row_set.iter().filter(|&&x| x).count());
    debug_assert_eq!(diag, col_set.iter().filter(|&&x| x).count());

    let mut col_of_row: Vec<Option<u32>> = vec![None; n];
    for (c, r) in m.mate_of_col.iter().enumerate() {
        if let Some(r) = r {
            col_of_row[*r as usize] = Some(c as u32);
        }
    }
    let mut spare_cols = (0..n as u32).filter(|&c| m.mate_of_col[c as usize].is_none());
    let permutation: Vec<u32> = col_of_row
        .iter()
        .map(|c| c.unwrap_or_else(|| spare_cols.next().expect("as many columns as rows")))
        .collect();

    // rows are nodes 0..n, columns n..2n
    let mut uf = UnionFind::new(2 * n);
    let mut noise = 0;
    for (i, j) in b.edges() {
        if row_set[i as usize] && col_set[j as usize] {
            uf.union(i, n as u32 + j);
        } else {
            noise += 1;
        }
    }
    let mut slot = vec![usize::MAX; 2 * n];
    let mut clusters: Vec<Vec<u32>> = Vec::new();
    for r in (0..n as u32).filter(|&r| row_set[r as usize]) {
        let root = uf.find(r) as usize;
        if slot[root] == usize::MAX {
            slot[root] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[slot[root]].push(r);
    }
    clusters.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    let n_c = clusters.len();
    Ok(SnpStats {
        unit_index,
        diag,
        n_c,
        c_s: (n_c > 0).then(|| diag as f64 / n_c as f64),
        noise,
        permutation,
        clusters,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnpAggregate {
    pub n_units: usize,
    pub mean_diag: f64,
    pub mean_n_c: f64,
    /// Mean of per-unit `C_S` over units with at least one cluster.
    pub mean_c_s: Option<f64>,
    pub mean_noise: f64,
    /// `f64::INFINITY` when the mean noise is zero.
    pub snr: f64,
}

/// `n_labels * diag / noise`, infinite for zero noise.
pub fn snr(n_labels: usize, mean_diag: f64, mean_noise: f64) -> f64 {
    if mean_noise == 0.0 {
        f64::INFINITY
    } else {
        n_labels as f64 * mean_diag / mean_noise
    }
}

/// Unweighted means over units and the resulting signal-to-noise ratio.
pub fn aggregate(stats: &[SnpStats], n_labels: usize) -> Result<SnpAggregate> {
    if stats.is_empty() {
        return Err(Error::param("no units to aggregate"));
    }
    let col = |f: &dyn Fn(&SnpStats) -> f64| stable_mean(&stats.iter().map(f).collect::<Vec<_>>());
    let mean_diag = col(&|s| s.diag as f64).unwrap();
    let mean_n_c = col(&|s| s.n_c as f64).unwrap();
    let mean_noise = col(&|s| s.noise as f64).unwrap();
    let c_s: Vec<f64> = stats.iter().filter_map(|s| s.c_s).collect();
    Ok(SnpAggregate {
        n_units: stats.len(),
        mean_diag,
        mean_n_c,
        mean_c_s: stable_mean(&c_s),
        mean_noise,
        snr: snr(n_labels, mean_diag, mean_noise),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelAppearance {
    /// Cluster memberships of each label summed over units.
    pub appearances: Vec<u64>,
    pub accuracy: Option<Vec<f64>>,
    /// Correlation of appearances with accuracy, when both vary.
    pub pearson: Option<f64>,
}

impl LabelAppearance {
    /// `(appearances, number of labels)` rows, appearances ascending.
    pub fn histogram(&self) -> Vec<(u64, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for &a in &self.appearances {
            *counts.entry(a).or_insert(0) += 1;
        }
        counts.into_iter().collect()
    }
}

pub fn label_appearance(
    stats: &[SnpStats],
    n_labels: usize,
    accuracy: Option<&[f64]>,
) -> Result<LabelAppearance> {
    let mut appearances = vec![0u64; n_labels];
    for s in stats {
        for &l in s.clusters.iter().flatten() {
            let slot = appearances
                .get_mut(l as usize)
                .ok_or_else(|| Error::param(format!("label {l} outside 0..{n_labels}")))?;
            *slot += 1;
        }
    }
    let pearson = match accuracy {
        Some(acc) if acc.len() != n_labels => {
            return Err(Error::LengthMismatch {
                expected: n_labels,
                found: acc.len(),
            })
        }
        Some(acc) => {
            let xs: Vec<f64> = appearances.iter().map(|&a| a as f64).collect();
            pearson(&xs, acc)
        }
        None => None,
    };
    Ok(LabelAppearance {
        appearances,
        accuracy: accuracy.map(<[f64]>::to_vec),
        pearson,
    })
}
