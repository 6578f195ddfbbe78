//! Token confusion matrix, diagonal normalization, threshold binarization,
//! mutual-confusion adjacency and Top-K confusion tables.

use crate::apt::EventFilter;
use crate::error::{Error, Result};
use crate::par;
use crate::stats::Histogram;
use crate::types::{
    check_token, AdjacencyMatrix, BinaryMatrix, BinaryProvenance, ConfusionMatrix, MaskEvent,
    NormalizedConfusion, TokenId,
};

pub const DEFAULT_THRESHOLD: f64 = 0.05;

/// Binarization threshold `th` in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfig {
    th: f64,
}

impl ThresholdConfig {
    pub fn new(th: f64) -> Result<Self> {
        if th > 0.0 && th <= 1.0 {
            Ok(ThresholdConfig { th })
        } else {
            Err(Error::param(format!("threshold {th} outside (0, 1]")))
        }
    }

    pub fn th(&self) -> f64 {
        self.th
    }
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            th: DEFAULT_THRESHOLD,
        }
    }
}

/// Counts `(true token, predicted token)` pairs.
pub fn build_confusion(events: &[MaskEvent], t_number: usize) -> Result<ConfusionMatrix> {
    build_confusion_filtered(events, t_number, EventFilter::All)
}

pub fn build_confusion_filtered(
    events: &[MaskEvent],
    t_number: usize,
    filter: EventFilter,
) -> Result<ConfusionMatrix> {
    if events.is_empty() {
        return Err(Error::EmptyEvents);
    }
    let mut keys: Vec<u64> = Vec::with_capacity(events.len());
    for e in events.iter().filter(|e| filter.accepts(e)) {
        check_token(e.true_token as u64, t_number)?;
        check_token(e.predicted as u64, t_number)?;
        keys.push(((e.true_token as u64) << 32) | e.predicted as u64);
    }
    if keys.is_empty() {
        return Err(Error::EmptyEvents);
    }
    par::sort_unstable(&mut keys);
    let mut triplets = Vec::new();
    let mut run_start = 0;
    for i in 1..=keys.len() {
        if i == keys.len() || keys[i] != keys[run_start] {
            let k = keys[run_start];
            triplets.push(((k >> 32) as TokenId, k as u32, (i - run_start) as u64));
            run_start = i;
        }
    }
    ConfusionMatrix::from_sorted_triplets(t_number, triplets)
}

/// Whether a confusion row is kept: the diagonal is nonzero and no
/// off-diagonal count exceeds it (ties keep the row).
pub fn row_is_retained(m: &ConfusionMatrix, r: TokenId) -> bool {
    let (cols, counts) = m.row(r);
    let diag = m.diagonal(r);
    diag > 0 && cols.iter().zip(counts).all(|(&c, &n)| c == r || n <= diag)
}

/// Divides each retained row by its diagonal count.
pub fn normalize_confusion(m: &ConfusionMatrix) -> Result<NormalizedConfusion> {
    let t_number = m.t_number();
    let rows: Vec<Option<(Vec<TokenId>, Vec<f64>)>> = par::map_range(t_number, |r| {
        let r = r as TokenId;
        if !row_is_retained(m, r) {
            return None;
        }
        let diag = m.diagonal(r) as f64;
        let (cols, counts) = m.row(r);
        let values = counts
            .iter()
            .zip(cols)
            .map(|(&n, &c)| if c == r { 1.0 } else { n as f64 / diag })
            .collect();
        Some((cols.to_vec(), values))
    });
    let mut retained = Vec::with_capacity(t_number);
    let mut row_ptr = Vec::with_capacity(t_number + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    let mut values = Vec::new();
    for row in rows {
        retained.push(row.is_some());
        if let Some((c, v)) = row {
            cols.extend(c);
            values.extend(v);
        }
        row_ptr.push(cols.len());
    }
    if !retained.iter().any(|&r| r) {
        return Err(Error::AllRowsExcluded);
    }
    Ok(NormalizedConfusion {
        t_number,
        retained,
        row_ptr,
        cols,
        values,
    })
}

/// Edge `(i, j)` iff the normalized value is strictly above `th`; retained
/// diagonals are always present.
pub fn binarize_threshold(n: &NormalizedConfusion, cfg: ThresholdConfig) -> BinaryMatrix {
    let th = cfg.th();
    let rows = par::map_range(n.t_number(), |r| {
        let r = r as TokenId;
        if !n.is_retained(r) {
            return Vec::new();
        }
        let (cols, values) = n.row(r);
        cols.iter()
            .zip(values)
            .filter(|&(&c, &v)| c == r || v > th)
            .map(|(&c, _)| c)
            .collect()
    });
    BinaryMatrix::from_rows(n.t_number(), rows, BinaryProvenance::Threshold(th))
        .expect("rows come from a valid normalized matrix")
}

/// Keeps only mutual off-diagonal edges: `{i, j}` iff both `(i, j)` and
/// `(j, i)` are set.
pub fn adjacency(b: &BinaryMatrix) -> AdjacencyMatrix {
    let per_row = par::map_range(b.t_number(), |i| {
        let i = i as TokenId;
        b.row(i)
            .iter()
            .filter(|&&j| j > i && b.contains(j, i))
            .map(|&j| (i, j))
            .collect::<Vec<_>>()
    });
    AdjacencyMatrix::from_pairs(b.t_number(), per_row.into_iter().flatten())
        .expect("edges come from a valid binary matrix")
}

/// Each retained row's most-confused partners, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKTable {
    pub k: usize,
    pub rows: Vec<(TokenId, Vec<(TokenId, f64)>)>,
}

impl TopKTable {
    pub fn get(&self, t: TokenId) -> Option<&[(TokenId, f64)]> {
        self.rows
            .binary_search_by_key(&t, |r| r.0)
            .ok()
            .map(|i| self.rows[i].1.as_slice())
    }
}

/// Sorts scored candidates best first, ties by token id, and keeps `k`.
pub(crate) fn take_top(mut scored: Vec<(TokenId, f64)>, k: usize) -> Vec<(TokenId, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

pub fn top_k(n: &NormalizedConfusion, k: usize) -> Result<TopKTable> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    let retained = n.retained_rows();
    let lists = par::map_range(retained.len(), |idx| {
        let r = retained[idx];
        let (cols, values) = n.row(r);
        let scored = cols
            .iter()
            .zip(values)
            .filter(|&(&c, &v)| c != r && v > 0.0)
            .map(|(&c, &v)| (c, v))
            .collect();
        (r, take_top(scored, k))
    });
    Ok(TopKTable { k, rows: lists })
}

/// Histogram of the nonzero off-diagonal normalized values of retained rows.
pub fn offdiag_histogram(n: &NormalizedConfusion, lo: f64, hi: f64, bins: usize) -> Histogram {
    let mut h = Histogram::new(lo, hi, bins);
    for r in n.retained_rows() {
        let (cols, values) = n.row(r);
        for (&c, &v) in cols.iter().zip(values) {
            if c != r {
                h.add(v);
            }
        }
    }
    h
}
