//! Cosine-similarity analysis of the embedding layer.
//!
//! Similarities are never materialized as a dense `t_number^2` matrix: the
//! histogram streams over row blocks and the Top-q/Top-K selections keep only
//! the best candidates per row.

use std::ops::Range;

use crate::confusion::take_top;
use crate::error::{Error, Result};
use crate::par;
use crate::stats::Histogram;
use crate::types::{BinaryMatrix, BinaryProvenance, EmbeddingMatrix, TokenId};

const LANES: usize = 8;
/// Rows per side of the register-blocked micro-kernel.
const MICRO: usize = 4;
/// Rows per cache tile.
const TILE: usize = 64;

#[inline(always)]
fn reduce_lanes(acc: &[f64; LANES], tail: f64) -> f64 {
    let s0 = acc[0] + acc[4];
    let s1 = acc[1] + acc[5];
    let s2 = acc[2] + acc[6];
    let s3 = acc[3] + acc[7];
    ((s0 + s2) + (s1 + s3)) + tail
}

#[inline(always)]
fn tail_dot(a: &[f64], b: &[f64]) -> f64 {
    let start = a.len() / LANES * LANES;
    let mut tail = 0.0;
    for (x, y) in a[start..].iter().zip(&b[start..]) {
        tail += x * y;
    }
    tail
}

/// Dot product with a fixed reduction order.
///
/// Element `k` is accumulated into lane `k mod 8` (separately rounded
/// multiply and add), elements past the last full group of eight go into a
/// sequential tail, and the lanes are combined by a fixed tree. Every kernel
/// below follows exactly these operations, so results are bit-identical on
/// any instruction set and `dot(a, b) == dot(b, a)`.
#[inline(always)]
fn dot_portable(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; LANES];
    for (x, y) in a.chunks_exact(LANES).zip(b.chunks_exact(LANES)) {
        for l in 0..LANES {
            acc[l] += x[l] * y[l];
        }
    }
    reduce_lanes(&acc, tail_dot(a, b))
}

#[cfg(target_arch = "x86_64")]
mod avx512 {
    use super::{reduce_lanes, tail_dot, LANES, MICRO};
    use std::arch::x86_64::*;

    #[target_feature(enable = "avx512f")]
    pub unsafe fn dot(a: &[f64], b: &[f64]) -> f64 {
        let groups = a.len().min(b.len()) / LANES;
        let mut acc = _mm512_setzero_pd();
        for g in 0..groups {
            let x = _mm512_loadu_pd(a.as_ptr().add(g * LANES));
            let y = _mm512_loadu_pd(b.as_ptr().add(g * LANES));
            acc = _mm512_add_pd(acc, _mm512_mul_pd(x, y));
        }
        let mut lanes = [0.0f64; LANES];
        _mm512_storeu_pd(lanes.as_mut_ptr(), acc);
        reduce_lanes(&lanes, tail_dot(a, b))
    }

    /// All `MICRO x MICRO` dot products between two groups of rows.
    #[target_feature(enable = "avx512f")]
    pub unsafe fn block(a: [&[f64]; MICRO], b: [&[f64]; MICRO]) -> [[f64; MICRO]; MICRO] {
        let len = a[0].len();
        for r in a.iter().chain(&b) {
            assert_eq!(r.len(), len);
        }
        let groups = len / LANES;
        let mut acc = [[_mm512_setzero_pd(); MICRO]; MICRO];
        for g in 0..groups {
            let off = g * LANES;
            let x = [
                _mm512_loadu_pd(a[0].as_ptr().add(off)),
                _mm512_loadu_pd(a[1].as_ptr().add(off)),
                _mm512_loadu_pd(a[2].as_ptr().add(off)),
                _mm512_loadu_pd(a[3].as_ptr().add(off)),
            ];
            let y = [
                _mm512_loadu_pd(b[0].as_ptr().add(off)),
                _mm512_loadu_pd(b[1].as_ptr().add(off)),
                _mm512_loadu_pd(b[2].as_ptr().add(off)),
                _mm512_loadu_pd(b[3].as_ptr().add(off)),
            ];
            for r in 0..MICRO {
                for s in 0..MICRO {
                    acc[r][s] = _mm512_add_pd(acc[r][s], _mm512_mul_pd(x[r], y[s]));
                }
            }
        }
        let mut out = [[0.0; MICRO]; MICRO];
        for r in 0..MICRO {
            for s in 0..MICRO {
                let mut lanes = [0.0f64; LANES];
                _mm512_storeu_pd(lanes.as_mut_ptr(), acc[r][s]);
                out[r][s] = reduce_lanes(&lanes, tail_dot(a[r], b[s]));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kernel {
    Portable,
    #[cfg(target_arch = "x86_64")]
    Avx512,
}

fn kernel() -> Kernel {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx512f") {
            return Kernel::Avx512;
        }
    }
    Kernel::Portable
}

impl Kernel {
    #[inline(always)]
    fn dot(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Portable => dot_portable(a, b),
            // SAFETY: the variant is only chosen after runtime feature detection.
            #[cfg(target_arch = "x86_64")]
            Kernel::Avx512 => unsafe { avx512::dot(a, b) },
        }
    }

    #[inline(always)]
    fn block(self, a: [&[f64]; MICRO], b: [&[f64]; MICRO]) -> [[f64; MICRO]; MICRO] {
        match self {
            Kernel::Portable => a.map(|x| b.map(|y| dot_portable(x, y))),
            // SAFETY: as above.
            #[cfg(target_arch = "x86_64")]
            Kernel::Avx512 => unsafe { avx512::block(a, b) },
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    kernel().dot(a, b)
}

/// Embedding rows with cached squared norms for repeated cosine queries.
pub struct CosineIndex<'a> {
    e: &'a EmbeddingMatrix,
    sq_norms: Vec<f64>,
    kernel: Kernel,
}

impl<'a> CosineIndex<'a> {
    pub fn new(e: &'a EmbeddingMatrix) -> Self {
        let kernel = kernel();
        let sq_norms = par::map_range(e.t_number(), |i| {
            let r = e.row(i as TokenId);
            kernel.dot(r, r)
        });
        CosineIndex {
            e,
            sq_norms,
            kernel,
        }
    }

    pub fn t_number(&self) -> usize {
        self.e.t_number()
    }

    pub fn embedding(&self) -> &EmbeddingMatrix {
        self.e
    }

    #[inline]
    fn cos_from_dot(&self, d: f64, i: usize, j: usize) -> f64 {
        (d / (self.sq_norms[i] * self.sq_norms[j]).sqrt()).clamp(-1.0, 1.0)
    }

    /// Cosine of the angle between rows `i` and `j`.
    #[inline]
    pub fn cos(&self, i: TokenId, j: TokenId) -> f64 {
        let d = self.kernel.dot(self.e.row(i), self.e.row(j));
        self.cos_from_dot(d, i as usize, j as usize)
    }

    /// Dot products of every row in `is` with every row in `js`, visited in
    /// cache-sized tiles; calls `f(i, j, dot)`.
    fn for_each_dot(
        &self,
        is: Range<usize>,
        js: Range<usize>,
        mut f: impl FnMut(usize, usize, f64),
    ) {
        if is.is_empty() || js.is_empty() {
            return;
        }
        let row = |k: usize| self.e.row(k as TokenId);
        for t0 in js.clone().step_by(TILE) {
            let t1 = (t0 + TILE).min(js.end);
            for i0 in is.clone().step_by(MICRO) {
                let ii: [usize; MICRO] = std::array::from_fn(|r| (i0 + r).min(is.end - 1));
                let a = ii.map(row);
                for j0 in (t0..t1).step_by(MICRO) {
                    let jj: [usize; MICRO] = std::array::from_fn(|s| (j0 + s).min(t1 - 1));
                    let blk = self.kernel.block(a, jj.map(row));
                    for r in 0..MICRO.min(is.end - i0) {
                        for s in 0..MICRO.min(t1 - j0) {
                            f(ii[r], jj[s], blk[r][s]);
                        }
                    }
                }
            }
        }
    }

    /// Cosines of rows `first..first + out.len()` against every row.
    pub fn cos_rows(&self, first: TokenId, out: &mut [Vec<f64>]) {
        let first = first as usize;
        let n = self.t_number();
        for o in out.iter_mut() {
            o.clear();
            o.resize(n, 0.0);
        }
        self.for_each_dot(first..first + out.len(), 0..n, |i, j, d| {
            out[i - first][j] = self.cos_from_dot(d, i, j);
        });
    }

    /// Cosines of row `i` against every row, written into `out`.
    pub fn cos_row(&self, i: TokenId, out: &mut Vec<f64>) {
        self.cos_rows(i, std::slice::from_mut(out));
    }
}

/// Cosine similarity of two tokens' embedding vectors.
pub fn cosine(e: &EmbeddingMatrix, i: TokenId, j: TokenId) -> f64 {
    let k = kernel();
    let (a, b) = (e.row(i), e.row(j));
    let d = k.dot(a, b);
    (d / (k.dot(a, a) * k.dot(b, b)).sqrt()).clamp(-1.0, 1.0)
}

/// Histogram of cosine similarity over all ordered token pairs, diagonal
/// included, on `bins` equal bins spanning `[-1, 1]`.
///
/// Each unordered off-diagonal pair is computed once and counted twice.
pub fn similarity_histogram(e: &EmbeddingMatrix, bins: usize) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::param("similarity histogram needs at least 2 bins"));
    }
    let index = CosineIndex::new(e);
    let n = e.t_number();
    let tile_starts: Vec<usize> = (0..n).step_by(TILE).collect();
    let partials = par::map_chunks(&tile_starts, 1, |starts| {
        let i0 = starts[0];
        let i1 = (i0 + TILE).min(n);
        let mut h = Histogram::new(-1.0, 1.0, bins);
        for i in i0..i1 {
            h.add(index.cos(i as TokenId, i as TokenId));
        }
        index.for_each_dot(i0..i1, i0..n, |i, j, d| {
            if j > i {
                h.add_n(index.cos_from_dot(d, i, j), 2);
            }
        });
        h
    });
    let mut total = Histogram::new(-1.0, 1.0, bins);
    for p in &partials {
        total.merge(p);
    }
    Ok(total)
}

/// Scores every token against a query row.
pub trait RowScorer: Sync {
    fn t_number(&self) -> usize;
    /// Writes `score(i, j)` for every `j` into `out[i - first]`, for the rows
    /// `first..first + out.len()`. The self score is ignored by callers.
    fn score_rows(&self, first: TokenId, out: &mut [Vec<f64>]);

    fn score_row(&self, i: TokenId, out: &mut Vec<f64>) {
        self.score_rows(i, std::slice::from_mut(out));
    }
}

impl RowScorer for CosineIndex<'_> {
    fn t_number(&self) -> usize {
        CosineIndex::t_number(self)
    }

    fn score_rows(&self, first: TokenId, out: &mut [Vec<f64>]) {
        self.cos_rows(first, out);
    }
}

/// The `k` best-scoring other tokens of row `i`, best first, ties by id.
fn best_of_row(scores: &[f64], i: TokenId, k: usize) -> Vec<(TokenId, f64)> {
    let mut cand: Vec<(TokenId, f64)> = scores
        .iter()
        .enumerate()
        .filter(|&(j, _)| j as TokenId != i)
        .map(|(j, &s)| (j as TokenId, s))
        .collect();
    let k = k.min(cand.len());
    if k == 0 {
        return Vec::new();
    }
    let order = |a: &(TokenId, f64), b: &(TokenId, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, order);
        cand.truncate(k);
    }
    take_top(cand, k)
}

/// Per-token list of its highest-scoring partners.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityRowTop {
    pub rows: Vec<Vec<(TokenId, f64)>>,
}

/// Top-`k` partners of every row under `scorer`, self excluded.
pub fn top_k_similar<S: RowScorer>(scorer: &S, k: usize) -> Result<SimilarityRowTop> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    let n = scorer.t_number();
    let tile_starts: Vec<usize> = (0..n).step_by(TILE).collect();
    let rows = par::map_chunks(&tile_starts, 1, |starts| {
        let first = starts[0];
        let mut bufs = vec![Vec::new(); TILE.min(n - first)];
        scorer.score_rows(first as TokenId, &mut bufs);
        bufs.iter()
            .enumerate()
            .map(|(r, b)| best_of_row(b, (first + r) as TokenId, k))
            .collect::<Vec<_>>()
    });
    Ok(SimilarityRowTop {
        rows: rows.into_iter().flatten().collect(),
    })
}

/// Per row, edges to the `q` highest-scoring other tokens (ties by id).
pub fn top_q_binarize_with<S: RowScorer>(scorer: &S, q: usize) -> Result<BinaryMatrix> {
    let n = scorer.t_number();
    if q == 0 || q >= n {
        return Err(Error::param(format!("q = {q} must lie in [1, {n})")));
    }
    let top = top_k_similar(scorer, q)?;
    let rows = top
        .rows
        .into_iter()
        .map(|r| r.into_iter().map(|(j, _)| j).collect())
        .collect();
    BinaryMatrix::from_rows(n, rows, BinaryProvenance::TopQ(q))
}

/// Top-q binarization of the plain cosine-similarity matrix.
pub fn top_q_binarize(e: &EmbeddingMatrix, q: usize) -> Result<BinaryMatrix> {
    top_q_binarize_with(&CosineIndex::new(e), q)
}

// ---------------------------------------------------------------- ABTT

/// Number of leading principal components to remove.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AbttConfig {
    pub r: usize,
}

impl AbttConfig {
    /// `round(e_length / 100)` components.
    pub fn default_for(e_length: usize) -> Self {
        AbttConfig {
            r: (e_length as f64 / 100.0).round() as usize,
        }
    }
}

const ABTT_TOLERANCE: f64 = 1e-10;
const ABTT_MAX_ITER: usize = 100_000;
const COV_CHUNK: usize = 256;

/// Removes the mean row and the projections onto the top `r` principal
/// directions. Directions are found by power iteration with deflation on the
/// covariance, each iterated until the relative residual
/// `|C v - lambda v| / |lambda|` drops below `1e-10`.
pub fn abtt(e: &EmbeddingMatrix, cfg: AbttConfig) -> Result<EmbeddingMatrix> {
    let n = e.t_number();
    let d = e.e_length();
    if cfg.r >= d {
        return Err(Error::param(format!(
            "cannot remove {} components from {d}-dimensional vectors",
            cfg.r
        )));
    }
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(e.row(i as TokenId)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut centered: Vec<f64> = e.as_slice().to_vec();
    par::for_each_chunk_mut(&mut centered, d * COV_CHUNK, |_, block| {
        for row in block.chunks_exact_mut(d) {
            row.iter_mut().zip(&mean).for_each(|(x, m)| *x -= m);
        }
    });

    let components = principal_directions(&centered, d, cfg.r)?;
    par::for_each_chunk_mut(&mut centered, d * COV_CHUNK, |_, block| {
        for row in block.chunks_exact_mut(d) {
            for u in &components {
                let p = dot_portable(row, u);
                row.iter_mut().zip(u).for_each(|(x, ui)| *x -= p * ui);
            }
        }
    });
    EmbeddingMatrix::new(n, d, centered)
}

/// Unit eigenvectors of `X^T X` for the `r` largest eigenvalues.
pub(crate) fn principal_directions(x: &[f64], d: usize, r: usize) -> Result<Vec<Vec<f64>>> {
    if r == 0 {
        return Ok(Vec::new());
    }
    let rows: Vec<&[f64]> = x.chunks_exact(d).collect();
    let partials = par::map_chunks(&rows, COV_CHUNK, |block| {
        let mut c = vec![0.0; d * d];
        for row in block {
            for a in 0..d {
                let xa = row[a];
                if xa == 0.0 {
                    continue;
                }
                let dst = &mut c[a * d..a * d + d];
                for b in a..d {
                    dst[b] += xa * row[b];
                }
            }
        }
        c
    });
    let mut cov = vec![0.0; d * d];
    for p in &partials {
        cov.iter_mut().zip(p).for_each(|(c, v)| *c += v);
    }
    for a in 0..d {
        for b in 0..a {
            cov[a * d + b] = cov[b * d + a];
        }
    }

    let matvec = |m: &[f64], v: &[f64], out: &mut [f64]| {
        for (a, o) in out.iter_mut().enumerate() {
            *o = dot_portable(&m[a * d..a * d + d], v);
        }
    };
    let mut out = Vec::with_capacity(r);
    for component in 0..r {
        // deterministic start with no symmetry that could be orthogonal to
        // a structured eigenvector
        let mut v: Vec<f64> = (0..d)
            .map(|k| 1.0 + ((k * 7919) % 1009) as f64 / 1009.0)
            .collect();
        normalize(&mut v);
        let mut w = vec![0.0; d];
        let mut converged = false;
        let mut lambda = 0.0;
        for _ in 0..ABTT_MAX_ITER {
            matvec(&cov, &v, &mut w);
            lambda = dot_portable(&v, &w);
            let wn = dot_portable(&w, &w).sqrt();
            if wn == 0.0 {
                converged = true;
                break;
            }
            let resid = w
                .iter()
                .zip(&v)
                .map(|(wi, vi)| (wi - lambda * vi).powi(2))
                .sum::<f64>()
                .sqrt();
            if resid <= ABTT_TOLERANCE * lambda.abs() {
                converged = true;
                break;
            }
            v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / wn);
        }
        if !converged {
            return Err(Error::NonConvergence { component });
        }
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] -= lambda * v[a] * v[b];
            }
        }
        out.push(v);
    }
    Ok(out)
}

fn normalize(v: &mut [f64]) {
    let n = dot_portable(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

// ---------------------------------------------------------------- CSLS

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CslsConfig {
    pub neighborhood: usize,
}

impl Default for CslsConfig {
    fn default() -> Self {
        CslsConfig { neighborhood: 10 }
    }
}

/// Cross-domain similarity local scaling:
/// `score(i, j) = 2 cos(i, j) - r(i) - r(j)`, with `r(x)` the mean cosine of
/// `x` to its `neighborhood` nearest neighbours (self excluded).
pub struct CslsScorer<'a> {
    index: CosineIndex<'a>,
    local: Vec<f64>,
}

impl<'a> CslsScorer<'a> {
    pub fn new(e: &'a EmbeddingMatrix, cfg: CslsConfig) -> Result<Self> {
        let n = e.t_number();
        if cfg.neighborhood == 0 || cfg.neighborhood >= n {
            return Err(Error::param(format!(
                "CSLS neighborhood {} must lie in [1, {n})",
                cfg.neighborhood
            )));
        }
        let index = CosineIndex::new(e);
        let local = top_k_similar(&index, cfg.neighborhood)?
            .rows
            .iter()
            .map(|best| best.iter().map(|b| b.1).sum::<f64>() / best.len() as f64)
            .collect();
        Ok(CslsScorer { index, local })
    }

    /// Mean similarity of `x` to its nearest neighbours.
    pub fn local_density(&self, x: TokenId) -> f64 {
        self.local[x as usize]
    }

    pub fn score(&self, i: TokenId, j: TokenId) -> f64 {
        2.0 * self.index.cos(i, j) - self.local[i as usize] - self.local[j as usize]
    }
}

impl RowScorer for CslsScorer<'_> {
    fn t_number(&self) -> usize {
        self.index.t_number()
    }

    fn score_rows(&self, first: TokenId, out: &mut [Vec<f64>]) {
        self.index.cos_rows(first, out);
        for (r, row) in out.iter_mut().enumerate() {
            let ri = self.local[first as usize + r];
            for (c, rj) in row.iter_mut().zip(&self.local) {
                *c = 2.0 * *c - ri - rj;
            }
        }
    }
}

/// CSLS scores of row `i` against every token.
pub fn csls_scores(e: &EmbeddingMatrix, cfg: CslsConfig, i: TokenId) -> Result<Vec<f64>> {
    let scorer = CslsScorer::new(e, cfg)?;
    let mut out = Vec::new();
    scorer.score_row(i, &mut out);
    Ok(out)
}
