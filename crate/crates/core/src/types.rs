//! Shared domain types.
//!
//! Every type here is immutable once built; constructors enforce the
//! invariants so downstream analyses can rely on them without re-checking.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Opaque token identifier assigned upstream by the tokenizer.
pub type TokenId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub id: TokenId,
    pub text: String,
    /// Appearance count in the pre-training corpus.
    pub frequency: u64,
}

/// Token-id to token-text table with corpus frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    entries: Vec<VocabEntry>,
    by_text: HashMap<String, TokenId>,
}

impl Vocab {
    /// Builds a vocabulary from raw `(id, text, frequency)` rows.
    ///
    /// Ids must cover `0..n` exactly once; frequencies must be non-negative.
    pub fn validate<I, S>(raw: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, S, i64)>,
        S: Into<String>,
    {
        let mut rows: Vec<(u64, String, i64)> = raw
            .into_iter()
            .map(|(id, text, freq)| (id, text.into(), freq))
            .collect();
        if rows.is_empty() {
            return Err(Error::EmptyVocab);
        }
        rows.sort_by_key(|r| r.0);
        let mut entries = Vec::with_capacity(rows.len());
        for (expected, (id, text, frequency)) in rows.into_iter().enumerate() {
            let expected = expected as u64;
            if id < expected {
                return Err(Error::DuplicateId(id));
            }
            if id > expected {
                return Err(Error::IdGap {
                    expected,
                    found: id,
                });
            }
            if frequency < 0 {
                return Err(Error::NegativeFrequency { id, frequency });
            }
            if id > TokenId::MAX as u64 {
                return Err(Error::param(format!("token id {id} exceeds 32 bits")));
            }
            entries.push(VocabEntry {
                id: id as TokenId,
                text,
                frequency: frequency as u64,
            });
        }
        let mut by_text = HashMap::with_capacity(entries.len());
        for e in &entries {
            // first occurrence wins for duplicate surface forms
            by_text.entry(e.text.clone()).or_insert(e.id);
        }
        Ok(Vocab { entries, by_text })
    }

    pub fn t_number(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn text(&self, id: TokenId) -> &str {
        &self.entries[id as usize].text
    }

    pub fn frequency(&self, id: TokenId) -> u64 {
        self.entries[id as usize].frequency
    }

    pub fn lookup(&self, text: &str) -> Option<TokenId> {
        self.by_text.get(text).copied()
    }

    pub fn check_token(&self, token: u64) -> Result<TokenId> {
        check_token(token, self.t_number())
    }

    /// Token ids ordered by descending corpus frequency, ties by id ascending.
    pub fn by_popularity(&self) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = (0..self.entries.len() as TokenId).collect();
        ids.sort_by(|&a, &b| self.frequency(b).cmp(&self.frequency(a)).then(a.cmp(&b)));
        ids
    }
}

pub(crate) fn check_token(token: u64, t_number: usize) -> Result<TokenId> {
    if token < t_number as u64 {
        Ok(token as TokenId)
    } else {
        Err(Error::TokenOutOfRange { token, t_number })
    }
}

/// Protocol parameters of the masking experiment that produced an event log.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub n_input: usize,
    pub e_length: usize,
    pub w_s: usize,
    pub w_test: usize,
    pub repetitions: usize,
    pub mask_fraction: f64,
    /// Fractions of selected tokens that are masked, replaced, and left unchanged.
    pub mask_split: [f64; 3],
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n_input: 128,
            e_length: 768,
            w_s: 90_000,
            w_test: 90_000,
            repetitions: 30,
            mask_fraction: 0.15,
            mask_split: [0.8, 0.1, 0.1],
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mask_fraction > 0.0 && self.mask_fraction <= 1.0) {
            return Err(Error::param("mask_fraction must lie in (0, 1]"));
        }
        if self.mask_split.iter().any(|&p| p.is_nan() || p < 0.0) {
            return Err(Error::param("mask_split components must be non-negative"));
        }
        let sum: f64 = self.mask_split.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!("mask_split sums to {sum}, not 1")));
        }
        if self.n_input == 0 {
            return Err(Error::param("n_input must be positive"));
        }
        Ok(())
    }
}

/// How a selected position was modified before prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModKind {
    Masked,
    Replaced,
    Unchanged,
}

impl ModKind {
    pub const ALL: [ModKind; 3] = [ModKind::Masked, ModKind::Replaced, ModKind::Unchanged];

    pub fn as_str(self) -> &'static str {
        match self {
            ModKind::Masked => "MASKED",
            ModKind::Replaced => "REPLACED",
            ModKind::Unchanged => "UNCHANGED",
        }
    }

    pub fn code(self) -> u32 {
        match self {
            ModKind::Masked => 0,
            ModKind::Replaced => 1,
            ModKind::Unchanged => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        ModKind::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for ModKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "MASKED" => Ok(ModKind::Masked),
            "REPLACED" => Ok(ModKind::Replaced),
            "UNCHANGED" => Ok(ModKind::Unchanged),
            other => Err(format!("unknown modification kind {other:?}")),
        }
    }
}

/// One modified position and the model's prediction for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskEvent {
    pub input: u64,
    pub position: u32,
    pub kind: ModKind,
    pub true_token: TokenId,
    pub predicted: TokenId,
}

impl MaskEvent {
    pub fn is_correct(&self) -> bool {
        self.true_token == self.predicted
    }
}

/// Sparse token confusion counts in compressed-row form.
///
/// Entry `(i, j)` counts how often a modified token `i` was identified as `j`.
/// Zero cells are never stored; columns within a row are strictly ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    t_number: usize,
    row_ptr: Vec<usize>,
    cols: Vec<TokenId>,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn empty(t_number: usize) -> Self {
        ConfusionMatrix {
            t_number,
            row_ptr: vec![0; t_number + 1],
            cols: Vec::new(),
            counts: Vec::new(),
        }
    }

    /// Builds the matrix from `(row, col, count)` triplets in row-major order.
    pub fn from_sorted_triplets<I>(t_number: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (TokenId, TokenId, u64)>,
    {
        let mut row_ptr = vec![0usize; t_number + 1];
        let mut cols = Vec::new();
        let mut counts = Vec::new();
        let mut prev: Option<(TokenId, TokenId)> = None;
        for (n, (r, c, count)) in triplets.into_iter().enumerate() {
            check_token(r as u64, t_number)?;
            check_token(c as u64, t_number)?;
            if let Some(p) = prev {
                if (r, c) == p {
                    return Err(Error::DuplicateCell { row: r, col: c });
                }
                if (r, c) < p {
                    return Err(Error::UnsortedTriplets { line: n + 1 });
                }
            }
            if count == 0 {
                return Err(Error::malformed(format!("triplet {}", n + 1), "zero count"));
            }
            prev = Some((r, c));
            row_ptr[r as usize + 1] += 1;
            cols.push(c);
            counts.push(count);
        }
        for i in 0..t_number {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(ConfusionMatrix {
            t_number,
            row_ptr,
            cols,
            counts,
        })
    }

    pub fn t_number(&self) -> usize {
        self.t_number
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Column ids and counts stored in row `r`.
    pub fn row(&self, r: TokenId) -> (&[TokenId], &[u64]) {
        let span = self.row_ptr[r as usize]..self.row_ptr[r as usize + 1];
        (&self.cols[span.clone()], &self.counts[span])
    }

    pub fn get(&self, r: TokenId, c: TokenId) -> u64 {
        let (cols, counts) = self.row(r);
        cols.binary_search(&c).map_or(0, |k| counts[k])
    }

    pub fn diagonal(&self, r: TokenId) -> u64 {
        self.get(r, r)
    }

    pub fn row_total(&self, r: TokenId) -> u64 {
        self.row(r).1.iter().sum()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (TokenId, TokenId, u64)> + '_ {
        (0..self.t_number as TokenId).flat_map(move |r| {
            let (cols, counts) = self.row(r);
            cols.iter().zip(counts).map(move |(&c, &n)| (r, c, n))
        })
    }

    /// Drops off-diagonal cells whose count is below `min_count`.
    pub fn filter_min_count(&self, min_count: u64) -> Self {
        let kept = self
            .triplets()
            .filter(|&(r, c, n)| r == c || n >= min_count);
        ConfusionMatrix::from_sorted_triplets(self.t_number, kept)
            .expect("filtering preserves ordering")
    }
}

/// Confusion rows divided by their diagonal count.
///
/// Only retained rows carry values; every retained row has exactly `1.0` on
/// its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedConfusion {
    pub(crate) t_number: usize,
    pub(crate) retained: Vec<bool>,
    pub(crate) row_ptr: Vec<usize>,
    pub(crate) cols: Vec<TokenId>,
    pub(crate) values: Vec<f64>,
}

impl NormalizedConfusion {
    pub fn t_number(&self) -> usize {
        self.t_number
    }

    pub fn is_retained(&self, r: TokenId) -> bool {
        self.retained[r as usize]
    }

    pub fn retained_rows(&self) -> Vec<TokenId> {
        (0..self.t_number as TokenId)
            .filter(|&r| self.retained[r as usize])
            .collect()
    }

    pub fn excluded_rows(&self) -> Vec<TokenId> {
        (0..self.t_number as TokenId)
            .filter(|&r| !self.retained[r as usize])
            .collect()
    }

    pub fn row(&self, r: TokenId) -> (&[TokenId], &[f64]) {
        let span = self.row_ptr[r as usize]..self.row_ptr[r as usize + 1];
        (&self.cols[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: TokenId, c: TokenId) -> f64 {
        let (cols, values) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |k| values[k])
    }
}

/// Where a binary matrix came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinaryProvenance {
    /// Normalized confusion values strictly above a threshold.
    Threshold(f64),
    /// The `q` highest-scoring entries per row.
    TopQ(usize),
}

/// Directed 0/1 pattern over tokens, compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMatrix {
    t_number: usize,
    row_ptr: Vec<usize>,
    cols: Vec<TokenId>,
    provenance: BinaryProvenance,
}

impl BinaryMatrix {
    /// Builds from per-row column lists; each list is sorted and deduplicated.
    pub fn from_rows(
        t_number: usize,
        rows: Vec<Vec<TokenId>>,
        provenance: BinaryProvenance,
    ) -> Result<Self> {
        if rows.len() != t_number {
            return Err(Error::LengthMismatch {
                expected: t_number,
                found: rows.len(),
            });
        }
        let mut row_ptr = Vec::with_capacity(t_number + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            for &c in &row {
                check_token(c as u64, t_number)?;
            }
            cols.extend_from_slice(&row);
            row_ptr.push(cols.len());
        }
        Ok(BinaryMatrix {
            t_number,
            row_ptr,
            cols,
            provenance,
        })
    }

    pub fn t_number(&self) -> usize {
        self.t_number
    }

    pub fn provenance(&self) -> BinaryProvenance {
        self.provenance
    }

    pub fn row(&self, r: TokenId) -> &[TokenId] {
        &self.cols[self.row_ptr[r as usize]..self.row_ptr[r as usize + 1]]
    }

    pub fn contains(&self, r: TokenId, c: TokenId) -> bool {
        self.row(r).binary_search(&c).is_ok()
    }

    pub fn n_edges(&self) -> usize {
        self.cols.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (TokenId, TokenId)> + '_ {
        (0..self.t_number as TokenId).flat_map(move |r| self.row(r).iter().map(move |&c| (r, c)))
    }
}

/// Undirected token graph stored as unordered pairs `(a, b)` with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    t_number: usize,
    edges: Vec<(TokenId, TokenId)>,
}

impl AdjacencyMatrix {
    /// Self-pairs are dropped, orientation is normalized, duplicates merged.
    pub fn from_pairs<I>(t_number: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (TokenId, TokenId)>,
    {
        let mut edges = Vec::new();
        for (a, b) in pairs {
            check_token(a as u64, t_number)?;
            check_token(b as u64, t_number)?;
            if a != b {
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(AdjacencyMatrix { t_number, edges })
    }

    pub fn t_number(&self) -> usize {
        self.t_number
    }

    pub fn edges(&self) -> &[(TokenId, TokenId)] {
        &self.edges
    }

    pub fn contains(&self, a: TokenId, b: TokenId) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    /// Neighbor lists for every token, each sorted ascending.
    pub fn neighbors(&self) -> Vec<Vec<TokenId>> {
        let mut adj = vec![Vec::new(); self.t_number];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

/// A partition of participating tokens into clusters.
///
/// Canonical order: clusters by size descending then smallest member
/// ascending; members ascending within a cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSet {
    t_number: usize,
    clusters: Vec<Vec<TokenId>>,
    membership: Vec<Option<usize>>,
}

impl ClusterSet {
    pub fn from_clusters(t_number: usize, mut clusters: Vec<Vec<TokenId>>) -> Result<Self> {
        for c in &mut clusters {
            if c.is_empty() {
                return Err(Error::param("cluster with no members"));
            }
            c.sort_unstable();
        }
        clusters.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        let mut membership = vec![None; t_number];
        for (k, c) in clusters.iter().enumerate() {
            for &t in c {
                check_token(t as u64, t_number)?;
                if membership[t as usize].replace(k).is_some() {
                    return Err(Error::param(format!("token {t} appears in two clusters")));
                }
            }
        }
        Ok(ClusterSet {
            t_number,
            clusters,
            membership,
        })
    }

    pub fn t_number(&self) -> usize {
        self.t_number
    }

    pub fn clusters(&self) -> &[Vec<TokenId>] {
        &self.clusters
    }

    pub fn cluster_of(&self, t: TokenId) -> Option<usize> {
        self.membership.get(t as usize).copied().flatten()
    }

    pub fn n_participants(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    pub fn participants(&self) -> Vec<TokenId> {
        let mut all: Vec<TokenId> = self.clusters.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }
}

/// Dense `t_number x e_length` token embedding table, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    t_number: usize,
    e_length: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Rejects all-zero rows, which have no direction.
    pub fn new(t_number: usize, e_length: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != t_number * e_length {
            return Err(Error::LengthMismatch {
                expected: t_number * e_length,
                found: data.len(),
            });
        }
        if e_length == 0 {
            return Err(Error::param("embedding length must be positive"));
        }
        for (i, row) in data.chunks_exact(e_length).enumerate() {
            if row.iter().all(|&x| x == 0.0) {
                return Err(Error::ZeroRow(i as TokenId));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::malformed(format!("row {i}"), "non-finite value"));
            }
        }
        Ok(EmbeddingMatrix {
            t_number,
            e_length,
            data,
        })
    }

    pub fn t_number(&self) -> usize {
        self.t_number
    }

    pub fn e_length(&self) -> usize {
        self.e_length
    }

    pub fn row(&self, i: TokenId) -> &[f64] {
        let start = i as usize * self.e_length;
        &self.data[start..start + self.e_length]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Whether a field matrix was probed through one node or one attention head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    Node,
    Head,
}

impl Unit {
    pub fn code(self) -> u32 {
        match self {
            Unit::Node => 0,
            Unit::Head => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Unit::Node),
            1 => Some(Unit::Head),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Node => "NODE",
            Unit::Head => "HEAD",
        }
    }
}

/// Label-by-label field matrix: entry `(i, j)` is the mean field on output
/// unit `j` produced by inputs whose true label is `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelFieldMatrix {
    pub n_labels: usize,
    pub unit: Unit,
    pub unit_index: u32,
    values: Vec<f64>,
}

impl LabelFieldMatrix {
    pub fn new(unit: Unit, unit_index: u32, n_labels: usize, values: Vec<f64>) -> Result<Self> {
        if n_labels == 0 {
            return Err(Error::EmptyMatrix);
        }
        if values.len() != n_labels * n_labels {
            return Err(Error::LengthMismatch {
                expected: n_labels * n_labels,
                found: values.len(),
            });
        }
        Ok(LabelFieldMatrix {
            n_labels,
            unit,
            unit_index,
            values,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_labels + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A fine-tuning input with its tokens and classification outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedInput {
    pub input_id: u64,
    pub tokens: Vec<TokenId>,
    pub true_label: u32,
    pub predicted_label: u32,
}

impl ClassifiedInput {
    pub fn is_correct(&self) -> bool {
        self.true_label == self.predicted_label
    }
}
