//! Seeded generators of synthetic data with planted structure.
//!
//! Every random draw comes from [`CounterRng`] streams. Item `i` of a
//! generated collection (event, input, unit) uses its own child stream, so the
//! output is identical however the work is scheduled.
//!
//! Stream layout under the root generator `CounterRng::new(seed)`:
//! `split(0)` planted clusters, `split(1)` events, `split(2)` per-token
//! correctness probabilities, `split(3)` embedding geometry, `split(4)` field
//! units, `split(5)` classified inputs.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::par;
use crate::rng::CounterRng;
use crate::similarity::CosineIndex;
use crate::types::{
    ClassifiedInput, ClusterSet, EmbeddingMatrix, LabelFieldMatrix, MaskEvent, ModKind, TokenId,
    Unit, Vocab,
};

const STREAM_CLUSTERS: u64 = 0;
const STREAM_EVENTS: u64 = 1;
const STREAM_P_CORRECT: u64 = 2;
const STREAM_GEOMETRY: u64 = 3;
const STREAM_FIELDS: u64 = 4;
const STREAM_INPUTS: u64 = 5;

// ---------------------------------------------------------------- key=value specs

/// `key = value` configuration; blank lines and `#` comments are ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvSpec {
    entries: BTreeMap<String, String>,
}

impl KvSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::malformed(format!("line {}", n + 1), "expected key=value"))?;
            let k = k.trim().to_string();
            if entries.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::malformed(
                    format!("line {}", n + 1),
                    format!("duplicate key {k:?}"),
                ));
            }
        }
        Ok(KvSpec { entries })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::param(format!("bad value {v:?} for {key}"))),
        }
    }

    /// Rejects keys outside `known`.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(Error::param(format!("unknown spec key {k:?}"))),
            None => Ok(()),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// `lo..hi` or a single value `v` (meaning `v..v`).
fn parse_range<T: FromStr + Copy + PartialOrd>(s: &str, key: &str) -> Result<(T, T)> {
    let bad = || Error::param(format!("bad range {s:?} for {key}"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        ),
        None => {
            let v = s.trim().parse().map_err(|_| bad())?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

// ---------------------------------------------------------------- frequency profiles

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrequencyProfile {
    /// Weight of token `t` is `(t + 1)^-s`.
    Zipf(f64),
    Uniform,
}

impl Default for FrequencyProfile {
    fn default() -> Self {
        FrequencyProfile::Zipf(1.0)
    }
}

impl FrequencyProfile {
    pub fn weights(self, t_number: usize) -> Vec<f64> {
        match self {
            FrequencyProfile::Zipf(s) => (0..t_number).map(|t| ((t + 1) as f64).powf(-s)).collect(),
            FrequencyProfile::Uniform => vec![1.0; t_number],
        }
    }

    fn from_kv(kv: &KvSpec) -> Result<Self> {
        match kv.raw("profile").unwrap_or("zipf") {
            "zipf" => Ok(FrequencyProfile::Zipf(kv.get("zipf_exponent", 1.0)?)),
            "uniform" => Ok(FrequencyProfile::Uniform),
            other => Err(Error::param(format!("unknown profile {other:?}"))),
        }
    }
}

/// Inverse-CDF sampler over positive weights.
#[derive(Debug, Clone)]
pub struct WeightedSampler {
    cumulative: Vec<f64>,
}

impl WeightedSampler {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&w| !w.is_finite() || w <= 0.0) {
            return Err(Error::param("weights must be positive and finite"));
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(WeightedSampler { cumulative })
    }

    pub fn sample(&self, rng: &mut CounterRng) -> usize {
        let target = rng.uniform() * self.cumulative[self.cumulative.len() - 1];
        self.cumulative
            .partition_point(|&c| c <= target)
            .min(self.cumulative.len() - 1)
    }
}

/// Vocabulary `tok0, tok1, ...` whose frequencies follow `weights`, scaled so
/// the heaviest token has frequency 1,000,000 (minimum 1).
pub fn synth_vocab(weights: &[f64]) -> Result<Vocab> {
    let max = weights.iter().copied().fold(0.0, f64::max);
    Vocab::validate(weights.iter().enumerate().map(|(t, &w)| {
        let f = ((w / max) * 1e6).round().max(1.0) as i64;
        (t as u64, format!("tok{t}"), f)
    }))
}

// ---------------------------------------------------------------- planted clusters

/// Disjoint random clusters with the given sizes over `0..t_number`; members
/// sorted ascending.
pub fn plant_clusters(
    rng: &mut CounterRng,
    t_number: usize,
    sizes: &[usize],
) -> Result<Vec<Vec<TokenId>>> {
    let needed: usize = sizes.iter().sum();
    if needed > t_number {
        return Err(Error::param(format!(
            "clusters need {needed} tokens but the vocabulary has {t_number}"
        )));
    }
    let mut ids: Vec<TokenId> = (0..t_number as TokenId).collect();
    rng.shuffle(&mut ids);
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        let mut c = ids[start..start + s].to_vec();
        c.sort_unstable();
        out.push(c);
        start += s;
    }
    Ok(out)
}

/// Ground truth for event generation.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub seed: u64,
    pub t_number: usize,
    pub clusters: Vec<Vec<TokenId>>,
    pub p_correct: Vec<f64>,
    pub p_within: f64,
    pub frequency: Vec<f64>,
    /// Probabilities of masked, replaced and unchanged modifications.
    pub mask_split: [f64; 3],
}

pub const EVENT_SPEC_KEYS: &[&str] = &[
    "t_number",
    "n_events",
    "n_clusters",
    "cluster_size",
    "p_correct",
    "p_within",
    "profile",
    "zipf_exponent",
    "mask_split",
    "seq_len",
];

impl PlantedSpec {
    pub fn validate(&self) -> Result<()> {
        if self.t_number < 2 {
            return Err(Error::param("t_number must be at least 2"));
        }
        if self.p_correct.len() != self.t_number || self.frequency.len() != self.t_number {
            return Err(Error::LengthMismatch {
                expected: self.t_number,
                found: self.p_correct.len().min(self.frequency.len()),
            });
        }
        if self.p_correct.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::param("p_correct values must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.p_within) {
            return Err(Error::param("p_within must lie in [0, 1]"));
        }
        WeightedSampler::new(&self.frequency)?;
        if self.mask_split.iter().any(|p| p.is_nan() || *p < 0.0)
            || (self.mask_split.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::param("mask_split must be non-negative and sum to 1"));
        }
        ClusterSet::from_clusters(self.t_number, self.clusters.clone())?;
        Ok(())
    }

    /// Builds a spec from `key=value` entries:
    /// `t_number` (1000), `n_clusters` (100), `cluster_size` (`2..10`),
    /// `p_correct` (`0.5`, or `lo..hi` drawn per token), `p_within` (0.8),
    /// `profile` (`zipf` or `uniform`), `zipf_exponent` (1.0),
    /// `mask_split` (`0.8,0.1,0.1`).
    pub fn from_kv(kv: &KvSpec, seed: u64) -> Result<Self> {
        let t_number: usize = kv.get("t_number", 1000)?;
        let n_clusters: usize = kv.get("n_clusters", 100)?;
        let (smin, smax): (usize, usize) =
            parse_range(kv.raw("cluster_size").unwrap_or("2..10"), "cluster_size")?;
        if smin < 1 {
            return Err(Error::param("cluster sizes must be at least 1"));
        }
        let (plo, phi): (f64, f64) =
            parse_range(kv.raw("p_correct").unwrap_or("0.5"), "p_correct")?;
        let root = CounterRng::new(seed);
        let mut crng = root.split(STREAM_CLUSTERS);
        let sizes: Vec<usize> = (0..n_clusters)
            .map(|_| smin + crng.below((smax - smin + 1) as u64) as usize)
            .collect();
        let clusters = plant_clusters(&mut crng, t_number, &sizes)?;
        let mut prng = root.split(STREAM_P_CORRECT);
        let p_correct = (0..t_number)
            .map(|_| plo + (phi - plo) * prng.uniform())
            .collect();
        let split: Vec<f64> = kv
            .raw("mask_split")
            .unwrap_or("0.8,0.1,0.1")
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::param("mask_split must be three comma-separated numbers"))?;
        let mask_split: [f64; 3] = split
            .try_into()
            .map_err(|_| Error::param("mask_split must have three components"))?;
        let spec = PlantedSpec {
            seed,
            t_number,
            clusters,
            p_correct,
            p_within: kv.get("p_within", 0.8)?,
            frequency: FrequencyProfile::from_kv(kv)?.weights(t_number),
            mask_split,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Planted cluster index of every token (`None` outside clusters).
    pub fn cluster_index(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.t_number];
        for (k, c) in self.clusters.iter().enumerate() {
            for &t in c {
                out[t as usize] = Some(k);
            }
        }
        out
    }

    /// Exact distribution of the prediction for true token `t`, as
    /// `(predicted, probability)` pairs over tokens with nonzero probability.
    pub fn prediction_distribution(&self, t: TokenId) -> Vec<(TokenId, f64)> {
        let n = self.t_number;
        let p = self.p_correct[t as usize];
        let idx = self.cluster_index();
        let mates: Vec<TokenId> = match idx[t as usize] {
            Some(k) => self.clusters[k]
                .iter()
                .copied()
                .filter(|&m| m != t)
                .collect(),
            None => Vec::new(),
        };
        let within = if mates.is_empty() { 0.0 } else { self.p_within };
        let uniform = (1.0 - p) * (1.0 - within) / (n - 1) as f64;
        let mut out: Vec<(TokenId, f64)> = (0..n as TokenId)
            .map(|j| {
                if j == t {
                    (j, p)
                } else if mates.contains(&j) {
                    (j, uniform + (1.0 - p) * within / mates.len() as f64)
                } else {
                    (j, uniform)
                }
            })
            .collect();
        out.retain(|&(_, q)| q > 0.0);
        out
    }
}

/// Draws `n_events` masking events: the true token follows the frequency
/// profile, the prediction is correct with probability `p_correct(t)` and
/// otherwise lands on a uniformly chosen cluster mate with probability
/// `p_within` or on a uniformly chosen other token of the vocabulary.
/// Event `i` belongs to input `i` at a position below `seq_len`.
pub fn gen_events(spec: &PlantedSpec, n_events: u64, seq_len: u32) -> Result<Vec<MaskEvent>> {
    spec.validate()?;
    if n_events == 0 {
        return Err(Error::param("n_events must be positive"));
    }
    if seq_len == 0 {
        return Err(Error::param("seq_len must be positive"));
    }
    let sampler = WeightedSampler::new(&spec.frequency)?;
    let idx = spec.cluster_index();
    let n = spec.t_number as u64;
    let stream = CounterRng::new(spec.seed).split(STREAM_EVENTS);
    let n_events = usize::try_from(n_events).map_err(|_| Error::param("n_events too large"))?;
    Ok(par::map_range(n_events, |i| {
        let mut rng = stream.split(i as u64);
        let t = sampler.sample(&mut rng) as TokenId;
        let position = rng.below(seq_len as u64) as u32;
        let u = rng.uniform();
        let kind = if u < spec.mask_split[0] {
            ModKind::Masked
        } else if u < spec.mask_split[0] + spec.mask_split[1] {
            ModKind::Replaced
        } else {
            ModKind::Unchanged
        };
        let predicted = if rng.bernoulli(spec.p_correct[t as usize]) {
            t
        } else {
            let cluster = idx[t as usize]
                .map(|k| &spec.clusters[k])
                .filter(|c| c.len() > 1);
            match cluster {
                Some(c) if rng.bernoulli(spec.p_within) => {
                    let k = rng.below(c.len() as u64 - 1) as usize;
                    let pos = c.iter().position(|&m| m == t).unwrap();
                    c[if k >= pos { k + 1 } else { k }]
                }
                _ => {
                    let j = rng.below(n - 1) as TokenId;
                    if j >= t {
                        j + 1
                    } else {
                        j
                    }
                }
            }
        };
        MaskEvent {
            input: i as u64,
            position,
            kind,
            true_token: t,
            predicted,
        }
    }))
}

// ---------------------------------------------------------------- embeddings

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpec {
    pub seed: u64,
    pub t_number: usize,
    pub e_length: usize,
    /// Planted clusters; other tokens are singletons.
    pub clusters: Vec<Vec<TokenId>>,
    pub within_cos: f64,
    pub between_cos_max: f64,
}

pub const EMBEDDING_SPEC_KEYS: &[&str] = &[
    "t_number",
    "e_length",
    "n_clusters",
    "cluster_size",
    "within_cos",
    "between_cos_max",
];

impl EmbeddingSpec {
    /// Keys: `t_number` (300), `e_length` (768), `n_clusters` (30),
    /// `cluster_size` (`3..10`), `within_cos` (0.9), `between_cos_max` (0.2).
    pub fn from_kv(kv: &KvSpec, seed: u64) -> Result<Self> {
        let t_number: usize = kv.get("t_number", 300)?;
        let n_clusters: usize = kv.get("n_clusters", 30)?;
        let (smin, smax): (usize, usize) =
            parse_range(kv.raw("cluster_size").unwrap_or("3..10"), "cluster_size")?;
        if smin < 1 {
            return Err(Error::param("cluster sizes must be at least 1"));
        }
        let mut crng = CounterRng::new(seed).split(STREAM_CLUSTERS);
        let sizes: Vec<usize> = (0..n_clusters)
            .map(|_| smin + crng.below((smax - smin + 1) as u64) as usize)
            .collect();
        Ok(EmbeddingSpec {
            seed,
            t_number,
            e_length: kv.get("e_length", 768)?,
            clusters: plant_clusters(&mut crng, t_number, &sizes)?,
            within_cos: kv.get("within_cos", 0.9)?,
            between_cos_max: kv.get("between_cos_max", 0.2)?,
        })
    }

    /// Planted partition including singletons.
    pub fn partition(&self) -> Result<ClusterSet> {
        let set = ClusterSet::from_clusters(self.t_number, self.clusters.clone())?;
        let mut all = self.clusters.clone();
        all.extend(
            (0..self.t_number as TokenId)
                .filter(|&t| set.cluster_of(t).is_none())
                .map(|t| vec![t]),
        );
        ClusterSet::from_clusters(self.t_number, all)
    }
}

fn gram_schmidt(vs: &mut [Vec<f64>]) {
    for k in 0..vs.len() {
        for m in 0..k {
            let p: f64 = vs[k].iter().zip(&vs[m]).map(|(a, b)| a * b).sum();
            let (head, tail) = vs.split_at_mut(k);
            tail[0]
                .iter_mut()
                .zip(&head[m])
                .for_each(|(x, y)| *x -= p * y);
        }
        let n = vs[k].iter().map(|x| x * x).sum::<f64>().sqrt();
        vs[k].iter_mut().for_each(|x| *x /= n);
    }
}

/// Embedding with planted clusters.
///
/// Members of a cluster of size `m` sit on a ring around the cluster's latent
/// direction `u`: member `k` is `sqrt(w) u + sqrt(1 - w) (cos a_k x + sin a_k y)`
/// with `a_k = 2 pi k / m`, so the nearest neighbours of a member are its two
/// ring neighbours and every within-cluster cosine is at least `2w - 1`.
/// Singletons get a single direction. When `e_length` leaves room for every
/// direction to be a distinct signed coordinate axis, cross-cluster cosines
/// are exactly zero; otherwise directions are random and every pair is
/// checked against the bounds.
pub fn gen_embedding(spec: &EmbeddingSpec) -> Result<EmbeddingMatrix> {
    if spec.within_cos.is_nan() || spec.within_cos <= spec.between_cos_max {
        return Err(Error::param("within_cos must exceed between_cos_max"));
    }
    if spec.within_cos > 1.0 {
        return Err(Error::param("within_cos must not exceed 1"));
    }
    let partition = spec.partition()?;
    let (n, d) = (spec.t_number, spec.e_length);
    if d == 0 || n == 0 {
        return Err(Error::param("embedding dimensions must be positive"));
    }
    let w = if spec.within_cos >= 1.0 {
        1.0
    } else {
        ((1.0 + spec.within_cos) / 2.0 + (1.0 - spec.within_cos) * 1e-6).min(1.0)
    };
    let dims: usize = partition
        .clusters()
        .iter()
        .map(|c| if c.len() > 1 { 3 } else { 1 })
        .sum();
    let exact = dims <= d;
    let mut rng = CounterRng::new(spec.seed).split(STREAM_GEOMETRY);
    let mut axes: Vec<usize> = (0..d).collect();
    rng.shuffle(&mut axes);
    let mut next_axis = 0;
    let mut direction = |rng: &mut CounterRng| -> Vec<f64> {
        let mut v = vec![0.0; d];
        if exact {
            v[axes[next_axis]] = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
            next_axis += 1;
        } else {
            v.iter_mut().for_each(|x| *x = rng.normal());
        }
        v
    };
    let mut data = vec![0.0; n * d];
    let (sw, sr) = (w.sqrt(), (1.0 - w).sqrt());
    for c in partition.clusters() {
        if c.len() == 1 {
            let mut v = vec![direction(&mut rng)];
            gram_schmidt(&mut v);
            data[c[0] as usize * d..][..d].copy_from_slice(&v[0]);
            continue;
        }
        let mut basis: Vec<Vec<f64>> = (0..3).map(|_| direction(&mut rng)).collect();
        gram_schmidt(&mut basis);
        let m = c.len() as f64;
        for (k, &t) in c.iter().enumerate() {
            let a = std::f64::consts::TAU * k as f64 / m;
            let (ca, sa) = (a.cos(), a.sin());
            let row = &mut data[t as usize * d..][..d];
            for (x, ((u, p), q)) in row
                .iter_mut()
                .zip(basis[0].iter().zip(&basis[1]).zip(&basis[2]))
            {
                *x = sw * u + sr * (ca * p + sa * q);
            }
        }
    }
    let e = EmbeddingMatrix::new(n, d, data)?;
    if !exact {
        let index = CosineIndex::new(&e);
        let bad = par::map_range(n, |i| {
            (i + 1..n).find(|&j| {
                let c = index.cos(i as TokenId, j as TokenId);
                let same = partition.cluster_of(i as TokenId) == partition.cluster_of(j as TokenId);
                if same {
                    c < spec.within_cos - 1e-12
                } else {
                    c > spec.between_cos_max
                }
            })
        });
        if let Some((i, j)) = bad.iter().enumerate().find_map(|(i, j)| j.map(|j| (i, j))) {
            return Err(Error::InfeasibleGeometry(format!(
                "tokens {i} and {j} violate the cosine bounds in {d} dimensions"
            )));
        }
    }
    Ok(e)
}

// ---------------------------------------------------------------- label fields

#[derive(Debug, Clone, PartialEq)]
pub struct FieldsSpec {
    pub seed: u64,
    pub unit: Unit,
    pub n_units: usize,
    pub n_labels: usize,
    /// Planted blocks per unit.
    pub blocks: Vec<Vec<Vec<u32>>>,
    pub noise_rate: f64,
}

pub const FIELDS_SPEC_KEYS: &[&str] = &[
    "unit",
    "n_units",
    "n_labels",
    "blocks",
    "block_size",
    "noise_rate",
];

impl FieldsSpec {
    /// Keys: `unit` (`NODE` or `HEAD`), `n_units` (768), `n_labels` (64),
    /// `blocks` per unit (`1`), `block_size` (`1..2`), `noise_rate` (0.2).
    pub fn from_kv(kv: &KvSpec, seed: u64) -> Result<Self> {
        let unit = match kv
            .raw("unit")
            .unwrap_or("NODE")
            .to_ascii_uppercase()
            .as_str()
        {
            "NODE" => Unit::Node,
            "HEAD" => Unit::Head,
            other => return Err(Error::param(format!("unknown unit {other:?}"))),
        };
        let n_units: usize = kv.get("n_units", 768)?;
        let n_labels: usize = kv.get("n_labels", 64)?;
        let (bmin, bmax): (usize, usize) = parse_range(kv.raw("blocks").unwrap_or("1"), "blocks")?;
        let (smin, smax): (usize, usize) =
            parse_range(kv.raw("block_size").unwrap_or("1..2"), "block_size")?;
        if bmin < 1 || smin < 1 {
            return Err(Error::param(
                "every unit needs at least one non-empty block",
            ));
        }
        let root = CounterRng::new(seed).split(STREAM_CLUSTERS);
        let blocks = (0..n_units)
            .map(|u| {
                let mut rng = root.split(u as u64);
                let k = bmin + rng.below((bmax - bmin + 1) as u64) as usize;
                let sizes: Vec<usize> = (0..k)
                    .map(|_| smin + rng.below((smax - smin + 1) as u64) as usize)
                    .collect();
                plant_clusters(&mut rng, n_labels, &sizes)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FieldsSpec {
            seed,
            unit,
            n_units,
            n_labels,
            blocks,
            noise_rate: kv.get("noise_rate", 0.2)?,
        })
    }
}

/// Planted statistics of one generated unit at the default threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTruth {
    pub unit_index: u32,
    pub blocks: Vec<Vec<u32>>,
    pub diag: usize,
    pub n_c: usize,
    pub noise: usize,
}

/// Field matrices with planted diagonal blocks.
///
/// Entries joining two labels of one block lie in `(0.8, 1]`, with the first
/// entry of the first block exactly `1.0` so normalization leaves the matrix
/// unchanged. Background entries lie in `[-0.2, 0.5)`. Each column outside
/// every block receives, with probability `noise_rate`, one entry in
/// `(0.6, 0.7]` in a uniformly chosen block row. At threshold 0.6 the clipped
/// matrix then has exactly the planted diagonal, cluster count and noise.
pub fn gen_fields(spec: &FieldsSpec) -> Result<(Vec<LabelFieldMatrix>, Vec<FieldTruth>)> {
    let n = spec.n_labels;
    if !(0.0..=1.0).contains(&spec.noise_rate) {
        return Err(Error::param("noise_rate must lie in [0, 1]"));
    }
    if spec.blocks.len() != spec.n_units {
        return Err(Error::LengthMismatch {
            expected: spec.n_units,
            found: spec.blocks.len(),
        });
    }
    let root = CounterRng::new(spec.seed).split(STREAM_FIELDS);
    let units = par::map_range(
        spec.n_units,
        |u| -> Result<(LabelFieldMatrix, FieldTruth)> {
            let blocks = &spec.blocks[u];
            if blocks.is_empty() || blocks.iter().any(Vec::is_empty) {
                return Err(Error::param(format!(
                    "unit {u} needs at least one non-empty block"
                )));
            }
            ClusterSet::from_clusters(n, blocks.clone())?;
            let mut rng = root.split(u as u64);
            let mut v: Vec<f64> = (0..n * n).map(|_| -0.2 + 0.7 * rng.uniform()).collect();
            let mut in_block = vec![false; n];
            for b in blocks {
                for &i in b {
                    in_block[i as usize] = true;
                    for &j in b {
                        v[i as usize * n + j as usize] = 1.0 - 0.2 * rng.uniform();
                    }
                }
            }
            let first = blocks[0][0] as usize;
            v[first * n + first] = 1.0;
            let block_rows: Vec<u32> = blocks.iter().flatten().copied().collect();
            let mut noise = 0;
            for c in (0..n).filter(|&c| !in_block[c]) {
                if rng.bernoulli(spec.noise_rate) {
                    let r = block_rows[rng.below(block_rows.len() as u64) as usize] as usize;
                    v[r * n + c] = 0.6 + 0.1 * (1.0 - rng.uniform());
                    noise += 1;
                }
            }
            let m = LabelFieldMatrix::new(spec.unit, u as u32, n, v)?;
            let truth = FieldTruth {
                unit_index: u as u32,
                blocks: blocks.clone(),
                diag: block_rows.len(),
                n_c: blocks.len(),
                noise,
            };
            Ok((m, truth))
        },
    );
    units
        .into_iter()
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

// ---------------------------------------------------------------- classified inputs

#[derive(Debug, Clone, PartialEq)]
pub struct InputsSpec {
    pub seed: u64,
    pub t_number: usize,
    pub n_inputs: usize,
    pub length: (usize, usize),
    pub n_labels: u32,
    /// Probability that an input is classified correctly, independent of
    /// its tokens.
    pub accuracy: f64,
    pub profile: FrequencyProfile,
}

pub const INPUTS_SPEC_KEYS: &[&str] = &[
    "t_number",
    "n_inputs",
    "length",
    "n_labels",
    "accuracy",
    "profile",
    "zipf_exponent",
];

impl InputsSpec {
    /// Keys: `t_number` (1000), `n_inputs` (10000), `length` (`5..40`),
    /// `n_labels` (64), `accuracy` (0.8), `profile`, `zipf_exponent`.
    pub fn from_kv(kv: &KvSpec, seed: u64) -> Result<Self> {
        Ok(InputsSpec {
            seed,
            t_number: kv.get("t_number", 1000)?,
            n_inputs: kv.get("n_inputs", 10_000)?,
            length: parse_range(kv.raw("length").unwrap_or("5..40"), "length")?,
            n_labels: kv.get("n_labels", 64)?,
            accuracy: kv.get("accuracy", 0.8)?,
            profile: FrequencyProfile::from_kv(kv)?,
        })
    }
}

pub fn gen_inputs(spec: &InputsSpec) -> Result<Vec<ClassifiedInput>> {
    if spec.n_labels < 2 {
        return Err(Error::param("n_labels must be at least 2"));
    }
    if spec.length.0 == 0 {
        return Err(Error::param("inputs need at least one token"));
    }
    if !(0.0..=1.0).contains(&spec.accuracy) {
        return Err(Error::param("accuracy must lie in [0, 1]"));
    }
    let sampler = WeightedSampler::new(&spec.profile.weights(spec.t_number))?;
    let root = CounterRng::new(spec.seed).split(STREAM_INPUTS);
    let (lmin, lmax) = spec.length;
    Ok(par::map_range(spec.n_inputs, |i| {
        let mut rng = root.split(i as u64);
        let len = lmin + rng.below((lmax - lmin + 1) as u64) as usize;
        let tokens = (0..len)
            .map(|_| sampler.sample(&mut rng) as TokenId)
            .collect();
        let true_label = rng.below(spec.n_labels as u64) as u32;
        let predicted_label = if rng.bernoulli(spec.accuracy) {
            true_label
        } else {
            let l = rng.below(spec.n_labels as u64 - 1) as u32;
            if l >= true_label {
                l + 1
            } else {
                l
            }
        };
        ClassifiedInput {
            input_id: i as u64,
            tokens,
            true_label,
            predicted_label,
        }
    }))
}
