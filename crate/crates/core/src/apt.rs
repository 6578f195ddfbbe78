//! Accuracy per token (APT) and the mean-APT order parameter.

use crate::error::{Error, Result};
use crate::par;
use crate::stats::{stable_mean, Histogram};
use crate::types::{ClusterSet, MaskEvent, ModKind, TokenId, Vocab};

/// Which modification kinds contribute to APT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EventFilter {
    #[default]
    All,
    MaskedOnly,
}

impl EventFilter {
    #[inline]
    pub fn accepts(self, e: &MaskEvent) -> bool {
        match self {
            EventFilter::All => true,
            EventFilter::MaskedOnly => e.kind == ModKind::Masked,
        }
    }
}

/// Per-token selection and correct-prediction counts.
#[derive(Debug, Clone, PartialEq)]
pub struct AptTable {
    selected: Vec<u64>,
    correct: Vec<u64>,
    mean_apt: f64,
    covered: usize,
}

impl AptTable {
    pub fn from_counts(selected: Vec<u64>, correct: Vec<u64>) -> Result<Self> {
        if selected.len() != correct.len() {
            return Err(Error::LengthMismatch {
                expected: selected.len(),
                found: correct.len(),
            });
        }
        if let Some(t) = (0..selected.len()).find(|&t| correct[t] > selected[t]) {
            return Err(Error::param(format!(
                "token {t}: correct count exceeds selected count"
            )));
        }
        let ratios: Vec<f64> = selected
            .iter()
            .zip(&correct)
            .filter(|(&s, _)| s > 0)
            .map(|(&s, &c)| c as f64 / s as f64)
            .collect();
        let mean_apt = stable_mean(&ratios).ok_or(Error::EmptyEvents)?;
        Ok(AptTable {
            covered: ratios.len(),
            selected,
            correct,
            mean_apt,
        })
    }

    pub fn t_number(&self) -> usize {
        self.selected.len()
    }

    pub fn selected(&self, t: TokenId) -> u64 {
        self.selected[t as usize]
    }

    pub fn correct(&self, t: TokenId) -> u64 {
        self.correct[t as usize]
    }

    /// `None` for tokens never selected.
    pub fn apt(&self, t: TokenId) -> Option<f64> {
        let s = *self.selected.get(t as usize)?;
        (s > 0).then(|| self.correct[t as usize] as f64 / s as f64)
    }

    /// Unweighted mean APT over tokens selected at least once.
    pub fn mean_apt(&self) -> f64 {
        self.mean_apt
    }

    pub fn covered_tokens(&self) -> usize {
        self.covered
    }

    pub fn covered(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.selected.len() as TokenId).filter(|&t| self.selected[t as usize] > 0)
    }
}

/// Counts selections and correct predictions per true token.
pub fn compute_apt(events: &[MaskEvent], vocab: &Vocab) -> Result<AptTable> {
    compute_apt_filtered(events, vocab, EventFilter::All)
}

pub fn compute_apt_filtered(
    events: &[MaskEvent],
    vocab: &Vocab,
    filter: EventFilter,
) -> Result<AptTable> {
    let t_number = vocab.t_number();
    if let Some(e) = events
        .iter()
        .find(|e| e.true_token as usize >= t_number || e.predicted as usize >= t_number)
    {
        let token = e.true_token.max(e.predicted) as u64;
        return Err(Error::TokenOutOfRange { token, t_number });
    }
    let (selected, correct) = par::fold_chunks(
        events,
        1 << 16,
        || (vec![0u64; t_number], vec![0u64; t_number]),
        |(sel, cor), e| {
            if filter.accepts(e) {
                sel[e.true_token as usize] += 1;
                cor[e.true_token as usize] += e.is_correct() as u64;
            }
        },
        |(mut s1, mut c1), (s2, c2)| {
            for (a, b) in s1.iter_mut().zip(&s2) {
                *a += b;
            }
            for (a, b) in c1.iter_mut().zip(&c2) {
                *a += b;
            }
            (s1, c1)
        },
    );
    AptTable::from_counts(selected, correct)
}

/// Mean APT over `n_groups` contiguous groups of covered tokens ordered by
/// descending corpus frequency (ties by id). Groups differ in size by at most
/// one; the first `covered % n_groups` groups take the extra token.
pub fn group_apt(apt: &AptTable, vocab: &Vocab, n_groups: usize) -> Result<Vec<(usize, f64)>> {
    if n_groups == 0 {
        return Err(Error::param("n_groups must be at least 1"));
    }
    if apt.t_number() != vocab.t_number() {
        return Err(Error::LengthMismatch {
            expected: vocab.t_number(),
            found: apt.t_number(),
        });
    }
    let ordered: Vec<f64> = vocab
        .by_popularity()
        .into_iter()
        .filter_map(|t| apt.apt(t))
        .collect();
    if n_groups > ordered.len() {
        return Err(Error::param(format!(
            "{n_groups} groups requested but only {} tokens are covered",
            ordered.len()
        )));
    }
    let base = ordered.len() / n_groups;
    let extra = ordered.len() % n_groups;
    let mut out = Vec::with_capacity(n_groups);
    let mut start = 0;
    for g in 0..n_groups {
        let len = base + usize::from(g < extra);
        let mean = stable_mean(&ordered[start..start + len]).expect("groups are non-empty");
        out.push((g, mean));
        start += len;
    }
    Ok(out)
}

/// Sizes of the groups [`group_apt`] would form.
pub fn group_sizes(covered: usize, n_groups: usize) -> Vec<usize> {
    (0..n_groups)
        .map(|g| covered / n_groups + usize::from(g < covered % n_groups))
        .collect()
}

/// Mean APT of the `k` best tokens (ties by id ascending).
pub fn top_apt(apt: &AptTable, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("k must be positive"));
    }
    if k > apt.covered_tokens() {
        return Err(Error::param(format!(
            "k = {k} exceeds the {} covered tokens",
            apt.covered_tokens()
        )));
    }
    let mut scored: Vec<(TokenId, f64)> = apt.covered().map(|t| (t, apt.apt(t).unwrap())).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let best: Vec<f64> = scored[..k].iter().map(|s| s.1).collect();
    Ok(stable_mean(&best).unwrap())
}

/// APT statistics split by whether a token sits in a size-1 cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitySplit {
    pub unity_mean: Option<f64>,
    pub multi_mean: Option<f64>,
    pub n_unity: usize,
    pub n_multi: usize,
    pub unity_hist: Histogram,
    pub multi_hist: Histogram,
}

pub fn apt_by_cluster(apt: &AptTable, clusters: &ClusterSet, bins: usize) -> Result<UnitySplit> {
    let mut unity = Vec::new();
    let mut multi = Vec::new();
    for c in clusters.clusters() {
        for &t in c {
            let v = apt.apt(t).ok_or(Error::MissingApt(t))?;
            if c.len() == 1 {
                unity.push(v);
            } else {
                multi.push(v);
            }
        }
    }
    let hist = |vals: &[f64]| {
        let mut h = Histogram::new(0.0, 1.0, bins.max(1));
        vals.iter().for_each(|&v| h.add(v));
        h
    };
    Ok(UnitySplit {
        unity_mean: stable_mean(&unity),
        multi_mean: stable_mean(&multi),
        n_unity: unity.len(),
        n_multi: multi.len(),
        unity_hist: hist(&unity),
        multi_hist: hist(&multi),
    })
}
