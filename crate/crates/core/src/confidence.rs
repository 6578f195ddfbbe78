//! Per-bin classification confidence of fine-tuning inputs.

use std::fmt;
use std::str::FromStr;

use crate::apt::AptTable;
use crate::error::{Error, Result};
use crate::par;
use crate::stats::stable_mean;
use crate::types::{ClassifiedInput, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfidenceAxis {
    /// Mean APT of the input's tokens, linear bins on `[0, 1]`.
    AptAve,
    /// Mean corpus frequency of the input's tokens, logarithmic bins.
    FreqAve,
}

impl ConfidenceAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            ConfidenceAxis::AptAve => "APT_AVE",
            ConfidenceAxis::FreqAve => "FREQ_AVE",
        }
    }
}

impl fmt::Display for ConfidenceAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConfidenceAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "APT_AVE" => Ok(ConfidenceAxis::AptAve),
            "FREQ_AVE" => Ok(ConfidenceAxis::FreqAve),
            _ => Err(Error::param(format!("unknown axis {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinSpec {
    Width(f64),
    Count(usize),
}

impl BinSpec {
    pub fn default_for(axis: ConfidenceAxis) -> Self {
        match axis {
            ConfidenceAxis::AptAve => BinSpec::Width(0.05),
            ConfidenceAxis::FreqAve => BinSpec::Count(20),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBin {
    pub lower: f64,
    pub upper: f64,
    pub n_correct: u64,
    pub n_incorrect: u64,
}

impl ConfidenceBin {
    pub fn total(&self) -> u64 {
        self.n_correct + self.n_incorrect
    }

    /// `None` for an empty bin.
    pub fn confidence(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| self.n_correct as f64 / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBins {
    pub axis: ConfidenceAxis,
    pub bins: Vec<ConfidenceBin>,
    /// Inputs without a defined axis value (no token with an APT entry).
    pub unbinned: u64,
}

impl ConfidenceBins {
    pub fn n_correct(&self) -> u64 {
        self.bins.iter().map(|b| b.n_correct).sum()
    }

    pub fn n_binned(&self) -> u64 {
        self.bins.iter().map(ConfidenceBin::total).sum()
    }

    /// Confidence over all binned inputs.
    pub fn global_confidence(&self) -> Option<f64> {
        let n = self.n_binned();
        (n > 0).then(|| self.n_correct() as f64 / n as f64)
    }
}

/// Mean APT over the input's tokens; tokens without an APT entry are skipped.
/// `Ok(None)` when no token has one.
pub fn apt_ave(input: &ClassifiedInput, apt: &AptTable) -> Result<Option<f64>> {
    if input.tokens.is_empty() {
        return Err(Error::param(format!(
            "input {} has no tokens",
            input.input_id
        )));
    }
    let vals: Vec<f64> = input.tokens.iter().filter_map(|&t| apt.apt(t)).collect();
    Ok(stable_mean(&vals))
}

/// Mean corpus frequency over the input's tokens.
pub fn freq_ave(input: &ClassifiedInput, vocab: &Vocab) -> Result<f64> {
    let vals: Vec<f64> = input
        .tokens
        .iter()
        .map(|&t| vocab.frequency(t) as f64)
        .collect();
    stable_mean(&vals)
        .ok_or_else(|| Error::param(format!("input {} has no tokens", input.input_id)))
}

fn linear_edges(spec: BinSpec) -> Result<Vec<f64>> {
    let n = match spec {
        BinSpec::Count(n) if n >= 1 => n,
        BinSpec::Width(w) if w > 0.0 && w <= 1.0 => (1.0 / w - 1e-9).ceil() as usize,
        _ => return Err(Error::param(format!("invalid bin specification {spec:?}"))),
    };
    let width = match spec {
        BinSpec::Width(w) => w,
        BinSpec::Count(_) => 1.0 / n as f64,
    };
    let mut edges: Vec<f64> = (0..n).map(|k| (k as f64 * width).min(1.0)).collect();
    edges.push(1.0);
    Ok(edges)
}

/// Logarithmic edges between the smallest positive and the largest value.
fn log_edges(values: &[f64], spec: BinSpec) -> Result<Vec<f64>> {
    let n = match spec {
        BinSpec::Count(n) if n >= 1 => n,
        _ => return Err(Error::param("frequency bins take a bin count, not a width")),
    };
    let hi = values.iter().copied().fold(0.0f64, f64::max);
    let lo = values
        .iter()
        .copied()
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !lo.is_finite() {
        // every value is zero
        let mut edges: Vec<f64> = (0..n).map(|k| k as f64).collect();
        edges.push(n as f64);
        return Ok(edges);
    }
    if lo == hi {
        let mut edges = vec![lo; n];
        edges.push(hi);
        return Ok(edges);
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut edges: Vec<f64> = (0..n)
        .map(|k| (a + (b - a) * k as f64 / n as f64).exp())
        .collect();
    edges[0] = lo;
    edges.push(hi);
    Ok(edges)
}

/// Half-open bins `[lower, upper)`; the last bin also takes its upper edge.
/// Values below the first edge go to the first bin, above the last to the
/// last.
fn bin_index(edges: &[f64], v: f64) -> usize {
    let n = edges.len() - 1;
    edges.partition_point(|&e| e <= v).clamp(1, n) - 1
}

/// Assigns every input to a bin along `axis` and counts correct and
/// incorrect classifications per bin.
pub fn confidence_bins(
    inputs: &[ClassifiedInput],
    apt: &AptTable,
    vocab: &Vocab,
    axis: ConfidenceAxis,
    spec: BinSpec,
) -> Result<ConfidenceBins> {
    if inputs.is_empty() {
        return Err(Error::param("no classified inputs"));
    }
    let values: Vec<Option<f64>> = par::map_chunks(inputs, 4096, |chunk| {
        chunk
            .iter()
            .map(|inp| {
                if inp.tokens.is_empty() {
                    return Ok(None);
                }
                match axis {
                    ConfidenceAxis::AptAve => apt_ave(inp, apt),
                    ConfidenceAxis::FreqAve => freq_ave(inp, vocab).map(Some),
                }
            })
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .into_iter()
    .flatten()
    .collect();

    let edges = match axis {
        ConfidenceAxis::AptAve => linear_edges(spec)?,
        ConfidenceAxis::FreqAve => {
            let defined: Vec<f64> = values.iter().flatten().copied().collect();
            log_edges(&defined, spec)?
        }
    };
    let mut bins: Vec<ConfidenceBin> = edges
        .windows(2)
        .map(|w| ConfidenceBin {
            lower: w[0],
            upper: w[1],
            n_correct: 0,
            n_incorrect: 0,
        })
        .collect();
    let mut unbinned = 0;
    for (inp, v) in inputs.iter().zip(&values) {
        match v {
            Some(v) => {
                let b = &mut bins[bin_index(&edges, *v)];
                if inp.is_correct() {
                    b.n_correct += 1;
                } else {
                    b.n_incorrect += 1;
                }
            }
            None => unbinned += 1,
        }
    }
    Ok(ConfidenceBins {
        axis,
        bins,
        unbinned,
    })
}
