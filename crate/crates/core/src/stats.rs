//! Small numeric helpers shared by the analyses.

/// Mean of `values` that does not depend on their order.
///
/// Values are sorted before a compensated summation, so any permutation of the
/// same multiset gives a bit-identical result. Returns `None` when empty.
pub fn stable_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(neumaier_sum(&sorted) / sorted.len() as f64)
}

pub fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Pearson correlation coefficient; `None` if either side has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let mx = stable_mean(xs)?;
    let my = stable_mean(ys)?;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Fixed-width histogram over `[lo, hi]`.
///
/// Bins are half-open `[edge_k, edge_{k+1})` except the last, which also
/// takes `hi`. Values outside the range land in `underflow` / `overflow`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(
            bins >= 1 && hi > lo,
            "histogram needs bins >= 1 and hi > lo"
        );
        let edges = (0..=bins)
            .map(|k| lo + (hi - lo) * (k as f64) / (bins as f64))
            .collect();
        Histogram {
            edges,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn lo(&self) -> f64 {
        self.edges[0]
    }

    pub fn hi(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    /// `(lower, upper)` edges of bin `k`.
    pub fn bounds(&self, k: usize) -> (f64, f64) {
        (self.edges[k], self.edges[k + 1])
    }

    pub fn center(&self, k: usize) -> f64 {
        0.5 * (self.edges[k] + self.edges[k + 1])
    }

    /// Bin index for `v`, or `None` when outside `[lo, hi]` (or NaN).
    #[inline]
    pub fn bin_of(&self, v: f64) -> Option<usize> {
        let lo = self.lo();
        let hi = self.hi();
        if !(v >= lo && v <= hi) {
            return None;
        }
        let n = self.counts.len();
        if v == hi {
            return Some(n - 1);
        }
        let guess = (((v - lo) / (hi - lo)) * n as f64) as usize;
        let mut k = guess.min(n - 1);
        while k > 0 && v < self.edges[k] {
            k -= 1;
        }
        while k + 1 < n && v >= self.edges[k + 1] {
            k += 1;
        }
        Some(k)
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        self.add_n(v, 1);
    }

    #[inline]
    pub fn add_n(&mut self, v: f64, n: u64) {
        match self.bin_of(v) {
            Some(k) => self.counts[k] += n,
            None if v < self.lo() => self.underflow += n,
            None => self.overflow += n,
        }
    }

    /// Adds another histogram with identical edges.
    pub fn merge(&mut self, other: &Histogram) {
        assert_eq!(self.edges, other.edges, "histogram edges differ");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }
}
