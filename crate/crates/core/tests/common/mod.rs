//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::VecDeque;

/// All permutations of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// Diagonal count and noise of a square Boolean matrix under column
/// permutation `perm` (row `d` placed against column `perm[d]`).
///
/// Clusters are connected components over the diagonal positions `d` with
/// `b[d][perm[d]]`, joined whenever the permuted matrix has a one at `(d, e)`
/// or `(e, d)`. Noise counts ones outside every cluster block.
pub fn diag_noise_under(b: &[Vec<bool>], perm: &[usize]) -> (usize, usize) {
    let n = b.len();
    let on_diag: Vec<bool> = (0..n).map(|d| b[d][perm[d]]).collect();
    let mut comp: Vec<usize> = (0..n).collect();
    // small n: relax labels to a fixed point
    loop {
        let mut changed = false;
        for d in 0..n {
            for e in 0..n {
                if on_diag[d] && on_diag[e] && (b[d][perm[e]] || b[e][perm[d]]) {
                    let m = comp[d].min(comp[e]);
                    if comp[d] != m || comp[e] != m {
                        comp[d] = m;
                        comp[e] = m;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let diag = on_diag.iter().filter(|&&x| x).count();
    let mut noise = 0;
    for d in 0..n {
        for e in 0..n {
            if b[d][perm[e]] && !(on_diag[d] && on_diag[e] && comp[d] == comp[e]) {
                noise += 1;
            }
        }
    }
    (diag, noise)
}

/// Maximum diagonal over all column permutations, and the least noise among
/// permutations reaching it.
pub fn brute_diag_noise(b: &[Vec<bool>]) -> (usize, usize) {
    let mut best = (0usize, usize::MAX);
    for p in permutations(b.len()) {
        let (d, n) = diag_noise_under(b, &p);
        if d > best.0 || (d == best.0 && n < best.1) {
            best = (d, n);
        }
    }
    best
}

/// Connected components by repeated breadth-first search; members ascending,
/// components ordered by (size descending, smallest member ascending).
pub fn bfs_components(nodes: &[u32], edges: &[(u32, u32)]) -> Vec<Vec<u32>> {
    let max = nodes.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut adj = vec![Vec::new(); max];
    for &(a, b) in edges {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    }
    let mut seen = vec![false; max];
    let mut out = Vec::new();
    for &s in nodes {
        if seen[s as usize] {
            continue;
        }
        seen[s as usize] = true;
        let mut comp = vec![s];
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x as usize] {
                if !seen[y as usize] {
                    seen[y as usize] = true;
                    comp.push(y);
                    queue.push_back(y);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    canonical(out)
}

pub fn canonical(mut parts: Vec<Vec<u32>>) -> Vec<Vec<u32>> {
    for p in &mut parts {
        p.sort_unstable();
    }
    parts.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    parts
}

/// Fraction of element pairs on which two labelings agree.
pub fn rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut agree = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            agree += ((a[i] == a[j]) == (b[i] == b[j])) as u64;
        }
    }
    agree as f64 / (n * (n - 1) / 2) as f64
}

/// Element labels of a partition over `0..n`.
pub fn labels_of(parts: &[Vec<u32>], n: usize) -> Vec<usize> {
    let mut out = vec![usize::MAX; n];
    for (k, p) in parts.iter().enumerate() {
        for &x in p {
            out[x as usize] = k;
        }
    }
    out
}

/// Dot product carried in double-double arithmetic: each product's rounding
/// error is recovered with a fused multiply-add and every sum is error-free.
pub fn exact_dot(a: &[f64], b: &[f64]) -> f64 {
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let p = x * y;
        let pe = x.mul_add(y, -p);
        let s = hi + p;
        let bb = s - hi;
        let se = (hi - (s - bb)) + (p - bb);
        hi = s;
        lo += se + pe;
    }
    hi + lo
}

pub fn exact_cosine(a: &[f64], b: &[f64]) -> f64 {
    exact_dot(a, b) / (exact_dot(a, a).sqrt() * exact_dot(b, b).sqrt())
}

pub fn binomial_sigma(n: u64, p: f64) -> f64 {
    (n as f64 * p * (1.0 - p)).sqrt()
}

/// Small deterministic generator for test inputs (xorshift64*), unrelated to
/// the library's own generator.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.wrapping_mul(0x2545_F491_4F6C_DD1D) | 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.uniform() * n as f64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u = 1.0 - self.uniform();
        let v = self.uniform();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }
}
