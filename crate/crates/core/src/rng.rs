//! Splittable counter-based pseudo-random generator.
//!
//! The algorithm is fixed so that other implementations can reproduce every
//! stream bit for bit:
//!
//! * `mix64(z)` is the SplitMix64 finalizer:
//!   `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31`
//!   (wrapping multiplication).
//! * A generator is a `(key, counter)` pair. Output `n` is
//!   `mix64(key + n * 0x9E3779B97F4A7C15)`, after which the counter advances.
//! * `CounterRng::new(seed)` sets `key = mix64(seed)`, counter 0.
//! * `split(stream)` derives `key' = mix64(key ^ mix64(stream + 0x9E3779B97F4A7C15))`.
//! * `uniform()` is `(next_u64() >> 11) * 2^-53`, in `[0, 1)`.
//! * `below(n)` is Lemire's multiply-shift with rejection of the biased low
//!   range (`low < (2^64 - n) mod n`).
//! * `normal()` is the Box-Muller cosine branch on `1 - uniform()` and
//!   `uniform()`; it relies on the platform `ln`, `sqrt` and `cos`.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng {
            key: mix64(seed),
            counter: 0,
        }
    }

    /// Independent child stream; does not advance `self`.
    pub fn split(&self, stream: u64) -> Self {
        CounterRng {
            key: mix64(self.key ^ mix64(stream.wrapping_add(GOLDEN))),
            counter: 0,
        }
    }

    /// Output at an arbitrary counter position without advancing.
    #[inline]
    pub fn at(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_mul(GOLDEN)))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let out = self.at(self.counter);
        self.counter = self.counter.wrapping_add(1);
        out
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`; `n` must be positive.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// `true` with probability `p`.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates shuffle driven by `below`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
