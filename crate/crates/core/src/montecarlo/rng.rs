//! Counter-based splittable random number generator.
//!
//! Every value is a pure function of `(key, counter)`, so replica `r`, step
//! `k` can read stream `(master_seed, r, k)` without any sequential state.
//! Quenched experiments share the map-choice stream across replicas simply
//! by deriving it from the quench seed alone. The word function is the
//! splitmix64 finalizer over a Weyl sequence, applied twice for key
//! derivation.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A stateless stream of 64-bit words indexed by a counter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> CounterRng {
        CounterRng {
            key: mix64(seed ^ GOLDEN),
        }
    }

    /// Rebuild a stream from a key obtained via [`CounterRng::key`].
    #[inline(always)]
    pub fn from_key(key: u64) -> CounterRng {
        CounterRng { key }
    }

    /// Derive an independent child stream for a tag (domain or replica id).
    #[inline]
    pub fn derive(&self, tag: u64) -> CounterRng {
        CounterRng {
            key: mix64(self.key ^ mix64(tag.wrapping_mul(GOLDEN) ^ 0x6A09_E667_F3BC_C909)),
        }
    }

    #[inline(always)]
    pub fn key(&self) -> u64 {
        self.key
    }

    /// Word at position `counter`.
    #[inline(always)]
    pub fn u64_at(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform draw in `[0, 1)` at position `counter`.
    #[inline(always)]
    pub fn uniform_at(&self, counter: u64) -> f64 {
        ((self.u64_at(counter) >> 11) as f64) * (1.0 / 9007199254740992.0)
    }
}

/// Samples a finite distribution from a 64-bit word via cumulative
/// thresholds, the canonical map-choice function shared by every kernel.
#[derive(Clone, Debug)]
pub struct IndexSampler {
    thresholds: Vec<u64>,
}

impl IndexSampler {
    pub fn new(probs: &[f64]) -> IndexSampler {
        let mut thresholds = Vec::with_capacity(probs.len());
        let mut acc = 0.0f64;
        for &p in probs {
            acc += p;
            let t = (acc.min(1.0) * (u64::MAX as u128 + 1) as f64) as u128;
            thresholds.push(t.min(u64::MAX as u128 + 1) as u64);
        }
        // force the last threshold to cover the full range
        if let Some(last) = thresholds.last_mut() {
            *last = u64::MAX;
        }
        IndexSampler { thresholds }
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Threshold of the first class (useful for two-class fast paths).
    pub fn first_threshold(&self) -> u64 {
        self.thresholds[0]
    }

    #[inline(always)]
    pub fn index(&self, word: u64) -> usize {
        for (i, &t) in self.thresholds.iter().enumerate() {
            if word <= t {
                return i;
            }
        }
        self.thresholds.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a = CounterRng::new(42);
        let b = CounterRng::new(42);
        assert_eq!(a.u64_at(7), b.u64_at(7));
        assert_ne!(a.u64_at(7), a.u64_at(8));
        assert_ne!(a.derive(1).u64_at(0), a.derive(2).u64_at(0));
        assert_ne!(CounterRng::new(1).key(), CounterRng::new(2).key());
    }

    #[test]
    fn uniform_moments() {
        let rng = CounterRng::new(123);
        let n = 100_000u64;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for k in 0..n {
            let u = rng.uniform_at(k);
            assert!((0.0..1.0).contains(&u));
            sum += u;
            sum2 += u * u;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        assert!((mean - 0.5).abs() < 0.005);
        assert!((var - 1.0 / 12.0).abs() < 0.005);
    }

    #[test]
    fn index_sampler_respects_probabilities() {
        let sampler = IndexSampler::new(&[0.25, 0.5, 0.25]);
        let rng = CounterRng::new(9);
        let mut counts = [0usize; 3];
        let n = 200_000u64;
        for k in 0..n {
            counts[sampler.index(rng.u64_at(k))] += 1;
        }
        let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        assert!((freqs[0] - 0.25).abs() < 0.005);
        assert!((freqs[1] - 0.5).abs() < 0.005);
        assert!((freqs[2] - 0.25).abs() < 0.005);
    }
}
