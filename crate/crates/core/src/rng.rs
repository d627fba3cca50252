//! Seeded, platform-independent random streams.
//!
//! Every sampler takes an explicit `u64` seed and expands it with ChaCha8.
//! Parallel replicas use `seed_base + replica_index`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` under `seed`; used for per-element draws that
/// must not depend on scheduling.
pub fn stream(seed: u64, index: u64) -> SimRng {
    let mut rng = seeded(seed);
    rng.set_stream(index);
    rng
}

pub fn replica_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng);
    draw as usize
}

/// Draws an index from an unnormalized nonnegative weight vector.
pub fn categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    // rounding can leave u marginally above the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}
