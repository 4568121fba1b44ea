//! Seedable random streams.
//!
//! Every stochastic operation in the crate takes a [`ScenarioRng`]. Independent
//! substreams (one per calibration restart, for example) are derived from a base
//! seed and a stream index, so results never depend on scheduling order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type ScenarioRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> ScenarioRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ScenarioRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One uniform draw in `[0, 1)`.
#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// One standard normal variate.
#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Inverse-CDF selection over a probability vector: the smallest index `k`
/// with `u < p_0 + ... + p_k`. When rounding leaves `u` above the final
/// cumulative sum, the last index with positive mass is returned.
pub fn select_index(probs: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return k;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}
