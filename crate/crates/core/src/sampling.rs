//! Seeded, scheduling-independent random sampling.
//!
//! Ensemble members get seeds derived from (root seed, sample index) so that
//! concurrent evaluation order cannot change any result.

use crate::Vec4;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; decorrelates nearby (seed, index) pairs.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, index: u64) -> u64 {
    splitmix64(root ^ splitmix64(index.wrapping_add(1)))
}

pub fn rng_for(root: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, index))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform direction on S^3: rejection sampling in [-1,1]^4, then radial
/// normalization. Acceptance rate is pi^2/32 ~ 0.31.
pub fn unit_direction(rng: &mut ChaCha8Rng) -> Vec4 {
    loop {
        let v = Vec4::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Unit vector orthogonal to `normal` (w.r.t. the Euclidean inner product).
/// Resamples until the projection is numerically well conditioned.
pub fn unit_tangent(rng: &mut ChaCha8Rng, normal: &Vec4) -> Vec4 {
    let n = normal / normal.norm();
    loop {
        let w = unit_direction(rng);
        let t = w - n * n.dot(&w);
        let tn = t.norm();
        if tn > 1e-6 {
            return t / tn;
        }
    }
}
