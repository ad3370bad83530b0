//! Fixtures shared by the benchmarks.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random real antisymmetric matrix of size `n`.
pub fn antisymmetric(n: usize, seed: u64) -> Mat<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Mat::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = rng.random_range(-1.0..1.0);
            a[(i, j)] = v;
            a[(j, i)] = -v;
        }
    }
    a
}
