//! Reproducible per-path random streams.
//!
//! Every path owns a ChaCha stream keyed by its index, so results are
//! bit-identical for any worker count and any batching: a worker that needs
//! path `i` reconstructs stream `i` from `(seed, i)` alone. Default-time
//! draws live in a disjoint stream space so they never overlap the Brownian
//! draws of any path.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream-space offset separating default-time draws from Brownian draws.
const DEFAULT_TIME_SPACE: u64 = 1 << 32;

/// Brownian-increment stream for one path.
pub fn brownian_stream(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Default-time stream for one path (independent of the Brownian stream).
pub fn default_time_stream(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DEFAULT_TIME_SPACE + path);
    rng
}

/// Fills `out` with standard normal draws.
pub fn fill_standard_normals(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for z in out.iter_mut() {
        *z = StandardNormal.sample(rng);
    }
}

/// Sums `xs` by pairwise (tree) reduction. The result depends only on the
/// slice contents, never on worker scheduling, and carries a smaller rounding
/// error than a running sum.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}
