//! Small dense helpers: spectral-norm estimation by power iteration and the
//! matrix 1-norm. The discrete operator norm `||A||_2d` equals the spectral
//! norm because `||.||_2d = sqrt(h) ||.||_2` is a uniform scaling that
//! cancels in the induced norm.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const POWER_TOL: f64 = 1e-9;
const POWER_MAX_ITERS: usize = 50_000;
const POWER_STALL_HITS: usize = 3;

/// Converged right singular vector of `a` under power iteration on `A^T A`,
/// started from a fixed seeded Gaussian vector. The Rayleigh quotient is
/// nondecreasing for the PSD matrix `A^T A`, so three consecutive relative
/// changes below 1e-9 signal convergence.
pub fn top_right_singular_vector(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b97f4a7c15);
    let mut v: DVector<f64> =
        DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let norm = v.norm();
    if norm == 0.0 {
        return v;
    }
    v /= norm;
    let mut prev = f64::NAN;
    let mut stall = 0;
    for _ in 0..POWER_MAX_ITERS {
        let w = a.tr_mul(&(a * &v));
        let rayleigh = v.dot(&w);
        let wnorm = w.norm();
        if wnorm == 0.0 {
            // A v = 0: the matrix annihilates the whole iterate
            return v;
        }
        v = w / wnorm;
        if (rayleigh - prev).abs() <= POWER_TOL * rayleigh.abs().max(1e-300) {
            stall += 1;
            if stall >= POWER_STALL_HITS {
                break;
            }
        } else {
            stall = 0;
        }
        prev = rayleigh;
    }
    v
}

/// Largest singular value of `a`, estimated to ~1e-8 relative accuracy.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let v = top_right_singular_vector(a);
    (a * &v).norm()
}

/// Maximum absolute column sum.
pub fn norm_1(a: &DMatrix<f64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let col_sum: f64 = a.column(j).iter().map(|x| x.abs()).sum();
        best = best.max(col_sum);
    }
    best
}
