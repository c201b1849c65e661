//! Numerical certification of the structural properties of the
//! semi-discretization: the consistency residual and its decay rate, the
//! uniform-in-n analyticity and growth bounds of `e^{P_n t}`, and the
//! discrete Sobolev inequality.
//!
//! The underlying statements only assert the existence of n-independent
//! constants, so the pass thresholds here are artifact policy: a bounded
//! max/min ratio over a 16x range of n, and a minimum log-log decay slope.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::disc::Discretization;
use crate::error::{Error, Result};
use crate::gridops::{norm_2d, norm_inf, restrict};
use crate::lift::{self, SmoothFunction};
use crate::linalg::spectral_norm;
use crate::model::ProblemSpec;
use crate::ode::expm_dense;

/// Largest grid size admitted in property sweeps (the sweeps take dense
/// matrix exponentials per grid and per time sample).
pub const DENSE_SWEEP_GUARD: usize = 256;

/// Max/min ratio across a sweep accepted as "uniform in n".
pub const UNIFORMITY_RATIO_MAX: f64 = 5.0;

/// Minimum log-log slope of the consistency residual against h.
pub const ACCURACY_SLOPE_MIN: f64 = 0.45;

/// Allowed growth of the Sobolev ratio statistic from the smallest to the
/// largest grid of a sweep.
pub const SOBOLEV_UNIFORMITY_FACTOR: f64 = 2.0;

/// Left-boundary compatibility tolerance for consistency test functions.
pub const LEFT_BC_TOL: f64 = 1e-10;

/// Search lattice for the growth bound: `M in {1, 1.5, ..., 10}`,
/// `omega in {0, 0.5, ..., 20}`, scanned in lexicographic order.
const GROWTH_M_STEPS: usize = 19;
const GROWTH_OMEGA_STEPS: usize = 41;

/// One certified property over a grid sweep.
#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub property: String,
    pub sweep: Vec<usize>,
    pub values: Vec<f64>,
    pub fitted: Vec<(String, f64)>,
    pub pass: bool,
}

impl PropertyReport {
    pub fn new(
        property: impl Into<String>,
        sweep: Vec<usize>,
        values: Vec<f64>,
        fitted: Vec<(String, f64)>,
        pass: bool,
    ) -> Result<Self> {
        if sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid {
                what: "property report",
                why: "sweep must be sorted ascending".into(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid {
                what: "property report",
                why: "values must be finite".into(),
            });
        }
        Ok(PropertyReport {
            property: property.into(),
            sweep,
            values,
            fitted,
            pass,
        })
    }
}

/// Rejects sweeps that would run dense exponentials beyond the guard.
pub fn check_sweep_guard(sweep: &[usize]) -> Result<()> {
    for &n in sweep {
        if n > DENSE_SWEEP_GUARD {
            return Err(Error::SizeGuard {
                op: "expm_dense",
                n,
                limit: DENSE_SWEEP_GUARD,
            });
        }
    }
    Ok(())
}

/// Consistency residual `|| R_n(P xi) - P_n R_n xi - B_n f_xi ||_2d` for a
/// smooth `xi` satisfying the homogeneous left boundary condition.
pub fn accuracy_residual(
    spec: &ProblemSpec,
    d: &Discretization,
    xi: &SmoothFunction,
) -> Result<f64> {
    let left = lift::left_bc_residual(&spec.bc, xi)?;
    if left.abs() > LEFT_BC_TOL {
        return Err(Error::Precondition {
            op: "accuracy_residual",
            why: format!(
                "xi violates the left boundary condition: alpha0*xi'(0) + beta0*xi(0) = {left:e}"
            ),
        });
    }
    let grid = d.grid();
    let p_xi = restrict(|x| lift::apply_p_smooth(spec, xi, x), grid)?;
    let r_xi = restrict(|x| xi.eval(x), grid)?;
    let f_xi = lift::boundary_trace(&spec.bc, xi)?;
    let residual = p_xi - d.apply_pn(&r_xi)? - d.bn() * f_xi;
    Ok(norm_2d(&residual, grid.h()))
}

/// `max_t t^k ||P_n^k e^{P_n t}||_2d / k!` over the given time grid; the
/// matrix 2d norm is the spectral norm, estimated by power iteration.
pub fn analyticity_constant(pn: &DMatrix<f64>, k: usize, tgrid: &[f64]) -> Result<f64> {
    if k > 2 {
        return Err(Error::Invalid {
            what: "analyticity order",
            why: format!("k = {k}; factorial growth makes k > 2 uninformative"),
        });
    }
    if tgrid.is_empty() || tgrid.iter().any(|&t| t.is_nan() || t <= 0.0) {
        return Err(Error::Invalid {
            what: "time grid",
            why: "need a nonempty grid of strictly positive times".into(),
        });
    }
    let k_factorial = [1.0, 1.0, 2.0][k];
    let mut best = 0.0f64;
    for &t in tgrid {
        let mut m = expm_dense(pn, t)?;
        for _ in 0..k {
            m = pn * m;
        }
        best = best.max(t.powi(k as i32) * spectral_norm(&m) / k_factorial);
    }
    Ok(best)
}

/// Result of the growth-bound search: the lexicographically smallest
/// lattice pair `(M, omega)` with `||e^{P_n t}||_2d <= M e^{omega t}` for
/// every matrix in the sweep and every sampled time, plus the per-matrix
/// suprema of `||e^{P_n t}||_2d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFit {
    pub m: f64,
    pub omega: f64,
    pub sup_norms: Vec<f64>,
}

pub fn growth_fit(pns: &[DMatrix<f64>], tgrid: &[f64]) -> Result<GrowthFit> {
    if pns.is_empty() || tgrid.is_empty() {
        return Err(Error::Invalid {
            what: "growth fit",
            why: "need at least one matrix and one time sample".into(),
        });
    }
    if tgrid.iter().any(|&t| t.is_nan() || t < 0.0) {
        return Err(Error::Invalid {
            what: "time grid",
            why: "times must be nonnegative".into(),
        });
    }
    let mut samples = Vec::with_capacity(pns.len() * tgrid.len());
    let mut sup_norms = Vec::with_capacity(pns.len());
    for pn in pns {
        let mut sup = 0.0f64;
        for &t in tgrid {
            let g = spectral_norm(&expm_dense(pn, t)?);
            sup = sup.max(g);
            samples.push((t, g));
        }
        sup_norms.push(sup);
    }
    let mut max_violation = f64::INFINITY;
    for mi in 0..GROWTH_M_STEPS {
        let m = 1.0 + 0.5 * mi as f64;
        for wi in 0..GROWTH_OMEGA_STEPS {
            let omega = 0.5 * wi as f64;
            let violation = samples
                .iter()
                .map(|&(t, g)| g - m * (omega * t).exp())
                .fold(f64::NEG_INFINITY, f64::max);
            if violation <= 0.0 {
                return Ok(GrowthFit {
                    m,
                    omega,
                    sup_norms,
                });
            }
            max_violation = max_violation.min(violation);
        }
    }
    Err(Error::GrowthFitExhausted { max_violation })
}

/// `(||v||_inf + ||D_n v||_inf) / (||v||_2d + ||P_n v||_2d)` for a nonzero
/// vector; the discrete Sobolev inequality bounds this uniformly in n.
pub fn sobolev_ratio(d: &Discretization, v: &DVector<f64>) -> Result<f64> {
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroVector);
    }
    let h = d.grid().h();
    let numerator = norm_inf(v) + norm_inf(&d.apply_dn(v)?);
    let denominator = norm_2d(v, h) + norm_2d(&d.apply_pn(v)?, h);
    Ok(numerator / denominator)
}

/// Max Sobolev ratio over `samples` seeded Gaussian vectors normalized to
/// unit 2d norm.
pub fn sobolev_sweep_stat(d: &Discretization, samples: usize, seed: u64) -> Result<f64> {
    let n = d.grid().n();
    let h = d.grid().h();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..samples {
        let mut v: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let scale = norm_2d(&v, h);
        v /= scale;
        best = best.max(sobolev_ratio(d, &v)?);
    }
    Ok(best)
}

/// Least-squares slope of `ln(value)` against `ln(h)`.
pub fn log_log_slope(hs: &[f64], values: &[f64]) -> f64 {
    assert_eq!(hs.len(), values.len());
    let n = hs.len() as f64;
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        num += (x - mean_x) * (y - mean_y);
        den += (x - mean_x) * (x - mean_x);
    }
    num / den
}

/// `count` log-spaced points in `[lo, hi]`, endpoints included.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (llo + (lhi - llo) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// CSV export: `property,n,value,pass` rows followed by a trailing comment
/// line with the fitted constants.
pub fn write_properties_csv<W: Write>(mut w: W, reports: &[PropertyReport]) -> io::Result<()> {
    writeln!(w, "property,n,value,pass")?;
    for report in reports {
        for (n, value) in report.sweep.iter().zip(report.values.iter()) {
            writeln!(w, "{},{n},{value:.16e},{}", report.property, report.pass)?;
        }
    }
    write!(w, "# fitted:")?;
    for report in reports {
        for (name, value) in &report.fitted {
            write!(w, " {}.{name}={value:.6e}", report.property)?;
        }
    }
    writeln!(w)?;
    Ok(())
}
