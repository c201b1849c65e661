//! Boundary lifting `nu(x) = mu1 x^{mu2}` and pointwise application of the
//! integro-differential operator
//!
//! ```text
//! (P w)(x) = theta(x) w''(x) + sigma(x) w'(x) + lambda(x) w(x)
//!            + int_0^x phi(x, s) w(s) ds
//! ```
//!
//! to smooth closed-form functions, as needed by the consistency check.

use crate::error::{Error, Result};
use crate::expr::{self, Bindings, BinOp, Expr, Var};
use crate::model::{BoundaryConditions, ProblemSpec};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Finite-difference step for the derivative-consistency validation.
const FD_STEP: f64 = 1e-5;
const FD_POINTS: usize = 64;
const FD_TOL: f64 = 1e-6;

/// A `C^2` function on `[0, 1]` with explicitly supplied first and second
/// derivatives. Construction cross-checks the derivatives against central
/// differences of the function at 64 deterministic sample points.
#[derive(Debug, Clone)]
pub struct SmoothFunction {
    xi: Expr,
    dxi: Expr,
    d2xi: Expr,
}

impl SmoothFunction {
    pub fn new(xi: Expr, dxi: Expr, d2xi: Expr) -> Result<Self> {
        for e in [&xi, &dxi, &d2xi] {
            let used = e.uses();
            if used[Var::Y as usize] || used[Var::T as usize] {
                return Err(Error::Invalid {
                    what: "smooth function",
                    why: "expressions may only use the variable x".into(),
                });
            }
        }
        let f = SmoothFunction { xi, dxi, d2xi };
        f.validate_derivatives()?;
        Ok(f)
    }

    pub fn parse(xi: &str, dxi: &str, d2xi: &str) -> Result<Self> {
        Self::new(expr::parse(xi)?, expr::parse(dxi)?, expr::parse(d2xi)?)
    }

    fn validate_derivatives(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5f3759df);
        for _ in 0..FD_POINTS {
            let x = rng.gen_range(FD_STEP..=1.0 - FD_STEP);
            let central_1 = (self.eval(x + FD_STEP)? - self.eval(x - FD_STEP)?) / (2.0 * FD_STEP);
            if (central_1 - self.eval_d1(x)?).abs() > FD_TOL {
                return Err(Error::Invalid {
                    what: "smooth function",
                    why: format!(
                        "first derivative inconsistent with central difference at x = {x}"
                    ),
                });
            }
            let central_2 =
                (self.eval_d1(x + FD_STEP)? - self.eval_d1(x - FD_STEP)?) / (2.0 * FD_STEP);
            if (central_2 - self.eval_d2(x)?).abs() > FD_TOL {
                return Err(Error::Invalid {
                    what: "smooth function",
                    why: format!(
                        "second derivative inconsistent with central difference at x = {x}"
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.xi.eval(&Bindings::x(x))?)
    }

    pub fn eval_d1(&self, x: f64) -> Result<f64> {
        Ok(self.dxi.eval(&Bindings::x(x))?)
    }

    pub fn eval_d2(&self, x: f64) -> Result<f64> {
        Ok(self.d2xi.eval(&Bindings::x(x))?)
    }
}

/// The lifting monomial `nu(x) = mu1 x^{mu2}` normalized so that
/// `alpha1 nu'(1) + beta1 nu(1) = 1` while `nu(0) = nu'(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftFunction {
    pub mu1: f64,
    pub mu2: f64,
}

/// Builds `nu` for the given right-boundary parameters: `mu1` solves
/// `mu1 (mu2 alpha1 + beta1) = 1`.
pub fn build_nu(bc: &BoundaryConditions, mu2: f64) -> Result<LiftFunction> {
    if mu2.is_nan() || mu2 < 3.0 {
        return Err(Error::Invalid {
            what: "lift exponent",
            why: format!("mu2 = {mu2}, need mu2 >= 3"),
        });
    }
    let den = mu2 * bc.alpha1 + bc.beta1;
    if den == 0.0 {
        return Err(Error::DegenerateLift { mu2 });
    }
    let mu1 = 1.0 / den;
    if !mu1.is_finite() {
        return Err(Error::DegenerateLift { mu2 });
    }
    debug_assert!((mu1 * den - 1.0).abs() <= 1e-12);
    Ok(LiftFunction { mu1, mu2 })
}

impl LiftFunction {
    pub fn value(&self, x: f64) -> f64 {
        self.mu1 * x.powf(self.mu2)
    }

    /// The lift as a [`SmoothFunction`] with closed-form derivatives.
    pub fn as_smooth(&self) -> Result<SmoothFunction> {
        let monomial = |coeff: f64, power: f64| -> Expr {
            Expr::Bin(
                BinOp::Mul,
                Box::new(Expr::Num(coeff)),
                Box::new(Expr::Bin(
                    BinOp::Pow,
                    Box::new(Expr::Var(Var::X)),
                    Box::new(Expr::Num(power)),
                )),
            )
        };
        SmoothFunction::new(
            monomial(self.mu1, self.mu2),
            monomial(self.mu1 * self.mu2, self.mu2 - 1.0),
            monomial(self.mu1 * self.mu2 * (self.mu2 - 1.0), self.mu2 - 2.0),
        )
    }
}

// 8-point Gauss-Legendre rule on [-1, 1].
const GL8_NODES: [f64; 4] = [
    0.1834346424956498,
    0.525532409916329,
    0.7966664774136267,
    0.9602898564975362,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362683783378362,
    0.3137066458778873,
    0.2223810344533745,
    0.1012285362903763,
];
const QUAD_PANELS: usize = 64;

/// Composite 64-panel 8-point Gauss-Legendre quadrature of `g` over `[0, x]`.
/// The integrands here are smooth, so this reaches ~1e-12 absolute accuracy.
fn integrate<F>(mut g: F, x: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if x == 0.0 {
        return Ok(0.0);
    }
    let panel = x / QUAD_PANELS as f64;
    let mut acc = 0.0;
    for p in 0..QUAD_PANELS {
        let mid = (p as f64 + 0.5) * panel;
        let half = 0.5 * panel;
        for (node, weight) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
            acc += weight * half * g(mid - half * node)?;
            acc += weight * half * g(mid + half * node)?;
        }
    }
    Ok(acc)
}

/// Pointwise `(P xi)(x)`: the differential terms from the closed-form
/// derivatives plus the Volterra integral by quadrature. Applied as a
/// formula, with no domain check on `xi`.
pub fn apply_p_smooth(spec: &ProblemSpec, xi: &SmoothFunction, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Invalid {
            what: "evaluation point",
            why: format!("x = {x} outside [0, 1]"),
        });
    }
    let differential = spec.theta.eval(x)? * xi.eval_d2(x)?
        + spec.sigma.eval(x)? * xi.eval_d1(x)?
        + spec.lambda.eval(x)? * xi.eval(x)?;
    let integral = integrate(|s| Ok(spec.phi.eval(x, s)? * xi.eval(s)?), x)?;
    Ok(differential + integral)
}

/// Right-boundary trace `f_xi = alpha1 xi'(1) + beta1 xi(1)`.
pub fn boundary_trace(bc: &BoundaryConditions, xi: &SmoothFunction) -> Result<f64> {
    Ok(bc.alpha1 * xi.eval_d1(1.0)? + bc.beta1 * xi.eval(1.0)?)
}

/// Left-boundary residual `alpha0 xi'(0) + beta0 xi(0)`; the consistency
/// check requires this to vanish.
pub fn left_bc_residual(bc: &BoundaryConditions, xi: &SmoothFunction) -> Result<f64> {
    Ok(bc.alpha0 * xi.eval_d1(0.0)? + bc.beta0 * xi.eval(0.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model;
    use approx::assert_relative_eq;

    fn cubic() -> SmoothFunction {
        SmoothFunction::parse("x^3", "3*x^2", "6*x").unwrap()
    }

    #[test]
    fn build_nu_cases() {
        // Example-1 bc: alpha1 = 0, beta1 = 1 -> nu(x) = x^3
        let bc = BoundaryConditions::new(1.0, 0.0, 0.0, 1.0).unwrap();
        let nu = build_nu(&bc, 3.0).unwrap();
        assert_eq!(nu.mu1, 1.0);
        assert_eq!(nu.value(0.5), 0.125);

        let bc = BoundaryConditions::new(1.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(build_nu(&bc, 3.0).unwrap().mu1, 0.25);

        let bc = BoundaryConditions::new(1.0, 0.0, 1.0, -3.0).unwrap();
        assert!(matches!(
            build_nu(&bc, 3.0),
            Err(Error::DegenerateLift { .. })
        ));

        assert!(build_nu(&BoundaryConditions::new(1.0, 0.0, 0.0, 1.0).unwrap(), 2.5).is_err());
    }

    #[test]
    fn nu_satisfies_both_boundary_rows() {
        for (a1, b1) in [(0.0, 1.0), (1.0, 1.0), (2.0, -1.0)] {
            let bc = BoundaryConditions::new(1.0, 0.5, a1, b1).unwrap();
            let nu = build_nu(&bc, 3.0).unwrap().as_smooth().unwrap();
            assert_relative_eq!(
                boundary_trace(&bc, &nu).unwrap(),
                1.0,
                max_relative = 1e-12
            );
            assert_eq!(left_bc_residual(&bc, &nu).unwrap(), 0.0);
        }
    }

    #[test]
    fn derivative_validation_rejects_mismatch() {
        assert!(SmoothFunction::parse("x^3", "x^2", "6*x").is_err());
        assert!(SmoothFunction::parse("x^3", "3*x^2", "5*x").is_err());
        assert!(SmoothFunction::parse("cos(pi*x)", "-pi*sin(pi*x)", "-pi^2*cos(pi*x)").is_ok());
    }

    #[test]
    fn apply_p_smooth_example1_cubic() {
        let (spec, _, _) = model::make_example1().unwrap();
        let xi = cubic();
        // all four terms vanish at 0
        assert_eq!(apply_p_smooth(&spec, &xi, 0.0).unwrap(), 0.0);
        // theta(1)*6 + sigma(1)*3 + lambda(1)*1 + int_0^1 s^3 ds
        //   = 12 + sin(5 pi)*3 + 2 + 1/4
        let v = apply_p_smooth(&spec, &xi, 1.0).unwrap();
        let expected = 2.0 * 6.0 + (5.0 * std::f64::consts::PI).sin() * 3.0 + 2.0 + 0.25;
        assert_relative_eq!(v, expected, max_relative = 1e-12);
        assert_relative_eq!(v, 14.25, max_relative = 1e-12);
    }

    #[test]
    fn apply_p_smooth_is_linear() {
        let (spec, _, _) = model::make_example1().unwrap();
        let xi = cubic();
        let eta = SmoothFunction::parse("cos(pi*x)", "-pi*sin(pi*x)", "-pi^2*cos(pi*x)").unwrap();
        let (a, b) = (1.7, -0.3);
        let combo = SmoothFunction::parse(
            "1.7*x^3-0.3*cos(pi*x)",
            "1.7*3*x^2+0.3*pi*sin(pi*x)",
            "1.7*6*x+0.3*pi^2*cos(pi*x)",
        )
        .unwrap();
        for x in [0.2, 0.5, 0.9] {
            let lhs = apply_p_smooth(&spec, &combo, x).unwrap();
            let rhs = a * apply_p_smooth(&spec, &xi, x).unwrap()
                + b * apply_p_smooth(&spec, &eta, x).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn quadrature_matches_antiderivative() {
        // phi == 1 and polynomial xi: int_0^x s^3 ds = x^4/4
        for x in [0.1, 0.33, 0.75, 1.0] {
            let q = integrate(|s| Ok(s * s * s), x).unwrap();
            assert!((q - x.powi(4) / 4.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn boundary_trace_cases() {
        let bc = BoundaryConditions::new(1.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(boundary_trace(&bc, &cubic()).unwrap(), 1.0);
        let bc = BoundaryConditions::new(1.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(boundary_trace(&bc, &cubic()).unwrap(), 3.0);
    }
}
