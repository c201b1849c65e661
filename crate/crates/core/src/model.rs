//! Problem specification: piecewise-smooth coefficients, smooth Volterra
//! kernel, Robin boundary parameters, input signals and initial states for
//!
//! ```text
//! u_t = theta(x) u_xx + sigma(x) u_x + lambda(x) u + int_0^x phi(x, s) u(s, t) ds
//! alpha0 u_x(0,t) + beta0 u(0,t) = 0,   alpha1 u_x(1,t) + beta1 u(1,t) = f(t)
//! ```

use crate::error::{Error, Result};
use crate::expr::{self, Bindings, Expr, Var};

/// Number of lattice points used to validate positivity of `theta`.
const THETA_LATTICE: usize = 10_000;
/// Per-axis resolution of the lattice behind [`Kernel::sup_bound`].
const KERNEL_LATTICE: usize = 256;

/// A function on `[0, 1]` given by expressions on half-open pieces
/// `[a_i, a_{i+1})`; the last piece is closed at 1. The value at a
/// breakpoint always comes from the right-hand piece.
#[derive(Debug, Clone)]
pub struct PiecewiseFunction {
    breakpoints: Vec<f64>,
    pieces: Vec<Expr>,
}

impl PiecewiseFunction {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Expr>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(invalid("piecewise function", "need at least two breakpoints"));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(invalid("piecewise function", "breakpoints must span [0, 1]"));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(invalid(
                "piecewise function",
                "breakpoints must be strictly increasing",
            ));
        }
        if pieces.len() != breakpoints.len() - 1 {
            return Err(invalid(
                "piecewise function",
                "need exactly one piece per breakpoint interval",
            ));
        }
        for piece in &pieces {
            let used = piece.uses();
            if used[Var::Y as usize] || used[Var::T as usize] {
                return Err(invalid(
                    "piecewise function",
                    "pieces may only use the variable x",
                ));
            }
        }
        Ok(PiecewiseFunction {
            breakpoints,
            pieces,
        })
    }

    pub fn from_strs(breakpoints: &[f64], pieces: &[&str]) -> Result<Self> {
        let parsed = pieces
            .iter()
            .map(|p| expr::parse(p).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        Self::new(breakpoints.to_vec(), parsed)
    }

    pub fn constant(value: f64) -> Self {
        PiecewiseFunction {
            breakpoints: vec![0.0, 1.0],
            pieces: vec![Expr::Num(value)],
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(invalid("evaluation point", format!("x = {x} outside [0, 1]")));
        }
        let idx = if x >= *self.breakpoints.last().unwrap() {
            self.pieces.len() - 1
        } else {
            self.breakpoints.partition_point(|&a| a <= x) - 1
        };
        Ok(self.pieces[idx].eval(&Bindings::x(x))?)
    }

    /// Breakpoints strictly inside (0, 1), i.e. the candidate points of
    /// non-differentiability contributed by this coefficient.
    pub fn interior_breakpoints(&self) -> &[f64] {
        &self.breakpoints[1..self.breakpoints.len() - 1]
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Expr] {
        &self.pieces
    }
}

/// Smooth kernel `phi(x, y)` on the unit square, with a cached lattice
/// supremum of `|phi|` used by the discrete kernel-matrix bound.
#[derive(Debug, Clone)]
pub struct Kernel {
    expr: Expr,
    sup_bound: f64,
}

impl Kernel {
    pub fn new(expr: Expr) -> Result<Self> {
        if expr.uses()[Var::T as usize] {
            return Err(invalid("kernel", "may only use the variables x and y"));
        }
        let mut sup = 0.0f64;
        let denom = (KERNEL_LATTICE - 1) as f64;
        for i in 0..KERNEL_LATTICE {
            for j in 0..KERNEL_LATTICE {
                let v = expr.eval(&Bindings::xy(i as f64 / denom, j as f64 / denom))?;
                if !v.is_finite() {
                    return Err(invalid("kernel", "must evaluate finitely on [0,1]^2"));
                }
                sup = sup.max(v.abs());
            }
        }
        Ok(Kernel {
            expr,
            sup_bound: sup,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::new(expr::parse(text)?)
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.expr.eval(&Bindings::xy(x, y))?)
    }

    /// Supremum of `|phi|` over a 256x256 lattice on the unit square.
    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }
}

/// Robin parameters `alpha0 u_x(0) + beta0 u(0) = 0` and
/// `alpha1 u_x(1) + beta1 u(1) = f(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryConditions {
    pub alpha0: f64,
    pub beta0: f64,
    pub alpha1: f64,
    pub beta1: f64,
}

impl BoundaryConditions {
    pub fn new(alpha0: f64, beta0: f64, alpha1: f64, beta1: f64) -> Result<Self> {
        for v in [alpha0, beta0, alpha1, beta1] {
            if !v.is_finite() {
                return Err(invalid("boundary conditions", "parameters must be finite"));
            }
        }
        if alpha0 == 0.0 && beta0 == 0.0 {
            return Err(invalid("boundary conditions", "(alpha0, beta0) = (0, 0)"));
        }
        if alpha1 == 0.0 && beta1 == 0.0 {
            return Err(invalid("boundary conditions", "(alpha1, beta1) = (0, 0)"));
        }
        Ok(BoundaryConditions {
            alpha0,
            beta0,
            alpha1,
            beta1,
        })
    }
}

/// The full problem data of the PIDE.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub theta: PiecewiseFunction,
    pub sigma: PiecewiseFunction,
    pub lambda: PiecewiseFunction,
    pub phi: Kernel,
    pub bc: BoundaryConditions,
}

impl ProblemSpec {
    /// Builds a spec, rejecting diffusion coefficients whose minimum over a
    /// 10^4-point lattice is not strictly positive.
    pub fn new(
        theta: PiecewiseFunction,
        sigma: PiecewiseFunction,
        lambda: PiecewiseFunction,
        phi: Kernel,
        bc: BoundaryConditions,
    ) -> Result<Self> {
        let denom = (THETA_LATTICE - 1) as f64;
        for i in 0..THETA_LATTICE {
            let x = i as f64 / denom;
            let v = theta.eval(x)?;
            if v.is_nan() || v <= 0.0 {
                return Err(invalid(
                    "problem spec",
                    format!("theta({x}) = {v} <= 0; need inf theta > 0"),
                ));
            }
        }
        Ok(ProblemSpec {
            theta,
            sigma,
            lambda,
            phi,
            bc,
        })
    }
}

/// Union of the interior breakpoints of `theta`, `sigma` and `lambda`:
/// the set of all points where some coefficient may fail to be
/// differentiable. Deduplicated exactly (breakpoints are exact inputs).
pub fn breakpoint_set(spec: &ProblemSpec) -> Vec<f64> {
    let mut points: Vec<f64> = spec
        .theta
        .interior_breakpoints()
        .iter()
        .chain(spec.sigma.interior_breakpoints())
        .chain(spec.lambda.interior_breakpoints())
        .copied()
        .collect();
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();
    points
}

/// Boundary input `f` (or the grid-dependent `f_n`): an expression in `t`,
/// an optional `(1 - 1/n)` scale applied per grid size, and a list of times
/// where the signal is an exact zero by definition (removable singularities).
#[derive(Debug, Clone)]
pub struct InputSignal {
    expr: Expr,
    scale_with_n: bool,
    exact_zeros: Vec<f64>,
}

impl InputSignal {
    pub fn new(expr: Expr) -> Result<Self> {
        let used = expr.uses();
        if used[Var::X as usize] || used[Var::Y as usize] {
            return Err(invalid("input signal", "may only use the variable t"));
        }
        Ok(InputSignal {
            expr,
            scale_with_n: false,
            exact_zeros: Vec::new(),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::new(expr::parse(text)?)
    }

    /// Apply the `(1 - 1/n)` factor when evaluated for grid size `n`.
    pub fn scaled_with_n(mut self) -> Self {
        self.scale_with_n = true;
        self
    }

    /// Declare times at which the signal is exactly zero, bypassing
    /// expression evaluation there.
    pub fn with_exact_zeros(mut self, zeros: &[f64]) -> Self {
        self.exact_zeros = zeros.to_vec();
        self
    }

    pub fn eval(&self, t: f64, n: Option<usize>) -> Result<f64> {
        if self.exact_zeros.contains(&t) {
            return Ok(0.0);
        }
        let mut v = self.expr.eval(&Bindings::t(t))?;
        if self.scale_with_n {
            if let Some(n) = n {
                v *= 1.0 - 1.0 / n as f64;
            }
        }
        Ok(v)
    }

    pub fn describe(&self) -> String {
        let mut s = self.expr.to_string();
        if self.scale_with_n {
            s = format!("(1-1/n)*({s})");
        }
        if !self.exact_zeros.is_empty() {
            s.push_str(&format!(" with exact zeros at {:?}", self.exact_zeros));
        }
        s
    }
}

/// Initial state `u_0` in `PC[0,1]`: a half-open piecewise function plus
/// explicit values at finitely many points. The overrides express states
/// whose value at a jump differs from the right-hand limit, e.g. a step
/// supported on an open interval.
#[derive(Debug, Clone)]
pub struct InitialState {
    shape: PiecewiseFunction,
    point_values: Vec<(f64, f64)>,
}

impl InitialState {
    pub fn new(shape: PiecewiseFunction) -> Self {
        InitialState {
            shape,
            point_values: Vec::new(),
        }
    }

    pub fn zero() -> Self {
        InitialState::new(PiecewiseFunction::constant(0.0))
    }

    pub fn with_point_value(mut self, x: f64, value: f64) -> Self {
        self.point_values.push((x, value));
        self
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        for &(px, pv) in &self.point_values {
            if px == x {
                return Ok(pv);
            }
        }
        self.shape.eval(x)
    }

    pub fn point_values(&self) -> &[(f64, f64)] {
        &self.point_values
    }
}

fn shared_example_spec() -> Result<ProblemSpec> {
    let theta = PiecewiseFunction::from_strs(&[0.0, 0.5, 1.0], &["1+x", "2"])?;
    let sigma = PiecewiseFunction::from_strs(&[0.0, 0.3, 1.0], &["2-2*x", "sin(5*pi*x)"])?;
    let lambda = PiecewiseFunction::from_strs(&[0.0, 0.7, 1.0], &["exp(-5*x)", "2*x^4"])?;
    let phi = Kernel::parse("1")?;
    let bc = BoundaryConditions::new(1.0, 0.0, 0.0, 1.0)?;
    ProblemSpec::new(theta, sigma, lambda, phi, bc)
}

/// First built-in experiment: step initial state supported on the open
/// interval (0.3, 0.7) and input `f_n(t) = (1 - 1/n) e^{-t} sin(pi t)`.
pub fn make_example1() -> Result<(ProblemSpec, InitialState, InputSignal)> {
    let spec = shared_example_spec()?;
    let shape = PiecewiseFunction::from_strs(&[0.0, 0.3, 0.7, 1.0], &["0", "0.5", "0"])?;
    // The state is 0.5 on the open interval: the value at 0.3 is 0, which
    // the half-open convention alone cannot express.
    let u0 = InitialState::new(shape).with_point_value(0.3, 0.0);
    let input = InputSignal::parse("exp(-t)*sin(pi*t)")?.scaled_with_n();
    Ok((spec, u0, input))
}

/// Second built-in experiment: zero initial state and the flat input
/// `f_n(t) = (1 - 1/n) e^{-(5t-5t^2)^{-2}}` with `f_n(0) = f_n(1) = 0`.
pub fn make_example2() -> Result<(ProblemSpec, InitialState, InputSignal)> {
    let spec = shared_example_spec()?;
    let u0 = InitialState::zero();
    let input = InputSignal::parse("exp(-(5*t-5*t^2)^(-2))")?
        .scaled_with_n()
        .with_exact_zeros(&[0.0, 1.0]);
    Ok((spec, u0, input))
}

fn invalid(what: &'static str, why: impl Into<String>) -> Error {
    Error::Invalid {
        what,
        why: why.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn half_open_convention_at_breakpoints() {
        let (spec, _, _) = make_example1().unwrap();
        // value at a breakpoint equals the right piece's expression
        assert_eq!(spec.theta.eval(0.5).unwrap(), 2.0);
        assert_relative_eq!(spec.theta.eval(0.25).unwrap(), 1.25);
        assert_eq!(spec.theta.eval(1.0).unwrap(), 2.0);
        assert_relative_eq!(
            spec.sigma.eval(0.3).unwrap(),
            (1.5 * std::f64::consts::PI).sin(),
            max_relative = 1e-15
        );
        assert_relative_eq!(spec.sigma.eval(0.3).unwrap(), -1.0, max_relative = 1e-12);
        // midpoints evaluate to the piece expression
        assert_relative_eq!(spec.sigma.eval(0.1).unwrap(), 1.8);
        assert_relative_eq!(spec.lambda.eval(0.2).unwrap(), (-1.0f64).exp());
        assert_relative_eq!(spec.lambda.eval(0.8).unwrap(), 2.0 * 0.8f64.powi(4));
    }

    #[test]
    fn example1_data() {
        let (spec, u0, input) = make_example1().unwrap();
        assert_eq!(spec.theta.eval(0.75).unwrap(), 2.0);
        // step initial state: zero at both edges of the open support
        assert_eq!(u0.eval(0.3).unwrap(), 0.0);
        assert_eq!(u0.eval(0.7).unwrap(), 0.0);
        assert_eq!(u0.eval(0.5).unwrap(), 0.5);
        assert_eq!(u0.eval(0.0).unwrap(), 0.0);
        assert_eq!(u0.eval(1.0).unwrap(), 0.0);
        // f_n(t) = (1-1/n) e^{-t} sin(pi t)
        let v = input.eval(0.25, Some(10)).unwrap();
        let expected = 0.9 * (-0.25f64).exp() * (std::f64::consts::PI * 0.25).sin();
        assert_relative_eq!(v, expected, max_relative = 1e-15);
        // without a grid size the unscaled input is returned
        let v = input.eval(0.25, None).unwrap();
        assert_relative_eq!(v, expected / 0.9, max_relative = 1e-15);
    }

    #[test]
    fn example2_data() {
        let (_, u0, input) = make_example2().unwrap();
        assert_eq!(input.eval(0.0, Some(17)).unwrap(), 0.0);
        assert_eq!(input.eval(1.0, Some(17)).unwrap(), 0.0);
        // hand evaluation at t = 0.5: 5t - 5t^2 = 1.25, (1.25)^-2 = 0.64
        let v = input.eval(0.5, Some(10)).unwrap();
        assert_relative_eq!(v, 0.9 * (-0.64f64).exp(), max_relative = 1e-14);
        for x in [0.0, 0.123, 0.5, 1.0] {
            assert_eq!(u0.eval(x).unwrap(), 0.0);
        }
    }

    #[test]
    fn breakpoint_sets() {
        let (spec, _, _) = make_example1().unwrap();
        assert_eq!(breakpoint_set(&spec), vec![0.3, 0.5, 0.7]);

        let constant = ProblemSpec::new(
            PiecewiseFunction::constant(1.0),
            PiecewiseFunction::constant(0.0),
            PiecewiseFunction::constant(0.0),
            Kernel::parse("0").unwrap(),
            BoundaryConditions::new(1.0, 0.0, 0.0, 1.0).unwrap(),
        )
        .unwrap();
        assert!(breakpoint_set(&constant).is_empty());

        let dup = ProblemSpec::new(
            PiecewiseFunction::from_strs(&[0.0, 0.5, 1.0], &["1", "2"]).unwrap(),
            PiecewiseFunction::constant(0.0),
            PiecewiseFunction::from_strs(&[0.0, 0.5, 1.0], &["x", "0"]).unwrap(),
            Kernel::parse("0").unwrap(),
            BoundaryConditions::new(1.0, 0.0, 0.0, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(breakpoint_set(&dup), vec![0.5]);
    }

    #[test]
    fn rejects_nonpositive_theta() {
        let theta = PiecewiseFunction::from_strs(&[0.0, 1.0], &["x-0.5"]).unwrap();
        let err = ProblemSpec::new(
            theta,
            PiecewiseFunction::constant(0.0),
            PiecewiseFunction::constant(0.0),
            Kernel::parse("1").unwrap(),
            BoundaryConditions::new(1.0, 0.0, 0.0, 1.0).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Invalid { what: "problem spec", .. }));
    }

    #[test]
    fn piecewise_validation() {
        assert!(PiecewiseFunction::from_strs(&[0.0, 0.5], &["1"]).is_err());
        assert!(PiecewiseFunction::from_strs(&[0.0, 0.5, 0.5, 1.0], &["1", "2", "3"]).is_err());
        assert!(PiecewiseFunction::from_strs(&[0.0, 1.0], &["t"]).is_err());
        assert!(PiecewiseFunction::from_strs(&[0.0, 1.0], &["1", "2"]).is_err());
        let f = PiecewiseFunction::from_strs(&[0.0, 1.0], &["x"]).unwrap();
        assert!(f.eval(1.5).is_err());
    }

    #[test]
    fn boundary_condition_validation() {
        assert!(BoundaryConditions::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BoundaryConditions::new(1.0, 0.0, 0.0, 0.0).is_err());
        assert!(BoundaryConditions::new(0.0, 1.0, 0.0, 1.0).is_ok());
    }

    #[test]
    fn kernel_sup_bound() {
        let k = Kernel::parse("1").unwrap();
        assert_eq!(k.sup_bound(), 1.0);
        let k = Kernel::parse("x*y").unwrap();
        assert_eq!(k.sup_bound(), 1.0);
        let k = Kernel::parse("2-x").unwrap();
        assert_eq!(k.sup_bound(), 2.0);
    }
}
