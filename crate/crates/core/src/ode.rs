//! Time integration of the semi-discrete system and a dense matrix
//! exponential used as the internal oracle and by the property checks.
//!
//! The system `v' = P_n v + B_n f(t)` is stiff (`||L_n|| ~ h^{-2}`), so the
//! integrator is Crank-Nicolson with a fixed uniform step: the left-hand
//! matrix `I - (dt/2) P_n` is LU-factored once and reused for every step.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

use crate::disc::{Discretization, Grid};
use crate::error::{Error, Result};
use crate::linalg::norm_1;
use crate::model::InputSignal;

/// Dense guard for [`expm_dense`].
pub const EXPM_DENSE_GUARD: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    CrankNicolson,
}

/// Step and sampling counts for [`simulate`]. Sample times must land
/// exactly on step boundaries, so `step_count` has to be a multiple of
/// `sample_count - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegratorConfig {
    pub step_count: usize,
    pub scheme: Scheme,
    pub sample_count: usize,
}

impl IntegratorConfig {
    pub fn new(step_count: usize, sample_count: usize) -> Result<Self> {
        if sample_count < 2 {
            return Err(Error::Invalid {
                what: "integrator config",
                why: "sample_count must be at least 2 (initial and final time)".into(),
            });
        }
        if step_count < sample_count - 1 {
            return Err(Error::Invalid {
                what: "integrator config",
                why: format!(
                    "step_count = {step_count} < sample_count - 1 = {}",
                    sample_count - 1
                ),
            });
        }
        if !step_count.is_multiple_of(sample_count - 1) {
            return Err(Error::Invalid {
                what: "integrator config",
                why: format!(
                    "step_count = {step_count} is not divisible by sample_count - 1 = {}; \
                     sample times must fall on step boundaries",
                    sample_count - 1
                ),
            });
        }
        Ok(IntegratorConfig {
            step_count,
            scheme: Scheme::CrankNicolson,
            sample_count,
        })
    }
}

/// States of the semi-discrete system at the sample times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub input_used: String,
}

impl Trajectory {
    /// CSV export: header `t,v1,...,vn`, one row per sample time,
    /// 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t")?;
        for j in 1..=self.grid.n() {
            write!(w, ",v{j}")?;
        }
        writeln!(w)?;
        for (t, state) in self.times.iter().zip(self.states.iter()) {
            write!(w, "{t:.16e}")?;
            for v in state.iter() {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Integrates `v' = P_n v + B_n f(t)` from `v0` over `[0, t_final]` with
/// Crank-Nicolson and the trapezoidal source term
/// `(I - dt/2 P) v_{k+1} = (I + dt/2 P) v_k + (dt/2)(B f(t_k) + B f(t_{k+1}))`.
pub fn simulate(
    d: &Discretization,
    v0: &DVector<f64>,
    f: &InputSignal,
    t_final: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let n = d.grid().n();
    if v0.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: v0.len(),
        });
    }
    if t_final.is_nan() || t_final <= 0.0 {
        return Err(Error::Invalid {
            what: "time horizon",
            why: format!("t_final = {t_final} must be positive"),
        });
    }
    let steps = cfg.step_count;
    let dt = t_final / steps as f64;
    let p = d.pn_dense();
    let identity = DMatrix::<f64>::identity(n, n);
    let m_plus = &identity + &p * (dt / 2.0);
    let m_minus = identity - &p * (dt / 2.0);
    let lu = m_minus.lu();
    let b = d.bn();
    let scale_n = Some(n);

    let stride = steps / (cfg.sample_count - 1);
    let time_at = |k: usize| t_final * k as f64 / steps as f64;

    let mut times = Vec::with_capacity(cfg.sample_count);
    let mut states = Vec::with_capacity(cfg.sample_count);
    times.push(0.0);
    states.push(v0.clone());

    let mut v = v0.clone();
    let mut f_left = f.eval(0.0, scale_n)?;
    for k in 0..steps {
        let f_right = f.eval(time_at(k + 1), scale_n)?;
        let mut rhs = &m_plus * &v;
        rhs += &b * ((dt / 2.0) * (f_left + f_right));
        v = lu
            .solve(&rhs)
            .ok_or(Error::SingularStepMatrix { step_count: steps })?;
        f_left = f_right;
        if (k + 1) % stride == 0 {
            times.push(time_at(k + 1));
            states.push(v.clone());
        }
    }
    debug_assert_eq!(states.len(), cfg.sample_count);
    debug_assert_eq!(*times.last().unwrap(), t_final);

    Ok(Trajectory {
        grid: *d.grid(),
        times,
        states,
        input_used: format!("{} [n={n}]", f.describe()),
    })
}

// Pade-13 numerator coefficients for the matrix exponential.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const PADE13_THETA: f64 = 5.371920351148152;

/// `exp(A t)` by scaling-and-squaring with the degree-13 Pade approximant;
/// the scaling power is chosen from the 1-norm of `A t`.
pub fn expm_dense(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Invalid {
            what: "matrix exponential",
            why: format!("matrix is {}x{}, need square", a.nrows(), a.ncols()),
        });
    }
    if n > EXPM_DENSE_GUARD {
        return Err(Error::SizeGuard {
            op: "expm_dense",
            n,
            limit: EXPM_DENSE_GUARD,
        });
    }
    if t.is_nan() || t < 0.0 {
        return Err(Error::Invalid {
            what: "matrix exponential",
            why: format!("t = {t} must be nonnegative"),
        });
    }
    if t == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let mut m = a * t;
    let scale_norm = norm_1(&m);
    if !scale_norm.is_finite() {
        return Err(Error::Invalid {
            what: "matrix exponential",
            why: "non-finite entries in A*t".into(),
        });
    }
    let squarings = if scale_norm > PADE13_THETA {
        (scale_norm / PADE13_THETA).log2().ceil() as u32
    } else {
        0
    };
    m /= 2f64.powi(squarings as i32);

    let identity = DMatrix::<f64>::identity(n, n);
    let m2 = &m * &m;
    let m4 = &m2 * &m2;
    let m6 = &m4 * &m2;
    let b = &PADE13;
    let u_inner = &m6 * (&m6 * b[13] + &m4 * b[11] + &m2 * b[9])
        + &m6 * b[7]
        + &m4 * b[5]
        + &m2 * b[3]
        + &identity * b[1];
    let u = &m * u_inner;
    let v = &m6 * (&m6 * b[12] + &m4 * b[10] + &m2 * b[8])
        + &m6 * b[6]
        + &m4 * b[4]
        + &m2 * b[2]
        + &identity * b[0];

    let denom = &v - &u;
    let numer = v + u;
    let mut result = denom.lu().solve(&numer).ok_or(Error::Invalid {
        what: "matrix exponential",
        why: "Pade denominator is singular".into(),
    })?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disc::{assemble, Grid};
    use crate::gridops::{norm_inf, restrict};
    use crate::model::{self, InputSignal};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(99, 101).is_err());
        assert!(IntegratorConfig::new(100, 101).is_ok());
        assert!(IntegratorConfig::new(4096, 101).is_err());
        assert!(IntegratorConfig::new(4000, 101).is_ok());
        assert!(IntegratorConfig::new(4096, 2).is_ok());
        assert!(IntegratorConfig::new(4096, 65).is_ok());
        assert!(IntegratorConfig::new(10, 1).is_err());
    }

    #[test]
    fn expm_scalar_case() {
        let a = DMatrix::from_row_slice(1, 1, &[-2.0]);
        let e = expm_dense(&a, 0.5).unwrap();
        assert_relative_eq!(e[(0, 0)], (-1.0f64).exp(), max_relative = 1e-13);
    }

    #[test]
    fn expm_zero_matrix_is_identity() {
        let a = DMatrix::zeros(4, 4);
        let e = expm_dense(&a, 3.7).unwrap();
        assert_eq!(e, DMatrix::identity(4, 4));
        let e0 = expm_dense(&DMatrix::from_row_slice(1, 1, &[5.0]), 0.0).unwrap();
        assert_eq!(e0[(0, 0)], 1.0);
    }

    #[test]
    fn expm_semigroup_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = DMatrix::from_fn(8, 8, |_, _| rng.gen_range(-1.0..1.0));
        let (t1, t2) = (0.4, 0.9);
        let combined = expm_dense(&a, t1 + t2).unwrap();
        let product = expm_dense(&a, t1).unwrap() * expm_dense(&a, t2).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_relative_eq!(
                    combined[(i, j)],
                    product[(i, j)],
                    max_relative = 1e-9,
                    epsilon = 1e-11
                );
            }
        }
    }

    #[test]
    fn expm_size_guard() {
        let a = DMatrix::zeros(1025, 1025);
        assert!(matches!(
            expm_dense(&a, 1.0),
            Err(Error::SizeGuard {
                op: "expm_dense",
                n: 1025,
                ..
            })
        ));
    }

    #[test]
    fn zero_data_stays_zero() {
        let (spec, _, _) = model::make_example1().unwrap();
        let d = assemble(&spec, &Grid::new(5).unwrap()).unwrap();
        let f = InputSignal::parse("0").unwrap();
        let cfg = IntegratorConfig::new(64, 5).unwrap();
        let traj = simulate(&d, &DVector::zeros(5), &f, 1.0, &cfg).unwrap();
        assert_eq!(traj.times.len(), 5);
        assert_eq!(traj.times[0], 0.0);
        assert_eq!(*traj.times.last().unwrap(), 1.0);
        for state in &traj.states {
            assert_eq!(norm_inf(state), 0.0);
        }
    }

    #[test]
    fn states_start_at_initial_vector() {
        let (spec, u0, input) = model::make_example1().unwrap();
        let d = assemble(&spec, &Grid::new(7).unwrap()).unwrap();
        let v0 = restrict(|x| u0.eval(x), d.grid()).unwrap();
        let cfg = IntegratorConfig::new(128, 9).unwrap();
        let traj = simulate(&d, &v0, &input, 1.0, &cfg).unwrap();
        assert_eq!(traj.states[0], v0);
        assert!(traj.states.iter().all(|s| s.iter().all(|x| x.is_finite())));
    }

    /// Duhamel oracle: exp((T/panels) * [[P, B], [0, 0]]) advances the state
    /// with a piecewise-constant (midpoint) input; 2^16 panels push the
    /// input-quadrature error far below the tolerances checked here.
    fn duhamel_oracle(
        d: &Discretization,
        v0: &DVector<f64>,
        f: impl Fn(f64) -> f64,
        t_final: f64,
        panels: usize,
    ) -> DVector<f64> {
        let n = d.grid().n();
        let mut aug = DMatrix::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&d.pn_dense());
        aug.view_mut((0, n), (n, 1)).copy_from(&d.bn());
        let delta = t_final / panels as f64;
        let e = expm_dense(&aug, delta).unwrap();
        let ep = e.view((0, 0), (n, n)).into_owned();
        let phib = e.view((0, n), (n, 1)).into_owned();
        let mut w = v0.clone();
        for k in 0..panels {
            let t_mid = (k as f64 + 0.5) * delta;
            w = &ep * w + &phib * f(t_mid);
        }
        w
    }

    #[test]
    fn crank_nicolson_matches_duhamel_oracle() {
        let (spec, u0, _) = model::make_example1().unwrap();
        let d = assemble(&spec, &Grid::new(3).unwrap()).unwrap();
        let v0 = restrict(|x| u0.eval(x), d.grid()).unwrap();
        // unscaled input so the oracle closure sees the same signal
        let f = InputSignal::parse("exp(-t)*sin(pi*t)").unwrap();
        let cfg = IntegratorConfig::new(4096, 2).unwrap();
        let traj = simulate(&d, &v0, &f, 1.0, &cfg).unwrap();
        let oracle = duhamel_oracle(
            &d,
            &v0,
            |t| (-t).exp() * (std::f64::consts::PI * t).sin(),
            1.0,
            1 << 16,
        );
        let err = norm_inf(&(traj.states.last().unwrap() - oracle));
        assert!(err <= 1e-6, "CN vs Duhamel oracle: {err}");
    }

    #[test]
    fn step_halving_shows_second_order() {
        let (spec, u0, _) = model::make_example1().unwrap();
        let d = assemble(&spec, &Grid::new(3).unwrap()).unwrap();
        let v0 = restrict(|x| u0.eval(x), d.grid()).unwrap();
        let f = InputSignal::parse("exp(-t)*sin(pi*t)").unwrap();
        let run = |steps: usize| {
            let cfg = IntegratorConfig::new(steps, 2).unwrap();
            simulate(&d, &v0, &f, 1.0, &cfg)
                .unwrap()
                .states
                .last()
                .unwrap()
                .clone()
        };
        let (v2048, v4096, v8192) = (run(2048), run(4096), run(8192));
        let ratio = norm_inf(&(&v2048 - &v4096)) / norm_inf(&(&v4096 - &v8192));
        assert!(
            (3.5..=4.5).contains(&ratio),
            "step-halving ratio {ratio} outside [3.5, 4.5]"
        );
    }

    #[test]
    fn simulate_is_linear_in_initial_state_and_input() {
        let (spec, u0, _) = model::make_example1().unwrap();
        let d = assemble(&spec, &Grid::new(6).unwrap()).unwrap();
        let v0 = restrict(|x| u0.eval(x), d.grid()).unwrap();
        let f = InputSignal::parse("exp(-t)*sin(pi*t)").unwrap();
        let fa = InputSignal::parse("2.5*(exp(-t)*sin(pi*t))").unwrap();
        let cfg = IntegratorConfig::new(256, 3).unwrap();
        let base = simulate(&d, &v0, &f, 1.0, &cfg).unwrap();
        let scaled = simulate(&d, &(&v0 * 2.5), &fa, 1.0, &cfg).unwrap();
        for (s, b) in scaled.states.iter().zip(base.states.iter()) {
            let diff = norm_inf(&(s - b * 2.5));
            let mag = norm_inf(s).max(1.0);
            assert!(diff <= 1e-10 * mag, "linearity violated: {diff}");
        }
    }

    #[test]
    fn duhamel_closed_form_for_constant_input() {
        let (spec, _, _) = model::make_example1().unwrap();
        for n in [4usize, 12, 32] {
            let d = assemble(&spec, &Grid::new(n).unwrap()).unwrap();
            let c = 0.7;
            let f = InputSignal::parse("0.7").unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let v0 = DVector::from_fn(n, |_, _| rng.gen_range(-0.5..0.5));
            let cfg = IntegratorConfig::new(4096, 2).unwrap();
            let traj = simulate(&d, &v0, &f, 1.0, &cfg).unwrap();

            let p = d.pn_dense();
            let e = expm_dense(&p, 1.0).unwrap();
            let rhs = (&e - DMatrix::<f64>::identity(n, n)) * (d.bn() * c);
            let steady = p.lu().solve(&rhs).expect("P_n invertible here");
            let closed_form = steady + e * v0;
            let err = norm_inf(&(traj.states.last().unwrap() - closed_form));
            assert!(err <= 1e-7, "n = {n}: Duhamel closed form error {err}");
        }
    }

    #[test]
    fn trajectory_csv_format() {
        let (spec, _, _) = model::make_example1().unwrap();
        let d = assemble(&spec, &Grid::new(3).unwrap()).unwrap();
        let f = InputSignal::parse("0").unwrap();
        let cfg = IntegratorConfig::new(4, 3).unwrap();
        let traj = simulate(&d, &DVector::zeros(3), &f, 1.0, &cfg).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,v1,v2,v3");
        assert_eq!(lines.count(), 3);
    }
}
