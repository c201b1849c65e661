//! Assembly of the semi-discrete system
//!
//! ```text
//! v_n'(t) = P_n v_n(t) + B_n f_n(t),    P_n = Theta_n L_n + Sigma_n D_n + Lambda_n + Phi_n
//! ```
//!
//! on the uniform interior grid `x_j = j h`, `h = 1/(n+1)`. `L_n` is the
//! second-difference matrix with Robin-corrected first and last rows, `D_n`
//! the backward-difference matrix, `Phi_n` the Riemann-sum kernel matrix and
//! `B_n` the boundary-input vector. Matrices are stored structure-aware
//! (tridiagonal + lower-triangular) with dense exports for oracles.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{BoundaryConditions, PiecewiseFunction, ProblemSpec};

/// Smallest grid the boundary stencils support: the first, interior and
/// last rows of `L_n` must be distinct.
pub const MIN_ASSEMBLY_N: usize = 3;

/// Uniform interior grid on (0, 1) with `n` nodes and spacing `h = 1/(n+1)`.
///
/// Nodes and cell edges are both computed as `j / (n+1)` so that a node
/// coinciding with a rational coefficient breakpoint (e.g. `x = 0.3` for
/// `n = 9`) hits it exactly in floating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid {
                what: "grid",
                why: "n must be positive".into(),
            });
        }
        Ok(Grid {
            n,
            h: 1.0 / (n + 1) as f64,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Interior node `x_j = j h` for `j = 1..=n`.
    pub fn node(&self, j: usize) -> f64 {
        debug_assert!((1..=self.n).contains(&j));
        j as f64 / (self.n + 1) as f64
    }

    /// Cell edge `j / (n+1)` for `j = 0..=n+1`; `edge(j) == node(j)` for
    /// interior indices.
    pub fn edge(&self, j: usize) -> f64 {
        debug_assert!(j <= self.n + 1);
        j as f64 / (self.n + 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.n).map(|j| self.node(j)).collect()
    }
}

/// The four boundary scalars of the Robin-corrected stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryScalars {
    pub r0: f64,
    pub r1: f64,
    pub q0: f64,
    pub b_n: f64,
}

/// Computes `r0 = a0/(3a0 - 2h b0)`, `r1 = a1/(3a1 + 2h b1)`,
/// `q0 = -b0/(a0 - h b0)` and `b_n = 2h theta(nh)/(3a1 + 2h b1)`,
/// rejecting grids where a denominator vanishes.
pub fn boundary_scalars(
    bc: &BoundaryConditions,
    theta: &PiecewiseFunction,
    grid: &Grid,
) -> Result<BoundaryScalars> {
    let h = grid.h();
    let n = grid.n();
    let den_r0 = 3.0 * bc.alpha0 - 2.0 * h * bc.beta0;
    if den_r0 == 0.0 {
        return Err(Error::DegenerateBoundary {
            denominator: "3*alpha0 - 2*h*beta0",
            n,
        });
    }
    let den_q0 = bc.alpha0 - h * bc.beta0;
    if den_q0 == 0.0 {
        return Err(Error::DegenerateBoundary {
            denominator: "alpha0 - h*beta0",
            n,
        });
    }
    let den_r1 = 3.0 * bc.alpha1 + 2.0 * h * bc.beta1;
    if den_r1 == 0.0 {
        return Err(Error::DegenerateBoundary {
            denominator: "3*alpha1 + 2*h*beta1",
            n,
        });
    }
    let scalars = BoundaryScalars {
        r0: bc.alpha0 / den_r0,
        r1: bc.alpha1 / den_r1,
        q0: -bc.beta0 / den_q0,
        b_n: 2.0 * h * theta.eval(grid.node(n))? / den_r1,
    };
    for v in [scalars.r0, scalars.r1, scalars.q0, scalars.b_n] {
        if !v.is_finite() {
            return Err(Error::Invalid {
                what: "boundary scalars",
                why: "non-finite value".into(),
            });
        }
    }
    Ok(scalars)
}

/// The assembled matrices of the semi-discrete system. Immutable after
/// [`assemble`]; concurrent read-only use is safe.
#[derive(Debug, Clone)]
pub struct Discretization {
    grid: Grid,
    theta: Vec<f64>,
    sigma: Vec<f64>,
    lambda: Vec<f64>,
    // L_n as tridiagonal bands, 1/h^2 included
    ln_sub: Vec<f64>,
    ln_diag: Vec<f64>,
    ln_sup: Vec<f64>,
    // Phi_n packed by rows: row j (0-based) holds j+1 entries
    phin: Vec<f64>,
    scalars: BoundaryScalars,
    kernel_sup_bound: f64,
}

/// Builds the full discretization for `spec` on `grid` (`n >= 3`).
pub fn assemble(spec: &ProblemSpec, grid: &Grid) -> Result<Discretization> {
    let n = grid.n();
    if n < MIN_ASSEMBLY_N {
        return Err(Error::GridTooCoarse {
            n,
            min: MIN_ASSEMBLY_N,
        });
    }
    let scalars = boundary_scalars(&spec.bc, &spec.theta, grid)?;
    let h = grid.h();
    let h2 = h * h;

    let nodes = grid.nodes();
    let theta = nodes.iter().map(|&x| spec.theta.eval(x)).collect::<Result<Vec<_>>>()?;
    let sigma = nodes.iter().map(|&x| spec.sigma.eval(x)).collect::<Result<Vec<_>>>()?;
    let lambda = nodes.iter().map(|&x| spec.lambda.eval(x)).collect::<Result<Vec<_>>>()?;

    let mut ln_sub = vec![1.0 / h2; n - 1];
    let mut ln_diag = vec![-2.0 / h2; n];
    let mut ln_sup = vec![1.0 / h2; n - 1];
    ln_diag[0] = (4.0 * scalars.r0 - 2.0) / h2;
    ln_sup[0] = (1.0 - scalars.r0) / h2;
    ln_diag[n - 1] = (4.0 * scalars.r1 - 2.0) / h2;
    ln_sub[n - 2] = (1.0 - scalars.r1) / h2;

    let mut phin = Vec::with_capacity(n * (n + 1) / 2);
    for j in 1..=n {
        for m in 1..=j {
            phin.push(h * spec.phi.eval(grid.node(j), grid.node(m))?);
        }
    }

    Ok(Discretization {
        grid: *grid,
        theta,
        sigma,
        lambda,
        ln_sub,
        ln_diag,
        ln_sup,
        phin,
        scalars,
        kernel_sup_bound: spec.phi.sup_bound(),
    })
}

impl Discretization {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn scalars(&self) -> &BoundaryScalars {
        &self.scalars
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Lattice sup of `|phi|` carried over from the kernel, the right-hand
    /// side of the bound `||Phi_n||_2d <= sup |phi|`.
    pub fn kernel_sup_bound(&self) -> f64 {
        self.kernel_sup_bound
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.grid.n {
            return Err(Error::LengthMismatch {
                expected: self.grid.n,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `L_n v` (tridiagonal pass).
    pub fn apply_ln(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(v)?;
        let n = self.grid.n;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let mut acc = self.ln_diag[i] * v[i];
            if i > 0 {
                acc += self.ln_sub[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.ln_sup[i] * v[i + 1];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// `D_n v` (lower-bidiagonal pass): first row `q0 v_1`, then backward
    /// difference quotients `(v_j - v_{j-1})/h`.
    pub fn apply_dn(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(v)?;
        let n = self.grid.n;
        let h = self.grid.h;
        let mut out = DVector::zeros(n);
        out[0] = self.scalars.q0 * v[0];
        for i in 1..n {
            out[i] = (v[i] - v[i - 1]) / h;
        }
        Ok(out)
    }

    /// `Phi_n v` (lower-triangular pass).
    pub fn apply_phin(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(v)?;
        let n = self.grid.n;
        let mut out = DVector::zeros(n);
        let mut base = 0;
        for j in 0..n {
            let row = &self.phin[base..base + j + 1];
            out[j] = row.iter().zip(v.iter()).map(|(p, w)| p * w).sum();
            base += j + 1;
        }
        Ok(out)
    }

    /// `A_n v = (Theta_n L_n + Sigma_n D_n + Lambda_n) v`.
    pub fn apply_an(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let lv = self.apply_ln(v)?;
        let dv = self.apply_dn(v)?;
        let n = self.grid.n;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            out[i] = self.theta[i] * lv[i] + self.sigma[i] * dv[i] + self.lambda[i] * v[i];
        }
        Ok(out)
    }

    /// `P_n v = A_n v + Phi_n v`, computed in structure-aware passes.
    pub fn apply_pn(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let mut out = self.apply_an(v)?;
        out += self.apply_phin(v)?;
        Ok(out)
    }

    /// Boundary-input vector `B_n`: zeros except `b_n/h^2` in the last entry.
    pub fn bn(&self) -> DVector<f64> {
        let n = self.grid.n;
        let mut b = DVector::zeros(n);
        b[n - 1] = self.scalars.b_n / (self.grid.h * self.grid.h);
        b
    }

    pub fn ln_dense(&self) -> DMatrix<f64> {
        let n = self.grid.n;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.ln_diag[i];
            if i > 0 {
                m[(i, i - 1)] = self.ln_sub[i - 1];
            }
            if i + 1 < n {
                m[(i, i + 1)] = self.ln_sup[i];
            }
        }
        m
    }

    pub fn dn_dense(&self) -> DMatrix<f64> {
        let n = self.grid.n;
        let h = self.grid.h;
        let mut m = DMatrix::zeros(n, n);
        m[(0, 0)] = self.scalars.q0;
        for i in 1..n {
            m[(i, i - 1)] = -1.0 / h;
            m[(i, i)] = 1.0 / h;
        }
        m
    }

    pub fn phin_dense(&self) -> DMatrix<f64> {
        let n = self.grid.n;
        let mut m = DMatrix::zeros(n, n);
        let mut base = 0;
        for j in 0..n {
            for k in 0..=j {
                m[(j, k)] = self.phin[base + k];
            }
            base += j + 1;
        }
        m
    }

    pub fn an_dense(&self) -> DMatrix<f64> {
        let n = self.grid.n;
        let mut m = self.ln_dense();
        for i in 0..n {
            for k in 0..n {
                m[(i, k)] *= self.theta[i];
            }
        }
        m += {
            let mut d = self.dn_dense();
            for i in 0..n {
                for k in 0..n {
                    d[(i, k)] *= self.sigma[i];
                }
            }
            d
        };
        for i in 0..n {
            m[(i, i)] += self.lambda[i];
        }
        m
    }

    pub fn pn_dense(&self) -> DMatrix<f64> {
        self.an_dense() + self.phin_dense()
    }
}

/// Row-major text dump, one row per line, 17 significant digits.
pub fn write_dense_matrix<W: Write>(mut w: W, m: &DMatrix<f64>) -> io::Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                write!(w, " ")?;
            }
            write!(w, "{:.16e}", m[(i, j)])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_norm;
    use crate::model::{self, Kernel};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example1_disc(n: usize) -> Discretization {
        let (spec, _, _) = model::make_example1().unwrap();
        assemble(&spec, &Grid::new(n).unwrap()).unwrap()
    }

    /// Dense P_n rebuilt entry-by-entry straight from the matrix display,
    /// independent of the structure-aware assembly.
    fn dense_oracle(spec: &ProblemSpec, grid: &Grid) -> DMatrix<f64> {
        let n = grid.n();
        let h = grid.h();
        let s = boundary_scalars(&spec.bc, &spec.theta, grid).unwrap();
        let mut l = DMatrix::zeros(n, n);
        l[(0, 0)] = (4.0 * s.r0 - 2.0) / (h * h);
        l[(0, 1)] = (1.0 - s.r0) / (h * h);
        for i in 1..n - 1 {
            l[(i, i - 1)] = 1.0 / (h * h);
            l[(i, i)] = -2.0 / (h * h);
            l[(i, i + 1)] = 1.0 / (h * h);
        }
        l[(n - 1, n - 2)] = (1.0 - s.r1) / (h * h);
        l[(n - 1, n - 1)] = (4.0 * s.r1 - 2.0) / (h * h);

        let mut d = DMatrix::zeros(n, n);
        d[(0, 0)] = s.q0;
        for i in 1..n {
            d[(i, i - 1)] = -1.0 / h;
            d[(i, i)] = 1.0 / h;
        }

        let mut p = DMatrix::zeros(n, n);
        for i in 0..n {
            let xi = grid.node(i + 1);
            let th = spec.theta.eval(xi).unwrap();
            let sg = spec.sigma.eval(xi).unwrap();
            let lm = spec.lambda.eval(xi).unwrap();
            for j in 0..n {
                p[(i, j)] = th * l[(i, j)] + sg * d[(i, j)];
            }
            p[(i, i)] += lm;
            for j in 0..=i {
                p[(i, j)] += h * spec.phi.eval(xi, grid.node(j + 1)).unwrap();
            }
        }
        p
    }

    #[test]
    fn grid_basics() {
        for n in [1, 3, 9, 100, 255] {
            let g = Grid::new(n).unwrap();
            assert!((g.h() * (n + 1) as f64 - 1.0).abs() <= f64::EPSILON);
            assert!(g.node(1) > 0.0 && g.node(n) < 1.0);
        }
        // nodes hit rational breakpoints exactly
        let g = Grid::new(9).unwrap();
        assert_eq!(g.node(3), 0.3);
        assert_eq!(g.node(7), 0.7);
        assert!(Grid::new(0).is_err());
    }

    #[test]
    fn boundary_scalars_example1() {
        let (spec, _, _) = model::make_example1().unwrap();
        let g = Grid::new(3).unwrap();
        let s = boundary_scalars(&spec.bc, &spec.theta, &g).unwrap();
        assert_relative_eq!(s.r0, 1.0 / 3.0, max_relative = 1e-15);
        assert_eq!(s.r1, 0.0);
        assert_eq!(s.q0, 0.0);
        // b_3 = 2h theta(3/4) / (2h beta1) = theta(0.75) = 2
        assert_relative_eq!(s.b_n, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn boundary_scalars_dirichlet_left() {
        let (spec, _, _) = model::make_example1().unwrap();
        let bc = BoundaryConditions::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let g = Grid::new(3).unwrap();
        let s = boundary_scalars(&bc, &spec.theta, &g).unwrap();
        assert_eq!(s.r0, 0.0);
        assert_eq!(s.r1, 0.0);
        assert_relative_eq!(s.q0, 4.0, max_relative = 1e-15);
        assert_relative_eq!(s.b_n, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn degenerate_boundary_detected() {
        let (spec, _, _) = model::make_example1().unwrap();
        let g = Grid::new(3).unwrap();
        // beta0 = 3/(2h) makes 3*alpha0 - 2h*beta0 vanish exactly (h = 1/4)
        let bc = BoundaryConditions::new(1.0, 3.0 / (2.0 * g.h()), 0.0, 1.0).unwrap();
        let err = boundary_scalars(&bc, &spec.theta, &g).unwrap_err();
        assert!(matches!(
            err,
            Error::DegenerateBoundary {
                denominator: "3*alpha0 - 2*h*beta0",
                n: 3
            }
        ));
        // alpha1 = -2h/3 * beta1 kills the right denominator
        let bc = BoundaryConditions::new(1.0, 0.0, -2.0 * g.h() / 3.0, 1.0).unwrap();
        assert!(matches!(
            boundary_scalars(&bc, &spec.theta, &g),
            Err(Error::DegenerateBoundary { .. })
        ));
    }

    #[test]
    fn assembly_example1_n3() {
        let d = example1_disc(3);
        assert_eq!(d.theta(), &[1.25, 2.0, 2.0]);
        // phi == 1: Phi_n = h * lower-triangular ones
        let p = d.phin_dense();
        for j in 0..3 {
            for m in 0..3 {
                let expected = if m <= j { 0.25 } else { 0.0 };
                assert_eq!(p[(j, m)], expected);
            }
        }
        assert!(assemble(
            &model::make_example1().unwrap().0,
            &Grid::new(2).unwrap()
        )
        .is_err());
    }

    #[test]
    fn structure_is_respected() {
        let d = example1_disc(8);
        let l = d.ln_dense();
        let mut band_count = 0;
        for i in 0..8 {
            for j in 0..8 {
                if (i as i64 - j as i64).abs() > 1 {
                    assert_eq!(l[(i, j)], 0.0);
                } else {
                    band_count += 1;
                }
            }
        }
        assert_eq!(band_count, 3 * 8 - 2);
        let dn = d.dn_dense();
        for i in 0..8 {
            for j in 0..8 {
                if j > i || i > j + 1 {
                    assert_eq!(dn[(i, j)], 0.0);
                }
            }
        }
        let ph = d.phin_dense();
        for i in 0..8 {
            for j in i + 1..8 {
                assert_eq!(ph[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn apply_pn_matches_dense_oracle() {
        let (spec, _, _) = model::make_example1().unwrap();
        for n in [3, 7, 16] {
            let g = Grid::new(n).unwrap();
            let d = assemble(&spec, &g).unwrap();
            let dense = dense_oracle(&spec, &g);

            let ones = DVector::from_element(n, 1.0);
            let via_apply = d.apply_pn(&ones).unwrap();
            let via_dense = &dense * &ones;
            for i in 0..n {
                assert_relative_eq!(via_apply[i], via_dense[i], max_relative = 1e-12);
            }

            let mut rng = ChaCha8Rng::seed_from_u64(42 + n as u64);
            let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let via_apply = d.apply_pn(&v).unwrap();
            let via_dense = &dense * &v;
            for i in 0..n {
                assert_relative_eq!(via_apply[i], via_dense[i], max_relative = 1e-12);
            }
            // and the composed dense export agrees with the oracle
            let pd = d.pn_dense();
            for i in 0..n {
                for j in 0..n {
                    assert_relative_eq!(pd[(i, j)], dense[(i, j)], max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn apply_pn_zero_linearity_and_length() {
        let d = example1_disc(6);
        let zero = DVector::zeros(6);
        assert_eq!(d.apply_pn(&zero).unwrap(), zero);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
        let w = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
        let (a, b) = (0.37, -2.25);
        let lhs = d.apply_pn(&(&v * a + &w * b)).unwrap();
        let rhs = d.apply_pn(&v).unwrap() * a + d.apply_pn(&w).unwrap() * b;
        for i in 0..6 {
            assert_relative_eq!(lhs[i], rhs[i], max_relative = 1e-12, epsilon = 1e-14);
        }

        assert!(matches!(
            d.apply_pn(&DVector::zeros(5)),
            Err(Error::LengthMismatch { expected: 6, got: 5 })
        ));
    }

    #[test]
    fn bn_has_single_last_entry() {
        let d = example1_disc(5);
        let b = d.bn();
        for i in 0..4 {
            assert_eq!(b[i], 0.0);
        }
        let h = d.grid().h();
        assert_relative_eq!(b[4], d.scalars().b_n / (h * h), max_relative = 1e-15);
    }

    #[test]
    fn kernel_matrix_bound_unit_kernel() {
        let (spec, _, _) = model::make_example1().unwrap();
        for n in [3, 10, 100] {
            let d = assemble(&spec, &Grid::new(n).unwrap()).unwrap();
            let norm = spectral_norm(&d.phin_dense());
            assert!(
                norm <= 1.0 + 1e-9,
                "n = {n}: ||Phi_n|| = {norm} exceeds sup |phi| = 1"
            );
        }
    }

    #[test]
    fn kernel_matrix_bound_random_polynomials() {
        let (spec1, _, _) = model::make_example1().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for trial in 0..5 {
            let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let text = format!(
                "{:?}+{:?}*x+{:?}*y+{:?}*x*y+{:?}*x^2+{:?}*y^2",
                c[0], c[1], c[2], c[3], c[4], c[5]
            );
            let kernel = Kernel::parse(&text).unwrap();
            let spec = ProblemSpec::new(
                spec1.theta.clone(),
                spec1.sigma.clone(),
                spec1.lambda.clone(),
                kernel,
                spec1.bc,
            )
            .unwrap();
            let mut n = 4;
            while n <= 256 {
                let d = assemble(&spec, &Grid::new(n).unwrap()).unwrap();
                let norm = spectral_norm(&d.phin_dense());
                assert!(
                    norm <= d.kernel_sup_bound() + 1e-9,
                    "trial {trial}, n = {n}: {norm} > {}",
                    d.kernel_sup_bound()
                );
                n *= 4;
            }
        }
    }

    #[test]
    fn matrix_2d_norm_equals_spectral_norm() {
        // ||A||_2d = ||A||_2 because the sqrt(h) scaling cancels in the
        // induced norm: power-iteration estimates under both vector norms
        // must agree.
        use crate::gridops::norm_2d;
        use crate::linalg::top_right_singular_vector;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in [4, 9, 17] {
            let h = 1.0 / (n + 1) as f64;
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let v = top_right_singular_vector(&a);
            let av = &a * &v;
            let est_euclid = av.norm() / v.norm();
            let est_2d = norm_2d(&av, h) / norm_2d(&v, h);
            assert_relative_eq!(est_euclid, est_2d, max_relative = 1e-8);
        }
    }

    #[test]
    fn dense_export_format() {
        let d = example1_disc(3);
        let mut buf = Vec::new();
        write_dense_matrix(&mut buf, &d.phin_dense()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(' ').count(), 3);
        assert!(lines[0].starts_with("2.5000000000000000e-1"));
    }
}
