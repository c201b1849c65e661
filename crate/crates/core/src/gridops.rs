//! Restriction `R_n`, piecewise-constant extension `S_n`, discrete norms
//! and exact cross-grid `L^2` differences.
//!
//! `R_n z = [z(h), ..., z(nh)]` samples a function at the interior nodes.
//! `S_n v` is `v_j` on `((j-1)h, jh]` with `[S_n v](0) = v_1` and zero on
//! `(nh, 1]`; it satisfies `||S_n v||_{L^2(0,1)} = sqrt(h) ||v||_2`.

use nalgebra::DVector;

use crate::disc::Grid;
use crate::error::{Error, Result};

/// A vector of nodal values bound to its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: DVector<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: DVector<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::LengthMismatch {
                expected: grid.n(),
                got: values.len(),
            });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }
}

/// Samples `z` at the interior nodes: component `j` is `z(jh)`.
pub fn restrict<F>(mut z: F, grid: &Grid) -> Result<DVector<f64>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let n = grid.n();
    let mut out = DVector::zeros(n);
    for j in 1..=n {
        out[j - 1] = z(grid.node(j))?;
    }
    Ok(out)
}

/// Evaluates the piecewise-constant extension `[S_n v](x)`.
pub fn extend_eval(v: &GridFunction, x: f64) -> f64 {
    let n = v.grid.n();
    if x <= 0.0 {
        return v.values[0];
    }
    if x > v.grid.edge(n) {
        return 0.0;
    }
    // smallest j in 1..=n with x <= edge(j); edges are computed exactly the
    // way nodes are, so restriction of an extension is exact on matching grids
    let (mut lo, mut hi) = (1usize, n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if x <= v.grid.edge(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    v.values[lo - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    TwoD,
    Inf,
    Two,
}

pub fn norm_2d(v: &DVector<f64>, h: f64) -> f64 {
    h.sqrt() * v.norm()
}

pub fn norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()))
}

pub fn norm_two(v: &DVector<f64>) -> f64 {
    v.norm()
}

/// Dispatch over the three vector norms; `h` is only used by `TwoD`.
pub fn norm(v: &DVector<f64>, h: f64, kind: NormKind) -> f64 {
    match kind {
        NormKind::TwoD => norm_2d(v, h),
        NormKind::Inf => norm_inf(v),
        NormKind::Two => norm_two(v),
    }
}

/// `||S_n v||_{L^2(0,1)}` via the closed-form cell sum
/// `sum_j v_j^2 (edge_j - edge_{j-1})`.
pub fn extension_l2_norm(v: &GridFunction) -> f64 {
    let n = v.grid.n();
    let mut acc = 0.0;
    for j in 1..=n {
        let w = v.grid.edge(j) - v.grid.edge(j - 1);
        acc += v.values[j - 1] * v.values[j - 1] * w;
    }
    acc.sqrt()
}

/// Exact `L^2(0,1)` norm of `S_nA vA - S_nB vB`: both extensions are
/// constant between merged cell edges, so the integral is a finite sum with
/// no quadrature error.
pub fn l2_diff_cross_grid(va: &GridFunction, vb: &GridFunction) -> f64 {
    let mut edges: Vec<f64> = (0..=va.grid.n() + 1)
        .map(|j| va.grid.edge(j))
        .chain((0..=vb.grid.n() + 1).map(|j| vb.grid.edge(j)))
        .collect();
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup();
    let mut acc = 0.0;
    for w in edges.windows(2) {
        let (left, right) = (w[0], w[1]);
        // cells are left-open, so the value at the right edge represents
        // the whole merged cell
        let diff = extend_eval(va, right) - extend_eval(vb, right);
        acc += diff * diff * (right - left);
    }
    acc.sqrt()
}
