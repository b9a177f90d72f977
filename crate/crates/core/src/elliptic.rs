//! Inverses of `1 - delta^2 d_xx` on the exterior domain, the exponential
//! boundary layer and the boundary trace operators built on one-sided
//! derivatives.
//!
//! Each segment is solved in boundary order (`s = |x|_R` increasing), so the
//! left and right segments share one factorization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stencil;
use crate::types::{ExteriorField, GridSpec, Parameters, Side};

/// Thomas factorization of a tridiagonal matrix.
#[derive(Debug, Clone)]
struct Tridiagonal {
    upper: Vec<f64>,
    // pivots after elimination and the elimination multipliers
    pivot: Vec<f64>,
    mult: Vec<f64>,
}

impl Tridiagonal {
    fn factor(lower: &[f64], diag: &[f64], upper: Vec<f64>) -> Self {
        let n = diag.len();
        let mut pivot = vec![0.0; n];
        let mut mult = vec![0.0; n];
        pivot[0] = diag[0];
        for i in 1..n {
            mult[i] = lower[i] / pivot[i - 1];
            pivot[i] = diag[i] - mult[i] * upper[i - 1];
        }
        Tridiagonal { upper, pivot, mult }
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        for i in 1..n {
            rhs[i] -= self.mult[i] * rhs[i - 1];
        }
        rhs[n - 1] /= self.pivot[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.upper[i] * rhs[i + 1]) / self.pivot[i];
        }
    }
}

/// Prefactored `R_0` (Dirichlet at `+-R`) and `R_1` (Neumann at `+-R`) solvers.
/// Both impose `u(+-L) = 0`.
#[derive(Debug, Clone)]
pub struct HelmholtzSolver {
    grid: GridSpec,
    delta: f64,
    dirichlet: Tridiagonal,
    neumann: Tridiagonal,
}

impl HelmholtzSolver {
    pub fn new(grid: GridSpec, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::NonDispersive(delta));
        }
        let n = grid.n_per_side;
        let a = delta * delta / (grid.dx * grid.dx);
        // Dirichlet: unknowns s_1 .. s_{n-2}
        let m = n - 2;
        let dirichlet = Tridiagonal::factor(&vec![-a; m], &vec![1.0 + 2.0 * a; m], vec![-a; m]);
        // Neumann: unknowns s_0 .. s_{n-2}, ghost node u_{-1} = u_1
        let m = n - 1;
        let mut upper = vec![-a; m];
        upper[0] = -2.0 * a;
        let neumann = Tridiagonal::factor(&vec![-a; m], &vec![1.0 + 2.0 * a; m], upper);
        Ok(HelmholtzSolver { grid, delta, dirichlet, neumann })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn check(&self, f: &ExteriorField) -> Result<()> {
        if !self.grid.same_as(&f.grid) {
            return Err(Error::Shape("field grid differs from the solver grid".into()));
        }
        Ok(())
    }

    /// `R_0 f`: solves `(1 - delta^2 d_xx) u = f`, `u(+-R) = u(+-L) = 0`.
    pub fn solve_r0(&self, f: &ExteriorField) -> Result<ExteriorField> {
        self.check(f)?;
        let n = self.grid.n_per_side;
        let mut out = ExteriorField::zeros(self.grid);
        for side in Side::BOTH {
            let fs = f.from_boundary(side);
            let mut rhs = fs[1..n - 1].to_vec();
            self.dirichlet.solve(&mut rhs);
            let mut u = vec![0.0; n];
            u[1..n - 1].copy_from_slice(&rhs);
            out.set_from_boundary(side, u);
        }
        Ok(out)
    }

    /// `R_1 f`: solves `(1 - delta^2 d_xx) u = f`, `u'(+-R) = 0`, `u(+-L) = 0`.
    pub fn solve_r1(&self, f: &ExteriorField) -> Result<ExteriorField> {
        self.check(f)?;
        let n = self.grid.n_per_side;
        let mut out = ExteriorField::zeros(self.grid);
        for side in Side::BOTH {
            let fs = f.from_boundary(side);
            let mut rhs = fs[..n - 1].to_vec();
            self.neumann.solve(&mut rhs);
            let mut u = vec![0.0; n];
            u[..n - 1].copy_from_slice(&rhs);
            out.set_from_boundary(side, u);
        }
        Ok(out)
    }

    /// Discrete `(1 - delta^2 d_xx) u` at interior nodes; zero at segment ends.
    pub fn apply_operator(&self, u: &ExteriorField) -> ExteriorField {
        let a = self.delta * self.delta / (self.grid.dx * self.grid.dx);
        let n = self.grid.n_per_side;
        let mut out = ExteriorField::zeros(self.grid);
        for side in Side::BOTH {
            let v = u.side(side);
            let o = out.side_mut(side);
            for i in 1..n - 1 {
                o[i] = v[i] - a * (v[i + 1] - 2.0 * v[i] + v[i - 1]);
            }
        }
        out
    }
}

/// Convenience wrapper building a one-off solver.
pub fn solve_r0(f: &ExteriorField, delta: f64) -> Result<ExteriorField> {
    HelmholtzSolver::new(f.grid, delta)?.solve_r0(f)
}

/// Convenience wrapper building a one-off solver.
pub fn solve_r1(f: &ExteriorField, delta: f64) -> Result<ExteriorField> {
    HelmholtzSolver::new(f.grid, delta)?.solve_r1(f)
}

/// `sigma exp(-|x|_R / delta)`. At `delta = 0` the layer collapses onto the
/// boundary nodes.
pub fn boundary_layer(sigma: f64, delta: f64, grid: GridSpec) -> ExteriorField {
    ExteriorField::from_distance(grid, |_, s| {
        if delta > 0.0 {
            sigma * (-s / delta).exp()
        } else if s == 0.0 {
            sigma
        } else {
            0.0
        }
    })
}

/// Ratio `r < 1` of the decaying solution `r^i` of the discrete operator
/// `u_i - a (u_{i+1} - 2 u_i + u_{i-1}) = 0`, `a = delta^2 / h^2`.
/// `r = exp(-h/delta) (1 + O(h^2/delta^2))`.
pub fn decay_ratio(delta: f64, h: f64) -> f64 {
    let a = delta * delta / (h * h);
    2.0 * a / ((1.0 + 2.0 * a) + (1.0 + 4.0 * a).sqrt())
}

/// `sigma r^(|x|_R / dx)`: the grid counterpart of [`boundary_layer`],
/// annihilated by the discrete Helmholtz operator away from `+-R`.
pub fn discrete_layer(sigma: f64, delta: f64, grid: GridSpec) -> ExteriorField {
    let r = decay_ratio(delta, grid.dx);
    ExteriorField::from_distance(grid, |_, s| sigma * r.powi((s / grid.dx).round() as i32))
}

/// `d_x u` at `+-R` for a solution of `(1 - delta^2 d_xx) u = f`: the forward
/// difference corrected by `u_xx = (u - f) / delta^2`. Second order, and the
/// boundary flux that pairs with the 3-point operator under summation by parts.
pub fn helmholtz_flux(u: &ExteriorField, f: &ExteriorField, side: Side, delta: f64) -> f64 {
    let h = u.grid.dx;
    let b = u.grid.boundary_index(side);
    let next = match side {
        Side::Right => b + 1,
        Side::Left => b - 1,
    };
    let (u0, u1, f0) = (u.side(side)[b], u.side(side)[next], f.side(side)[b]);
    side.sign() * ((u1 - u0) / h - 0.5 * h * (u0 - f0) / (delta * delta))
}

/// `I(f) = delta^-1 int exp(-s/delta) f ds` over one segment, integrating the
/// exponential exactly against the piecewise-linear interpolant of `f`.
pub fn trace_i(f: &ExteriorField, side: Side, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::NonDispersive(delta));
    }
    let v = f.from_boundary(side);
    let h = f.grid.dx;
    let one_minus_r = -(-h / delta).exp_m1();
    let r = 1.0 - one_minus_r;
    let lin = (delta * one_minus_r - h * r) / h;
    let w_right = lin;
    let w_left = one_minus_r - lin;
    let mut acc = 0.0;
    for i in 0..v.len() - 1 {
        let e = (-(i as f64) * h / delta).exp();
        if e < 1e-300 {
            break;
        }
        acc += e * (w_left * v[i] + w_right * v[i + 1]);
    }
    Ok(acc)
}

/// Boundary Taylor data `(delta d_x)^l f(+-R)` for `l = 0..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSet {
    pub delta: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl TraceSet {
    /// One-sided traces; entry `l` uses a stencil of accuracy `max(2, k_max - l)`.
    pub fn from_field(f: &ExteriorField, delta: f64, k_max: usize) -> Result<Self> {
        let h = f.grid.dx;
        let mut out = TraceSet { delta, left: Vec::new(), right: Vec::new() };
        for side in Side::BOTH {
            let v = f.from_boundary(side);
            let mut entries = Vec::with_capacity(k_max + 1);
            for l in 0..=k_max {
                let p = 2.max(k_max.saturating_sub(l));
                let d = stencil::one_sided(&v, h, l, p)?;
                // d_x = sign * d_s
                let sgn = if side == Side::Left && l % 2 == 1 { -1.0 } else { 1.0 };
                entries.push(sgn * delta.powi(l as i32) * d);
            }
            match side {
                Side::Left => out.left = entries,
                Side::Right => out.right = entries,
            }
        }
        Ok(out)
    }

    pub fn from_entries(delta: f64, left: Vec<f64>, right: Vec<f64>) -> Self {
        TraceSet { delta, left, right }
    }

    pub fn k_max(&self) -> usize {
        self.left.len().min(self.right.len()).saturating_sub(1)
    }

    pub fn entries(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    fn need(&self, k: usize) -> Result<()> {
        let have = self.left.len().min(self.right.len());
        if k == 0 || k > have {
            return Err(Error::StencilTooShort { order: k.saturating_sub(1), available: have });
        }
        Ok(())
    }

    /// `D_k = sum_{2l < k} (delta d_x)^{2l} f`.
    pub fn d(&self, k: usize, side: Side) -> Result<f64> {
        self.need(k)?;
        Ok(self.entries(side).iter().take(k).step_by(2).sum())
    }

    /// `S_k = sum_{l < k} (+-delta d_x)^l f`.
    pub fn s(&self, k: usize, side: Side) -> Result<f64> {
        self.need(k)?;
        let sg = side.sign();
        Ok(self.entries(side).iter().take(k).enumerate().map(|(l, e)| sg.powi(l as i32) * e).sum())
    }

    /// `P_k = sum_{2l+1 < k} (+-1) (delta d_x)^{2l+1} f`.
    pub fn p(&self, k: usize, side: Side) -> Result<f64> {
        self.need(k)?;
        let sg = side.sign();
        Ok(sg * self.entries(side).iter().take(k).skip(1).step_by(2).sum::<f64>())
    }

    /// `(A, B) = ([[D_k f]], alpha <D_k f> - 2 delta <P_k f> - rho)`.
    pub fn residual_ab(&self, k: usize, rho: f64, alpha: f64) -> Result<(f64, f64)> {
        let (dl, dr) = (self.d(k, Side::Left)?, self.d(k, Side::Right)?);
        let (pl, pr) = (self.p(k, Side::Left)?, self.p(k, Side::Right)?);
        let a = dr - dl;
        let b = alpha * 0.5 * (dl + dr) - 2.0 * self.delta * 0.5 * (pl + pr) - rho;
        Ok((a, b))
    }
}

/// `D_k f` at `+-R` from one-sided traces of order up to `k - 1`.
pub fn trace_d(f: &ExteriorField, k: usize, side: Side, delta: f64) -> Result<f64> {
    TraceSet::from_field(f, delta, k.max(1) - 1)?.d(k, side)
}

/// `S_k f` at `+-R`.
pub fn trace_s(f: &ExteriorField, k: usize, side: Side, delta: f64) -> Result<f64> {
    TraceSet::from_field(f, delta, k.max(1) - 1)?.s(k, side)
}

/// `P_k f` at `+-R`.
pub fn trace_p(f: &ExteriorField, k: usize, side: Side, delta: f64) -> Result<f64> {
    TraceSet::from_field(f, delta, k.max(1) - 1)?.p(k, side)
}

/// Max-norm of `d_x R_0 f - R_1 d_x f -+ delta^-1 f(+-R) exp(-|x|_R/delta)`.
///
/// Nodes within `min(20 delta, (L-R)/2)` of the far ends are skipped: the
/// identity holds on the untruncated half-lines only.
pub fn derivative_identity_residual(f: &ExteriorField, delta: f64) -> Result<f64> {
    let solver = HelmholtzSolver::new(f.grid, delta)?;
    let lhs = solver.solve_r0(f)?.dx();
    let r1 = solver.solve_r1(&f.dx())?;
    let grid = f.grid;
    let cut = (20.0 * delta).min(0.5 * (grid.l - grid.r));
    let mut worst = 0.0_f64;
    for side in Side::BOTH {
        let trace = f.trace(side);
        for i in 0..grid.n_per_side {
            let s = grid.s(side, i);
            if grid.l - grid.r - s < cut {
                continue;
            }
            let layer = side.sign() * trace / delta * (-s / delta).exp();
            let r = lhs.side(side)[i] - r1.side(side)[i] - layer;
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

/// `(A, B)` of the exact conditions for `f` with `k` trace terms.
pub fn residual_ab(f: &ExteriorField, rho: f64, k: usize, params: &Parameters) -> Result<(f64, f64)> {
    TraceSet::from_field(f, params.delta, k.max(1) - 1)?.residual_ab(k, rho, params.alpha)
}

/// `(A~, B~) = ([[q]], alpha <q> - 2 delta^2 [[d_x q]] - rho)`.
pub fn residual_ab_tilde(q: &ExteriorField, rho: f64, alpha: f64, delta: f64) -> (f64, f64) {
    let a = q.jump();
    let b = alpha * q.average() - 2.0 * delta * delta * q.jump_dx() - rho;
    (a, b)
}
