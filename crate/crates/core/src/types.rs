//! Scenario parameters, the truncated exterior grid, fields living on the two
//! exterior half-lines and the `theta <-> zeta` change of variables.
//!
//! The exterior domain is `(-inf, -R) U (R, inf)`, truncated to
//! `[-L, -R] U [R, L]`. Both segments carry `n_per_side` uniformly spaced
//! nodes and include their endpoints, so traces at `x = +-R` are plain node
//! values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lower bound for the water depth under the obstacle.
pub const DEFAULT_H_MIN: f64 = 0.1;
/// Default lower bound for `1 + eps c'(theta)`.
pub const DEFAULT_C0: f64 = 0.05;
/// Default tolerance on `|[[q]]|` for solver-produced states.
pub const DEFAULT_TOL_JUMP: f64 = 1e-10;
/// Node count of the composite Simpson rule used under the obstacle.
pub const OBSTACLE_QUADRATURE_NODES: usize = 201;

/// One of the two exterior half-lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    /// `-1` on the left segment, `+1` on the right one.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

/// `|x|_R`, the distance from `x` to the obstacle.
pub fn abs_r(x: f64, r: f64) -> Result<f64> {
    if x > r {
        Ok(x - r)
    } else if x < -r {
        Ok(-x - r)
    } else {
        Err(Error::InsideObstacle { x, r })
    }
}

fn admissible_root(theta: f64, epsilon: f64) -> Result<f64> {
    let arg = 1.0 + 2.0 * epsilon * theta;
    if arg < 0.0 || !arg.is_finite() {
        return Err(Error::Cavitation { x: f64::NAN, value: arg });
    }
    Ok(arg.sqrt())
}

/// `c(theta) = -2 theta^2 / (1 + sqrt(1 + 2 eps theta))^2`, so that
/// `zeta = theta + eps c(theta)`.
pub fn c_of_theta(theta: f64, epsilon: f64) -> Result<f64> {
    let s = admissible_root(theta, epsilon)?;
    Ok(-2.0 * theta * theta / ((1.0 + s) * (1.0 + s)))
}

/// `c'(theta) = -2 theta / (s (1 + s))` with `s = sqrt(1 + 2 eps theta)`.
pub fn dc_of_theta(theta: f64, epsilon: f64) -> Result<f64> {
    let s = admissible_root(theta, epsilon)?;
    if s == 0.0 {
        return Err(Error::Cavitation { x: f64::NAN, value: 0.0 });
    }
    Ok(-2.0 * theta / (s * (1.0 + s)))
}

/// `1 + eps c'(theta)`, which equals `1 / sqrt(1 + 2 eps theta) = 1 / (1 + eps zeta)`.
pub fn one_plus_eps_dc(theta: f64, epsilon: f64) -> Result<f64> {
    let s = admissible_root(theta, epsilon)?;
    if s == 0.0 {
        return Err(Error::Cavitation { x: f64::NAN, value: 0.0 });
    }
    Ok(1.0 / s)
}

/// `theta = zeta + eps zeta^2 / 2`.
pub fn zeta_to_theta(zeta: f64, epsilon: f64) -> f64 {
    zeta + 0.5 * epsilon * zeta * zeta
}

/// Inverse of [`zeta_to_theta`] on the branch with `zeta -> theta` as `eps -> 0`.
pub fn theta_to_zeta(theta: f64, epsilon: f64) -> Result<f64> {
    let s = admissible_root(theta, epsilon)?;
    Ok(2.0 * theta / (1.0 + s))
}

/// Bottom profile `zeta_w` of the obstacle on `[-R, R]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObstacleProfile {
    Flat { value: f64 },
    /// Coefficients in increasing powers of `x`.
    Poly { coeffs: Vec<f64> },
    /// `(x, value)` pairs interpolated by a natural cubic spline.
    Table { points: Vec<[f64; 2]> },
}

impl Default for ObstacleProfile {
    fn default() -> Self {
        ObstacleProfile::Flat { value: 0.0 }
    }
}

impl ObstacleProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ObstacleProfile::Flat { value } => *value,
            ObstacleProfile::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            ObstacleProfile::Table { points } => natural_spline(points, x),
        }
    }

    fn validate(&self) -> Result<()> {
        if let ObstacleProfile::Table { points } = self {
            if points.len() < 2 {
                return Err(Error::Parameters("table profile needs at least two points".into()));
            }
            if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                return Err(Error::Parameters("table abscissae must be increasing".into()));
            }
        }
        Ok(())
    }
}

// Natural cubic spline through `points`, constant extrapolation outside.
fn natural_spline(points: &[[f64; 2]], x: f64) -> f64 {
    let n = points.len();
    if n == 1 {
        return points[0][1];
    }
    if x <= points[0][0] {
        return points[0][1];
    }
    if x >= points[n - 1][0] {
        return points[n - 1][1];
    }
    // second derivatives from the tridiagonal system
    let mut m = vec![0.0; n];
    if n > 2 {
        let mut diag = vec![0.0; n - 2];
        let mut rhs = vec![0.0; n - 2];
        let mut sub = vec![0.0; n - 2];
        for i in 1..n - 1 {
            let h0 = points[i][0] - points[i - 1][0];
            let h1 = points[i + 1][0] - points[i][0];
            diag[i - 1] = 2.0 * (h0 + h1);
            sub[i - 1] = h0;
            rhs[i - 1] = 6.0
                * ((points[i + 1][1] - points[i][1]) / h1 - (points[i][1] - points[i - 1][1]) / h0);
        }
        for i in 1..n - 2 {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sub[i];
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (0..n - 2).rev() {
            let upper = if i + 1 < n - 2 { sub[i + 1] * m[i + 2] } else { 0.0 };
            m[i + 1] = (rhs[i] - upper) / diag[i];
        }
    }
    let k = points.partition_point(|p| p[0] <= x).saturating_sub(1).min(n - 2);
    let (x0, y0) = (points[k][0], points[k][1]);
    let (x1, y1) = (points[k + 1][0], points[k + 1][1]);
    let h = x1 - x0;
    let a = (x1 - x) / h;
    let b = (x - x0) / h;
    a * y0 + b * y1 + ((a * a * a - a) * m[k] + (b * b * b - b) * m[k + 1]) * h * h / 6.0
}

/// `alpha = int_{-R}^{R} dx / (1 + eps zeta_w(x))` by the composite Simpson
/// rule on [`OBSTACLE_QUADRATURE_NODES`] nodes.
pub fn alpha_from_obstacle(profile: &ObstacleProfile, epsilon: f64, r: f64, h_min: f64) -> Result<f64> {
    alpha_with_nodes(profile, epsilon, r, h_min, OBSTACLE_QUADRATURE_NODES)
}

/// Same as [`alpha_from_obstacle`] with an explicit (odd) node count.
pub fn alpha_with_nodes(
    profile: &ObstacleProfile,
    epsilon: f64,
    r: f64,
    h_min: f64,
    nodes: usize,
) -> Result<f64> {
    simpson_under_obstacle(r, nodes, |x| {
        let h = 1.0 + epsilon * profile.eval(x);
        if h < h_min {
            Err(Error::ObstacleTouchesBottom { x, h, h_min })
        } else {
            Ok(1.0 / h)
        }
    })
}

/// Composite Simpson rule on `[-R, R]` with `nodes` (odd, >= 3) nodes.
pub(crate) fn simpson_under_obstacle<F>(r: f64, nodes: usize, mut f: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let nodes = if nodes.is_multiple_of(2) { nodes + 1 } else { nodes.max(3) };
    let h = 2.0 * r / (nodes - 1) as f64;
    let mut acc = 0.0;
    for i in 0..nodes {
        let x = -r + i as f64 * h;
        let w = if i == 0 || i == nodes - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * f(x)?;
    }
    Ok(acc * h / 3.0)
}

/// Physical and dispersion constants of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub epsilon: f64,
    pub mu: f64,
    pub delta: f64,
    pub r: f64,
    pub obstacle: ObstacleProfile,
    pub alpha: f64,
    pub h_min: f64,
}

impl Parameters {
    /// Builds parameters from the shallowness `mu`; `delta = sqrt(mu / 3)`.
    pub fn new(epsilon: f64, mu: f64, r: f64, obstacle: ObstacleProfile) -> Result<Self> {
        Self::build(epsilon, mu, (mu / 3.0).sqrt(), r, obstacle, DEFAULT_H_MIN)
    }

    /// Builds parameters from the dispersion length; `mu = 3 delta^2`.
    pub fn with_delta(epsilon: f64, delta: f64, r: f64, obstacle: ObstacleProfile) -> Result<Self> {
        Self::build(epsilon, 3.0 * delta * delta, delta, r, obstacle, DEFAULT_H_MIN)
    }

    pub fn with_h_min(mut self, h_min: f64) -> Result<Self> {
        self.alpha = alpha_from_obstacle(&self.obstacle, self.epsilon, self.r, h_min)?;
        self.h_min = h_min;
        Ok(self)
    }

    fn build(
        epsilon: f64,
        mu: f64,
        delta: f64,
        r: f64,
        obstacle: ObstacleProfile,
        h_min: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Parameters(format!("epsilon = {epsilon} outside [0, 1]")));
        }
        if !(mu >= 0.0) || !(0.0..=1.0).contains(&delta) {
            return Err(Error::Parameters(format!("delta = {delta} outside [0, 1]")));
        }
        if !(r > 0.0) {
            return Err(Error::Parameters(format!("obstacle half-width R = {r} must be positive")));
        }
        obstacle.validate()?;
        let alpha = alpha_from_obstacle(&obstacle, epsilon, r, h_min)?;
        Ok(Parameters { epsilon, mu, delta, r, obstacle, alpha, h_min })
    }

    /// `h_w(x) = 1 + eps zeta_w(x)`.
    pub fn h_w(&self, x: f64) -> f64 {
        1.0 + self.epsilon * self.obstacle.eval(x)
    }
}

/// Uniform grid on the truncated exterior domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r: f64,
    pub l: f64,
    pub n_per_side: usize,
    pub dx: f64,
}

impl GridSpec {
    pub fn new(r: f64, l: f64, n_per_side: usize) -> Result<Self> {
        if !(l > r) || !(r > 0.0) {
            return Err(Error::Grid(format!("need 0 < R < L, got R = {r}, L = {l}")));
        }
        if n_per_side < 8 {
            return Err(Error::Grid(format!("n_per_side = {n_per_side} < 8")));
        }
        let dx = (l - r) / (n_per_side - 1) as f64;
        Ok(GridSpec { r, l, n_per_side, dx })
    }

    /// Smallest grid on `[R, L]` with spacing at most `dx`.
    pub fn with_spacing(r: f64, l: f64, dx: f64) -> Result<Self> {
        let n = ((l - r) / dx - 1e-9).ceil() as usize + 1;
        Self::new(r, l, n)
    }

    /// Boundary-layer resolution rule `dx <= delta / 4`.
    pub fn check_resolution(&self, delta: f64) -> Result<()> {
        if delta > 0.0 && self.dx > delta / 4.0 * (1.0 + 1e-12) {
            return Err(Error::Grid(format!(
                "dx = {} does not resolve the boundary layer (need dx <= delta/4 = {})",
                self.dx,
                delta / 4.0
            )));
        }
        Ok(())
    }

    /// Abscissa of node `i` on `side` (nodes ordered by increasing `x`).
    pub fn x(&self, side: Side, i: usize) -> f64 {
        match side {
            Side::Left => -self.l + i as f64 * self.dx,
            Side::Right => self.r + i as f64 * self.dx,
        }
    }

    /// Distance `|x|_R` of node `i` on `side`.
    pub fn s(&self, side: Side, i: usize) -> f64 {
        match side {
            Side::Left => (self.n_per_side - 1 - i) as f64 * self.dx,
            Side::Right => i as f64 * self.dx,
        }
    }

    /// Index of the node at `x = +-R`.
    pub fn boundary_index(&self, side: Side) -> usize {
        match side {
            Side::Left => self.n_per_side - 1,
            Side::Right => 0,
        }
    }

    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.n_per_side == other.n_per_side
            && (self.r - other.r).abs() <= 1e-12 * self.r.abs().max(1.0)
            && (self.l - other.l).abs() <= 1e-12 * self.l.abs().max(1.0)
    }
}

/// A scalar function sampled on both exterior segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExteriorField {
    pub grid: GridSpec,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl ExteriorField {
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.n_per_side;
        ExteriorField { grid, left: vec![0.0; n], right: vec![0.0; n] }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        let n = grid.n_per_side;
        ExteriorField { grid, left: vec![value; n], right: vec![value; n] }
    }

    pub fn from_values(grid: GridSpec, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        if left.len() != grid.n_per_side || right.len() != grid.n_per_side {
            return Err(Error::Shape(format!(
                "expected {} values per side, got {} / {}",
                grid.n_per_side,
                left.len(),
                right.len()
            )));
        }
        Ok(ExteriorField { grid, left, right })
    }

    /// Samples `f(x)` at every node.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64) -> f64) -> Self {
        let n = grid.n_per_side;
        let left = (0..n).map(|i| f(grid.x(Side::Left, i))).collect();
        let right = (0..n).map(|i| f(grid.x(Side::Right, i))).collect();
        ExteriorField { grid, left, right }
    }

    /// Samples `f(side, s)` with `s = |x|_R`.
    pub fn from_distance(grid: GridSpec, mut f: impl FnMut(Side, f64) -> f64) -> Self {
        let n = grid.n_per_side;
        let left = (0..n).map(|i| f(Side::Left, grid.s(Side::Left, i))).collect();
        let right = (0..n).map(|i| f(Side::Right, grid.s(Side::Right, i))).collect();
        ExteriorField { grid, left, right }
    }

    pub fn side(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut [f64] {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    /// Values of one segment ordered by increasing distance from the obstacle.
    pub fn from_boundary(&self, side: Side) -> Vec<f64> {
        match side {
            Side::Left => self.left.iter().rev().copied().collect(),
            Side::Right => self.right.clone(),
        }
    }

    /// Inverse of [`ExteriorField::from_boundary`].
    pub fn set_from_boundary(&mut self, side: Side, mut values: Vec<f64>) {
        if side == Side::Left {
            values.reverse();
        }
        *match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        } = values;
    }

    /// Value at `x = +-R`.
    pub fn trace(&self, side: Side) -> f64 {
        self.side(side)[self.grid.boundary_index(side)]
    }

    /// `f(R) - f(-R)`.
    pub fn jump(&self) -> f64 {
        self.trace(Side::Right) - self.trace(Side::Left)
    }

    /// `(f(R) + f(-R)) / 2`.
    pub fn average(&self) -> f64 {
        0.5 * (self.trace(Side::Right) + self.trace(Side::Left))
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        ExteriorField {
            grid: self.grid,
            left: self.left.iter().map(|&v| f(v)).collect(),
            right: self.right.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        ExteriorField {
            grid: self.grid,
            left: self.left.iter().zip(&other.left).map(|(&a, &b)| f(a, b)).collect(),
            right: self.right.iter().zip(&other.right).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.left.iter().chain(self.right.iter())
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `d/dx` on each segment: centered 3-point inside, one-sided 3-point at
    /// the segment ends.
    pub fn dx(&self) -> Self {
        let h = self.grid.dx;
        ExteriorField {
            grid: self.grid,
            left: crate::stencil::derivative(&self.left, h),
            right: crate::stencil::derivative(&self.right, h),
        }
    }

    /// `int (d_x f)^2` with cell-wise differences, the quadratic form of the
    /// 3-point second difference under summation by parts.
    pub fn dx_squared_integral(&self) -> f64 {
        let h = self.grid.dx;
        let seg = |v: &[f64]| v.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum::<f64>() / h;
        seg(&self.left) + seg(&self.right)
    }

    /// `d/dx` with the summation-by-parts end rows.
    pub fn dx_sbp(&self) -> Self {
        let h = self.grid.dx;
        ExteriorField {
            grid: self.grid,
            left: crate::stencil::derivative_sbp(&self.left, h),
            right: crate::stencil::derivative_sbp(&self.right, h),
        }
    }

    /// One-sided second-order `d/dx` trace at `x = +-R`.
    pub fn boundary_dx(&self, side: Side) -> f64 {
        let v = self.from_boundary(side);
        side.sign() * crate::stencil::one_sided_first(&v, self.grid.dx)
    }

    /// `[[d/dx f]]` from one-sided traces.
    pub fn jump_dx(&self) -> f64 {
        self.boundary_dx(Side::Right) - self.boundary_dx(Side::Left)
    }

    /// Trapezoid integral over both segments.
    pub fn integral(&self) -> f64 {
        let h = self.grid.dx;
        let seg = |v: &[f64]| {
            let n = v.len();
            h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1]))
        };
        seg(&self.left) + seg(&self.right)
    }

    /// Discrete `L^2` norm with trapezoid weights.
    pub fn l2_norm(&self) -> f64 {
        self.map(|v| v * v).integral().sqrt()
    }
}

/// `U = (theta, q)` at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub theta: ExteriorField,
    pub q: ExteriorField,
}

impl State {
    pub fn rest(grid: GridSpec) -> Self {
        State { t: 0.0, theta: ExteriorField::zeros(grid), q: ExteriorField::zeros(grid) }
    }

    pub fn grid(&self) -> GridSpec {
        self.theta.grid
    }

    /// Builds a state from the physical elevation `zeta`.
    pub fn from_zeta(t: f64, zeta: &ExteriorField, q: ExteriorField, epsilon: f64) -> Self {
        State { t, theta: zeta.map(|z| zeta_to_theta(z, epsilon)), q }
    }

    pub fn zeta(&self, epsilon: f64) -> Result<ExteriorField> {
        let mut out = ExteriorField::zeros(self.grid());
        for side in Side::BOTH {
            for (i, (&th, z)) in
                self.theta.side(side).iter().zip(out.side_mut(side).iter_mut()).enumerate()
            {
                *z = theta_to_zeta(th, epsilon).map_err(|_| Error::Cavitation {
                    x: self.grid().x(side, i),
                    value: 1.0 + 2.0 * epsilon * th,
                })?;
            }
        }
        Ok(out)
    }

    /// Checks `|[[q]]| <= tol_jump`, `1 + 2 eps theta >= 0` and
    /// `1 + eps c'(theta) >= c0` at every node.
    pub fn validate(&self, epsilon: f64, c0: f64, tol_jump: f64) -> Result<()> {
        let jump = self.q.jump();
        if !(jump.abs() <= tol_jump) {
            return Err(Error::DischargeJump(jump));
        }
        for side in Side::BOTH {
            for (i, &th) in self.theta.side(side).iter().enumerate() {
                let x = self.grid().x(side, i);
                let arg = 1.0 + 2.0 * epsilon * th;
                if !(arg > 0.0) {
                    return Err(Error::Cavitation { x, value: arg });
                }
                let d = 1.0 / arg.sqrt();
                if d < c0 {
                    return Err(Error::BlowUp { x, value: d, c0 });
                }
            }
        }
        Ok(())
    }

    /// `self + c * (dtheta, dq)` at time `t + dt_shift`.
    pub fn advanced(&self, c: f64, dtheta: &ExteriorField, dq: &ExteriorField) -> Self {
        State { t: self.t + c, theta: self.theta.add_scaled(c, dtheta), q: self.q.add_scaled(c, dq) }
    }
}
