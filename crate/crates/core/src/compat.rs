//! Time-derivative ladders of the initial data, the exact (nonlocal) and
//! approximate (local Taylor) compatibility checks, and initial-data
//! generators.

use serde::{Deserialize, Serialize};

use crate::diagnostics::state_sobolev_norm;
use crate::dynamics::{clamp_far_ends, Closure, Dynamics};
use crate::elliptic::TraceSet;
use crate::error::{Error, Result};
use crate::stencil;
use crate::types::{zeta_to_theta, ExteriorField, GridSpec, Parameters, Side, State, DEFAULT_TOL_JUMP};

/// Default truncation order of the ladders.
pub const DEFAULT_ORDER: usize = 5;
/// Absolute slack added to every threshold, so that `delta = 0` verdicts do not
/// hinge on rounding noise.
pub const PASS_FLOOR: f64 = 1e-9;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `(theta_j, q_j) = d_t^j U` at `t = 0` for `j = 0..=n+1`, built by the
/// recursion `theta_{j+1} = -Phi_j`, `q_{j+1} = -R(Gamma_j, [[theta_j]])`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeLadder {
    pub n: usize,
    pub theta: Vec<ExteriorField>,
    pub q: Vec<ExteriorField>,
    /// `Gamma_j` for `j = 0..=n`.
    pub gamma: Vec<ExteriorField>,
    pub avg_q: Vec<f64>,
}

/// Builds the exact ladder. Time derivatives of products and of
/// `sqrt(1 + 2 eps theta)` are expanded by the Leibniz rule on normalized
/// Taylor coefficients.
/// Uses the closed-form layer ([`Closure::Formula`]) so that the literal
/// transmission relations hold on every rung.
pub fn exact_ladder(u_in: &State, n: usize, params: &Parameters) -> Result<DerivativeLadder> {
    exact_ladder_with(&Dynamics::new(params, u_in.grid())?.with_closure(Closure::Formula), u_in, n)
}

pub fn exact_ladder_with(dynamics: &Dynamics, u_in: &State, n: usize) -> Result<DerivativeLadder> {
    let eps = dynamics.params.epsilon;
    u_in.validate(eps, dynamics.c0, DEFAULT_TOL_JUMP)?;
    let grid = u_in.grid();
    // normalized coefficients f~_j = f_j / j!
    let mut th: Vec<ExteriorField> = vec![u_in.theta.clone()];
    let mut qn: Vec<ExteriorField> = vec![u_in.q.clone()];
    let mut dqn: Vec<ExteriorField> = vec![u_in.q.dx()];
    let mut w: Vec<ExteriorField> = Vec::new();
    let mut gamma = Vec::with_capacity(n + 1);
    let mut avg_q = vec![u_in.q.average()];
    for j in 0..=n {
        let wj = if j == 0 {
            th[0].map(|t| (1.0 + 2.0 * eps * t).sqrt())
        } else {
            let mut acc = th[j].scale(2.0 * eps);
            for i in 1..j {
                acc = acc.zip_map(&w[i].zip_map(&w[j - i], |a, b| a * b), |a, b| a - b);
            }
            acc.zip_map(&w[0], |a, w0| a / (2.0 * w0))
        };
        w.push(wj);

        let mut phi = ExteriorField::zeros(grid);
        let mut sq = ExteriorField::zeros(grid);
        for i in 0..=j {
            phi = phi.zip_map(&dqn[i].zip_map(&w[j - i], |a, b| a * b), |a, b| a + b);
            sq = sq.zip_map(&qn[i].zip_map(&qn[j - i], |a, b| a * b), |a, b| a + b);
        }
        let mut th_next = phi.scale(-1.0 / (j as f64 + 1.0));
        clamp_far_ends(&mut th_next);

        let jf = factorial(j);
        let g = th[j].add_scaled(eps, &sq).dx().scale(jf);
        let theta_jump = th[j].jump() * jf;
        let mut q_next = dynamics.apply_r(&g, theta_jump)?.scale(-1.0);
        clamp_far_ends(&mut q_next);
        avg_q.push(q_next.average());
        gamma.push(g);

        let qn_next = q_next.scale(1.0 / factorial(j + 1));
        dqn.push(qn_next.dx());
        qn.push(qn_next);
        th.push(th_next);
    }
    let theta = th.iter().enumerate().map(|(j, f)| f.scale(factorial(j))).collect();
    let q = qn.iter().enumerate().map(|(j, f)| f.scale(factorial(j))).collect();
    Ok(DerivativeLadder { n, theta, q, gamma, avg_q })
}

/// Boundary Taylor data `U_{j,k} = d_t^j d_x^k U (+-R)` for `j + k <= n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorLadder {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// `[left, right]`, indexed `[j][k]`.
    pub theta: [Vec<Vec<f64>>; 2],
    pub q: [Vec<Vec<f64>>; 2],
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Left => 0,
        Side::Right => 1,
    }
}

impl TaylorLadder {
    /// `theta_hat_{j,k}` at the given contact point (zero outside the ladder).
    pub fn theta_hat(&self, side: Side, j: usize, k: usize) -> f64 {
        self.theta[side_index(side)].get(j).and_then(|r| r.get(k)).copied().unwrap_or(0.0)
    }

    pub fn q_hat(&self, side: Side, j: usize, k: usize) -> f64 {
        self.q[side_index(side)].get(j).and_then(|r| r.get(k)).copied().unwrap_or(0.0)
    }

    fn jump(&self, f: fn(&Self, Side, usize, usize) -> f64, j: usize, k: usize) -> f64 {
        f(self, Side::Right, j, k) - f(self, Side::Left, j, k)
    }

    fn avg(&self, f: fn(&Self, Side, usize, usize) -> f64, j: usize, k: usize) -> f64 {
        0.5 * (f(self, Side::Right, j, k) + f(self, Side::Left, j, k))
    }

    /// Runs the local recursion from the traces `d_x^k theta`, `d_x^k q` at
    /// `t = 0` (`k = 0..=n`, `[left, right]`).
    pub fn from_traces(
        theta0: [&[f64]; 2],
        q0: [&[f64]; 2],
        n: usize,
        epsilon: f64,
        delta: f64,
    ) -> Result<Self> {
        let mut out = TaylorLadder {
            n,
            epsilon,
            delta,
            theta: [Vec::new(), Vec::new()],
            q: [Vec::new(), Vec::new()],
        };
        for s in 0..2 {
            if theta0[s].len() <= n || q0[s].len() <= n {
                return Err(Error::StencilTooShort { order: n, available: theta0[s].len().min(q0[s].len()) });
            }
            let (t, q) = taylor_side(theta0[s], q0[s], n, epsilon, delta)?;
            out.theta[s] = t;
            out.q[s] = q;
        }
        Ok(out)
    }
}

// Bivariate normalized jets c_{j,k} = U_{j,k} / (j! k!); d_x shifts as
// (k + 1) c_{j,k+1}.
fn taylor_side(
    theta0: &[f64],
    q0: &[f64],
    n: usize,
    eps: f64,
    delta: f64,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let size = n + 2;
    let mut th = vec![vec![0.0; size]; size];
    let mut qq = vec![vec![0.0; size]; size];
    let mut w = vec![vec![0.0; size]; size];
    let mut sq = vec![vec![0.0; size]; size];
    for k in 0..=n {
        th[0][k] = theta0[k] / factorial(k);
        qq[0][k] = q0[k] / factorial(k);
    }
    let arg = 1.0 + 2.0 * eps * th[0][0];
    if !(arg > 0.0) {
        return Err(Error::Cavitation { x: f64::NAN, value: arg });
    }
    for j in 0..n {
        let kmax = n - j - 1;
        // sqrt(1 + 2 eps theta), q^2 for row j
        for k in 0..=n - j {
            if j == 0 && k == 0 {
                w[0][0] = arg.sqrt();
            } else if k <= kmax {
                let mut acc = 2.0 * eps * th[j][k];
                for a in 0..=j {
                    for b in 0..=k {
                        if (a, b) != (0, 0) && (a, b) != (j, k) {
                            acc -= w[a][b] * w[j - a][k - b];
                        }
                    }
                }
                w[j][k] = acc / (2.0 * w[0][0]);
            }
            let mut acc = 0.0;
            for a in 0..=j {
                for b in 0..=k {
                    acc += qq[a][b] * qq[j - a][k - b];
                }
            }
            sq[j][k] = acc;
        }
        for k in 0..=kmax {
            let mut phi = 0.0;
            for a in 0..=j {
                for b in 0..=k {
                    phi += (b as f64 + 1.0) * qq[a][b + 1] * w[j - a][k - b];
                }
            }
            th[j + 1][k] = -phi / (j as f64 + 1.0);
        }
        // unnormalized Gamma_{j,m} = d_t^j d_x^{m+1} (theta + eps q^2)
        let jf = factorial(j);
        let gamma: Vec<f64> = (0..=kmax)
            .map(|m| jf * factorial(m + 1) * (th[j][m + 1] + eps * sq[j][m + 1]))
            .collect();
        for k in 0..=kmax {
            let mut acc = 0.0;
            let mut l = 0;
            while 2 * l < n - k - j {
                acc += delta.powi(2 * l as i32) * gamma[k + 2 * l];
                l += 1;
            }
            qq[j + 1][k] = -acc / (factorial(j + 1) * factorial(k));
        }
    }
    let unnormalize = |c: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        c.into_iter()
            .enumerate()
            .map(|(j, row)| {
                row.into_iter().enumerate().map(|(k, v)| v * factorial(j) * factorial(k)).collect()
            })
            .collect()
    };
    Ok((unnormalize(th), unnormalize(qq)))
}

/// One-sided traces `d_x^k f(+-R)`, `k = 0..=n`, with accuracy `max(2, n + 1 - k)`.
pub fn taylor_traces(f: &ExteriorField, n: usize) -> Result<[Vec<f64>; 2]> {
    let h = f.grid.dx;
    let mut out = [Vec::new(), Vec::new()];
    for side in Side::BOTH {
        let v = f.from_boundary(side);
        let mut t = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let p = 2.max(n + 1 - k);
            let d = stencil::one_sided(&v, h, k, p)?;
            let sgn = if side == Side::Left && k % 2 == 1 { -1.0 } else { 1.0 };
            t.push(sgn * d);
        }
        out[side_index(side)] = t;
    }
    Ok(out)
}

/// Local recursion seeded by one-sided traces of the initial data.
pub fn taylor_ladder(u_in: &State, n: usize, params: &Parameters) -> Result<TaylorLadder> {
    let th = taylor_traces(&u_in.theta, n)?;
    let q = taylor_traces(&u_in.q, n)?;
    TaylorLadder::from_traces([&th[0], &th[1]], [&q[0], &q[1]], n, params.epsilon, params.delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompatMode {
    Exact,
    Approximate,
    Hyperbolic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatRow {
    pub j: usize,
    pub r1: f64,
    pub r2: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatReport {
    pub mode: CompatMode,
    pub n: usize,
    pub delta: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub rows: Vec<CompatRow>,
    pub pass: bool,
}

impl CompatReport {
    fn build(mode: CompatMode, n: usize, delta: f64, m: f64, residuals: Vec<(f64, f64)>) -> Self {
        let rows: Vec<CompatRow> = residuals
            .into_iter()
            .enumerate()
            .map(|(j, (r1, r2))| {
                let threshold = threshold(m, delta, n, j);
                let pass = r1 <= threshold + PASS_FLOOR && r2 <= threshold + PASS_FLOOR;
                CompatRow { j, r1, r2, threshold, pass }
            })
            .collect();
        let pass = rows.iter().all(|r| r.pass);
        CompatReport { mode, n, delta, m, rows, pass }
    }

    /// First failing row, if any.
    pub fn first_failure(&self) -> Option<usize> {
        self.rows.iter().find(|r| !r.pass).map(|r| r.j)
    }
}

/// `M delta^(n - j - 1/2)`.
pub fn threshold(m: f64, delta: f64, n: usize, j: usize) -> f64 {
    m * delta.powf(n as f64 - j as f64 - 0.5)
}

/// `10 (|U_in|_{H^{n+1}} + 1)`.
pub fn default_m(u_in: &State, n: usize) -> f64 {
    10.0 * (state_sobolev_norm(u_in, n + 1) + 1.0)
}

/// Exact conditions. For row `j` the regular part `f = -Gamma_j`,
/// `rho = -[[theta_j]]`, `k = n - j` enters
/// `A = [[D_k f]]`, `B = alpha <D_k f> - 2 delta <P_k f> - rho`; the rows
/// report `(|A|, |B|)`.
pub fn check_exact(ladder: &DerivativeLadder, m: f64, n: usize, params: &Parameters) -> Result<CompatReport> {
    if ladder.n < n || ladder.gamma.len() < n {
        return Err(Error::HistoryTooShort { got: ladder.n, need: n });
    }
    let mut res = Vec::with_capacity(n);
    for j in 0..n {
        let k = n - j;
        let f = ladder.gamma[j].scale(-1.0);
        let rho = -ladder.theta[j].jump();
        let traces = TraceSet::from_field(&f, params.delta, k - 1)?;
        let (a, b) = traces.residual_ab(k, rho, params.alpha)?;
        res.push((a.abs(), b.abs()));
    }
    Ok(CompatReport::build(CompatMode::Exact, n, params.delta, m, res))
}

/// The literal transmission relations on the exact ladder,
/// `(|[[q_{j+1}]]|, |alpha <q_{j+1}> + [[theta_j]] - delta^2 [[d_x q_{j+1}]]|)`.
/// Both vanish by construction of `R`, up to rounding.
pub fn exact_transmission_rows(ladder: &DerivativeLadder, params: &Parameters) -> Vec<(f64, f64)> {
    let d2 = params.delta * params.delta;
    (0..ladder.n)
        .map(|j| {
            let q = &ladder.q[j + 1];
            let r1 = q.jump().abs();
            let r2 = (params.alpha * q.average() + ladder.theta[j].jump() - d2 * q.jump_dx()).abs();
            (r1, r2)
        })
        .collect()
}

/// Approximate (local) conditions on the Taylor ladder; at `delta = 0` these
/// are the hyperbolic corner conditions.
pub fn check_approx(ladder: &TaylorLadder, m: f64, n: usize, params: &Parameters) -> Result<CompatReport> {
    if ladder.n < n {
        return Err(Error::HistoryTooShort { got: ladder.n, need: n });
    }
    let d2 = ladder.delta * ladder.delta;
    let res = (0..n)
        .map(|j| {
            let r1 = ladder.jump(TaylorLadder::q_hat, j + 1, 0).abs();
            let r2 = params.alpha * ladder.avg(TaylorLadder::q_hat, j + 1, 0)
                + ladder.jump(TaylorLadder::theta_hat, j, 0)
                - d2 * ladder.jump(TaylorLadder::q_hat, j + 1, 1);
            (r1, r2.abs())
        })
        .collect();
    let mode = if ladder.delta == 0.0 { CompatMode::Hyperbolic } else { CompatMode::Approximate };
    Ok(CompatReport::build(mode, n, ladder.delta, m, res))
}

/// Initial-data family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: String,
    /// Elevation amplitude.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Distance `|x|_R` of the pulse centre from the contact point.
    #[serde(default = "default_center")]
    pub center: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    /// Width of the band next to `+-R` (and `+-L`) where the data vanish.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Vanishing order at the contact point (`vanishing-order` family).
    #[serde(default = "default_vanishing")]
    pub order: usize,
}

fn default_amplitude() -> f64 {
    0.1
}
fn default_center() -> f64 {
    5.0
}
fn default_width() -> f64 {
    1.0
}
fn default_margin() -> f64 {
    1.0
}
fn default_vanishing() -> usize {
    DEFAULT_ORDER + 1
}

impl ScenarioSpec {
    pub fn new(kind: &str) -> Self {
        ScenarioSpec {
            kind: kind.to_string(),
            amplitude: default_amplitude(),
            center: default_center(),
            width: default_width(),
            margin: default_margin(),
            order: default_vanishing(),
        }
    }
}

/// Scenario identifiers understood by [`generate`].
pub const SCENARIOS: &[&str] = &[
    "rest",
    "pulse-right",
    "pulse-left",
    "colliding-pulses",
    "standing-pulses",
    "vanishing-order",
    "jump-theta",
    "boundary-bump",
    "converging-flow",
    "draining-trough",
];

/// Scenarios whose data vanish identically near the contact points.
pub const COMPATIBLE_SCENARIOS: &[&str] =
    &["rest", "pulse-right", "pulse-left", "colliding-pulses", "standing-pulses"];

fn smooth_step(t: f64) -> f64 {
    let psi = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        psi(t) / (psi(t) + psi(1.0 - t))
    }
}

/// `C^inf` cutoff vanishing for `s <= w` and equal to one for `s >= 2 w`.
pub fn cutoff(s: f64, w: f64) -> f64 {
    if w <= 0.0 {
        1.0
    } else {
        smooth_step((s - w) / w)
    }
}

/// Builds the data of `spec`. Elevations are given in `zeta` and mapped to
/// `theta = zeta + eps zeta^2 / 2`.
pub fn generate(spec: &ScenarioSpec, params: &Parameters, grid: GridSpec) -> Result<State> {
    let eps = params.epsilon;
    let span = grid.l - grid.r;
    let a = spec.amplitude;
    let w = spec.width;
    let window = |s: f64| cutoff(s, spec.margin) * cutoff(span - s, spec.margin);
    let gauss = |s: f64| (-(s - spec.center).powi(2) / (2.0 * w * w)).exp() * window(s);
    // q = -zeta on the right moves toward the obstacle, q = +zeta on the left
    let (zeta, q): (ExteriorField, ExteriorField) = match spec.kind.as_str() {
        "rest" => (ExteriorField::zeros(grid), ExteriorField::zeros(grid)),
        "pulse-right" => (
            ExteriorField::from_distance(grid, |side, s| if side == Side::Right { a * gauss(s) } else { 0.0 }),
            ExteriorField::from_distance(grid, |side, s| if side == Side::Right { -a * gauss(s) } else { 0.0 }),
        ),
        "pulse-left" => (
            ExteriorField::from_distance(grid, |side, s| if side == Side::Left { a * gauss(s) } else { 0.0 }),
            ExteriorField::from_distance(grid, |side, s| if side == Side::Left { a * gauss(s) } else { 0.0 }),
        ),
        "colliding-pulses" => (
            ExteriorField::from_distance(grid, |_, s| a * gauss(s)),
            ExteriorField::from_distance(grid, |side, s| -side.sign() * a * gauss(s)),
        ),
        "standing-pulses" => (
            ExteriorField::from_distance(grid, |_, s| a * gauss(s)),
            ExteriorField::zeros(grid),
        ),
        "vanishing-order" => {
            // vanishes to order `order - 1` at the contact point
            let p = spec.order as i32;
            let f = move |s: f64| a * (s / w).powi(p) * (-(s / w).powi(2) / 2.0).exp() * cutoff(span - s, spec.margin);
            (
                ExteriorField::from_distance(grid, |side, s| if side == Side::Right { f(s) } else { 0.5 * f(s) }),
                ExteriorField::from_distance(grid, |side, s| if side == Side::Right { -0.5 * f(s) } else { 0.0 }),
            )
        }
        "jump-theta" => (
            ExteriorField::from_distance(grid, |side, s| {
                if side == Side::Right {
                    a * (-(s / w).powi(2) / 2.0).exp() * cutoff(span - s, spec.margin)
                } else {
                    0.0
                }
            }),
            ExteriorField::zeros(grid),
        ),
        "boundary-bump" => (
            ExteriorField::from_distance(grid, |_, s| a * (-(s / w).powi(2) / 2.0).exp() * cutoff(span - s, spec.margin)),
            ExteriorField::zeros(grid),
        ),
        "converging-flow" => {
            // q = -a (s - c) exp(-(s - c)^2 / 2w^2) / w on the right: d_x q < 0 at the centre
            let f = |s: f64| {
                let u = (s - spec.center) / w;
                -a * u * (-u * u / 2.0).exp() * window(s)
            };
            (
                ExteriorField::zeros(grid),
                ExteriorField::from_distance(grid, |side, s| if side == Side::Right { f(s) } else { 0.0 }),
            )
        }
        "draining-trough" => {
            // a trough of depth `amplitude` (fraction of the still depth) drained
            // by a diverging discharge; the depth reaches zero in finite time
            if !(eps > 0.0) {
                return Err(Error::Parameters("draining-trough needs eps > 0".into()));
            }
            let depth = a / eps;
            (
                ExteriorField::from_distance(grid, |side, s| if side == Side::Right { -depth * gauss(s) } else { 0.0 }),
                ExteriorField::from_distance(grid, |side, s| {
                    if side == Side::Right {
                        0.5 * depth * (s - spec.center) / w * gauss(s)
                    } else {
                        0.0
                    }
                }),
            )
        }
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    // theta(zeta) folds back below zeta = -1/eps, so check depth before mapping
    for (side, z) in [(Side::Left, &zeta.left), (Side::Right, &zeta.right)] {
        if let Some(i) = z.iter().position(|z| 1.0 + eps * z <= 0.0) {
            let x = grid.x(side, i);
            return Err(Error::Cavitation { x, value: 1.0 + eps * z[i] });
        }
    }
    Ok(State::from_zeta(0.0, &zeta, q, eps))
}

/// Data that vanish near `+-R` and `+-L`, hence satisfy every compatibility
/// condition.
pub fn generate_compatible(kind: &str, params: &Parameters, grid: GridSpec) -> Result<State> {
    if !COMPATIBLE_SCENARIOS.contains(&kind) {
        return Err(Error::UnknownScenario(kind.to_string()));
    }
    generate(&ScenarioSpec::new(kind), params, grid)
}

/// Flips `x -> -x`, `q -> -q`.
pub fn reflect(state: &State) -> State {
    let mut th = state.theta.clone();
    let mut q = state.q.clone();
    th.left = state.theta.right.iter().rev().copied().collect();
    th.right = state.theta.left.iter().rev().copied().collect();
    q.left = state.q.right.iter().rev().map(|v| -v).collect();
    q.right = state.q.left.iter().rev().map(|v| -v).collect();
    State { t: state.t, theta: th, q }
}

/// `theta` of a physical elevation field.
pub fn theta_of_zeta(zeta: &ExteriorField, epsilon: f64) -> ExteriorField {
    zeta.map(|z| zeta_to_theta(z, epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ObstacleProfile;
    use approx::assert_abs_diff_eq;

    fn setup(eps: f64, delta: f64) -> (Parameters, GridSpec) {
        let p = Parameters::with_delta(eps, delta, 1.0, ObstacleProfile::default()).unwrap();
        let g = GridSpec::with_spacing(1.0, 13.0, (delta / 4.0).clamp(0.01, 0.05)).unwrap();
        (p, g)
    }

    #[test]
    fn dry_elevations_are_rejected() {
        let (p, g) = setup(0.5, 0.2);
        let spec = ScenarioSpec { amplitude: -3.0, ..ScenarioSpec::new("standing-pulses") };
        assert!(matches!(generate(&spec, &p, g), Err(Error::Cavitation { .. })));
    }

    #[test]
    fn rest_ladders_vanish() {
        let (p, g) = setup(0.2, 0.3);
        let u = State::rest(g);
        let l = exact_ladder(&u, 5, &p).unwrap();
        assert_eq!(l.theta.len(), 7);
        assert!(l.theta.iter().chain(&l.q).all(|f| f.max_abs() == 0.0));
        let t = taylor_ladder(&u, 5, &p).unwrap();
        assert!(t.theta.iter().chain(&t.q).flatten().flatten().all(|v| *v == 0.0));
        let r = check_exact(&l, 1.0, 5, &p).unwrap();
        assert!(r.pass && r.rows.iter().all(|r| r.r1 == 0.0 && r.r2 == 0.0));
        assert!(check_approx(&t, 1.0, 5, &p).unwrap().pass);
    }

    #[test]
    fn first_rung_matches_direct_evaluation() {
        let (p, g) = setup(0.0, 0.3);
        let mut u = generate_compatible("pulse-right", &p, g).unwrap();
        u.theta = u.theta.add_scaled(1.0, &ExteriorField::from_distance(g, |_, s| 0.05 * (-s).exp()));
        let l = exact_ladder(&u, 2, &p).unwrap();
        let d = Dynamics::new(&p, g).unwrap().with_closure(Closure::Formula);
        let mut th1 = u.q.dx().scale(-1.0);
        clamp_far_ends(&mut th1);
        let q1 = d.apply_r(&u.theta.dx(), u.theta.jump()).unwrap().scale(-1.0);
        assert!(l.theta[1].add_scaled(-1.0, &th1).max_abs() < 1e-14);
        assert!(l.q[1].add_scaled(-1.0, &q1).max_abs() < 1e-14);
        let ev = d.rhs(&u).unwrap();
        assert!(l.q[1].add_scaled(-1.0, &ev.dq).max_abs() < 1e-14);
        assert!(l.theta[1].add_scaled(-1.0, &ev.dtheta).max_abs() < 1e-14);
    }

    #[test]
    fn transmission_relations_hold_on_exact_ladder() {
        let (p, g) = setup(0.3, 0.2);
        let u = generate(&ScenarioSpec::new("boundary-bump"), &p, g).unwrap();
        let l = exact_ladder(&u, 4, &p).unwrap();
        for (r1, r2) in exact_transmission_rows(&l, &p) {
            assert!(r1 < 1e-12 && r2 < 1e-8, "{r1} {r2}");
        }
    }

    #[test]
    fn constant_data_near_boundary_gives_zero_first_rung() {
        let p = Parameters::with_delta(0.0, 0.5, 1.0, ObstacleProfile::default()).unwrap();
        let t = TaylorLadder::from_traces(
            [&[0.3, 0.0, 0.0, 0.0], &[0.3, 0.0, 0.0, 0.0]],
            [&[0.0; 4], &[0.0; 4]],
            3,
            p.epsilon,
            p.delta,
        )
        .unwrap();
        assert_eq!(t.theta_hat(Side::Right, 1, 0), 0.0);
        assert_eq!(t.q_hat(Side::Right, 1, 0), 0.0);
    }

    #[test]
    fn hyperbolic_leading_matrix() {
        // at delta = 0 the first rung is -A U_x with A = [[0, 1/(1+eps c')], [1, 2 eps q]]
        let eps = 0.4;
        let (t0, q0) = (0.3, -0.2);
        let (tx, qx) = (0.7, 1.1);
        let t = TaylorLadder::from_traces([&[t0, tx, 0.0], &[t0, tx, 0.0]], [&[q0, qx, 0.0], &[q0, qx, 0.0]], 2, eps, 0.0)
            .unwrap();
        let inv = 1.0 / crate::types::one_plus_eps_dc(t0, eps).unwrap();
        assert_abs_diff_eq!(t.theta_hat(Side::Right, 1, 0), -inv * qx, epsilon = 1e-14);
        assert_abs_diff_eq!(t.q_hat(Side::Right, 1, 0), -(tx + 2.0 * eps * q0 * qx), epsilon = 1e-14);
    }

    #[test]
    fn jump_in_theta_fails() {
        let (p, g) = setup(0.1, 0.05);
        let mut spec = ScenarioSpec::new("jump-theta");
        spec.amplitude = 0.5;
        let u = generate(&spec, &p, g).unwrap();
        let m = default_m(&u, 5);
        let t = taylor_ladder(&u, 5, &p).unwrap();
        let r = check_approx(&t, m, 5, &p).unwrap();
        // q_0 = 0 makes theta_1 and every odd row vanish; the jump shows at j = 0
        assert!(!r.pass);
        assert_eq!(r.first_failure(), Some(0));
        assert!(r.rows[1].r1 == 0.0 && r.rows[1].r2 == 0.0);
        let l = exact_ladder(&u, 5, &p).unwrap();
        let r = check_exact(&l, m, 5, &p).unwrap();
        assert!(!r.pass && r.first_failure() == Some(0));
    }

    #[test]
    fn compatible_pulses_pass() {
        let (p, g) = setup(0.1, 0.1);
        for kind in COMPATIBLE_SCENARIOS {
            let u = generate_compatible(kind, &p, g).unwrap();
            assert!(u.q.jump().abs() == 0.0);
            let m = default_m(&u, 5);
            assert!(check_approx(&taylor_ladder(&u, 5, &p).unwrap(), m, 5, &p).unwrap().pass, "{kind}");
            assert!(check_exact(&exact_ladder(&u, 5, &p).unwrap(), m, 5, &p).unwrap().pass, "{kind}");
        }
        assert!(matches!(generate_compatible("jump-theta", &p, g), Err(Error::UnknownScenario(_))));
        assert!(generate(&ScenarioSpec::new("nope"), &p, g).is_err());
    }

    #[test]
    fn colliding_pulses_are_symmetric() {
        let (p, g) = setup(0.1, 0.1);
        let u = generate_compatible("colliding-pulses", &p, g).unwrap();
        let r = reflect(&u);
        assert!(r.theta.add_scaled(-1.0, &u.theta).max_abs() < 1e-15);
        assert!(r.q.add_scaled(-1.0, &u.q).max_abs() < 1e-15);
    }

    #[test]
    fn report_serializes() {
        let r = CompatReport::build(CompatMode::Exact, 2, 0.1, 3.0, vec![(0.0, 1.0), (0.0, 0.0)]);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["mode"], "exact");
        assert_eq!(v["M"], 3.0);
        assert_eq!(v["rows"][0]["pass"], false);
        assert_eq!(v["pass"], false);
        assert_eq!(r.first_failure(), Some(0));
    }
}
