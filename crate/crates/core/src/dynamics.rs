//! Vector fields of the ODE formulation: `d_t U = L(U) = (-Phi, -R(Gamma, [[theta]]))`
//! in the dispersive case and its `delta = 0` hyperbolic counterpart.

use serde::{Deserialize, Serialize};

use crate::elliptic::{boundary_layer, discrete_layer, helmholtz_flux, HelmholtzSolver};
use crate::error::{Error, Result};
use crate::types::{dc_of_theta, ExteriorField, GridSpec, Parameters, Side, State, DEFAULT_C0};

/// One evaluation of the dispersive vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsEvaluation {
    pub dtheta: ExteriorField,
    pub dq: ExteriorField,
    pub d_avg_q: f64,
    pub gamma_field: ExteriorField,
}

/// `sqrt(1 + 2 eps theta) = 1 / (1 + eps c'(theta))` at every node, failing
/// when the state leaves the admissible set or `1 + eps c'` drops below `c0`.
pub fn inverse_denominator(theta: &ExteriorField, epsilon: f64, c0: f64) -> Result<ExteriorField> {
    let mut out = ExteriorField::zeros(theta.grid);
    for side in Side::BOTH {
        for (i, (&th, o)) in theta.side(side).iter().zip(out.side_mut(side)).enumerate() {
            let arg = 1.0 + 2.0 * epsilon * th;
            let x = theta.grid.x(side, i);
            if !(arg > 0.0) {
                return Err(Error::Cavitation { x, value: arg });
            }
            let s = arg.sqrt();
            if 1.0 / s < c0 {
                return Err(Error::BlowUp { x, value: 1.0 / s, c0 });
            }
            *o = s;
        }
    }
    Ok(out)
}

/// `Phi = d_x q / (1 + eps c'(theta))`.
pub fn compute_phi(state: &State, epsilon: f64, c0: f64) -> Result<ExteriorField> {
    let s = inverse_denominator(&state.theta, epsilon, c0)?;
    Ok(state.q.dx().zip_map(&s, |d, s| d * s))
}

/// `Gamma = d_x (theta + eps q^2)`.
pub fn compute_gamma(state: &State, epsilon: f64) -> ExteriorField {
    state.theta.zip_map(&state.q, |t, q| t + epsilon * q * q).dx()
}

/// The far-end values are held at zero (Dirichlet truncation).
pub(crate) fn clamp_far_ends(f: &mut ExteriorField) {
    let n = f.grid.n_per_side;
    f.left[0] = 0.0;
    f.right[n - 1] = 0.0;
}

/// Discretization at the contact points.
///
/// `Conservative` pairs summation-by-parts derivatives with the grid's own
/// decaying mode and the Helmholtz-corrected boundary flux, so that at
/// `eps = 0` the semi-discrete system conserves [`crate::diagnostics`]'s
/// discrete energy exactly. `Formula` evaluates the closed-form layer
/// `exp(-|x|_R / delta)` with coefficient `(delta^2 [[d_x R_0 Gamma]] + rho) / (alpha + 2 delta)`
/// and one-sided 3-point derivatives; it leaks energy at `O(dx^2 / delta^2)`
/// whenever a layer is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Closure {
    #[default]
    Conservative,
    Formula,
}


/// Dispersive vector field with a prefactored Helmholtz solver.
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub params: Parameters,
    pub c0: f64,
    pub closure: Closure,
    solver: HelmholtzSolver,
}

impl Dynamics {
    pub fn new(params: &Parameters, grid: GridSpec) -> Result<Self> {
        let solver = HelmholtzSolver::new(grid, params.delta)?;
        Ok(Dynamics { params: params.clone(), c0: DEFAULT_C0, closure: Closure::default(), solver })
    }

    pub fn with_c0(mut self, c0: f64) -> Self {
        self.c0 = c0;
        self
    }

    pub fn with_closure(mut self, closure: Closure) -> Self {
        self.closure = closure;
        self
    }

    pub fn grid(&self) -> GridSpec {
        self.solver.grid()
    }

    pub fn solver(&self) -> &HelmholtzSolver {
        &self.solver
    }

    /// Layer amplitude `sigma` together with `R_0 Gamma`. Under
    /// [`Closure::Formula`], `sigma = (delta^2 [[d_x R_0 Gamma]] + rho) / (alpha + 2 delta)`;
    /// under [`Closure::Conservative`] the denominator is `alpha - delta^2 [[d_x layer]]`
    /// with both jumps taken by [`helmholtz_flux`].
    pub fn layer_coefficient(&self, gamma: &ExteriorField, rho: f64) -> Result<(f64, ExteriorField)> {
        let r0 = self.solver.solve_r0(gamma)?;
        let d = self.params.delta;
        let sigma = match self.closure {
            Closure::Formula => (d * d * r0.jump_dx() + rho) / (self.params.alpha + 2.0 * d),
            Closure::Conservative => {
                let jump = |u: &ExteriorField, f: &ExteriorField| {
                    helmholtz_flux(u, f, Side::Right, d) - helmholtz_flux(u, f, Side::Left, d)
                };
                let zero = ExteriorField::zeros(self.grid());
                let unit = self.layer(1.0);
                (d * d * jump(&r0, gamma) + rho) / (self.params.alpha - d * d * jump(&unit, &zero))
            }
        };
        Ok((sigma, r0))
    }

    /// The decaying profile with value `sigma` at `+-R`.
    pub fn layer(&self, sigma: f64) -> ExteriorField {
        match self.closure {
            Closure::Formula => boundary_layer(sigma, self.params.delta, self.grid()),
            Closure::Conservative => discrete_layer(sigma, self.params.delta, self.grid()),
        }
    }

    /// `Gamma = d_x (theta + eps q^2)`. The conservative closure writes the
    /// quadratic part in split form `(2/3) (d_x q^2 + q d_x q)`, which the
    /// summation-by-parts identity turns into the exact boundary flux `(2/3) q^3`.
    pub fn gamma(&self, state: &State) -> ExteriorField {
        let eps = self.params.epsilon;
        match self.closure {
            Closure::Formula => state.theta.zip_map(&state.q, |t, q| t + eps * q * q).dx(),
            Closure::Conservative => {
                let d = |f: &ExteriorField| f.dx_sbp();
                let q2 = state.q.map(|q| q * q);
                let split = d(&q2).add_scaled(1.0, &d(&state.q).zip_map(&state.q, |a, b| a * b));
                d(&state.theta).add_scaled(2.0 * eps / 3.0, &split)
            }
        }
    }

    pub fn phi(&self, state: &State) -> Result<ExteriorField> {
        let s = inverse_denominator(&state.theta, self.params.epsilon, self.c0)?;
        let qx = match self.closure {
            Closure::Conservative => state.q.dx_sbp(),
            Closure::Formula => state.q.dx(),
        };
        Ok(qx.zip_map(&s, |d, s| d * s))
    }

    /// `R(Gamma, rho) = R_0 Gamma + sigma * layer`.
    pub fn apply_r(&self, gamma: &ExteriorField, rho: f64) -> Result<ExteriorField> {
        let (sigma, r0) = self.layer_coefficient(gamma, rho)?;
        Ok(r0.add_scaled(1.0, &self.layer(sigma)))
    }

    pub fn dt_avg_q(&self, state: &State) -> Result<f64> {
        Ok(-self.layer_coefficient(&self.gamma(state), state.theta.jump())?.0)
    }

    pub fn rhs(&self, state: &State) -> Result<RhsEvaluation> {
        let mut dtheta = self.phi(state)?.scale(-1.0);
        let gamma_field = self.gamma(state);
        let (sigma, r0) = self.layer_coefficient(&gamma_field, state.theta.jump())?;
        let mut dq = r0.add_scaled(1.0, &self.layer(sigma)).scale(-1.0);
        clamp_far_ends(&mut dtheta);
        clamp_far_ends(&mut dq);
        Ok(RhsEvaluation { dtheta, dq, d_avg_q: -sigma, gamma_field })
    }
}

/// `R(Gamma, rho)` with a one-off solver.
pub fn apply_r_operator(gamma: &ExteriorField, rho: f64, params: &Parameters) -> Result<ExteriorField> {
    Dynamics::new(params, gamma.grid)?.apply_r(gamma, rho)
}

/// `d<q>/dt = -(delta^2 [[d_x R_0 Gamma]] + [[theta]]) / (alpha + 2 delta)`.
pub fn dt_avg_q(state: &State, params: &Parameters) -> Result<f64> {
    Dynamics::new(params, state.grid())?.dt_avg_q(state)
}

/// Dispersive vector field with a one-off solver.
pub fn rhs(state: &State, params: &Parameters) -> Result<RhsEvaluation> {
    Dynamics::new(params, state.grid())?.rhs(state)
}

/// `delta = 0` vector field `(-d_x q / (1 + eps c'), -d_x (theta + eps q^2))`.
///
/// At `x = +-R` the outgoing characteristic relation is kept and `d_t q` is
/// replaced by `-[[theta]] / alpha` on both sides, so `<q>` is the common
/// boundary discharge. The characteristic relation with left eigenvector
/// `(1, lambda)`, `lambda = eps q -+ sqrt(eps^2 q^2 + sqrt(1 + 2 eps theta))`,
/// reads `theta_t + lambda q_t = -lambda (theta_x + lambda q_x)`, with
/// one-sided second-order derivatives taken into the domain.
pub fn rhs_hyperbolic(state: &State, params: &Parameters) -> Result<(ExteriorField, ExteriorField)> {
    rhs_hyperbolic_with(state, params, DEFAULT_C0)
}

pub fn rhs_hyperbolic_with(
    state: &State,
    params: &Parameters,
    c0: f64,
) -> Result<(ExteriorField, ExteriorField)> {
    let eps = params.epsilon;
    let s = inverse_denominator(&state.theta, eps, c0)?;
    let qx = state.q.dx();
    let mut dtheta = qx.zip_map(&s, |d, s| -d * s);
    let mut dq = state.theta.zip_map(&state.q, |t, q| t + eps * q * q).dx().scale(-1.0);
    let qt = -state.theta.jump() / params.alpha;
    for side in Side::BOTH {
        let b = state.grid().boundary_index(side);
        let th = state.theta.side(side)[b];
        let q = state.q.side(side)[b];
        let w = (1.0 + 2.0 * eps * th).sqrt();
        let root = (eps * eps * q * q + w).sqrt();
        // incoming from the domain: lambda < 0 at +R, lambda > 0 at -R
        let lambda = match side {
            Side::Right => eps * q - root,
            Side::Left => eps * q + root,
        };
        let thx = state.theta.boundary_dx(side);
        let qxb = state.q.boundary_dx(side);
        dq.side_mut(side)[b] = qt;
        dtheta.side_mut(side)[b] = -lambda * qt - lambda * (thx + lambda * qxb);
    }
    clamp_far_ends(&mut dtheta);
    clamp_far_ends(&mut dq);
    Ok((dtheta, dq))
}

fn check_uniform(history: &[State], need: usize) -> Result<f64> {
    if history.len() < need {
        return Err(Error::HistoryTooShort { got: history.len(), need });
    }
    let dt = history[1].t - history[0].t;
    if !(dt > 0.0) {
        return Err(Error::NonUniformHistory);
    }
    for w in history.windows(2) {
        if ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt.max(1e-300) + 1e-12 * w[1].t.abs() {
            return Err(Error::NonUniformHistory);
        }
    }
    Ok(dt)
}

/// `(r1, r2)`: `r1 = max |[[q]]|` over the window, `r2` the largest residual
/// of `-delta^2 d_t [[d_x q]] + [[theta]] + alpha d_t <q>` at interior window
/// states (centered time differences).
pub fn transmission_residuals(history: &[State], params: &Parameters) -> Result<(f64, f64)> {
    let dt = check_uniform(history, 3)?;
    let r1 = history.iter().map(|s| s.q.jump().abs()).fold(0.0, f64::max);
    let d2 = params.delta * params.delta;
    let mut r2 = 0.0_f64;
    for k in 1..history.len() - 1 {
        let (a, b, c) = (&history[k - 1], &history[k], &history[k + 1]);
        let djump = (c.q.jump_dx() - a.q.jump_dx()) / (2.0 * dt);
        let davg = (c.q.average() - a.q.average()) / (2.0 * dt);
        let r = -d2 * djump + b.theta.jump() + params.alpha * davg;
        r2 = r2.max(r.abs());
    }
    Ok((r1, r2))
}

/// Pointwise residual of
/// `a0 delta^2 Y_tt + eps delta^2 a1 Y_t + (1 + eps delta a2) Y = chi + eps psi`
/// with `Y = d_x theta`, `a0 = 1 + eps c'`, `a1 = 2 d_t c'`, `a2 = delta d_tt c'`,
/// `chi = -d_t q`, `psi = 2 q (1 + eps c') d_t theta`, at the middle state of
/// the history. Time derivatives are centered differences.
pub fn y_ode_residual(history: &[State], params: &Parameters) -> Result<ExteriorField> {
    let dt = check_uniform(history, 5)?;
    let k = history.len() / 2;
    let (sm, s0, sp) = (&history[k - 1], &history[k], &history[k + 1]);
    let eps = params.epsilon;
    let delta = params.delta;
    let cprime = |s: &State| -> Result<ExteriorField> {
        let mut out = ExteriorField::zeros(s.grid());
        for side in Side::BOTH {
            for (o, &t) in out.side_mut(side).iter_mut().zip(s.theta.side(side)) {
                *o = dc_of_theta(t, eps)?;
            }
        }
        Ok(out)
    };
    let (cm, c0, cp) = (cprime(sm)?, cprime(s0)?, cprime(sp)?);
    let (ym, y0, yp) = (sm.theta.dx(), s0.theta.dx(), sp.theta.dx());
    let grid = s0.grid();
    let mut out = ExteriorField::zeros(grid);
    let n = grid.n_per_side;
    for side in Side::BOTH {
        for i in 0..n {
            let at = |f: &ExteriorField| f.side(side)[i];
            let y_t = (at(&yp) - at(&ym)) / (2.0 * dt);
            let y_tt = (at(&yp) - 2.0 * at(&y0) + at(&ym)) / (dt * dt);
            let c_t = (at(&cp) - at(&cm)) / (2.0 * dt);
            let c_tt = (at(&cp) - 2.0 * at(&c0) + at(&cm)) / (dt * dt);
            let q_t = (at(&sp.q) - at(&sm.q)) / (2.0 * dt);
            let th_t = (at(&sp.theta) - at(&sm.theta)) / (2.0 * dt);
            let a0 = 1.0 + eps * at(&c0);
            let a1 = 2.0 * c_t;
            let a2 = delta * c_tt;
            let chi = -q_t;
            let psi = 2.0 * at(&s0.q) * a0 * th_t;
            out.side_mut(side)[i] = a0 * delta * delta * y_tt + eps * delta * delta * a1 * y_t
                + (1.0 + eps * delta * a2) * at(&y0)
                - chi
                - eps * psi;
        }
    }
    clamp_far_ends(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ObstacleProfile;
    use approx::assert_abs_diff_eq;

    fn setup(eps: f64, delta: f64) -> (Parameters, GridSpec) {
        let p = Parameters::with_delta(eps, delta, 1.0, ObstacleProfile::default()).unwrap();
        let g = GridSpec::with_spacing(1.0, 11.0, delta / 8.0).unwrap();
        (p, g)
    }

    #[test]
    fn rest_state_is_a_fixed_point() {
        let (p, g) = setup(0.3, 0.5);
        let ev = rhs(&State::rest(g), &p).unwrap();
        assert_eq!(ev.dtheta.max_abs(), 0.0);
        assert_eq!(ev.dq.max_abs(), 0.0);
        assert_eq!(ev.d_avg_q, 0.0);
        let (a, b) = rhs_hyperbolic(&State::rest(g), &p).unwrap();
        assert_eq!(a.max_abs() + b.max_abs(), 0.0);
    }

    #[test]
    fn phi_examples() {
        let (_, g) = setup(0.0, 0.5);
        let mut s = State::rest(g);
        s.q = ExteriorField::from_fn(g, f64::sin);
        let phi = compute_phi(&s, 0.0, DEFAULT_C0).unwrap();
        let exact = ExteriorField::from_fn(g, f64::cos);
        assert!(phi.add_scaled(-1.0, &exact).max_abs() < 1e-3);

        let eps = 0.4;
        s.theta = ExteriorField::constant(g, 0.7);
        s.q = ExteriorField::from_fn(g, |x| x);
        let phi = compute_phi(&s, eps, DEFAULT_C0).unwrap();
        let expect = 1.0 / crate::types::one_plus_eps_dc(0.7, eps).unwrap();
        for v in phi.iter() {
            assert_abs_diff_eq!(*v, expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn gamma_examples() {
        let (_, g) = setup(0.0, 0.5);
        let mut s = State::rest(g);
        s.theta = ExteriorField::from_fn(g, |x| x * x);
        let gm = compute_gamma(&s, 0.0);
        let exact = ExteriorField::from_fn(g, |x| 2.0 * x);
        assert!(gm.add_scaled(-1.0, &exact).max_abs() < 1e-10);
        let mut s = State::rest(g);
        s.q = ExteriorField::from_fn(g, |x| x);
        let gm = compute_gamma(&s, 1.0);
        assert!(gm.add_scaled(-1.0, &exact).max_abs() < 1e-10);
    }

    #[test]
    fn r_operator_layer_only() {
        let (p, g) = setup(0.0, 0.5);
        assert_abs_diff_eq!(p.alpha, 2.0);
        let d = Dynamics::new(&p, g).unwrap().with_closure(Closure::Formula);
        let out = d.apply_r(&ExteriorField::zeros(g), 1.0).unwrap();
        let expect = boundary_layer(1.0 / 3.0, 0.5, g);
        assert!(out.add_scaled(-1.0, &expect).max_abs() < 1e-15);
        assert_eq!(apply_r_operator(&ExteriorField::zeros(g), 0.0, &p).unwrap().max_abs(), 0.0);
        // the conservative closure converges to the same profile
        let mut errs = Vec::new();
        for h in [0.05, 0.025, 0.0125] {
            let g = GridSpec::with_spacing(1.0, 11.0, h).unwrap();
            let out = apply_r_operator(&ExteriorField::zeros(g), 1.0, &p).unwrap();
            errs.push(out.add_scaled(-1.0, &boundary_layer(1.0 / 3.0, 0.5, g)).max_abs());
        }
        assert!(errs[0] < 1e-3);
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn dt_avg_q_example() {
        let (p, g) = setup(0.0, 0.5);
        let mut s = State::rest(g);
        s.theta.right[0] = 0.1;
        for closure in [Closure::Formula, Closure::Conservative] {
            let d = Dynamics::new(&p, g).unwrap().with_closure(closure);
            let (sigma, _) = d.layer_coefficient(&ExteriorField::zeros(g), 0.1).unwrap();
            let tol = if closure == Closure::Formula { 1e-15 } else { 1e-4 };
            assert_abs_diff_eq!(-sigma, -0.1 / 3.0, epsilon = tol);
            let ev = d.rhs(&s).unwrap();
            assert_abs_diff_eq!(ev.d_avg_q, ev.dq.average(), epsilon = 1e-12);
            assert_abs_diff_eq!(ev.d_avg_q, d.dt_avg_q(&s).unwrap(), epsilon = 1e-15);
        }
    }

    #[test]
    fn r_operator_boundary_value_is_sigma() {
        let (p, g) = setup(0.2, 0.3);
        let gamma = ExteriorField::from_fn(g, |x| (0.7 * x).sin() * (-0.1 * x * x).exp());
        for closure in [Closure::Formula, Closure::Conservative] {
            let d = Dynamics::new(&p, g).unwrap().with_closure(closure);
            let (sigma, _) = d.layer_coefficient(&gamma, 0.4).unwrap();
            let out = d.apply_r(&gamma, 0.4).unwrap();
            assert_abs_diff_eq!(out.trace(Side::Left), sigma, epsilon = 1e-15);
            assert_abs_diff_eq!(out.trace(Side::Right), sigma, epsilon = 1e-15);
        }
    }

    /// `d/dt` of trapezoid `zeta^2/2 + eps zeta^3/6 + q^2/2`, cell-wise
    /// `delta^2 (d_x q)^2 / 2` and `alpha <q>^2 / 2`, by the chain rule.
    fn energy_rate(s: &State, ev: &RhsEvaluation, p: &Parameters) -> f64 {
        let h = s.grid().dx;
        let eps = p.epsilon;
        let d2 = p.delta * p.delta;
        let mut rate = p.alpha * s.q.average() * ev.d_avg_q;
        for side in Side::BOTH {
            let (th, q) = (s.theta.side(side), s.q.side(side));
            let (tt, qt) = (ev.dtheta.side(side), ev.dq.side(side));
            let n = th.len();
            for i in 0..n {
                let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
                let sq = (1.0 + 2.0 * eps * th[i]).sqrt();
                rate += w * (th[i] * tt[i] / sq + q[i] * qt[i]);
            }
            for i in 0..n - 1 {
                rate += d2 * (q[i + 1] - q[i]) * (qt[i + 1] - qt[i]) / h;
            }
        }
        rate
    }

    #[test]
    fn conservative_closure_conserves_discrete_energy() {
        let (p, g) = setup(0.2, 0.25);
        let bump = |x: f64, c: f64| (-(x - c) * (x - c)).exp();
        let mut s = State::rest(g);
        s.theta = ExteriorField::from_fn(g, |x| 0.3 * bump(x, 1.5) - 0.1 * bump(x, -2.0));
        s.q = ExteriorField::from_fn(g, |x| 0.2 * bump(x, 0.0) + 0.1 * (x * x - 1.0) * bump(x, 2.0));
        assert!(s.theta.jump().abs() > 0.1 && s.q.trace(Side::Right) > 0.05);
        let ev = rhs(&s, &p).unwrap();
        let scale = ev.dq.max_abs() * s.q.max_abs();
        assert!(energy_rate(&s, &ev, &p).abs() < 1e-12 * scale.max(1.0), "{}", energy_rate(&s, &ev, &p));
        let formula = Dynamics::new(&p, g).unwrap().with_closure(Closure::Formula).rhs(&s).unwrap();
        assert!(energy_rate(&s, &formula, &p).abs() > 1e-6);
    }

    #[test]
    fn transmission_residuals_detect_corruption() {
        let (p, g) = setup(0.1, 0.5);
        let hist: Vec<State> = (0..4)
            .map(|k| State { t: 0.1 * k as f64, ..State::rest(g) })
            .collect();
        assert_eq!(transmission_residuals(&hist, &p).unwrap(), (0.0, 0.0));
        let mut bad = hist.clone();
        for s in bad.iter_mut() {
            for v in s.q.right.iter_mut() {
                *v += 0.25;
            }
        }
        assert_abs_diff_eq!(transmission_residuals(&bad, &p).unwrap().0, 0.25);
        assert!(matches!(
            transmission_residuals(&hist[..2], &p),
            Err(Error::HistoryTooShort { .. })
        ));
    }

    #[test]
    fn y_residual_of_rest_is_zero() {
        let (p, g) = setup(0.1, 0.5);
        let hist: Vec<State> =
            (0..5).map(|k| State { t: 0.1 * k as f64, ..State::rest(g) }).collect();
        assert_eq!(y_ode_residual(&hist, &p).unwrap().max_abs(), 0.0);
        assert!(y_ode_residual(&hist[..4], &p).is_err());
    }

    // smooth admissible state with [[q]] = 0: the linear correction removes the
    // jump of the random profile
    fn random_state(g: GridSpec, c: &[f64]) -> State {
        let theta = ExteriorField::from_fn(g, |x| 0.3 * c[0] * (-(x - 2.0 * c[1]).powi(2)).exp() + 0.1 * c[2] * (c[3] * x).sin());
        let f = |x: f64| 0.4 * c[4] * (c[5] * x).cos() * (-0.3 * x * x).exp() + 0.2 * c[6] * x.sin();
        let k = (f(-g.r) - f(g.r)) / (2.0 * g.r);
        let q = ExteriorField::from_fn(g, |x| f(x) + k * x * (-0.1 * x * x).exp() / (-0.1 * g.r * g.r).exp());
        State { t: 0.0, theta, q }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(100))]
        #[test]
        fn discharge_tendency_is_continuous(c in proptest::collection::vec(-1.0f64..1.0, 7), eps in 0.0f64..0.3) {
            let p = Parameters::with_delta(eps, 0.3, 1.0, ObstacleProfile::default()).unwrap();
            let g = GridSpec::with_spacing(1.0, 7.0, 0.05).unwrap();
            let st = random_state(g, &c);
            proptest::prop_assert!(st.q.jump().abs() < 1e-14);
            for closure in [Closure::Conservative, Closure::Formula] {
                let d = Dynamics::new(&p, g).unwrap().with_closure(closure);
                let ev = d.rhs(&st).unwrap();
                proptest::prop_assert!(ev.dq.jump().abs() <= 1e-12, "{:?}: {}", closure, ev.dq.jump());
                let avg = d.dt_avg_q(&st).unwrap();
                proptest::prop_assert!((avg - ev.dq.average()).abs() <= 1e-10);
                proptest::prop_assert!((ev.d_avg_q - ev.dq.average()).abs() <= 1e-10);
            }
        }

        #[test]
        fn reflection_commutes_with_the_vector_field(c in proptest::collection::vec(-1.0f64..1.0, 7)) {
            let p = Parameters::with_delta(0.2, 0.3, 1.0, ObstacleProfile::default()).unwrap();
            let g = GridSpec::with_spacing(1.0, 7.0, 0.05).unwrap();
            let st = random_state(g, &c);
            let d = Dynamics::new(&p, g).unwrap();
            let ev = d.rhs(&st).unwrap();
            let mirrored = d.rhs(&crate::compat::reflect(&st)).unwrap();
            let expect = crate::compat::reflect(&State { t: 0.0, theta: ev.dtheta, q: ev.dq });
            proptest::prop_assert!(mirrored.dtheta.add_scaled(-1.0, &expect.theta).max_abs() < 1e-12);
            proptest::prop_assert!(mirrored.dq.add_scaled(-1.0, &expect.q).max_abs() < 1e-12);
        }

        #[test]
        fn superposition_at_zero_amplitude(
            c in proptest::collection::vec(-1.0f64..1.0, 7),
            e in proptest::collection::vec(-1.0f64..1.0, 7),
            a in -2.0f64..2.0,
        ) {
            let p = Parameters::with_delta(0.0, 0.3, 1.0, ObstacleProfile::default()).unwrap();
            let g = GridSpec::with_spacing(1.0, 7.0, 0.05).unwrap();
            let (u, v) = (random_state(g, &c), random_state(g, &e));
            let w = State { t: 0.0, theta: u.theta.add_scaled(a, &v.theta), q: u.q.add_scaled(a, &v.q) };
            for closure in [Closure::Conservative, Closure::Formula] {
                let d = Dynamics::new(&p, g).unwrap().with_closure(closure);
                let (ru, rv, rw) = (d.rhs(&u).unwrap(), d.rhs(&v).unwrap(), d.rhs(&w).unwrap());
                proptest::prop_assert!(rw.dtheta.add_scaled(-1.0, &ru.dtheta.add_scaled(a, &rv.dtheta)).max_abs() < 1e-11);
                proptest::prop_assert!(rw.dq.add_scaled(-1.0, &ru.dq.add_scaled(a, &rv.dq)).max_abs() < 1e-11);
            }
        }
    }
}
