//! Energies and fluxes, the linearized energy, the blow-up monitor, the
//! time-derivative energy at low order, boundary-layer width and the
//! interior pressure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    simpson_under_obstacle, theta_to_zeta, ExteriorField, Parameters, Side, State,
    OBSTACLE_QUADRATURE_NODES,
};

/// One row of `energies.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub e_ext: f64,
    pub e_int: f64,
    pub e_tot: f64,
    pub flux_jump: f64,
    pub m0: f64,
    pub layer_width: f64,
    #[serde(rename = "frakE")]
    pub frak_e: f64,
}

impl EnergyRecord {
    pub const CSV_HEADER: &'static str = "t,e_ext,e_int,e_tot,flux_jump,m0,layer_width,frakE";

    /// Record of a state outside the admissible set: energies `NaN`, `m0 = inf`.
    pub fn inadmissible(t: f64) -> Self {
        EnergyRecord {
            t,
            e_ext: f64::NAN,
            e_int: f64::NAN,
            e_tot: f64::NAN,
            flux_jump: f64::NAN,
            m0: f64::INFINITY,
            layer_width: f64::NAN,
            frak_e: f64::NAN,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.t, self.e_ext, self.e_int, self.e_tot, self.flux_jump, self.m0, self.layer_width, self.frak_e
        )
    }
}

/// Exterior energy and the energy flux at both contact points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExteriorEnergy {
    pub energy: f64,
    pub flux_left: f64,
    pub flux_right: f64,
}

impl ExteriorEnergy {
    /// `[[F_ext]] = F(R) - F(-R)`, which equals `dE_ext/dt`.
    pub fn flux_jump(&self) -> f64 {
        self.flux_right - self.flux_left
    }
}

/// `int e_ext` (trapezoid; the `(d_x q)^2` term over cells) with
/// `e_ext = zeta^2/2 + eps zeta^3/6 + q^2/2 + delta^2 (d_x q)^2 / 2`
/// and the traces of
/// `F_ext = q [zeta + 2 eps q^2 / 3 + eps zeta^2 / 2 - delta^2 d_x d_t q]`.
pub fn energy_exterior(
    zeta: &ExteriorField,
    q: &ExteriorField,
    dq_dt: &ExteriorField,
    params: &Parameters,
) -> ExteriorEnergy {
    let eps = params.epsilon;
    let d2 = params.delta * params.delta;
    let density = zeta.zip_map(q, |z, q| 0.5 * z * z + eps * z * z * z / 6.0 + 0.5 * q * q);
    let flux = |side: Side| {
        let z = zeta.trace(side);
        let qb = q.trace(side);
        let qxt = if d2 > 0.0 { dq_dt.boundary_dx(side) } else { 0.0 };
        qb * (z + 2.0 * eps * qb * qb / 3.0 + 0.5 * eps * z * z - d2 * qxt)
    };
    ExteriorEnergy { energy: density.integral() + 0.5 * d2 * q.dx_squared_integral(), flux_left: flux(Side::Left), flux_right: flux(Side::Right) }
}

/// `int_{-R}^{R} zeta_w^2 / 2 + <q>^2 / (2 h_w)`; the second term is `alpha <q>^2 / 2`.
pub fn energy_interior(avg_q: f64, params: &Parameters) -> f64 {
    let pot = simpson_under_obstacle(params.r, OBSTACLE_QUADRATURE_NODES, |x| {
        let z = params.obstacle.eval(x);
        Ok(0.5 * z * z)
    })
    .unwrap_or(f64::NAN);
    pot + 0.5 * params.alpha * avg_q * avg_q
}

/// `E_ext + alpha <q>^2 / 2` with
/// `E_ext = 1/2 int (1 + eps c'(theta_ref)) theta^2 + q^2 + delta^2 (d_x q)^2`.
pub fn linearized_energy(state: &State, avg_q: f64, reference: &State, params: &Parameters) -> Result<f64> {
    let eps = params.epsilon;
    let mut weight = ExteriorField::zeros(state.grid());
    for side in Side::BOTH {
        for (w, &t) in weight.side_mut(side).iter_mut().zip(reference.theta.side(side)) {
            *w = crate::types::one_plus_eps_dc(t, eps)?;
        }
    }
    let d2 = params.delta * params.delta;
    let dens = state.theta.zip_map(&weight, |t, w| w * t * t).zip_map(&state.q, |e, q| e + q * q);
    Ok(0.5 * (dens.integral() + d2 * state.q.dx_squared_integral()) + 0.5 * params.alpha * avg_q * avg_q)
}

/// `m0 = max(|theta|, |q|, |d_x q|, 1 / (1 + eps c'(theta)))` in sup norm;
/// infinite once the state leaves the admissible set.
pub fn blowup_monitor(state: &State, epsilon: f64) -> f64 {
    let mut m = state.theta.max_abs().max(state.q.max_abs()).max(state.q.dx().max_abs());
    for &t in state.theta.iter() {
        let arg = 1.0 + 2.0 * epsilon * t;
        if !(arg > 0.0) || !arg.is_finite() {
            return f64::INFINITY;
        }
        m = m.max(arg.sqrt());
    }
    if m.is_nan() {
        f64::INFINITY
    } else {
        m
    }
}

/// `sum_{j <= 2} |d_t^j U|^2 + delta^2 |d_t^j d_x q|^2 + alpha |<d_t^j q>|^2`
/// at the middle state of a uniform window of at least five states.
pub fn frak_e(history: &[State], params: &Parameters) -> Result<f64> {
    if history.len() < 5 {
        return Err(Error::HistoryTooShort { got: history.len(), need: 5 });
    }
    let dt = history[1].t - history[0].t;
    for w in history.windows(2) {
        if !(dt > 0.0) || ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt {
            return Err(Error::NonUniformHistory);
        }
    }
    let k = history.len() / 2;
    let (a, b, c) = (&history[k - 1], &history[k], &history[k + 1]);
    let d2 = params.delta * params.delta;
    let term = |theta: &ExteriorField, q: &ExteriorField| {
        let l2 = |f: &ExteriorField| f.map(|v| v * v).integral();
        l2(theta) + l2(q) + d2 * l2(&q.dx()) + params.alpha * q.average().powi(2)
    };
    let t0 = term(&b.theta, &b.q);
    let t1 = term(
        &c.theta.add_scaled(-1.0, &a.theta).scale(0.5 / dt),
        &c.q.add_scaled(-1.0, &a.q).scale(0.5 / dt),
    );
    let second = |f: &dyn Fn(&State) -> &ExteriorField| {
        f(c).add_scaled(-2.0, f(b)).add_scaled(1.0, f(a)).scale(1.0 / (dt * dt))
    };
    let t2 = term(&second(&|s: &State| &s.theta), &second(&|s: &State| &s.q));
    Ok(t0 + t1 + t2)
}

/// Least-squares e-folding length of `|d_x q - background|` over the first
/// `max(8, 4 delta / dx)` nodes from the contact point. The background is the
/// mean of `d_x q` over `|x|_R in [8 delta, 10 delta]`. Returns `NaN` when no
/// exponential layer is present: signal below `1e-12`, a poor log-linear fit,
/// or a fitted width longer than the fit window.
pub fn layer_width(q: &ExteriorField, side: Side, delta: f64) -> f64 {
    if !(delta > 0.0) {
        return f64::NAN;
    }
    let grid = q.grid;
    let h = grid.dx;
    let qx = {
        let v = q.from_boundary(side);
        crate::stencil::derivative(&v, h)
    };
    let n = grid.n_per_side;
    let m = 8usize.max((4.0 * delta / h).ceil() as usize).min(n);
    let lo = (8.0 * delta / h).round() as usize;
    let hi = ((10.0 * delta / h).round() as usize).min(n - 1);
    let background = if lo < hi {
        qx[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
    } else {
        0.0
    };
    let signal: Vec<f64> = qx[..m].iter().map(|v| (v - background).abs()).collect();
    let peak = signal.iter().cloned().fold(0.0, f64::max);
    if !(peak > 1e-12) {
        return f64::NAN;
    }
    let pts: Vec<(f64, f64)> = signal
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 1e-14 * peak.max(1e-300))
        .map(|(i, v)| (i as f64 * h, v.ln()))
        .collect();
    if pts.len() < 3 {
        return f64::NAN;
    }
    let np = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / np;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / np;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 0.0 };
    // a layer must decay by at least a factor e across the fit window
    let span = (m - 1) as f64 * h;
    if !(slope < 0.0) || r2 < 0.9 || -1.0 / slope > span {
        return f64::NAN;
    }
    -1.0 / slope
}

/// `P_i + zeta_w` on `[-R, R]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorPressure {
    pub x: Vec<f64>,
    pub value: Vec<f64>,
}

impl InteriorPressure {
    /// `(P_i + zeta_w)(R) - (P_i + zeta_w)(-R)`.
    pub fn jump(&self) -> f64 {
        self.value[self.value.len() - 1] - self.value[0]
    }
}

/// `P_i + zeta_w = C - (d<q>/dt) int_{-R}^x dy / h_w`, with `C` fixed by
/// continuity of the energy flux at `x = -R`:
/// `C = [zeta + eps zeta^2/2 + 2 eps q^2/3 - delta^2 d_x d_t q](-R)`.
pub fn interior_pressure(
    avg_q_dot: f64,
    state: &State,
    dq_dt: &ExteriorField,
    params: &Parameters,
) -> Result<InteriorPressure> {
    let eps = params.epsilon;
    let d2 = params.delta * params.delta;
    let side = Side::Left;
    let theta = state.theta.trace(side);
    let q = state.q.trace(side);
    let qxt = if d2 > 0.0 { dq_dt.boundary_dx(side) } else { 0.0 };
    // theta = zeta + eps zeta^2 / 2
    let c = theta + 2.0 * eps * q * q / 3.0 - d2 * qxt;
    theta_to_zeta(theta, eps)?;
    let nodes = OBSTACLE_QUADRATURE_NODES;
    let h = 2.0 * params.r / (nodes - 1) as f64;
    let xs: Vec<f64> = (0..nodes).map(|i| -params.r + i as f64 * h).collect();
    let inv: Vec<f64> = xs.iter().map(|&x| 1.0 / params.h_w(x)).collect();
    let mut value = Vec::with_capacity(nodes);
    let mut acc = 0.0;
    value.push(c);
    for i in 1..nodes {
        acc += 0.5 * h * (inv[i] + inv[i - 1]);
        value.push(c - avg_q_dot * acc);
    }
    Ok(InteriorPressure { x: xs, value })
}

/// Discrete `H^m` norm: squared centered differences up to order `m`,
/// trapezoid-weighted.
pub fn sobolev_norm(f: &ExteriorField, order: usize) -> f64 {
    let mut acc = 0.0;
    let mut g = f.clone();
    for m in 0..=order {
        if m > 0 {
            g = g.dx();
        }
        acc += g.map(|v| v * v).integral();
    }
    acc.sqrt()
}

/// `sqrt(|theta|_{H^m}^2 + |q|_{H^m}^2)`.
pub fn state_sobolev_norm(state: &State, order: usize) -> f64 {
    (sobolev_norm(&state.theta, order).powi(2) + sobolev_norm(&state.q, order).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::boundary_layer;
    use crate::types::{GridSpec, ObstacleProfile};
    use approx::assert_abs_diff_eq;

    fn params(eps: f64, delta: f64) -> Parameters {
        Parameters::with_delta(eps, delta, 1.0, ObstacleProfile::default()).unwrap()
    }

    #[test]
    fn rest_energies_vanish() {
        let g = GridSpec::with_spacing(1.0, 6.0, 0.01).unwrap();
        let p = params(0.2, 0.3);
        let z = ExteriorField::zeros(g);
        let e = energy_exterior(&z, &z, &z, &p);
        assert_eq!((e.energy, e.flux_left, e.flux_right), (0.0, 0.0, 0.0));
        assert_eq!(energy_interior(0.0, &p), 0.0);
        assert_eq!(blowup_monitor(&State::rest(g), 0.2), 1.0);
    }

    #[test]
    fn exterior_energy_of_pure_discharge() {
        let g = GridSpec::with_spacing(1.0, 11.0, 0.005).unwrap();
        let p = params(0.0, 0.0);
        let bump = ExteriorField::from_fn(g, |x| (-(x.abs() - 6.0).powi(2)).exp());
        let e = energy_exterior(&ExteriorField::zeros(g), &bump, &ExteriorField::zeros(g), &p);
        let expect = 0.5 * 2.0 * (std::f64::consts::PI / 2.0).sqrt();
        assert_abs_diff_eq!(e.energy, expect, epsilon = 1e-8);
    }

    #[test]
    fn dispersive_energy_term_matches_second_quadrature() {
        // sin window: q = sin(x - R) on [R, R + pi], 0 elsewhere
        let g = GridSpec::with_spacing(1.0, 1.0 + std::f64::consts::PI, 0.001).unwrap();
        let p = params(0.0, 0.4);
        let q = ExteriorField::from_distance(g, |_, s| s.sin());
        let z = ExteriorField::zeros(g);
        let e = energy_exterior(&z, &q, &z, &p);
        // per side: int sin^2 / 2 + delta^2 int cos^2 / 2 = pi/4 (1 + delta^2)
        let expect = 2.0 * std::f64::consts::PI / 4.0 * (1.0 + 0.16);
        assert_abs_diff_eq!(e.energy, expect, epsilon = 1e-5);
    }

    #[test]
    fn interior_energy_examples() {
        let p = params(0.0, 0.2);
        assert_abs_diff_eq!(energy_interior(1.0, &p), 1.0, epsilon = 1e-14);
        let p = Parameters::with_delta(0.5, 0.2, 1.0, ObstacleProfile::Flat { value: 1.0 }).unwrap();
        assert_abs_diff_eq!(energy_interior(2.0, &p), 1.0 + 8.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn linearized_energy_at_zero_eps() {
        let g = GridSpec::with_spacing(1.0, 6.0, 0.01).unwrap();
        let p = params(0.0, 0.3);
        let mut s = State::rest(g);
        assert_eq!(linearized_energy(&s, 0.0, &s, &p).unwrap(), 0.0);
        s.theta = ExteriorField::from_fn(g, |x| (-(x.abs() - 3.0).powi(2)).exp());
        s.q = ExteriorField::from_fn(g, |x| 0.5 * (-(x.abs() - 3.0).powi(2)).exp());
        let direct = 0.5
            * (s.theta.l2_norm().powi(2) + s.q.l2_norm().powi(2) + 0.09 * s.q.dx().l2_norm().powi(2));
        // cell-wise gradient vs. centered differences: O(dx^2)
        assert_abs_diff_eq!(linearized_energy(&s, 0.0, &State::rest(g), &p).unwrap(), direct, epsilon = 1e-5);
    }

    #[test]
    fn monitor_examples() {
        let g = GridSpec::with_spacing(1.0, 6.0, 0.05).unwrap();
        let eps = 0.5;
        let mut s = State::rest(g);
        // 1 + eps c' = 1 / sqrt(1 + 2 eps theta) = 0.1  <=>  theta = 99 / (2 eps)
        s.theta.right[5] = 99.0 / (2.0 * eps);
        assert!(blowup_monitor(&s, eps) >= 10.0);
        s.theta.right[5] = -1.0 / eps;
        assert_eq!(blowup_monitor(&s, eps), f64::INFINITY);
    }

    #[test]
    fn static_frak_e() {
        let g = GridSpec::with_spacing(1.0, 6.0, 0.01).unwrap();
        let p = params(0.0, 0.3);
        let mut s = State::rest(g);
        s.theta = ExteriorField::from_fn(g, |x| (-(x.abs() - 3.0).powi(2)).exp());
        s.q = ExteriorField::constant(g, 0.2);
        let hist: Vec<State> = (0..5).map(|k| State { t: k as f64 * 0.1, ..s.clone() }).collect();
        let l2 = |f: &ExteriorField| f.map(|v| v * v).integral();
        let expect = l2(&s.theta) + l2(&s.q) + 0.09 * l2(&s.q.dx()) + p.alpha * 0.04;
        assert_abs_diff_eq!(frak_e(&hist, &p).unwrap(), expect, epsilon = 1e-12);
        let rest: Vec<State> = (0..5).map(|k| State { t: k as f64 * 0.1, ..State::rest(g) }).collect();
        assert_eq!(frak_e(&rest, &p).unwrap(), 0.0);
    }

    #[test]
    fn layer_width_of_pure_exponential() {
        let g = GridSpec::with_spacing(1.0, 6.0, 0.2 / 16.0).unwrap();
        let q = boundary_layer(1.0, 0.2, g);
        for side in Side::BOTH {
            let w = layer_width(&q, side, 0.2);
            assert!((w - 0.2).abs() < 0.01, "width {w}");
        }
        assert!(layer_width(&ExteriorField::zeros(g), Side::Right, 0.2).is_nan());
        let smooth = ExteriorField::from_fn(g, |x| (0.5 * x).sin());
        assert!(layer_width(&smooth, Side::Right, 0.2).is_nan());
    }

    #[test]
    fn interior_pressure_linear_profile() {
        let g = GridSpec::with_spacing(1.0, 6.0, 0.05).unwrap();
        let p = params(0.0, 0.2);
        let s = State::rest(g);
        let z = ExteriorField::zeros(g);
        let ip = interior_pressure(1.0, &s, &z, &p).unwrap();
        assert_abs_diff_eq!(ip.jump(), -2.0, epsilon = 1e-12);
        let ip = interior_pressure(0.0, &s, &z, &p).unwrap();
        assert_eq!(ip.jump(), 0.0);
        assert!(ip.value.iter().all(|v| *v == 0.0));
    }
}
