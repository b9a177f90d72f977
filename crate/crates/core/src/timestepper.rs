//! Classical RK4 integration of the ODE formulation, run orchestration and
//! the termination policy, plus the CSV/JSON writers for run artifacts.

use std::collections::VecDeque;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    blowup_monitor, energy_exterior, energy_interior, frak_e, layer_width, EnergyRecord,
};
use crate::dynamics::{rhs_hyperbolic_with, transmission_residuals, Closure, Dynamics};
use crate::error::{Error, Result};
use crate::types::{ExteriorField, GridSpec, Parameters, Side, State, DEFAULT_C0, DEFAULT_TOL_JUMP};

/// Default ceiling of the blow-up monitor.
pub const DEFAULT_MONITOR_CEILING: f64 = 1e3;
/// Default time horizon factor: `t_final = tau / (eps + delta^2)`.
pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Dispersive,
    Hyperbolic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: Parameters,
    pub grid: GridSpec,
    pub t_final: f64,
    pub dt: f64,
    pub snapshot_stride: usize,
    pub monitor_ceiling: f64,
    pub mode: Mode,
    pub closure: Closure,
    pub c0: f64,
    /// `dt <= cfl dx / c_max` is enforced before stepping.
    pub cfl: f64,
    /// Enforce `dt <= delta / 4` (resolution of the `1/delta` oscillations).
    pub y_diagnostics: bool,
}

impl RunConfig {
    /// Defaults: `t_final = tau / (eps + delta^2)` with `tau = 0.5`, `dt = dx / 2`.
    pub fn new(params: Parameters, grid: GridSpec) -> Self {
        let denom = params.epsilon + params.delta * params.delta;
        let t_final = if denom > 0.0 { DEFAULT_TAU / denom } else { 1.0 };
        RunConfig {
            t_final,
            dt: 0.5 * grid.dx,
            snapshot_stride: 0,
            monitor_ceiling: DEFAULT_MONITOR_CEILING,
            mode: if params.delta > 0.0 { Mode::Dispersive } else { Mode::Hyperbolic },
            closure: Closure::default(),
            c0: DEFAULT_C0,
            cfl: 1.0,
            y_diagnostics: false,
            params,
            grid,
        }
    }

    /// Step count and the uniform step actually used (`t_final / steps`).
    pub fn steps(&self) -> (usize, f64) {
        if self.t_final <= 0.0 {
            return (0, self.dt);
        }
        let n = (self.t_final / self.dt - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_final / n as f64)
    }
}

/// Largest characteristic speed `|eps q| + sqrt(eps^2 q^2 + sqrt(1 + 2 eps theta))`.
pub fn max_speed(state: &State, epsilon: f64) -> f64 {
    let mut c: f64 = 0.0;
    for side in Side::BOTH {
        for (&t, &q) in state.theta.side(side).iter().zip(state.q.side(side)) {
            let w = (1.0 + 2.0 * epsilon * t).max(0.0).sqrt();
            c = c.max((epsilon * q).abs() + (epsilon * epsilon * q * q + w).sqrt());
        }
    }
    c
}

/// Vector field of either mode, with `d<q>/dt`.
#[derive(Debug, Clone)]
pub enum Integrator {
    Dispersive(Dynamics),
    Hyperbolic { params: Parameters, c0: f64 },
}

/// Time derivative of a state and the matching `d<q>/dt`.
#[derive(Debug, Clone)]
pub struct Tendency {
    pub dtheta: ExteriorField,
    pub dq: ExteriorField,
    pub d_avg_q: f64,
}

impl Integrator {
    pub fn new(params: &Parameters, grid: GridSpec, mode: Mode, closure: Closure, c0: f64) -> Result<Self> {
        Ok(match mode {
            Mode::Dispersive => {
                Integrator::Dispersive(Dynamics::new(params, grid)?.with_c0(c0).with_closure(closure))
            }
            Mode::Hyperbolic => {
                let mut p = params.clone();
                p.delta = 0.0;
                p.mu = 0.0;
                Integrator::Hyperbolic { params: p, c0 }
            }
        })
    }

    pub fn params(&self) -> &Parameters {
        match self {
            Integrator::Dispersive(d) => &d.params,
            Integrator::Hyperbolic { params, .. } => params,
        }
    }

    pub fn tendency(&self, state: &State) -> Result<Tendency> {
        match self {
            Integrator::Dispersive(d) => {
                let ev = d.rhs(state)?;
                Ok(Tendency { dtheta: ev.dtheta, dq: ev.dq, d_avg_q: ev.d_avg_q })
            }
            Integrator::Hyperbolic { params, c0 } => {
                let (dtheta, dq) = rhs_hyperbolic_with(state, params, *c0)?;
                let d_avg_q = dq.average();
                Ok(Tendency { dtheta, dq, d_avg_q })
            }
        }
    }

    /// One classical RK4 step; `k1` may be supplied when already evaluated.
    pub fn step(&self, state: &State, dt: f64, k1: Option<Tendency>) -> Result<State> {
        let k1 = match k1 {
            Some(k) => k,
            None => self.tendency(state)?,
        };
        let k2 = self.tendency(&stage(state, 0.5 * dt, &k1))?;
        let k3 = self.tendency(&stage(state, 0.5 * dt, &k2))?;
        let k4 = self.tendency(&stage(state, dt, &k3))?;
        let combine = |a: &ExteriorField, b: &ExteriorField, c: &ExteriorField, d: &ExteriorField, y: &ExteriorField| {
            let mut out = y.clone();
            for side in Side::BOTH {
                let o = out.side_mut(side);
                let (a, b, c, d) = (a.side(side), b.side(side), c.side(side), d.side(side));
                for i in 0..o.len() {
                    o[i] += dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]);
                }
            }
            out
        };
        Ok(State {
            t: state.t + dt,
            theta: combine(&k1.dtheta, &k2.dtheta, &k3.dtheta, &k4.dtheta, &state.theta),
            q: combine(&k1.dq, &k2.dq, &k3.dq, &k4.dq, &state.q),
        })
    }
}

fn stage(state: &State, c: f64, k: &Tendency) -> State {
    State { t: state.t + c, theta: state.theta.add_scaled(c, &k.dtheta), q: state.q.add_scaled(c, &k.dq) }
}

/// One RK4 step of the dispersive system.
pub fn step_rk4(state: &State, dt: f64, params: &Parameters) -> Result<State> {
    Integrator::new(params, state.grid(), Mode::Dispersive, Closure::default(), DEFAULT_C0)?.step(state, dt, None)
}

/// Classical RK4 for `y' = f(t, y)` on plain vectors; same tableau as the
/// field integrator.
pub fn rk4_vec<F>(t: f64, y: &[f64], dt: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    let axpy = |c: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + c * k).collect() };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * dt, &axpy(0.5 * dt, &k1));
    let k3 = f(t + 0.5 * dt, &axpy(0.5 * dt, &k2));
    let k4 = f(t + dt, &axpy(dt, &k3));
    (0..y.len()).map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunStatus {
    Completed { t: f64, steps: usize },
    BlowUp { t: f64, steps: usize, m0: f64, reason: String },
}

impl RunStatus {
    pub fn is_blowup(&self) -> bool {
        matches!(self, RunStatus::BlowUp { .. })
    }

    pub fn message(&self) -> String {
        match self {
            RunStatus::Completed { t, steps } => format!("completed at t={t} after {steps} steps"),
            RunStatus::BlowUp { t, reason, m0, .. } => {
                format!("blow-up criterion tripped at t={t}: {reason} (m0 = {m0})")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub status: RunStatus,
    pub snapshots: Vec<State>,
    pub energies: Vec<EnergyRecord>,
    /// Largest `(|[[q]]|, transmission residual)` over sliding 3-state windows.
    pub transmission: (f64, f64),
    pub final_state: State,
    pub dt: f64,
}

/// Rejects configurations and data before any stepping.
pub fn preflight(config: &RunConfig, u_in: &State) -> Result<()> {
    let p = &config.params;
    if !config.grid.same_as(&u_in.grid()) {
        return Err(Error::Shape("initial data grid differs from the run grid".into()));
    }
    if !(config.dt > 0.0) || !(config.t_final >= 0.0) {
        return Err(Error::Parameters(format!("need dt > 0 and t_final >= 0, got {} / {}", config.dt, config.t_final)));
    }
    if config.mode == Mode::Dispersive {
        config.grid.check_resolution(p.delta)?;
        if config.y_diagnostics && config.dt > p.delta / 4.0 {
            return Err(Error::Parameters(format!("dt = {} exceeds delta/4 = {}", config.dt, p.delta / 4.0)));
        }
    }
    u_in.validate(p.epsilon, config.c0, DEFAULT_TOL_JUMP)?;
    let c_max = max_speed(u_in, p.epsilon);
    if config.dt > config.cfl * config.grid.dx / c_max {
        return Err(Error::Parameters(format!(
            "dt = {} violates dt <= cfl dx / c_max = {}",
            config.dt,
            config.cfl * config.grid.dx / c_max
        )));
    }
    Ok(())
}

fn admissibility(state: &State, epsilon: f64, c0: f64) -> Option<String> {
    for side in Side::BOTH {
        for (i, (&t, &q)) in state.theta.side(side).iter().zip(state.q.side(side)).enumerate() {
            let x = state.grid().x(side, i);
            if !t.is_finite() || !q.is_finite() {
                return Some(format!("non-finite state at x={x}"));
            }
            let arg = 1.0 + 2.0 * epsilon * t;
            if !(arg > 0.0) {
                return Some(format!("cavitation 1+2*eps*theta={arg} at x={x}"));
            }
            if 1.0 / arg.sqrt() < c0 {
                return Some(format!("1+eps*c'(theta)={} below c0={c0} at x={x}", 1.0 / arg.sqrt()));
            }
        }
    }
    None
}

/// Energy diagnostics of one state given its tendency.
pub fn energy_record(state: &State, tendency: &Tendency, params: &Parameters, window: &[State]) -> Result<EnergyRecord> {
    let zeta = state.zeta(params.epsilon)?;
    let ext = energy_exterior(&zeta, &state.q, &tendency.dq, params);
    let e_int = energy_interior(state.q.average(), params);
    let widths: Vec<f64> = Side::BOTH
        .iter()
        .map(|&s| layer_width(&state.q, s, params.delta))
        .filter(|w| w.is_finite())
        .collect();
    let layer = if widths.is_empty() { f64::NAN } else { widths.iter().sum::<f64>() / widths.len() as f64 };
    let frak = if window.len() >= 5 { frak_e(window, params)? } else { f64::NAN };
    Ok(EnergyRecord {
        t: state.t,
        e_ext: ext.energy,
        e_int,
        e_tot: ext.energy + e_int,
        flux_jump: ext.flux_jump(),
        m0: blowup_monitor(state, params.epsilon),
        layer_width: layer,
        frak_e: frak,
    })
}

/// Steps to `t_final` or until the monitor trips. `frakE` uses the trailing
/// five-state window (it is `NaN` for the first four records).
pub fn run(config: &RunConfig, u_in: &State) -> Result<RunOutput> {
    preflight(config, u_in)?;
    let integrator = Integrator::new(&config.params, config.grid, config.mode, config.closure, config.c0)?;
    let params = integrator.params().clone();
    let (steps, dt) = config.steps();
    let mut state = State { t: 0.0, ..u_in.clone() };
    let mut snapshots = vec![state.clone()];
    let mut energies = Vec::with_capacity(steps + 1);
    let mut window: VecDeque<State> = VecDeque::with_capacity(5);
    let mut trans = (0.0_f64, 0.0_f64);
    let stride = config.snapshot_stride;
    let mut status = None;
    for n in 0..=steps {
        if window.len() == 5 {
            window.pop_front();
        }
        window.push_back(state.clone());
        let slice: Vec<State> = window.iter().cloned().collect();
        if slice.len() >= 3 {
            let (a, b) = transmission_residuals(&slice[slice.len() - 3..], &params)?;
            trans = (trans.0.max(a), trans.1.max(b));
        }
        let tendency = match integrator.tendency(&state) {
            Ok(t) => t,
            Err(e @ (Error::Cavitation { .. } | Error::BlowUp { .. })) => {
                status = Some(blowup(&state, params.epsilon, n, e.to_string()));
                break;
            }
            Err(e) => return Err(e),
        };
        let rec = energy_record(&state, &tendency, &params, &slice)?;
        energies.push(rec);
        if rec.m0 >= config.monitor_ceiling {
            status = Some(RunStatus::BlowUp {
                t: state.t,
                steps: n,
                m0: rec.m0,
                reason: format!("monitor m0={} reached the ceiling {}", rec.m0, config.monitor_ceiling),
            });
            break;
        }
        if n == steps {
            break;
        }
        let next = match integrator.step(&state, dt, Some(tendency)) {
            Ok(s) => s,
            Err(e @ (Error::Cavitation { .. } | Error::BlowUp { .. })) => {
                // a stage left the admissible set: the monitor is infinite there
                let t = (n + 1) as f64 * dt;
                energies.push(EnergyRecord::inadmissible(t));
                status = Some(RunStatus::BlowUp {
                    t,
                    steps: n + 1,
                    m0: f64::INFINITY,
                    reason: format!("step from t={} left the admissible set: {e}", state.t),
                });
                break;
            }
            Err(e) => return Err(e),
        };
        state = State { t: (n + 1) as f64 * dt, ..next };
        if let Some(reason) = admissibility(&state, params.epsilon, config.c0) {
            energies.push(EnergyRecord { m0: blowup_monitor(&state, params.epsilon), ..EnergyRecord::inadmissible(state.t) });
            status = Some(blowup(&state, params.epsilon, n + 1, reason));
            break;
        }
        if stride > 0 && (n + 1) % stride == 0 && n + 1 != steps {
            snapshots.push(state.clone());
        }
    }
    if snapshots.last().map(|s| s.t) != Some(state.t) {
        snapshots.push(state.clone());
    }
    let status = status.unwrap_or(RunStatus::Completed { t: state.t, steps });
    Ok(RunOutput { status, snapshots, energies, transmission: trans, final_state: state, dt })
}

fn blowup(state: &State, epsilon: f64, steps: usize, reason: String) -> RunStatus {
    RunStatus::BlowUp { t: state.t, steps, m0: blowup_monitor(state, epsilon), reason }
}

/// Snapshot CSV: `x,theta,q,zeta`, left segment then right.
pub fn write_snapshot_csv(path: &Path, state: &State, epsilon: f64) -> std::io::Result<()> {
    let mut out = String::from("x,theta,q,zeta\n");
    let g = state.grid();
    for side in Side::BOTH {
        for i in 0..g.n_per_side {
            let th = state.theta.side(side)[i];
            let z = crate::types::theta_to_zeta(th, epsilon).unwrap_or(f64::NAN);
            out.push_str(&format!("{},{},{},{}\n", g.x(side, i), th, state.q.side(side)[i], z));
        }
    }
    fs::write(path, out)
}

pub fn write_energies_csv(path: &Path, records: &[EnergyRecord]) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{}", EnergyRecord::CSV_HEADER)?;
    for r in records {
        writeln!(f, "{}", r.csv_row())?;
    }
    Ok(())
}
