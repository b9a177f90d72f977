//! The subcommands. Each returns its process exit status; errors map through
//! [`CliError::exit_code`].

use std::fs;
use std::path::{Path, PathBuf};

use bfloat_core::compat::{
    check_approx, check_exact, default_m, exact_ladder, exact_transmission_rows, taylor_ladder, CompatReport,
};
use bfloat_core::diagnostics::{layer_width, EnergyRecord};
use bfloat_core::timestepper::{run, write_energies_csv, write_snapshot_csv, Mode, RunStatus};
use bfloat_core::{Parameters, Side, State};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{CliConfig, CompatChoice};
use crate::error::{CliError, CliResult};
use crate::scenario::initial_state;
use crate::study::{fit_slope, l2_away_from_layer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_COMPAT_FAIL: i32 = 4;

#[derive(Debug, Clone, Serialize)]
pub struct CompatOutcome {
    pub exact: Option<CompatReport>,
    pub approximate: Option<CompatReport>,
    /// `(|[[q_{j+1}]]|, transmission residual)` per row of the exact ladder.
    pub transmission_rows: Vec<(f64, f64)>,
    pub notes: Vec<String>,
    pub pass: bool,
    /// `(checker, row)` of the first failure.
    pub first_failure: Option<(String, usize)>,
}

/// Runs the checkers selected in the config on `state`.
pub fn compat_outcome(cfg: &CliConfig, state: &State, params: &Parameters) -> CliResult<CompatOutcome> {
    let n = cfg.compat.order;
    let m = cfg.compat.m.unwrap_or_else(|| default_m(state, n));
    let mode = cfg.compat.mode;
    let mut out = CompatOutcome {
        exact: None,
        approximate: None,
        transmission_rows: Vec::new(),
        notes: Vec::new(),
        pass: true,
        first_failure: None,
    };
    if matches!(mode, CompatChoice::Exact | CompatChoice::Both) {
        if params.delta > 0.0 {
            let ladder = exact_ladder(state, n, params)?;
            out.transmission_rows = exact_transmission_rows(&ladder, params);
            out.exact = Some(check_exact(&ladder, m, n, params)?);
        } else if mode == CompatChoice::Exact {
            return Err(CliError::Config("the exact checker needs delta > 0".into()));
        } else {
            out.notes.push("delta = 0: exact checker skipped, approximate checker gives the hyperbolic conditions".into());
        }
    }
    if matches!(mode, CompatChoice::Approx | CompatChoice::Both) {
        let ladder = taylor_ladder(state, n, params)?;
        out.approximate = Some(check_approx(&ladder, m, n, params)?);
    }
    for (name, rep) in [("exact", &out.exact), ("approximate", &out.approximate)] {
        if let Some(r) = rep {
            if let Some(j) = r.first_failure() {
                out.pass = false;
                if out.first_failure.is_none() {
                    out.first_failure = Some((name.to_string(), j));
                }
            }
        }
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n")?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SnapshotEntry {
    file: String,
    t: f64,
}

#[derive(Debug, Serialize)]
struct Manifest {
    config_hash: String,
    config: serde_json::Value,
    scenario: String,
    status: RunStatus,
    message: String,
    exit_code: i32,
    dt: f64,
    steps: usize,
    /// Largest `|[[q]]|` and transmission-relation residual over the run.
    transmission: (f64, f64),
    snapshots: Vec<SnapshotEntry>,
    compat: Option<CompatOutcome>,
}

/// `run`: writes snapshot CSVs, `energies.csv` and `manifest.json`.
pub fn cmd_run(cfg: &CliConfig, out_dir: &Path) -> CliResult<i32> {
    let params = cfg.parameters()?;
    let grid = cfg.grid_at(params.delta)?;
    let state = initial_state(cfg, &params, grid)?;
    let compat = if cfg.compat.mode == CompatChoice::Skip {
        None
    } else {
        match compat_outcome(cfg, &state, &params) {
            Ok(c) => {
                if !c.pass {
                    eprintln!("warning: initial data fail the compatibility check ({:?}); running anyway", c.first_failure);
                }
                Some(c)
            }
            Err(e) => {
                eprintln!("warning: compatibility check not available: {e}");
                None
            }
        }
    };
    let rc = cfg.run_config(params, grid);
    let output = run(&rc, &state)?;
    fs::create_dir_all(out_dir)?;
    let mut snaps = Vec::with_capacity(output.snapshots.len());
    for (i, s) in output.snapshots.iter().enumerate() {
        let file = format!("snapshot_{i:05}.csv");
        write_snapshot_csv(&out_dir.join(&file), s, rc.params.epsilon)?;
        snaps.push(SnapshotEntry { file, t: s.t });
    }
    write_energies_csv(&out_dir.join("energies.csv"), &output.energies)?;
    let code = if output.status.is_blowup() { EXIT_BLOWUP } else { EXIT_OK };
    let steps = match output.status {
        RunStatus::Completed { steps, .. } | RunStatus::BlowUp { steps, .. } => steps,
    };
    let manifest = Manifest {
        config_hash: cfg.hash(),
        config: serde_json::from_str(&cfg.canonical_json()).expect("round trip"),
        scenario: cfg.scenario.kind.clone(),
        message: output.status.message(),
        status: output.status,
        exit_code: code,
        dt: output.dt,
        steps,
        transmission: output.transmission,
        snapshots: snaps,
        compat,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    println!("{}", manifest.message);
    Ok(code)
}

/// `check-compat`: writes `compat_report.json`; exit 0 on pass, 4 on failure.
pub fn cmd_check_compat(cfg: &CliConfig, out_dir: &Path) -> CliResult<i32> {
    let params = cfg.parameters()?;
    let grid = cfg.grid_at(params.delta)?;
    let state = initial_state(cfg, &params, grid)?;
    let outcome = compat_outcome(cfg, &state, &params)?;
    fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("compat_report.json"), &outcome)?;
    match &outcome.first_failure {
        None => {
            println!("compatible");
            Ok(EXIT_OK)
        }
        Some((checker, j)) => {
            println!("incompatible: {checker} checker fails at row j={j}");
            Ok(EXIT_COMPAT_FAIL)
        }
    }
}

#[derive(Debug, Serialize)]
struct DataManifest {
    config_hash: String,
    scenario: String,
    seed: Option<u64>,
    file: String,
}

/// `gen-data`: writes the initial state as `initial.csv`.
pub fn cmd_gen_data(cfg: &CliConfig, out_dir: &Path) -> CliResult<i32> {
    let params = cfg.parameters()?;
    let grid = cfg.grid_at(params.delta)?;
    let state = initial_state(cfg, &params, grid)?;
    fs::create_dir_all(out_dir)?;
    write_snapshot_csv(&out_dir.join("initial.csv"), &state, params.epsilon)?;
    let m = DataManifest {
        config_hash: cfg.hash(),
        scenario: cfg.scenario.kind.clone(),
        seed: cfg.seed,
        file: "initial.csv".into(),
    };
    write_json(&out_dir.join("data.json"), &m)?;
    Ok(EXIT_OK)
}

/// One member of a `(delta, epsilon)` sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub epsilon: f64,
    pub status: String,
    pub t_end: f64,
    pub steps: usize,
    /// `max_t |E_tot(t) - E_tot(0)| / |E_tot(0)|` over finite records.
    pub energy_drift: f64,
    pub m0_max: f64,
    pub layer_width_left: f64,
    pub layer_width_right: f64,
    /// Largest residual over the rows of each checker.
    pub compat_exact: f64,
    pub compat_approx: f64,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "delta,epsilon,status,t_end,steps,energy_drift,m0_max,layer_width_left,layer_width_right,compat_exact,compat_approx";

    fn failed(delta: f64, epsilon: f64, msg: String) -> Self {
        SweepRow {
            delta,
            epsilon,
            status: format!("error: {}", msg.replace(',', ";")),
            t_end: f64::NAN,
            steps: 0,
            energy_drift: f64::NAN,
            m0_max: f64::NAN,
            layer_width_left: f64::NAN,
            layer_width_right: f64::NAN,
            compat_exact: f64::NAN,
            compat_approx: f64::NAN,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.delta,
            self.epsilon,
            self.status,
            self.t_end,
            self.steps,
            self.energy_drift,
            self.m0_max,
            self.layer_width_left,
            self.layer_width_right,
            self.compat_exact,
            self.compat_approx
        )
    }
}

fn energy_drift(records: &[EnergyRecord]) -> f64 {
    let finite: Vec<f64> = records.iter().map(|r| r.e_tot).filter(|e| e.is_finite()).collect();
    let Some(&e0) = finite.first() else { return f64::NAN };
    let worst = finite.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    if worst == 0.0 {
        0.0
    } else {
        worst / e0.abs()
    }
}

fn worst_residual(rep: &Option<CompatReport>) -> f64 {
    match rep {
        Some(r) => r.rows.iter().map(|row| row.r1.max(row.r2)).fold(0.0, f64::max),
        None => f64::NAN,
    }
}

pub fn sweep_member(cfg: &CliConfig, delta: f64, epsilon: f64) -> SweepRow {
    let attempt = || -> CliResult<SweepRow> {
        let params = cfg.parameters_at(delta, epsilon)?;
        let grid = cfg.grid_at(delta)?;
        let state = initial_state(cfg, &params, grid)?;
        let (exact, approx) = if cfg.compat.mode == CompatChoice::Skip {
            (f64::NAN, f64::NAN)
        } else {
            match compat_outcome(cfg, &state, &params) {
                Ok(c) => (worst_residual(&c.exact), worst_residual(&c.approximate)),
                Err(_) => (f64::NAN, f64::NAN),
            }
        };
        let rc = cfg.run_config(params, grid);
        let out = run(&rc, &state)?;
        let (status, t_end, steps) = match &out.status {
            RunStatus::Completed { t, steps } => ("completed".to_string(), *t, *steps),
            RunStatus::BlowUp { t, steps, .. } => ("blow-up".to_string(), *t, *steps),
        };
        let m0_max = out.energies.iter().map(|r| r.m0).fold(f64::NAN, f64::max);
        let width = |side| layer_width(&out.final_state.q, side, delta);
        Ok(SweepRow {
            delta,
            epsilon,
            status,
            t_end,
            steps,
            energy_drift: energy_drift(&out.energies),
            m0_max,
            layer_width_left: width(Side::Left),
            layer_width_right: width(Side::Right),
            compat_exact: exact,
            compat_approx: approx,
        })
    };
    attempt().unwrap_or_else(|e| SweepRow::failed(delta, epsilon, e.to_string()))
}

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool")
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeSet {
    pub epsilon: f64,
    pub layer_width_left: Option<f64>,
    pub layer_width_right: Option<f64>,
    pub compat_exact: Option<f64>,
    pub compat_approx: Option<f64>,
}

/// Runs every `(delta, epsilon)` member; rows come back in input order.
pub fn sweep(cfg: &CliConfig, jobs: usize) -> CliResult<(Vec<SweepRow>, Vec<SlopeSet>)> {
    let spec = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("missing `sweep` section".into()))?;
    let epsilons = if spec.epsilons.is_empty() { vec![cfg.params.epsilon] } else { spec.epsilons.clone() };
    let members: Vec<(f64, f64)> =
        epsilons.iter().flat_map(|&e| spec.deltas.iter().map(move |&d| (d, e))).collect();
    let rows: Vec<SweepRow> = pool(jobs).install(|| members.par_iter().map(|&(d, e)| sweep_member(cfg, d, e)).collect());
    let slopes = epsilons
        .iter()
        .map(|&e| {
            let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.epsilon == e).collect();
            let fit = |f: fn(&SweepRow) -> f64| {
                let pts: Vec<(f64, f64)> = mine.iter().map(|r| (r.delta, f(r))).collect();
                fit_slope(&pts)
            };
            SlopeSet {
                epsilon: e,
                layer_width_left: fit(|r| r.layer_width_left),
                layer_width_right: fit(|r| r.layer_width_right),
                compat_exact: fit(|r| r.compat_exact),
                compat_approx: fit(|r| r.compat_approx),
            }
        })
        .collect();
    Ok((rows, slopes))
}

/// `sweep`: writes `sweep.csv` and `slopes.json`.
pub fn cmd_sweep(cfg: &CliConfig, out_dir: &Path, jobs: usize) -> CliResult<i32> {
    let (rows, slopes) = sweep(cfg, jobs)?;
    fs::create_dir_all(out_dir)?;
    let mut text = String::from(SweepRow::CSV_HEADER);
    text.push('\n');
    for r in &rows {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    fs::write(out_dir.join("sweep.csv"), text)?;
    write_json(&out_dir.join("slopes.json"), &slopes)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitStudy {
    pub epsilon: f64,
    pub t: f64,
    pub deltas: Vec<f64>,
    /// `|U_delta(t) - U_hyp(t)|_{L^2(|x|_R > 5 delta)}`, `NaN` where the run failed.
    pub errors: Vec<f64>,
    pub status: Vec<String>,
    /// Errors strictly decrease as `delta` decreases.
    pub monotone: bool,
}

/// Dispersive runs for each `delta` against one hyperbolic run, all on the
/// grid of the smallest `delta`, at `t = t_final` (default 1).
pub fn limit_study(cfg: &CliConfig, jobs: usize) -> CliResult<LimitStudy> {
    let spec = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("missing `sweep` section".into()))?;
    let mut deltas = spec.deltas.clone();
    deltas.sort_by(|a, b| b.total_cmp(a));
    let eps = cfg.params.epsilon;
    let grid = cfg.grid_at(*deltas.last().expect("non-empty"))?;
    let t = cfg.t_final.unwrap_or(1.0);
    let mut timed = cfg.clone();
    timed.t_final = Some(t);
    let hyp_params = cfg.parameters_at(0.0, eps)?;
    let u0 = initial_state(cfg, &hyp_params, grid)?;
    let mut hrc = timed.run_config(hyp_params, grid);
    hrc.mode = Mode::Hyperbolic;
    let hyp = run(&hrc, &u0)?;
    if hyp.status.is_blowup() {
        return Err(CliError::Config(format!("hyperbolic reference: {}", hyp.status.message())));
    }
    let members: Vec<CliResult<(f64, String)>> = pool(jobs).install(|| {
        deltas
            .par_iter()
            .map(|&d| {
                let p = cfg.parameters_at(d, eps)?;
                let u = initial_state(cfg, &p, grid)?;
                let mut rc = timed.run_config(p, grid);
                rc.mode = Mode::Dispersive;
                let out = run(&rc, &u)?;
                if out.status.is_blowup() {
                    return Ok((f64::NAN, "blow-up".to_string()));
                }
                Ok((l2_away_from_layer(&out.final_state, &hyp.final_state, 5.0 * d), "completed".to_string()))
            })
            .collect()
    });
    let mut errors = Vec::new();
    let mut status = Vec::new();
    for m in members {
        match m {
            Ok((e, s)) => {
                errors.push(e);
                status.push(s);
            }
            Err(e) => {
                errors.push(f64::NAN);
                status.push(format!("error: {e}"));
            }
        }
    }
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    Ok(LimitStudy { epsilon: eps, t, deltas, errors, status, monotone })
}

/// `limit-study`: writes `limit.csv` and `limit.json`.
pub fn cmd_limit_study(cfg: &CliConfig, out_dir: &Path, jobs: usize) -> CliResult<i32> {
    let study = limit_study(cfg, jobs)?;
    fs::create_dir_all(out_dir)?;
    let mut text = String::from("delta,l2_error,status\n");
    for ((d, e), s) in study.deltas.iter().zip(&study.errors).zip(&study.status) {
        text.push_str(&format!("{d},{e},{}\n", s.replace(',', ";")));
    }
    fs::write(out_dir.join("limit.csv"), text)?;
    write_json(&out_dir.join("limit.json"), &study)?;
    println!("monotone decrease: {}", study.monotone);
    Ok(EXIT_OK)
}

/// `BFLOAT_OUT` beats `--out`, which beats the config's `out`.
pub fn resolve_out(flag: Option<&Path>, cfg: &CliConfig) -> PathBuf {
    if let Some(env) = std::env::var_os("BFLOAT_OUT").filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    if let Some(f) = flag {
        return f.to_path_buf();
    }
    PathBuf::from(cfg.out.clone().unwrap_or_else(|| "bfloat-out".into()))
}
