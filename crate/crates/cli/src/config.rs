//! JSON run configuration. Unknown keys are rejected at every level.

use std::path::Path;

use bfloat_core::compat::ScenarioSpec;
use bfloat_core::dynamics::Closure;
use bfloat_core::timestepper::{Mode, RunConfig, DEFAULT_MONITOR_CEILING, DEFAULT_TAU};
use bfloat_core::types::{DEFAULT_C0, DEFAULT_H_MIN};
use bfloat_core::{GridSpec, ObstacleProfile, Parameters};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub epsilon: f64,
    /// Exactly one of `mu` and `delta` (`delta = sqrt(mu / 3)`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default)]
    pub obstacle: ObstacleProfile,
    #[serde(default = "default_h_min")]
    pub h_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Outer end of each segment.
    pub l: f64,
    /// Exactly one of `dx`, `n_per_side`, `dx_over_delta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_per_side: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx_over_delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CompatChoice {
    Exact,
    Approx,
    #[default]
    Both,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompatConfig {
    #[serde(default)]
    pub mode: CompatChoice,
    #[serde(default = "default_order")]
    pub order: usize,
    /// Threshold constant; defaults to `10 (|U_in|_{H^{n+1}} + 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
}

impl Default for CompatConfig {
    fn default() -> Self {
        CompatConfig { mode: CompatChoice::default(), order: default_order(), m: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub deltas: Vec<f64>,
    /// Defaults to `[params.epsilon]`.
    #[serde(default)]
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub scenario: ScenarioSpec,
    pub params: ParamsConfig,
    pub grid: GridConfig,
    /// Overrides `tau / (eps + delta^2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Either `dt` or `dt_over_dx` (default `dt = dx / 2`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_dt_over_dx")]
    pub dt_over_dx: f64,
    #[serde(default)]
    pub snapshot_stride: usize,
    #[serde(default = "default_ceiling")]
    pub monitor_ceiling: f64,
    /// Defaults to dispersive when `delta > 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub closure: Closure,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default)]
    pub y_diagnostics: bool,
    #[serde(default)]
    pub compat: CompatConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_r() -> f64 {
    1.0
}
fn default_h_min() -> f64 {
    DEFAULT_H_MIN
}
fn default_order() -> usize {
    bfloat_core::compat::DEFAULT_ORDER
}
fn default_tau() -> f64 {
    DEFAULT_TAU
}
fn default_dt_over_dx() -> f64 {
    0.5
}
fn default_ceiling() -> f64 {
    DEFAULT_MONITOR_CEILING
}
fn default_cfl() -> f64 {
    1.0
}
fn default_c0() -> f64 {
    DEFAULT_C0
}

impl CliConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: CliConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn validate(&self) -> CliResult<()> {
        let p = &self.params;
        if p.mu.is_some() == p.delta.is_some() {
            return Err(CliError::Config("params: give exactly one of `mu`, `delta`".into()));
        }
        let g = &self.grid;
        let given = [g.dx.is_some(), g.n_per_side.is_some(), g.dx_over_delta.is_some()];
        if given.iter().filter(|b| **b).count() != 1 {
            return Err(CliError::Config("grid: give exactly one of `dx`, `n_per_side`, `dx_over_delta`".into()));
        }
        if let Some(s) = &self.sweep {
            if s.deltas.is_empty() {
                return Err(CliError::Config("sweep: `deltas` must be non-empty".into()));
            }
        }
        if !(self.cfl > 0.0) || !(self.dt_over_dx > 0.0) {
            return Err(CliError::Config("`cfl` and `dt_over_dx` must be positive".into()));
        }
        Ok(())
    }

    /// The configured `delta` (from `mu` when given that way).
    pub fn delta(&self) -> f64 {
        match (self.params.delta, self.params.mu) {
            (Some(d), _) => d,
            (None, Some(mu)) => (mu / 3.0).sqrt(),
            (None, None) => 0.0,
        }
    }

    pub fn parameters(&self) -> CliResult<Parameters> {
        self.parameters_at(self.delta(), self.params.epsilon)
    }

    /// Parameters with `delta`, `epsilon` replaced (sweep members).
    pub fn parameters_at(&self, delta: f64, epsilon: f64) -> CliResult<Parameters> {
        let p = &self.params;
        let base = match (p.mu, delta == self.delta()) {
            (Some(mu), true) => Parameters::new(epsilon, mu, p.r, p.obstacle.clone())?,
            _ => Parameters::with_delta(epsilon, delta, p.r, p.obstacle.clone())?,
        };
        if p.h_min != DEFAULT_H_MIN {
            Ok(base.with_h_min(p.h_min)?)
        } else {
            Ok(base)
        }
    }

    pub fn grid_at(&self, delta: f64) -> CliResult<GridSpec> {
        let g = &self.grid;
        let r = self.params.r;
        Ok(match (g.dx, g.n_per_side, g.dx_over_delta) {
            (Some(dx), _, _) => GridSpec::with_spacing(r, g.l, dx)?,
            (_, Some(n), _) => GridSpec::new(r, g.l, n)?,
            (_, _, Some(k)) => {
                if !(delta > 0.0) {
                    return Err(CliError::Config("grid: `dx_over_delta` needs delta > 0".into()));
                }
                GridSpec::with_spacing(r, g.l, delta / k)?
            }
            _ => unreachable!("validated"),
        })
    }

    pub fn run_config(&self, params: Parameters, grid: GridSpec) -> RunConfig {
        let mut rc = RunConfig::new(params, grid);
        let denom = rc.params.epsilon + rc.params.delta * rc.params.delta;
        rc.t_final = match self.t_final {
            Some(t) => t,
            None if denom > 0.0 => self.tau / denom,
            None => self.tau,
        };
        rc.dt = self.dt.unwrap_or(self.dt_over_dx * grid.dx);
        rc.snapshot_stride = self.snapshot_stride;
        rc.monitor_ceiling = self.monitor_ceiling;
        if let Some(m) = self.mode {
            rc.mode = m;
        }
        rc.closure = self.closure;
        rc.cfl = self.cfl;
        rc.c0 = self.c0;
        rc.y_diagnostics = self.y_diagnostics;
        rc
    }

    /// Canonical serialization: field order of the structs, defaults filled
    /// in, output directory excluded.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        serde_json::to_string(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
