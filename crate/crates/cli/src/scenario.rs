//! Initial data: the core families plus seeded random pulse trains.

use bfloat_core::compat::{cutoff, generate};
use bfloat_core::{ExteriorField, GridSpec, Parameters, Side, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::CliConfig;
use crate::error::CliResult;

/// Kind handled here rather than in the core generator.
pub const RANDOM_PULSES: &str = "random-pulses";

pub fn initial_state(cfg: &CliConfig, params: &Parameters, grid: GridSpec) -> CliResult<State> {
    if cfg.scenario.kind == RANDOM_PULSES {
        return Ok(random_pulses(cfg, params, grid, cfg.seed.unwrap_or(0)));
    }
    Ok(generate(&cfg.scenario, params, grid)?)
}

/// Three travelling Gaussian pulses with random side, direction, position,
/// width (0.5 to 1.5 times `width`) and signed amplitude (up to `amplitude`).
/// Supports stay clear of the `margin` bands, so the data are compatible.
pub fn random_pulses(cfg: &CliConfig, params: &Parameters, grid: GridSpec, seed: u64) -> State {
    let spec = &cfg.scenario;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = grid.l - grid.r;
    let window = |s: f64| cutoff(s, spec.margin) * cutoff(span - s, spec.margin);
    let mut zeta = ExteriorField::zeros(grid);
    let mut q = ExteriorField::zeros(grid);
    for _ in 0..3 {
        let side = if rng.gen_bool(0.5) { Side::Left } else { Side::Right };
        let dir: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let w = spec.width * rng.gen_range(0.5..1.5);
        let lo = 2.0 * spec.margin + 3.0 * w;
        let hi = (span - lo).max(lo);
        let c = rng.gen_range(lo..=hi);
        let a = spec.amplitude * rng.gen_range(-1.0..1.0);
        let pulse = ExteriorField::from_distance(grid, |sd, s| {
            if sd == side {
                a * (-(s - c).powi(2) / (2.0 * w * w)).exp() * window(s)
            } else {
                0.0
            }
        });
        zeta = zeta.add_scaled(1.0, &pulse);
        q = q.add_scaled(dir, &pulse);
    }
    State::from_zeta(0.0, &zeta, q, params.epsilon)
}
