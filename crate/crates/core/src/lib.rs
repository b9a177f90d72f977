//! Dispersive Boussinesq waves around a fixed partially immersed obstacle,
//! solved in ODE form on the exterior domain.

pub mod compat;
pub mod diagnostics;
pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod stencil;
pub mod timestepper;
pub mod types;

pub use error::{Error, Result};
pub use types::{ExteriorField, GridSpec, ObstacleProfile, Parameters, Side, State};
