use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("|x| = {x} lies inside the obstacle [-{r}, {r}]")]
    InsideObstacle { x: f64, r: f64 },

    #[error("invalid state: 1 + 2*eps*theta = {value} < 0 at x = {x}")]
    Cavitation { x: f64, value: f64 },

    #[error("obstacle touches the bottom: h_w = {h} < h_min = {h_min} at x = {x}")]
    ObstacleTouchesBottom { x: f64, h: f64, h_min: f64 },

    #[error("blow-up signal: 1 + eps*c'(theta) = {value} < c0 = {c0} at x = {x}")]
    BlowUp { x: f64, value: f64, c0: f64 },

    #[error("delta = {0} is not positive; use the hyperbolic path")]
    NonDispersive(f64),

    #[error("derivative order {order} is not computable with {available} nodes")]
    StencilTooShort { order: usize, available: usize },

    #[error("jump of q = {0:e} exceeds the tolerance")]
    DischargeJump(f64),

    #[error("history of {got} states is too short, need {need}")]
    HistoryTooShort { got: usize, need: usize },

    #[error("history time steps are not uniform")]
    NonUniformHistory,

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid parameters: {0}")]
    Parameters(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("field does not match the grid: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, Error>;
