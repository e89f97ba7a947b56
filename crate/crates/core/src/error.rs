use thiserror::Error;

use crate::model::Side;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("state does not match configuration: {0}")]
    Shape(String),

    #[error("rescaled piston velocity W is undefined for epsilon = 0 with V = {v}")]
    UndefinedW { v: f64 },

    #[error("piston position X = {x} is outside the open interval (0, 1)")]
    PistonOutOfRange { x: f64 },

    #[error("non-finite value in state at t = {t}")]
    NonFinite { t: f64 },

    #[error("no future event: the system is stalled at t = {t}")]
    Stalled { t: f64 },

    #[error("{side:?} particle {index} is not closing on the piston (relative velocity {rel})")]
    SeparatingCollision { side: Side, index: usize, rel: f64 },

    #[error("{side:?} particle {index} is not at its wall (x = {x}, v = {v})")]
    NotAtWall {
        side: Side,
        index: usize,
        x: f64,
        v: f64,
    },

    #[error("collision gap {gap:e} exceeds tolerance at t = {t}")]
    GapDrift { gap: f64, t: f64 },

    #[error("event cap of {cap} exceeded at t = {t} (target {until})")]
    EventCap { cap: u64, t: f64, until: f64 },

    #[error("angle variable undefined for {side:?} particle {index} with zero velocity")]
    ZeroVelocity { side: Side, index: usize },

    #[error("operation requires delta > 0 (got {delta}); use the hard-core module")]
    NeedsSoftCore { delta: f64 },

    #[error("operation requires delta = 0 (got {delta})")]
    NeedsHardCore { delta: f64 },

    #[error("energy {energy} outside the admissible band ({lo}, {hi})")]
    EnergyOutOfBand { energy: f64, lo: f64, hi: f64 },

    #[error("barrier breach: {side:?} particle {index} at t = {t}")]
    BarrierBreach { side: Side, index: usize, t: f64 },

    #[error("relative energy drift {drift:e} exceeds {tol:e} at t = {t}; use a smaller step")]
    EnergyDrift { drift: f64, tol: f64, t: f64 },

    #[error("step size underflow at tau = {tau} (h = {h:e})")]
    StepUnderflow { tau: f64, h: f64 },

    #[error("chamber {chamber} has non-positive width {width}")]
    Chamber { chamber: usize, width: f64 },

    #[error("invalid potential table: {0}")]
    Table(String),

    #[error("trajectories do not overlap in slow time")]
    EmptyOverlap,

    #[error("period detection failed: {0}")]
    Period(String),

    #[error("fit needs at least {need} usable points, got {got}")]
    Fit { need: usize, got: usize },

    #[error("run failed at {coords}: {source}")]
    Grid {
        coords: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_grid(self, coords: impl Into<String>) -> Self {
        Error::Grid {
            coords: coords.into(),
            source: Box::new(self),
        }
    }
}
