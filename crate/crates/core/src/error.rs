use thiserror::Error;

/// Errors raised by path construction, the balayage operators and the
/// Monte Carlo checks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid user-supplied parameter (grid, model, bandwidth, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A construction was called outside its documented preconditions.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The last zero of the density sits on the final grid point, so the
    /// shifted process has no room.
    #[error("degenerate shift: last zero at t = {gbar} equals the horizon {horizon}")]
    DegenerateShift { gbar: f64, horizon: f64 },

    /// Every terminal density value is zero; the reweighted measure is undefined.
    #[error("degenerate measure: all terminal density values are zero")]
    DegenerateMeasure,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
}

pub type Result<T> = std::result::Result<T, Error>;
