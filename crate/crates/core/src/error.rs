use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Mechanical axis in the tweezer focal plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X => f.write_str("x"),
            Axis::Y => f.write_str("y"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("malformed config at byte offset {offset} (line {line}, column {column}): {message}")]
    ConfigSyntax {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unstable configuration: corrected omega_{axis}^2 = {omega_sq:.6e} rad^2/s^2 is negative")]
    Unstable { axis: Axis, omega_sq: f64 },

    #[error("degenerate modes: |omega_x - omega_y| = {separation:.3e} rad/s is below tolerance")]
    DegenerateModes { separation: f64 },

    #[error("trap position phi = 0 is singular for this expression (cot^2 phi diverges)")]
    SingularPosition,

    #[error("linear system is singular at omega = {omega:.6e} rad/s")]
    Singular { omega: f64 },

    #[error("no peak above 3x the window median in [{lo:.6e}, {hi:.6e}] rad/s")]
    NoPeak { lo: f64, hi: f64 },

    #[error("{count} separate peaks above threshold in [{lo:.6e}, {hi:.6e}] rad/s")]
    MultiplePeaks { count: usize, lo: f64, hi: f64 },

    #[error("peak fit did not converge within {iterations} iterations")]
    FitDiverged { iterations: usize },

    #[error("fitted centre {center:.6e} rad/s lies outside the window [{lo:.6e}, {hi:.6e}]")]
    PeakOutsideWindow { center: f64, lo: f64, hi: f64 },

    #[error("spectra file line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad inputs rather than numerics or I/O.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::ConfigSyntax { .. }
                | Error::Parse { .. }
                | Error::Json(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
