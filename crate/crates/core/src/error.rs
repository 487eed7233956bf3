//! Crate-wide error type.
//!
//! Domain failures (bad geometry, unusable calibration data, unreachable
//! targets) are kept separate from file-format problems so callers can tell
//! "your input file is broken" apart from "your input file describes
//! something impossible".

use std::path::PathBuf;

use thiserror::Error;

use crate::grid::Grid;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its documented range (negative dose, zero
    /// pitch, relaxation factor out of bounds, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two grids that must share geometry (pitch, dimensions, alignment)
    /// do not.
    #[error("incompatible grid: {0}")]
    IncompatibleGrid(String),

    /// A geometric specification cannot be realized (arc higher than the
    /// chord allows, patch outside the base map, cut outside the grid).
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// A target height map asks for more resist than the film provides.
    #[error(
        "target exceeds resist: requested height {max_target} um > film thickness {full_height} um"
    )]
    TargetExceedsResist { max_target: f64, full_height: f64 },

    /// No dose distribution can reach the target under the given kernel:
    /// every still-violating cell is pinned at a dose bound. The diagnostic
    /// grid holds the per-cell absolute height error at the final iterate.
    #[error(
        "infeasible target: {cell_count} cells cannot be corrected; worst |dh| = {worst_error:.6} um at cell ({worst_col}, {worst_row})"
    )]
    InfeasibleTarget {
        cell_count: usize,
        worst_error: f64,
        worst_col: usize,
        worst_row: usize,
        diagnostic: Box<Grid>,
    },

    /// Calibration samples are present but unusable (grossly non-monotone,
    /// duplicated doses, ...).
    #[error("bad calibration: {0}")]
    BadCalibration(String),

    /// Calibration samples do not cover the range needed to build a curve.
    #[error("incomplete calibration: {0}")]
    IncompleteCalibration(String),

    /// Point set does not constrain the fit (collinear profile samples).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Too few samples for the requested estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Samples carry no usable spread (e.g. zero variance with an automatic
    /// bandwidth rule).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A transmission trace has no dip deep enough to fit.
    #[error("no resonance in {trace}: {reason}")]
    NoResonance { trace: String, reason: String },

    /// Query point outside the evaluation range of a density estimate.
    #[error("out of support: {0}")]
    OutOfSupport(String),

    /// Malformed text input; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// I/O failure on a named file.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// I/O failure on an anonymous reader/writer.
    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by unreadable or malformed input files, as
    /// opposed to domain errors in well-formed input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Io { .. } | Error::Stream(_)
        )
    }
}
