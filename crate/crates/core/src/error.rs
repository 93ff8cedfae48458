use thiserror::Error;

use crate::array::ArrayMode;
use crate::device::CellState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the range the model is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("V_T extraction failed: {0}")]
    Extraction(String),

    #[error("ambiguous decode: V_T pair is equidistant from {0:?} and {1:?}")]
    AmbiguousDecode(CellState, CellState),

    #[error("program sequence error: {0}")]
    ProgramSequence(String),

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("array construction error: {0}")]
    Construction(String),

    #[error("operation requires {required:?} mode but array is in {actual:?} mode")]
    Mode {
        required: ArrayMode,
        actual: ArrayMode,
    },

    #[error("cell index ({row}, {col}) out of bounds for {rows}x{cols} array")]
    Bounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("length mismatch: expected {expected}, got {actual}")]
    Length { expected: usize, actual: usize },

    #[error("solver did not converge after {iterations} iterations (last max delta {last_delta:.3e} V)")]
    Convergence { iterations: usize, last_delta: f64 },

    #[error("singular network matrix: {0}")]
    Topology(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema mismatch: expected {expected:?}, found {found:?}")]
    Schema { expected: String, found: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
