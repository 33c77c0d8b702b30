use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by family so the CLI can map them onto distinct
/// exit codes: configuration/validation, data, numeric, capacity.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or inconsistent inputs.
    #[error("validation: {0}")]
    Validation(String),

    /// A data axis has zero range and cannot be rescaled to the unit interval.
    #[error("degenerate axis '{axis}': all {count} values equal {value}")]
    DegenerateAxis {
        axis: &'static str,
        value: f64,
        count: usize,
    },

    /// Requested grid order would exceed the memory guard.
    #[error("grid order {order} exceeds cap {cap}: cube would have {rows} rows")]
    Capacity { order: u32, cap: u32, rows: u128 },

    /// Rejection sampling stalled below the configured acceptance floor.
    #[error(
        "shape filter infeasible: acceptance rate {acceptance_rate:.6} after {attempts} attempts"
    )]
    FilterInfeasible {
        acceptance_rate: f64,
        attempts: usize,
    },

    /// Every candidate bandwidth left some held-out point with zero kernel mass.
    #[error("bandwidth selection failed: {0}")]
    BandwidthSelection(String),

    /// Tabulated mesh is too coarse for the requested partition width.
    #[error("mesh too coarse: spacing {spacing:.3e} exceeds delta/{factor} = {limit:.3e}")]
    MeshResolution {
        spacing: f64,
        factor: f64,
        limit: f64,
    },

    /// Non-finite arithmetic or a failed factorization.
    #[error("numeric: {0}")]
    Numeric(String),

    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
