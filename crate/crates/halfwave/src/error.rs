use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error)]
pub enum HwError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite symbol value at spectral mode {mode}")]
    NonFiniteSymbol { mode: usize },

    #[error("{what} did not converge after {iterations} iterations (last residual {last:.3e})")]
    IterationDiverged {
        what: &'static str,
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("converged field has non-positive value {value:.3e} at node {index}")]
    SpuriousSolution { index: usize, value: f64 },

    #[error("right-hand side is not orthogonal to the kernel: relative inner product {inner:.3e} exceeds {tol:.1e}")]
    Solvability { inner: f64, tol: f64 },

    #[error("expansion inconsistency at order ({k},{l}): relative projection {projection:.3e}")]
    ExpansionInconsistency { k: usize, l: usize, projection: f64 },

    #[error("decomposition Newton iteration left its basin: {0}")]
    Basin(String),

    #[error("decomposition Jacobian is near singular (condition estimate {0:.3e})")]
    Conditioning(f64),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("tolerance not met: {0}")]
    Tolerance(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("bad snapshot: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HwError>;
