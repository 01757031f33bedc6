use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("FCIDUMP line {line}: {msg}")]
    Fcidump { line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("open-shell occupation {value} on orbital {orbital}; only 0 or 2 allowed")]
    OpenShell { orbital: usize, value: f64 },
    #[error("orbital energy gap {denom:.3e} too small at (i={i}, j={j}, a={a}, b={b})")]
    DegenerateGap {
        i: usize,
        j: usize,
        a: usize,
        b: usize,
        denom: f64,
    },
    #[error("infeasible active space: {0}")]
    InfeasibleActive(String),
    #[error("sector dimension {dim} exceeds cap {cap}")]
    Capacity { dim: u128, cap: u128 },
    #[error("duplicate determinant at position {0}")]
    DuplicateDeterminant(usize),
    #[error("Davidson did not converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("bitstring width {found} does not match 2*n_orb = {expected}")]
    Width { found: usize, expected: usize },
    #[error("sample set line {line}: {msg}")]
    SampleFormat { line: usize, msg: String },
    #[error("no valid samples and nothing to recover")]
    Unrecoverable,
    #[error("{requested} UCJ modes requested but amplitude rank is {rank}")]
    Rank { requested: usize, rank: usize },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
