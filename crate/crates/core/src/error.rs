use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("zero wavevector")]
    ZeroWavevector,
    #[error("input not solenoidal (residual {0:.3e})")]
    NonSolenoidal(f64),
    #[error("baroclinic inversion got vertical-mean content ({0:.3e})")]
    BarotropicContent(f64),
    #[error("nonzero mean input ({0:.3e})")]
    NonzeroMean(f64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation: {0}")]
    Validation(String),
    #[error("blow-up guard tripped at t={t:.6}: {what} = {value:.3e}")]
    BlowUp { t: f64, what: String, value: f64 },
    #[error("series not fittable: {0}")]
    BadSeries(String),
    #[error("quadrature tail mass {mass:.3e} exceeds tolerance {tol:.3e}")]
    TailMass { mass: f64, tol: f64 },
    #[error("scaled grid leaves source box: needs half-width {needed:.4}, box has {avail:.4}")]
    Extrapolation { needed: f64, avail: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt snapshot: {0}")]
    CorruptFile(String),
    #[error("snapshot format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("unknown experiment `{0}`; catalog: {1}")]
    UnknownExperiment(String, String),
}

pub type Result<T> = std::result::Result<T, Error>;
