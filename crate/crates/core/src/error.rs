use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("symmetric eigensolver failed to converge")]
    EigenFailure,

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error(
        "spectrum is constant, so <P, X> is deterministic and the moment operators are undefined"
    )]
    DegenerateSpectrum,

    #[error("zero vector where a nonzero one is required")]
    ZeroVector,

    #[error("matrix is not in the tangent space (relative residual {residual:.3e})")]
    NotInTangentSpace { residual: f64 },

    #[error("degree {t} is unsupported (closed forms exist for t <= 3 only)")]
    UnsupportedDegree { t: usize },

    #[error("dimension d = {d} is too small for degree t = {t}")]
    DegenerateDimension { d: usize, t: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exact verification needs d(d+1)/2 <= {limit}, got {dim}")]
    ExactModeTooLarge { dim: usize, limit: usize },

    #[error("constraints are inconsistent (residual {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error("cubature residual {achieved:.3e} did not reach target {target:.3e}")]
    ResidualNotReached { achieved: f64, target: f64 },

    #[error("golfing stage {stage} failed after {repeats} redraws (last ratios: op {op_ratio:.3e}, tangent {tangent_ratio:.3e})")]
    RepeatsExhausted {
        stage: usize,
        repeats: usize,
        op_ratio: f64,
        tangent_ratio: f64,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
