use thiserror::Error;

/// Errors shared across all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("bad subsystem index {index} for {count} factors")]
    BadIndex { index: usize, count: usize },

    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not PSD (min eigenvalue {min_eig:.3e}, threshold {threshold:.3e})")]
    NotPsd { min_eig: f64, threshold: f64 },

    #[error("matrix is not positive definite (min eigenvalue {0:.3e})")]
    NotPd(f64),

    #[error("trace {0} exceeds 1: operands must be subnormalized")]
    NotSubnormalized(f64),

    #[error("inconsistent operator shapes: {0}")]
    ShapeMismatch(String),

    #[error("projectors are not an orthogonal resolution of identity (residual {0:.3e})")]
    BadProjectors(f64),

    #[error("target is not in the image of the pinching (residual {0:.3e})")]
    TargetNotInImage(f64),

    #[error("projector overlap <E_i, P> = {0:.3e} is numerically zero")]
    ZeroOverlap(f64),

    #[error("channel pushforward of P is numerically singular (min eigenvalue {0:.3e})")]
    SingularPushforward(f64),

    #[error("marginal is numerically singular (min eigenvalue {0:.3e})")]
    SingularMarginal(f64),

    #[error("ensemble total is numerically singular (min eigenvalue {0:.3e})")]
    SingularTotal(f64),

    #[error("channel prior is numerically singular (min eigenvalue {0:.3e})")]
    SingularPrior(f64),

    #[error("channel output state is numerically singular (min eigenvalue {0:.3e})")]
    SingularOutput(f64),

    #[error("map is not completely positive (Choi min eigenvalue {0:.3e})")]
    NotCp(f64),

    #[error("map is not trace-preserving (residual {0:.3e})")]
    NotCpt(f64),

    #[error("matrix is not a density matrix (trace {0})")]
    NotDensity(f64),

    #[error("Gamma map output is infeasible (relative residual {residual:.6e}); the problem is not solved by the closed form")]
    InfeasibleGamma { residual: f64 },

    #[error("invalid instance spec: {0}")]
    BadSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
