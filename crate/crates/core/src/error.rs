use thiserror::Error;

/// Why a Newton inversion gave up.
#[derive(Debug, Clone, PartialEq)]
pub enum InversionFailure {
    Singular { condition: f64 },
    NoConvergence { residual: f64, iterations: usize },
}

impl std::fmt::Display for InversionFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Singular { condition } => {
                write!(f, "singular Jacobian (condition estimate {condition:.3e})")
            }
            Self::NoConvergence {
                residual,
                iterations,
            } => write!(
                f,
                "no convergence after {iterations} iterations (residual {residual:.3e})"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown identifier `{name}` at {pos}")]
    UnknownIdentifier { name: String, pos: usize },

    #[error("expected exactly 3 components, found {found}")]
    Arity { found: usize },

    #[error("non-finite value {what} at {point:?}")]
    NonFinite { what: &'static str, point: [f64; 3] },

    #[error("{0} is not twice differentiable in closed form")]
    NoHessian(&'static str),

    #[error("point {point:?} lies outside the certified domain")]
    OutsideDomain { point: [f64; 3] },

    #[error("only n = 1 (R^3) is implemented, got n = {n}")]
    UnsupportedDimension { n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inversion failed near {target:?}: {reason}")]
    InversionFailed {
        target: [f64; 3],
        reason: InversionFailure,
    },

    #[error(
        "map is outside the factorization neighbourhood at eps = {eps}: {which} deviation {value:.3e} exceeds {bound:.3e} at {at:?}"
    )]
    NotInNeighborhood {
        eps: f64,
        which: &'static str,
        value: f64,
        bound: f64,
        at: [f64; 3],
    },

    #[error("factorization residual {residual:.3e} exceeds {tol:.3e} at {at:?}")]
    ResidualExceeded { residual: f64, tol: f64, at: [f64; 3] },

    #[error("no epsilon on the ladder admits a factorization")]
    NoFeasibleEpsilon,

    #[error("junction {index} mismatch {sup:.3e} exceeds tolerance {tol:.3e}")]
    JunctionMismatch { index: usize, sup: f64, tol: f64 },

    #[error("subdivision count exceeded cap {cap}")]
    SubdivisionCapExceeded { cap: usize },

    #[error("a bare map far from the identity needs a time-indexed family to be connected")]
    NeedsFamily,

    #[error("RK4 step too large: halving changed the result by {diff:.3e} (bound {bound:.3e})")]
    StepTooLarge { diff: f64, bound: f64 },

    #[error("containment failure: {0}")]
    ContainmentFailure(String),

    #[error("positivity shortfall: min alpha {min_alpha:.3e} at t = {t}, p = {at:?}")]
    PositivityShortfall { min_alpha: f64, t: f64, at: [f64; 3] },

    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
