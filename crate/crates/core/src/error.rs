use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("denominator polynomial is identically zero")]
    ZeroDenominator,

    #[error("transport delay must be finite and non-negative, got {0}")]
    InvalidDelay(f64),

    #[error("non-finite coefficient in polynomial")]
    NonFiniteCoefficient,

    #[error("evaluation at a pole: |den(j{omega})| = {magnitude:e}")]
    EvalAtPole { omega: f64, magnitude: f64 },

    #[error(
        "cannot add transfer functions with unequal delays ({a} s vs {b} s); rationalize with a Pade approximant first"
    )]
    UnequalDelay { a: f64, b: f64 },

    #[error(
        "{op} requires a delay-free transfer function (delay = {delay} s); rationalize with a Pade approximant first"
    )]
    DelayNotAllowed { op: &'static str, delay: f64 },

    #[error("feedback closure is degenerate: 1 + g*h is identically zero")]
    DegenerateFeedback,

    #[error("Pade order {0} outside the supported range 1..=10")]
    PadeOrder(usize),

    #[error("denominator has degree 0; there are no poles")]
    NoPoles,

    #[error("root finder did not converge after {0} iterations")]
    RootsNotConverged(usize),

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("frequency grids differ")]
    GridMismatch,

    #[error("invalid parameter {name}: {constraint}")]
    InvalidParameter { name: &'static str, constraint: String },

    #[error("feedback architecture requires PI gains")]
    MissingGains,

    #[error("singular current-loop matrix at {omega} rad/s")]
    SingularLoop { omega: f64 },

    #[error("division by zero of {what} at {omega} rad/s")]
    DivisionByZero { what: &'static str, omega: f64 },

    #[error("transfer function is improper (numerator degree {num} > denominator degree {den})")]
    Improper { num: usize, den: usize },

    #[error("system is unstable")]
    Unstable,

    #[error("no frequency grid available to sample a non-rational response")]
    NeedsGrid,

    #[error("malformed transfer-function record: {0}")]
    Record(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
