use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("space needs at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("space is disconnected: point {0} is unreachable from point 0")]
    Disconnected(usize),

    #[error("edge ({0}, {1}) has nonpositive or non-finite length {2}")]
    BadEdgeLength(usize, usize, f64),

    #[error("point {0} has nonpositive or non-finite measure {1}")]
    BadMeasure(usize, f64),

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("field has {got} values, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("field value at {0} is not finite")]
    NonFiniteValue(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("scale k = {k} is unresolvable: 1/k = {sep} must exceed 4h = {limit}")]
    ScaleUnresolvable { k: f64, sep: f64, limit: f64 },

    #[error("bump functions vanish at point {0}: the net does not cover the space")]
    CoverGap(usize),

    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize, last_quotient: f64, last_iterate: Vec<f64> },

    #[error("warp hypothesis violated at point {0}: w_d = 0 but w_m = {1} > 0")]
    HypothesisViolated(usize, f64),

    #[error("warp function is zero at the localization center {0}")]
    ZeroWarpCenter(usize),

    #[error("w_m fails linear decay: ratio w_m/D = {ratio} at point {point} exceeds cap {cap}")]
    DecayHypothesis { point: usize, ratio: f64, cap: f64 },

    #[error("zero set of w_m is not discrete: points {0} and {1} are within {2}")]
    ZeroSetNotDiscrete(usize, usize, f64),

    #[error("product of {nx} x {ny} points exceeds the cap of {cap}")]
    TooLarge { nx: usize, ny: usize, cap: usize },

    #[error("collapsed class {class} carries inconsistent field values")]
    InconsistentQuotientField { class: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
