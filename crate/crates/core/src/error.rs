use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("receivers {first} and {second} overlap")]
    OverlappingReceivers { first: usize, second: usize },

    #[error("transmitter lies inside receiver {receiver}")]
    TransmitterInsideReceiver { receiver: usize },

    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("parameter `{name}` is not finite")]
    NonFiniteParameter { name: &'static str },

    #[error("duplicate receiver id {id}")]
    DuplicateReceiverId { id: usize },

    #[error("index {index} out of range for {len} receivers")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("simulation step {sim_step} does not divide sample interval {sample_interval}")]
    StepNotDividingSampleInterval { sim_step: f64, sample_interval: f64 },

    #[error("distance {d} lies inside a receiver of radius {r}")]
    DistanceInsideReceiver { d: f64, r: f64 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("damped normal equations are singular")]
    SingularSystem,

    #[error("residual became non-finite at iteration {iteration}")]
    NonFiniteResidual { iteration: usize },

    #[error("receiver {receiver} absorbed no molecules")]
    AllZeroTrace { receiver: usize },

    #[error("need at least {required} samples, got {found}")]
    TooFewSamples { required: usize, found: usize },

    #[error("distance fit for receiver {receiver} did not converge in {iterations} iterations")]
    NoConvergence { receiver: usize, iterations: usize },

    #[error("observations have zero variance")]
    DegenerateVariance,

    #[error("localization needs at least 4 receivers, got {found}")]
    TooFewReceivers { found: usize },

    #[error("requested {requested} receivers but only {usable} received molecules")]
    TooFewUsableReceivers { requested: usize, usable: usize },

    #[error("receiver geometry is degenerate (condition number {condition:e})")]
    DegenerateGeometry { condition: f64 },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Short stable identifier, used in machine-readable output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OverlappingReceivers { .. } => "OverlappingReceivers",
            Error::TransmitterInsideReceiver { .. } => "TransmitterInsideReceiver",
            Error::NonPositiveParameter { .. } => "NonPositiveParameter",
            Error::NonFiniteParameter { .. } => "NonFiniteParameter",
            Error::DuplicateReceiverId { .. } => "DuplicateReceiverId",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::StepNotDividingSampleInterval { .. } => "StepNotDividingSampleInterval",
            Error::DistanceInsideReceiver { .. } => "DistanceInsideReceiver",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::SingularSystem => "SingularSystem",
            Error::NonFiniteResidual { .. } => "NonFiniteResidual",
            Error::AllZeroTrace { .. } => "AllZeroTrace",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::DegenerateVariance => "DegenerateVariance",
            Error::TooFewReceivers { .. } => "TooFewReceivers",
            Error::TooFewUsableReceivers { .. } => "TooFewUsableReceivers",
            Error::DegenerateGeometry { .. } => "DegenerateGeometry",
            Error::Config { .. } => "Config",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
        }
    }
}
