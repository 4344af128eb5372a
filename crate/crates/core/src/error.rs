use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("width mismatch: {0}")]
    WidthMismatch(String),
    #[error("unsupported width {0} (supported: 1..=8)")]
    UnsupportedWidth(usize),
    #[error("invalid truth table: {0}")]
    InvalidTable(String),
    #[error("algebraic degree {0} exceeds 2; direct sharing needs a quadratic function")]
    DegreeTooHigh(usize),
    #[error("correction term targets components {targets:?} but share {share} must be missing from exactly one of them")]
    InvalidTarget { share: usize, targets: [usize; 2] },
    #[error("affine map is singular")]
    SingularAffine,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("device does not operate correctly at this clock period (overclocked)")]
    OverclockedFault,
    #[error("netlist contains a combinational loop through `{0}`")]
    CombinationalLoop(String),
    #[error("invalid netlist: {0}")]
    InvalidNetlist(String),
    #[error("no sensitizable path through `{0}`")]
    NoSensitizablePath(String),
    #[error("netlist has {0} primary inputs; the brute-force sensitization oracle supports at most 20")]
    TooManyInputs(usize),
    #[error("target path delay {target} outside the feasible envelope [{min}, {max}]")]
    InfeasibleTarget { target: f64, min: f64, max: f64 },
    #[error("degenerate group: {0}")]
    DegenerateGroup(String),
    #[error("hypothesis has zero variance for guess {0}")]
    ZeroVariance(usize),
    #[error("empty partition for guess {0}")]
    EmptyPartition(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("trace file: {0}")]
    TraceFormat(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
