use thiserror::Error;

/// Errors raised while reading any of the text formats.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid number `{0}`")]
    Number(String),
}

impl ParseError {
    pub fn syntax(line: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax { line, message: message.into() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("non-stochastic row: state {state}, action `{action}` sums to {sum}")]
    NonStochastic { state: usize, action: String, sum: String },
    #[error("{which} not absorbing: edge to state {target}")]
    NotAbsorbing { which: &'static str, target: usize },
    #[error("duplicate transition {src} {action} {dst} on line {line}")]
    DuplicateTransition { src: usize, action: String, dst: usize, line: usize },
    #[error("initial state must differ from goal and fail")]
    InitialIsTerminal,
    #[error("goal and fail must be distinct states")]
    GoalIsFail,
    #[error("state {0} has no enabled action")]
    NoAction(usize),
    #[error("state index {index} out of range (model has {count} states)")]
    StateOutOfRange { index: usize, count: usize },
    #[error("probability {0} outside (0,1]")]
    BadProbability(String),
    #[error("dtmc models must use `-` as the action label (found `{0}`)")]
    DtmcAction(String),
    #[error("scheduler invalid at state {state}: {reason}")]
    Scheduler { state: usize, reason: String },
    #[error("model violates the reachability precondition: {0}")]
    NotValidated(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("model is not a DTMC")]
    NotDtmc,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("simplex did not terminate within {0} pivots")]
    IterationLimit(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CertificateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("property does not hold: {0}")]
    PropertyFalse(String),
    #[error("strict relation cannot be certified: probability equals the threshold {0}")]
    StrictInfeasible(String),
    #[error("repair breaks the threshold: {0}")]
    RepairFailed(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("certificate kind {found} does not match property (expected {expected})")]
    KindMismatch { expected: &'static str, found: &'static str },
    #[error("negative entry at index {0}")]
    NegativeEntry(usize),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WitnessError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("polytope is empty: the property does not hold at the threshold")]
    Infeasible,
    #[error("point is not in the polytope: {0}")]
    NotInPolytope(String),
    #[error("witnesses are only defined for non-strict lower bounds (>=)")]
    StrictThreshold,
    #[error("the extracted subsystem does not reach the threshold: {0}")]
    Unverified(String),
    #[error("iteration count must be at least 1")]
    NoIterations,
    #[error("model is not tree-shaped")]
    NotTree,
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("enumeration guard exceeded: {size} > {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("invalid parameters: {0}")]
    Parameters(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}
