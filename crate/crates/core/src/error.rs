use thiserror::Error;

/// Invalid configuration. The CLI maps these to exit status 2.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),

    #[error("graph not connected: no path {from}\u{2194}{to}")]
    Disconnected { from: usize, to: usize },

    #[error("graph has a self-loop at agent {0}")]
    SelfLoop(usize),

    #[error("edge ({0}, {1}) references an agent outside 0..{2}")]
    EdgeOutOfRange(usize, usize, usize),

    #[error("feasibility margin is not positive: c_max = {c_max} must be < 1")]
    NonPositiveMargin { c_max: f64 },

    #[error("{0}")]
    Parse(String),
}

/// A broken call-order or shape contract at runtime. The CLI maps these to
/// exit status 3.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContractViolation {
    #[error("joint action has {got} moves for {expected} agents")]
    ActionLength { expected: usize, got: usize },

    #[error("agent {agent}: slot for t = {t} already initialized")]
    DoubleInit { agent: usize, t: u64 },

    #[error("agent {agent}: slot initialized for t = {got}, expected t = {expected}")]
    ClockSkip {
        agent: usize,
        expected: u64,
        got: u64,
    },

    #[error("gossip round over tables at different clocks ({0} vs {1})")]
    ClockMismatch(u64, u64),

    #[error("gradients requested at t = {t}, which is not a rollout boundary for T0 = {t_zero}")]
    NotBoundary { t: u64, t_zero: u64 },

    #[error("gradients for rollout {rollout} are not available")]
    MissingRollout { rollout: u64 },

    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("message truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },

    #[error(
        "payload length {got} does not match {expected} bytes for {window_len}x{n_zones} estimates"
    )]
    PayloadLength {
        expected: usize,
        got: usize,
        window_len: u16,
        n_zones: u16,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),

    #[error("contract violation: {0}")]
    Contract(#[from] ContractViolation),

    #[error(transparent)]
    Codec(#[from] CodecError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
