use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("empty alternative list")]
    EmptyAlternatives,

    #[error("not a permutation: {0}")]
    NotAPermutation(String),

    #[error("enumeration over {0} alternatives exceeds the limit of 8")]
    TooManyAlternatives(usize),

    #[error("subset is not contained in the observed alternatives (alternative {0})")]
    NotObserved(u32),

    #[error("rankings share {0} alternatives, need at least 2")]
    InsufficientOverlap(usize),

    #[error("invalid pairing: {0}")]
    InvalidPairing(String),

    #[error("need at least {need} agents, got {got}")]
    InsufficientAgents { need: usize, got: usize },

    #[error("agent index {0} out of range")]
    AgentOutOfRange(usize),

    #[error("alternative index {0} out of range")]
    AlternativeOutOfRange(usize),

    #[error("distance between an agent and itself is undefined")]
    SelfDistance,

    #[error("self-pair ({0}, {0}) is undefined")]
    SelfPair(usize),

    #[error("no agent ranks both alternatives {0} and {1}")]
    NoCommonRaters(usize, usize),

    #[error("no usable neighbor ranks both alternatives {0} and {1}")]
    NoUsableNeighbor(usize, usize),

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("config hash mismatch: {0} vs {1}")]
    ConfigMismatch(String, String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
