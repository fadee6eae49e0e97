use thiserror::Error;

/// Crate-wide error type.
///
/// Validation failures and refused (over-budget) searches are ordinary
/// values of this type; internal logic errors panic instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quota has {positions} positions but only {agents} agents")]
    QuotaPositions { positions: usize, agents: usize },

    #[error("quota entry {index} is zero; every served position needs at least one object")]
    QuotaZeroEntry { index: usize },

    #[error("quota hands out {total} objects but only {objects} exist")]
    QuotaMass { total: usize, objects: usize },

    #[error("object index {index} is outside the {objects}-object universe")]
    ObjectOutOfRange { index: usize, objects: usize },

    #[error("agent index {index} is outside the {agents}-agent universe")]
    AgentOutOfRange { index: usize, agents: usize },

    #[error("at most {max} objects are supported here, got {objects}")]
    TooManyObjects { objects: usize, max: usize },

    #[error("ranking is not a permutation of the object universe")]
    RankingNotPermutation,

    #[error("subset ranking must list every subset of the universe exactly once")]
    SubsetRankingIncomplete,

    #[error("ordering must list {expected} distinct agents, got {actual}")]
    OrderingLength { expected: usize, actual: usize },

    #[error("ordering lists an agent twice")]
    DuplicateAgent,

    #[error("cannot take {wanted} objects, only {available} remain")]
    TakeExceedsAvailable { wanted: usize, available: usize },

    #[error("policy resolves to agent {agent}, who was already served")]
    PolicyAgentServed { agent: usize },

    #[error("allocation assigns object {object} to two agents")]
    OverlappingBundles { object: usize },

    #[error("probability for agent {agent}, object {object} is {value}, outside [0, 1]")]
    ProbabilityRange {
        agent: usize,
        object: usize,
        value: String,
    },

    #[error("column mass for object {object} is {mass}, above 1")]
    ColumnMass { object: usize, mass: String },

    #[error("matrix rows must all have the same width")]
    RaggedMatrix,

    #[error("search needs {required} evaluations, above the cap of {cap}; refusing to truncate")]
    BudgetExceeded { required: u128, cap: u64 },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
