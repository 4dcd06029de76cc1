use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidSpec(String),

    #[error("branch index {index} at level {level} outside 1..={branching}")]
    InvalidBranchIndex {
        level: usize,
        index: u32,
        branching: usize,
    },

    #[error("degenerate gap at level {level}: n_k * c_k = 1 leaves no separation")]
    DegenerateGap { level: usize },

    #[error("{what} = {requested} exceeds the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error("schedule value t_{k} overflows the integer range")]
    Overflow { k: usize },

    #[error("custom schedule has {len} entries, t_{k} requested")]
    ScheduleExhausted { k: usize, len: usize },

    #[error("no sign change for the root within |x| <= {limit}")]
    BracketFailure { limit: f64 },

    #[error("only {found} subsequence points survive the warm-up cutoff, need {needed}")]
    InsufficientDepths { found: usize, needed: usize },

    #[error("argument {value} outside the domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("linear probe decreases at both grid ends; transform unbounded below")]
    UnboundedBelow,

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
