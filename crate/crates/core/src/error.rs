//! Error type shared by every engine stage.

use alloc::string::String;
use alloc::vec::Vec;

/// Engine-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument violated a precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A dataset was empty where rows were required.
    #[error("empty data: {0}")]
    EmptyData(String),

    /// Input columns did not match the declared schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A discrete column held a value outside its declared states.
    #[error("unknown state {value} for variable {variable}")]
    UnknownState { variable: String, value: String },

    /// A name did not resolve against the variable set.
    #[error("unknown variable: {0}")]
    UnknownVariable(String),

    /// An edge mutation would create a directed cycle. The path starts and
    /// ends at the same node and walks the offending loop.
    #[error("edge would create a cycle: {}", path.join(" -> "))]
    Cycle { path: Vec<String> },

    /// A graph union produced a cycle; indices identify the input graphs that
    /// contributed edges on the cycle.
    #[error("graph union creates a cycle through inputs {contributors:?}: {}", path.join(" -> "))]
    UnionCycle {
        path: Vec<String>,
        contributors: Vec<usize>,
    },

    /// The mandatory-edge set cannot be embedded in any DAG.
    #[error("unsatisfiable constraints: mandatory edges form a cycle {}", cycle.join(" -> "))]
    UnsatisfiableConstraints { cycle: Vec<String> },

    /// A graph handed to the search violated the hard constraints.
    #[error("infeasible structure: {0}")]
    Infeasible(String),

    /// Text or bytes could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// A serialized model carried an unsupported schema version.
    #[error("unsupported model schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    /// Evidence with probability zero cannot be conditioned on.
    #[error("evidence has probability zero")]
    ZeroEvidence,

    /// An exhaustive routine was asked to enumerate a space beyond its guard.
    #[error("state space too large to enumerate: {size} > {limit}")]
    TooLarge { size: u64, limit: u64 },
}
