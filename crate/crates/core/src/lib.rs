//! Tabular laboratory for few-shot skill transfer with successor features.
//!
//! The crate provides:
//!
//! - deterministic, fully enumerable environments: a synthetic hypercube MDP
//!   ([`hypercube::HypercubeMdp`]) and a discrete Spriteworld room with
//!   draggable objects ([`spriteworld::Spriteworld`]);
//! - binned feature cumulants over those environments ([`features`]),
//!   including a rotation-entangled ablation;
//! - the successor-feature matrix with exact dynamic-programming builders,
//!   a tabular TD learner, and an analytic off-diagonal mode ([`sf`]);
//! - generalized policy evaluation and improvement, weight regression,
//!   analytic goal weights, and achievability checks ([`gpi`]);
//! - a goal-phrase task language that compiles to reward predicates, goal
//!   regions, and weight matrices ([`task`]);
//! - a from-scratch tabular Q-learning baseline ([`baseline`]).
//!
//! Everything is deterministic: transitions are pure functions, ties are
//! broken by lowest action index, and all randomness flows from explicit
//! seeds.

pub mod baseline;
pub mod env;
pub mod features;
pub mod gpi;
pub mod hypercube;
pub mod sf;
pub mod spriteworld;
pub mod task;
pub mod util;

pub use env::{ActionId, DeterministicMdp, StateId, DEFAULT_STATE_CAP};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state space too large for exact mode: {count} states exceeds cap {cap}")]
    StateSpaceTooLarge { count: usize, cap: usize },
    #[error("invalid action index {action} (action count {action_count})")]
    InvalidAction { action: usize, action_count: usize },
    #[error("feature value {value} outside [0,1)")]
    FeatureOutOfRange { value: f64 },
    #[error("invalid rotation plane ({i},{j}) for {k} features")]
    InvalidRotationPlane { i: usize, j: usize, k: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("off-diagonal read on the policy's own feature {feature}")]
    OffDiagonalOwnFeature { feature: usize },
    #[error("matrix is not in off-diagonal-analytic mode")]
    NotOffDiagonalMode,
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("goal region boundaries do not align with bin boundaries: {0}")]
    Alignment(String),
    #[error("entity {entity} not present (object count {object_count})")]
    EntityMissing { entity: String, object_count: usize },
    #[error("{0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
