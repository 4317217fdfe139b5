//! kgym: a minimal knowledge-graph tool environment for agent evaluation,
//! with the full reward ladder, trajectory classifier, statistics layer,
//! scripted failure-mode policies, and error diagnostics.
//!
//! The fastest tour is the `examples/` directory — one runnable example per
//! capability (`cargo run --example navigate_kg`, etc.). The `kgym` binary
//! exposes the same pipelines as subcommands for batch work over files.

pub mod classify;
pub mod cli;
pub mod diagnostics;
pub mod fixtures;
pub mod gold;
pub mod kg;
pub mod pipeline;
pub mod policy;
pub mod respond;
pub mod reward;
pub mod stats;
pub mod text;
pub mod trajectory;
pub mod wire;

pub use gold::{GoldRecord, GoldSet};
pub use kg::{EntityId, KnowledgeGraph, RelationId, Triple};
pub use reward::{RewardBreakdown, Rung};
pub use trajectory::{parse_transcript, Trajectory};
