//! Anomaly detection for multiplexed periodic symbol traffic.
//!
//! A monitored channel carries several independent periodic senders,
//! each repeating a fixed symbol pattern in timed bursts. This crate
//! learns that structure from a raw `(time, symbol)` trace and then
//! enforces it:
//!
//! * [`dtmc`] turns a trace prefix into a bigram transition chain,
//! * [`split`] partitions the chain's symbols into per-sender sets by
//!   frequency arithmetic,
//! * [`cycles`] repairs each set's subgraph and extracts its Euler
//!   cycles, i.e. the candidate patterns,
//! * [`learner`] wires those stages together and picks the candidate
//!   statechart that best explains held-out traffic,
//! * [`statechart`] and [`dfa`] run the learned model event by event,
//!   classifying each symbol as normal, retransmission, miss, or
//!   unknown,
//! * [`generator`] and [`eval`] produce synthetic scenarios with ground
//!   truth and compare the statechart against a single-pattern baseline
//!   and an oracle built from the truth.
//!
//! The [`trace`] module defines the on-disk formats shared by all of
//! the above.

pub mod cycles;
pub mod dfa;
pub mod dtmc;
pub mod error;
pub mod eval;
pub mod generator;
pub mod learner;
pub mod metrics;
pub mod split;
pub mod statechart;
pub mod trace;

/// Default fraction of an edge's rarer endpoint frequency below which the
/// edge is considered interleaving noise and dropped from the chain.
pub const DEFAULT_T_RARE: f64 = 0.10;

pub use dfa::{DfaRuntime, PatternDfa, TransitionEvent};
pub use dtmc::{build_dtmc, Dtmc};
pub use error::Error;
pub use learner::{learn_naive, learn_statechart, LearnConfig, LearnReport};
pub use split::{split_symbol_sets, Partition, SymbolSet};
pub use statechart::{EnforcementResult, EnforcementSummary, Statechart};
pub use trace::{SymbolEvent, SymbolId, Trace};
