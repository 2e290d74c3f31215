//! Residential energy flexibility coordination with independent learners.
//!
//! Households own an EV battery, electric space heating and partly deferrable
//! loads. Each one learns a tabular hysteretic Q-learning policy over a single
//! scalar flexibility action `ψ ∈ [0, 1]`. Experience comes either from
//! exploring a simulated environment or from omniscient day-ahead convex
//! schedules, and rewards can be total, marginal, advantage or count based.
//!
//! Module map:
//!
//! * [`profiles`]: Markov-chain synthesis and CSV ingestion of daily profiles.
//! * [`thermal`]: two-node hourly building model and its coefficient matrix.
//! * [`env`]: action mapping, household and system dynamics, rewards.
//! * [`optimiser`]: day-horizon quadratic program and experience extraction.
//! * [`marl`]: Q-tables, reward rules, experience sources and training.
//! * [`harness`]: configuration, scenario matrix execution and reports.

pub mod env;
pub mod error;
pub mod harness;
pub mod marl;
pub mod optimiser;
pub mod profiles;
pub mod rng;
pub mod thermal;

pub use error::{Error, Result};

/// Hourly resolution used throughout.
pub const STEPS_PER_DAY: usize = 24;
