//! Alliance detection for cooperative multi-organization scheduling.
//!
//! A set of organizations, each owning identical machines and a batch of
//! jobs, may pool machines and jobs to lower the cost of an optimal
//! schedule. The savings of a coalition form a transferable-utility game;
//! this crate evaluates that game with exact scheduling oracles, computes
//! the closed-form imputation over the pivotal members, and checks bargaining-set
//! stability by searching for justified objections.
//!
//! Module map:
//! - [`instance`]: instance documents, validation and [`Coalition`] sets.
//! - [`oracles`]: optimal-cost schedulers for total completion time and
//!   speed-scaled energy, plus brute-force test oracles.
//! - [`game`]: the characteristic function cache and alliance detection.
//! - [`stability`]: objections, counter-objections and the stability report.
//! - [`report`]: machine-readable report documents.
//! - [`generate`]: seeded random instances for tests and benchmarks.

// negated float comparisons are how NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod game;
pub mod generate;
pub mod instance;
pub mod oracles;
pub mod report;
pub mod stability;

pub use error::{Error, Result};
pub use game::{AllianceReport, GameCache, GameConfig};
pub use instance::{Coalition, Instance, Job, Objective, Organization, Violation};
pub use oracles::{coalition_cost, OracleConfig, ScheduleOutcome};
pub use stability::{Objection, StabilityReport};
