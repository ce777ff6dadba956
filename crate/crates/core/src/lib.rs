//! Deterministic workplace-productivity simulation and optimization toolkit.
//!
//! The crate is organised bottom-up:
//!
//! - [`domain`]: shared data types, validation and the seeded generator.
//! - [`synthgen`]: synthetic cohorts, biometric streams and task arrivals.
//! - [`neuroecon`]: action value, distraction model and the penalty-method optimizer.
//! - [`scheduler`]: tabular Q-learning, reward scalarization, task assignment and a
//!   two-level hierarchical planner.
//! - [`wellness`]: health-intervention scoring, weight fitting, content selection and
//!   gamification parameters.
//! - [`evalstats`]: satisfaction, productivity change, OLS and one-way ANOVA.
//! - [`simengine`]: the scenario-driven tick loop that wires everything together.
//!
//! Every stochastic path draws from [`domain::RngState`], so a run is a pure
//! function of its configuration.

pub mod domain;
pub mod evalstats;
pub mod neuroecon;
pub mod scheduler;
pub mod simengine;
pub mod synthgen;
pub mod wellness;

pub use domain::{
    AgeRange, BiometricSample, EmployeeProfile, Gender, GroupLabel, RngState, TaskCategory,
    TaskInstance,
};
