//! Neurosymbolic task-and-motion planning for robotic bolt disassembly.
//!
//! The crate is organized around six subsystems:
//!
//! - [`pddl`]: a small PDDL-subset front end (domain/problem parsing,
//!   validation, canonical formatting).
//! - [`belief`]: probabilistic belief state over ground atoms, with
//!   calibrated grounders that turn continuous observations into
//!   per-predicate probability distributions.
//! - [`planner`]: likelihood-pruned forward search over belief states.
//! - [`simworld`]: kinematic ground-truth world and the five primitive
//!   controllers (Approach, Mate, Push, Insert, Disassemble).
//! - [`executor`]: the execute-verify-replan closed loop.
//! - [`harness`]: Monte-Carlo sweeps, CSV/plot emission and grounder
//!   calibration.

pub mod belief;
pub mod config;
pub mod executor;
pub mod harness;
pub mod pddl;
pub mod planner;
pub mod simworld;
