//! Core simulation and learning algorithms for the room-clearance gridworld.
//!
//! Everything in this crate is pure computation over value types: the
//! floorplan model, the clearance propagation, the step engine, the feudal
//! command layer, and the learners (tabular Q, replay buffer, MLP, double
//! DQN). There is no IO here; file formats, the CLI, and run orchestration
//! live in the companion `roomclear-cli` crate. The crate is `no_std`
//! (with `alloc`) outside of tests.
//!
//! Randomness never comes from ambient state: every stochastic operation
//! takes an explicit `rand::Rng`, so a run is fully determined by its seed.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baseline;
pub mod clearance;
pub mod driver;
pub mod engine;
pub mod feudal;
pub mod floorplan;
pub mod learn;

pub use floorplan::{parse_scenario, serialize_scenario, FloorPlan, Scenario, ScenarioError};
