//! Racetrack laboratory.
//!
//! The crate bundles the Racetrack MDP ([`track`]), an A* expert ([`planner`]),
//! expert-labelled data generation ([`datagen`]), from-scratch learners
//! ([`models`]), the three training pipelines ([`trainers`]) and the
//! evaluation harness ([`eval`]). The `rtlab` binary in this crate wires them
//! together behind a command line ([`cli`]).

pub mod cli;
pub mod datagen;
pub mod eval;
pub mod models;
pub mod planner;
pub mod render;
pub mod seed;
pub mod track;
pub mod trainers;

pub use planner::Planner;
pub use track::{Action, Cell, FeatureVector, Pos, SimConfig, State, TrackMap};
