//! Return-time statistics for chaotic maps.
//!
//! The crate simulates visit counts of orbits to shrinking balls, detects
//! very-short-return centers, models Young towers with polynomial return-time
//! tails, and evaluates the Chen–Stein bound for the distance between the law
//! of a sum of dependent indicators and a Poisson law.

pub mod chenstein;
pub mod error;
pub mod experiments;
pub mod rng;
pub mod orbit;
pub mod stats;
pub mod systems;
pub mod tower;

pub use error::{Error, Result};
