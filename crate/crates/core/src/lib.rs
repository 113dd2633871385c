//! Freeway ramp metering with capacity-drop hysteresis.
//!
//! [`model`] holds the cell transmission model, [`controllers`] the metering
//! strategies, [`analysis`] the two-cell throughput and horizon results, and
//! [`harness`] the closed-loop driver used by the `capdrop` binary, whose
//! argument handling lives in [`cli`].

pub mod analysis;
pub mod cli;
pub mod controllers;
pub mod harness;
pub mod model;
pub mod scenario;
