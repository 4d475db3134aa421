//! Aerocapture trajectory simulation with two-channel (bank angle and angle
//! of attack) predictor-corrector guidance.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aero;
pub mod config;
pub mod dynamics;
pub mod guidance;
pub mod mission;
pub mod montecarlo;
pub mod optimal_control;
pub mod orbits;
pub mod planet;
pub mod rootfind;
pub mod sim;
