//! Desk-scale simulator for vertical ion shuttling above multi-rail
//! surface-electrode traps.
//!
//! The crate models the trap electrostatics analytically (gapless-plane
//! rectangular patches), locates trapping minima and their secular
//! frequencies, generates smooth shuttling voltage protocols, integrates the
//! classical ion motion, and combines shuttle-induced excitation with an
//! anomalous-heating model to find optimal transport parameters.
//!
//! Public interfaces use micrometers, volts, MHz, and milliseconds where
//! noted; all internal computation is SI.

pub mod constants;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod heating;
pub mod interp;
pub mod parallel;
pub mod presets;
pub mod report;
pub mod sweep;
pub mod trap_analysis;
pub mod waveforms;

pub use error::{Error, Result};
