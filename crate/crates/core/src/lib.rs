//! Polarization-aware ambient backscatter link simulation.
//!
//! - [`scene`]: geometry, orientation sets and scenario presets
//! - [`mom`]: thin-wire method-of-moments solver for reader powers
//! - [`analytic`]: projection model and optimal tag orientation
//! - [`metrics`]: contrast, bit error rate, captured SNR and outage
//! - [`sweep`]: contrast maps, best-orientation maps and coverage curves

pub mod analytic;
pub mod metrics;
pub mod mom;
pub mod scene;
pub mod sweep;

pub use scene::{OrientationAngles, Position3, Scene};
