//! Thin-wire method-of-moments solver.
//!
//! Wires are split into pulse-basis segments, the field equation is point
//! matched at segment centers, and a perfectly conducting ground plane is
//! handled with image currents folded into the real-segment equations. Tag
//! positions are swept with [`EnvironmentSolver`], which factorizes the
//! tag-free environment once and attaches each tag pose through a Schur
//! complement.

mod dump;
mod env;
mod fill;
mod linalg;
mod mesh;
mod quad;
mod solve;

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{OrientationAngles, Position3, Scene, SceneError};

pub use dump::{read_dump, write_dump, MatrixDump};
pub use env::EnvironmentSolver;
pub use fill::{coupling_block, epsilon0, folded_block, impedance_matrix, raw_block, Consts, MU0};
pub use linalg::{CMatrix, Lu, LuError};
pub use mesh::{
    check_segments_per_halfwave, mesh_scene, scene_wires, segment_count, tag_geom, MeshWire,
    MeshedScene, WireGeom, WireKind, WireSegment,
};
pub use quad::{kernel_integral, Line};
pub use solve::{
    fill_impedance_matrix, load_power, PortReading, SolveContext, Solution, MAX_CONDITION,
    MIN_UPDATE_DENOMINATOR,
};

#[derive(Debug, Clone, Error)]
pub enum MomError {
    #[error("segments_per_halfwave must be odd, got {0}")]
    EvenSegments(usize),
    #[error("segments_per_halfwave must be at least 5, got {0}")]
    TooFewSegments(usize),
    #[error("wire {0} touches or crosses the ground plane")]
    GroundIntersection(String),
    #[error("wires {a} and {b} overlap (distance {distance:.3e} m is below the radius sum)")]
    Overlap { a: String, b: String, distance: f64 },
    #[error("invalid load on segment {segment}: {reason}")]
    InvalidLoad { segment: usize, reason: String },
    #[error("invalid port or vector size {0}")]
    InvalidPort(usize),
    #[error("base solution already carries a perturbation on port {port}")]
    PerturbedElsewhere { port: usize },
    #[error("impedance matrix is singular (zero pivot in column {column})")]
    Singular { column: usize },
    #[error("impedance matrix is ill-conditioned (1-norm condition estimate {estimate:.3e} > 1e12)")]
    IllConditioned { estimate: f64 },
    #[error("scene has no {0} dipole")]
    MissingPort(&'static str),
    #[error("tag pose rejected: {0}")]
    PoseRejected(String),
    #[error("scene: {0}")]
    Scene(String),
}

impl From<SceneError> for MomError {
    fn from(e: SceneError) -> Self {
        MomError::Scene(e.to_string())
    }
}

/// Default open-circuit load of the OFF tag state, ohms.
pub const DEFAULT_Z_OPEN: f64 = 1.0e6;
pub const DEFAULT_SEGMENTS_PER_HALFWAVE: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub segments_per_halfwave: usize,
    /// Tag load in the ON (short-circuit) state.
    pub z_on: Complex64,
    /// Tag load in the OFF (open-circuit) state.
    pub z_open: Complex64,
    /// Source delta-gap voltage.
    pub v_source: Complex64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            segments_per_halfwave: DEFAULT_SEGMENTS_PER_HALFWAVE,
            z_on: Complex64::new(0.0, 0.0),
            z_open: Complex64::new(DEFAULT_Z_OPEN, 0.0),
            v_source: Complex64::new(1.0, 0.0),
        }
    }
}

impl SolverOptions {
    pub fn with_segments(segments_per_halfwave: usize) -> Self {
        Self {
            segments_per_halfwave,
            ..Self::default()
        }
    }
}

/// Reader-side result of one tag pose in both states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagPowers {
    pub p_on: f64,
    pub p_off: f64,
    pub reader_on: Complex64,
    pub reader_off: Complex64,
    pub used_fallback: bool,
}

/// Rejects poses whose tag center lies within half a wavelength of the
/// source or reader.
pub fn check_tag_pose(scene: &Scene, center: Position3, orientation: OrientationAngles) -> Result<(), MomError> {
    if !center.is_finite() {
        return Err(MomError::PoseRejected("non-finite tag position".into()));
    }
    OrientationAngles::new(orientation.phi_deg, orientation.theta_deg)?;
    let limit = scene.wavelength() / 2.0;
    for d in [&scene.source, &scene.reader] {
        let dist = d.center.distance(center);
        if dist <= limit {
            return Err(MomError::PoseRejected(format!(
                "tag center {dist:.4} m from the {} (limit {limit:.4} m)",
                d.role
            )));
        }
    }
    Ok(())
}

/// Reference path: meshes the whole scene with the tag at `pose`, solves the
/// ON state with a full factorization and the OFF state by rank-one update.
pub fn tag_transfer(
    scene: &Scene,
    center: Position3,
    orientation: OrientationAngles,
    opts: &SolverOptions,
) -> Result<TagPowers, MomError> {
    check_tag_pose(scene, center, orientation)?;
    let posed = scene.with_tag_pose(center, orientation);
    let mesh = mesh_scene(&posed, opts.segments_per_halfwave)?;
    let source = mesh.source_port.ok_or(MomError::MissingPort("source"))?;
    let reader = mesh.reader_port.ok_or(MomError::MissingPort("reader"))?;
    let tag = mesh.tag_port.ok_or(MomError::MissingPort("tag"))?;
    let ctx = fill_impedance_matrix(&mesh).apply_loads(&BTreeMap::from([
        (reader, scene.reader.load),
        (tag, opts.z_on),
    ]))?;
    let on = ctx.excite_and_solve(source, opts.v_source)?;
    let off = ctx.switch_tag_state(tag, opts.z_open - opts.z_on, &on)?;
    let r_on = ctx.port_reading(&on, reader)?;
    let r_off = ctx.port_reading(&off, reader)?;
    Ok(TagPowers {
        p_on: r_on.power_w,
        p_off: r_off.power_w,
        reader_on: r_on.current,
        reader_off: r_off.current,
        used_fallback: off.used_fallback,
    })
}
