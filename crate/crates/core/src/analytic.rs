//! Projection model of the source → tag → reader polarization chain and the
//! tag orientation that maximizes it.
//!
//! The direct path couples as `S·R` and the backscatter path as
//! `(S·T)(T·R)`. For a vertical source and a tag in the plane of `S` and
//! `R` the backscatter objective is `½[cos(2φᵀ − φᴿ) + cos φᴿ]`, maximized in
//! magnitude at `φᵀ = φᴿ/2` (value `cos²(φᴿ/2)`) or `φᵀ = φᴿ/2 + 90°`
//! (value `sin²(φᴿ/2)`).

use serde::Serialize;
use thiserror::Error;

use crate::scene::{OrientationAngles, Position3};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticError {
    #[error("closed form requires a vertical source (phi = 0), got phi = {0}")]
    NonVerticalSource(f64),
    #[error("search grid is empty")]
    EmptyGrid,
    #[error("axis is not unit length (norm {0})")]
    NonUnitAxis(f64),
}

/// Two objective values closer than this are reported as a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionModel {
    pub s_axis: Position3,
    pub r_axis: Position3,
}

impl ProjectionModel {
    pub fn new(source: OrientationAngles, reader: OrientationAngles) -> Self {
        Self {
            s_axis: source.axis(),
            r_axis: reader.axis(),
        }
    }

    pub fn from_axes(s_axis: Position3, r_axis: Position3) -> Result<Self, AnalyticError> {
        for a in [s_axis, r_axis] {
            if (a.norm() - 1.0).abs() > 1e-12 {
                return Err(AnalyticError::NonUnitAxis(a.norm()));
            }
        }
        Ok(Self { s_axis, r_axis })
    }
}

/// `S·R`.
pub fn direct_projection(model: &ProjectionModel) -> f64 {
    model.s_axis.dot(model.r_axis)
}

/// `(S·T)(T·R)`.
pub fn backscatter_projection(model: &ProjectionModel, t_axis: Position3) -> f64 {
    model.s_axis.dot(t_axis) * t_axis.dot(model.r_axis)
}

/// `|axis(a) · axis(b)|`.
pub fn orientation_match(a: OrientationAngles, b: OrientationAngles) -> f64 {
    a.axis().dot(b.axis()).abs().min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `φᵀ = φᴿ/2`
    Principal,
    /// `φᵀ = φᴿ/2 + 90°`
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormOptimum {
    pub orientation: OrientationAngles,
    pub branch: Branch,
    /// `|(S·T)(T·R)|` at the returned orientation.
    pub objective: f64,
    /// Objective of the branch not returned.
    pub other_branch_objective: f64,
    /// Both branches reach the same objective.
    pub tie: bool,
}

/// Optimal tag orientation for a vertical source: `θᵀ = θᴿ` and
/// `φᵀ = φᴿ/2`, switching to the 90°-shifted branch only when it is strictly
/// better (which happens for `φᴿ > 90°`).
pub fn opssa_closed_form(
    source: OrientationAngles,
    reader: OrientationAngles,
) -> Result<ClosedFormOptimum, AnalyticError> {
    if source.phi_deg != 0.0 {
        return Err(AnalyticError::NonVerticalSource(source.phi_deg));
    }
    let model = ProjectionModel::new(source, reader);
    let principal = OrientationAngles::deg(reader.phi_deg / 2.0, reader.theta_deg).canonical();
    let shifted = OrientationAngles::deg(reader.phi_deg / 2.0 + 90.0, reader.theta_deg).canonical();
    let obj = |o: OrientationAngles| backscatter_projection(&model, o.axis()).abs();
    let (p, s) = (obj(principal), obj(shifted));
    let tie = (p - s).abs() <= TIE_TOLERANCE;
    let (orientation, branch, objective, other) = if s > p && !tie {
        (shifted, Branch::Shifted, s, p)
    } else {
        (principal, Branch::Principal, p, s)
    };
    Ok(ClosedFormOptimum {
        orientation,
        branch,
        objective,
        other_branch_objective: other,
        tie,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExhaustiveOptimum {
    pub orientation: OrientationAngles,
    pub objective: f64,
    pub phi_index: usize,
    pub theta_index: usize,
}

/// Grid point maximizing `|(S·T)(T·R)|`; the lowest `(φ index, θ index)`
/// wins ties.
pub fn opssa_exhaustive(
    model: &ProjectionModel,
    phi_grid: &[f64],
    theta_grid: &[f64],
) -> Result<ExhaustiveOptimum, AnalyticError> {
    if phi_grid.is_empty() || theta_grid.is_empty() {
        return Err(AnalyticError::EmptyGrid);
    }
    let mut best: Option<ExhaustiveOptimum> = None;
    for (i, &phi) in phi_grid.iter().enumerate() {
        for (j, &theta) in theta_grid.iter().enumerate() {
            let o = OrientationAngles::deg(phi, theta);
            let v = backscatter_projection(model, o.axis()).abs();
            if best.is_none_or(|b| v > b.objective) {
                best = Some(ExhaustiveOptimum {
                    orientation: o,
                    objective: v,
                    phi_index: i,
                    theta_index: j,
                });
            }
        }
    }
    Ok(best.expect("non-empty grid"))
}

/// Inclusive grid `lo, lo + step, …` up to `hi` (with a small tolerance on
/// the last point).
pub fn degree_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0);
    let n = ((hi - lo) / step + 1e-9).floor() as i64;
    (0..=n.max(-1)).map(|i| lo + i as f64 * step).collect()
}
