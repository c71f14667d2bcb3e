//! Spatial experiments: contrast maps over tag positions, best-orientation
//! maps, and coverage-area outage and captured-SNR curves.
//!
//! Cells and positions are independent work items evaluated in parallel and
//! collected by index, so results do not depend on the worker count.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::metrics::{
    delta_power, delta_snr, linear_to_db, outage_probability, snr_captured, DetectionThreshold, LinkBudget,
    MetricsError,
};
use crate::mom::{EnvironmentSolver, MomError, SolverOptions, TagPowers};
use crate::scene::{OrientationAngles, PolarizationSet, Position3, Scene};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Mom(#[from] MomError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("every grid cell is masked")]
    AllMasked,
    #[error("SNR range is empty")]
    EmptyRange,
    #[error("no valid coverage positions")]
    EmptyCoverage,
    #[error("orientation {0} is not part of the coverage study")]
    UnknownOrientation(OrientationAngles),
}

/// Layer values within this many dB of the cell maximum count as tied.
pub const BEST_TIE_DB: f64 = 1e-9;

/// Smallest contrast reported, so that a zero contrast stays finite in dB.
const MIN_LINEAR: f64 = f64::MIN_POSITIVE;

fn to_db(x: f64) -> f64 {
    linear_to_db(x.max(MIN_LINEAR))
}

/// Rectangular grid of tag positions at height `z_fixed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub step: f64,
    pub z_fixed: f64,
}

impl GridSpec {
    pub const DEFAULT_CELLS: usize = 40;

    /// 40 × 40 cells over a 6λ × 6λ window centered on the reader, at the
    /// tag template's height.
    pub fn default_for(scene: &Scene) -> Self {
        let lambda = scene.wavelength();
        let width = 6.0 * lambda;
        let step = width / Self::DEFAULT_CELLS as f64;
        let c = scene.reader.center;
        let x_min = c.x - width / 2.0 + step / 2.0;
        let y_min = c.y - width / 2.0 + step / 2.0;
        Self {
            x_min,
            x_max: x_min + (Self::DEFAULT_CELLS - 1) as f64 * step,
            y_min,
            y_max: y_min + (Self::DEFAULT_CELLS - 1) as f64 * step,
            step,
            z_fixed: scene.tag_template.center.z,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max, self.step, self.z_fixed]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(SweepError::InvalidGrid("non-finite value".into()));
        }
        if self.step <= 0.0 {
            return Err(SweepError::InvalidGrid(format!("step must be positive, got {}", self.step)));
        }
        if self.x_max < self.x_min || self.y_max < self.y_min {
            return Err(SweepError::InvalidGrid("empty extent".into()));
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step * (1.0 + 1e-12) + 1e-9).floor() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        Self::axis(self.x_min, self.x_max, self.step)
    }

    pub fn ys(&self) -> Vec<f64> {
        Self::axis(self.y_min, self.y_max, self.step)
    }

    /// Cell centers, row-major with x fastest.
    pub fn points(&self) -> Vec<Position3> {
        let xs = self.xs();
        self.ys()
            .into_iter()
            .flat_map(|y| xs.iter().map(move |&x| Position3::new(x, y, self.z_fixed)))
            .collect()
    }
}

/// Orientation-independent exclusion rule for a tag center: within half a
/// wavelength of the source or reader, close enough to a scatterer that the
/// wires could come within `λ/20`, or low enough to approach the ground
/// plane by less than `λ/20`.
pub fn position_masked(scene: &Scene, p: Position3) -> bool {
    let lambda = scene.wavelength();
    let clearance = lambda / 20.0;
    let half_tag = scene.tag_template.length / 2.0;
    if [&scene.source, &scene.reader]
        .iter()
        .any(|d| d.center.distance(p) <= lambda / 2.0)
    {
        return true;
    }
    if scene
        .scatterers
        .iter()
        .any(|s| s.center.distance(p) <= half_tag + s.length / 2.0 + clearance)
    {
        return true;
    }
    scene.ground.present && p.z - half_tag <= scene.ground.height_z + clearance
}

fn is_geometry_error(e: &MomError) -> bool {
    matches!(
        e,
        MomError::PoseRejected(_) | MomError::Overlap { .. } | MomError::GroundIntersection(_)
    )
}

/// Distinct physical axes of `orientations` and, for each input, the index
/// of its axis.
pub fn unique_axes(orientations: &[OrientationAngles]) -> (Vec<OrientationAngles>, Vec<usize>) {
    let mut unique: Vec<OrientationAngles> = Vec::new();
    let mut map = Vec::with_capacity(orientations.len());
    for o in orientations {
        match unique.iter().position(|u| u.same_axis(o, 1e-12)) {
            Some(i) => map.push(i),
            None => {
                map.push(unique.len());
                unique.push(*o);
            }
        }
    }
    (unique, map)
}

/// Evaluates all orientations at one position; `None` when the position is
/// infeasible for any of them.
fn evaluate_position(
    env: &EnvironmentSolver,
    p: Position3,
    axes: &[OrientationAngles],
) -> Result<Option<Vec<TagPowers>>, SweepError> {
    let mut out = Vec::with_capacity(axes.len());
    for r in env.tag_transfer_batch(p, axes) {
        match r {
            Ok(tp) => out.push(tp),
            Err(e) if is_geometry_error(&e) => return Ok(None),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Some(out))
}

/// Per-orientation contrast over a grid.
#[derive(Debug, Clone, Serialize)]
pub struct ContrastMap {
    pub grid: GridSpec,
    pub orientations: Vec<OrientationAngles>,
    pub budget: LinkBudget,
    /// `layers[k][cell]`: contrast in dB for orientation `k`; NaN where masked.
    pub layers: Vec<Vec<f64>>,
    /// `delta_p[k][cell]`: power contrast in watts for the solver's feed.
    pub delta_p: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
    pub any_fallback: bool,
}

impl ContrastMap {
    pub fn cells(&self) -> usize {
        self.mask.len()
    }
}

/// Link budget whose calibration maps the environment's transmit power to
/// `snr_tx_db`.
pub fn calibrated_budget(env: &EnvironmentSolver, p_noise_w: f64, snr_tx_db: f64) -> Result<LinkBudget, SweepError> {
    Ok(LinkBudget::calibrated(p_noise_w, snr_tx_db, env.transmit_power())?)
}

pub fn contrast_map(
    scene: &Scene,
    grid: &GridSpec,
    pols: &PolarizationSet,
    budget: &LinkBudget,
    opts: &SolverOptions,
) -> Result<ContrastMap, SweepError> {
    let env = EnvironmentSolver::new(scene, opts)?;
    contrast_map_with(&env, grid, pols, budget)
}

/// [`contrast_map`] over an already factorized environment.
pub fn contrast_map_with(
    env: &EnvironmentSolver,
    grid: &GridSpec,
    pols: &PolarizationSet,
    budget: &LinkBudget,
) -> Result<ContrastMap, SweepError> {
    grid.validate()?;
    let scene = env.scene();
    let (axes, map) = unique_axes(&pols.orientations);
    let points = grid.points();
    let per_cell: Vec<Option<Vec<TagPowers>>> = points
        .par_iter()
        .map(|&p| {
            if position_masked(scene, p) {
                Ok(None)
            } else {
                evaluate_position(env, p, &axes)
            }
        })
        .collect::<Result<_, SweepError>>()?;
    let n = points.len();
    let k = pols.orientations.len();
    let mut layers = vec![vec![f64::NAN; n]; k];
    let mut delta_p = vec![vec![f64::NAN; n]; k];
    let mut mask = vec![true; n];
    let mut any_fallback = false;
    for (c, cell) in per_cell.iter().enumerate() {
        if let Some(powers) = cell {
            mask[c] = false;
            for (layer, &u) in map.iter().enumerate() {
                let tp = powers[u];
                any_fallback |= tp.used_fallback;
                let dp = delta_power(tp.p_on, tp.p_off)?;
                delta_p[layer][c] = dp;
                layers[layer][c] = to_db(delta_snr(dp, budget));
            }
        }
    }
    if mask.iter().all(|&m| m) {
        return Err(SweepError::AllMasked);
    }
    Ok(ContrastMap {
        grid: *grid,
        orientations: pols.orientations.clone(),
        budget: *budget,
        layers,
        delta_p,
        mask,
        any_fallback,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BestPolarizationMap {
    /// Cellwise maximum over layers (dB); NaN where masked.
    pub best_delta_snr: Vec<f64>,
    /// Lowest layer index within [`BEST_TIE_DB`] of the maximum.
    pub best_orientation_index: Vec<usize>,
    pub mask: Vec<bool>,
}

pub fn best_polarization(map: &ContrastMap) -> BestPolarizationMap {
    let n = map.cells();
    let mut best = vec![f64::NAN; n];
    let mut index = vec![0usize; n];
    for c in 0..n {
        if map.mask[c] {
            continue;
        }
        let max = map.layers.iter().map(|l| l[c]).fold(f64::NEG_INFINITY, f64::max);
        best[c] = max;
        index[c] = map
            .layers
            .iter()
            .position(|l| l[c] >= max - BEST_TIE_DB)
            .expect("maximum is attained");
    }
    BestPolarizationMap {
        best_delta_snr: best,
        best_orientation_index: index,
        mask: map.mask.clone(),
    }
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

pub const MAP_CSV_HEADER: &str = "x_m,y_m,orientation_index,phi_deg,theta_deg,delta_snr_db,masked";

/// One layer as CSV.
pub fn layer_csv(map: &ContrastMap, layer: usize) -> String {
    let o = map.orientations[layer];
    let mut s = String::from(MAP_CSV_HEADER);
    s.push('\n');
    for (c, p) in map.grid.points().iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            p.x,
            p.y,
            layer,
            o.phi_deg,
            o.theta_deg,
            fmt_value(map.layers[layer][c]),
            u8::from(map.mask[c])
        );
    }
    s
}

/// Best-orientation map as CSV (same columns as a layer).
pub fn best_csv(map: &ContrastMap, best: &BestPolarizationMap) -> String {
    let mut s = String::from(MAP_CSV_HEADER);
    s.push('\n');
    for (c, p) in map.grid.points().iter().enumerate() {
        let k = best.best_orientation_index[c];
        let o = map.orientations[k];
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            p.x,
            p.y,
            k,
            o.phi_deg,
            o.theta_deg,
            fmt_value(best.best_delta_snr[c]),
            u8::from(best.mask[c])
        );
    }
    s
}

pub const CARPET_CSV_HEADER: &str =
    "x_m,y_m,orientation_index,phi_deg,theta_deg,axis_x,axis_y,axis_z,delta_snr_db,masked";

/// Best orientation per cell with its axis components; `axis_x, axis_y` is
/// the in-plane thread direction.
pub fn carpet_csv(map: &ContrastMap, best: &BestPolarizationMap) -> String {
    let mut s = String::from(CARPET_CSV_HEADER);
    s.push('\n');
    for (c, p) in map.grid.points().iter().enumerate() {
        let k = best.best_orientation_index[c];
        let o = map.orientations[k];
        let u = o.axis();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            p.x,
            p.y,
            k,
            o.phi_deg,
            o.theta_deg,
            u.x,
            u.y,
            u.z,
            fmt_value(best.best_delta_snr[c]),
            u8::from(best.mask[c])
        );
    }
    s
}

/// Tag positions on a square lattice of pitch `step` around the reader, at
/// the reader's height, strictly between `0.5λ` and `3λ` from it.
pub fn coverage_positions(reader: Position3, lambda: f64, step: f64) -> Vec<Position3> {
    assert!(step > 0.0, "coverage step must be positive");
    let (r_in, r_out) = (0.5 * lambda, 3.0 * lambda);
    let n = (r_out / step).ceil() as i64;
    let mut out = Vec::new();
    for b in -n..=n {
        for a in -n..=n {
            let p = Position3::new(reader.x + a as f64 * step, reader.y + b as f64 * step, reader.z);
            let d = p.distance(reader);
            if d > r_in && d < r_out {
                out.push(p);
            }
        }
    }
    out
}

/// Fewer coverage positions than this are flagged as too coarse.
pub const MIN_COVERAGE_POSITIONS: usize = 16;

/// Solver results at every coverage position for a fixed list of
/// orientations. Positions infeasible for any orientation are dropped, so
/// every tag type is evaluated on the same positions.
#[derive(Debug, Clone)]
pub struct CoverageStudy {
    pub positions: Vec<Position3>,
    pub orientations: Vec<OrientationAngles>,
    /// `delta_p[position][orientation]`, watts at the solver's feed.
    pub delta_p: Vec<Vec<f64>>,
    /// `p_off[position][orientation]`, watts at the solver's feed.
    pub p_off: Vec<Vec<f64>>,
    pub p_tx_ref: f64,
    pub p_noise_w: f64,
    pub candidate_positions: usize,
    pub sparse: bool,
    pub any_fallback: bool,
}

impl CoverageStudy {
    pub fn compute(
        env: &EnvironmentSolver,
        orientations: &[OrientationAngles],
        step: f64,
        p_noise_w: f64,
    ) -> Result<Self, SweepError> {
        let scene = env.scene();
        let (axes, map) = unique_axes(orientations);
        let candidates = coverage_positions(scene.reader.center, scene.wavelength(), step);
        let evaluated: Vec<Option<(Position3, Vec<TagPowers>)>> = candidates
            .par_iter()
            .map(|&p| {
                if position_masked(scene, p) {
                    return Ok(None);
                }
                Ok(evaluate_position(env, p, &axes)?.map(|v| (p, v)))
            })
            .collect::<Result<_, SweepError>>()?;
        let mut positions = Vec::new();
        let mut delta_p = Vec::new();
        let mut p_off = Vec::new();
        let mut any_fallback = false;
        for (p, powers) in evaluated.into_iter().flatten() {
            positions.push(p);
            let mut dp = Vec::with_capacity(map.len());
            let mut off = Vec::with_capacity(map.len());
            for &u in &map {
                any_fallback |= powers[u].used_fallback;
                dp.push(delta_power(powers[u].p_on, powers[u].p_off)?);
                off.push(powers[u].p_off);
            }
            delta_p.push(dp);
            p_off.push(off);
        }
        if positions.is_empty() {
            return Err(SweepError::EmptyCoverage);
        }
        Ok(Self {
            sparse: positions.len() < MIN_COVERAGE_POSITIONS,
            positions,
            orientations: orientations.to_vec(),
            delta_p,
            p_off,
            p_tx_ref: env.transmit_power(),
            p_noise_w,
            candidate_positions: candidates.len(),
            any_fallback,
        })
    }

    fn indices(&self, pols: &PolarizationSet) -> Result<Vec<usize>, SweepError> {
        pols.orientations
            .iter()
            .map(|o| {
                self.orientations
                    .iter()
                    .position(|x| x == o)
                    .ok_or(SweepError::UnknownOrientation(*o))
            })
            .collect()
    }

    pub fn budget(&self, snr_tx_db: f64) -> Result<LinkBudget, SweepError> {
        Ok(LinkBudget::calibrated(self.p_noise_w, snr_tx_db, self.p_tx_ref)?)
    }

    /// Best power contrast over the set's orientations at each position.
    pub fn best_delta_p(&self, pols: &PolarizationSet) -> Result<Vec<f64>, SweepError> {
        let idx = self.indices(pols)?;
        Ok(self
            .delta_p
            .iter()
            .map(|row| idx.iter().map(|&i| row[i]).fold(f64::NEG_INFINITY, f64::max))
            .collect())
    }

    /// Outage per SNR^Tx with best-orientation contrast at every position.
    pub fn outage_curve(
        &self,
        pols: &PolarizationSet,
        snr_tx_db: &[f64],
        threshold: &DetectionThreshold,
    ) -> Result<OutageCurve, SweepError> {
        if snr_tx_db.is_empty() {
            return Err(SweepError::EmptyRange);
        }
        let best = self.best_delta_p(pols)?;
        let mut outage = Vec::with_capacity(snr_tx_db.len());
        for &s in snr_tx_db {
            let b = self.budget(s)?;
            let db: Vec<f64> = best.iter().map(|&dp| to_db(delta_snr(dp, &b))).collect();
            outage.push(outage_probability(&db, threshold)?);
        }
        Ok(OutageCurve {
            tag_type: pols.name.clone(),
            snr_tx_db: snr_tx_db.to_vec(),
            outage,
        })
    }

    /// Mean OFF-state SNR over positions and the set's orientations.
    pub fn snr_captured_curve(&self, pols: &PolarizationSet, snr_tx_db: &[f64]) -> Result<CapturedCurve, SweepError> {
        if snr_tx_db.is_empty() {
            return Err(SweepError::EmptyRange);
        }
        let idx = self.indices(pols)?;
        let samples: Vec<f64> = self
            .p_off
            .iter()
            .flat_map(|row| idx.iter().map(move |&i| row[i]))
            .collect();
        let mut values = Vec::with_capacity(snr_tx_db.len());
        for &s in snr_tx_db {
            values.push(snr_captured(&samples, &self.budget(s)?)?);
        }
        Ok(CapturedCurve {
            tag_type: pols.name.clone(),
            snr_tx_db: snr_tx_db.to_vec(),
            snr_captured_db: values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutageCurve {
    pub tag_type: String,
    pub snr_tx_db: Vec<f64>,
    pub outage: Vec<f64>,
}

impl OutageCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("snr_tx_db,outage\n");
        for (x, y) in self.snr_tx_db.iter().zip(&self.outage) {
            let _ = writeln!(s, "{x},{y}");
        }
        s
    }

    pub fn is_non_increasing(&self) -> bool {
        self.outage.windows(2).all(|w| w[1] <= w[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapturedCurve {
    pub tag_type: String,
    pub snr_tx_db: Vec<f64>,
    pub snr_captured_db: Vec<f64>,
}

impl CapturedCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("snr_tx_db,snr_captured_db\n");
        for (x, y) in self.snr_tx_db.iter().zip(&self.snr_captured_db) {
            let _ = writeln!(s, "{x},{y}");
        }
        s
    }
}

/// Union of the orientations of several sets, first occurrence order.
pub fn orientation_union(sets: &[PolarizationSet]) -> Vec<OrientationAngles> {
    let mut out: Vec<OrientationAngles> = Vec::new();
    for s in sets {
        for o in &s.orientations {
            if !out.contains(o) {
                out.push(*o);
            }
        }
    }
    out
}

/// Builds the coverage study for one set and returns its outage curve.
pub fn outage_curve(
    scene: &Scene,
    pols: &PolarizationSet,
    snr_tx_db: &[f64],
    threshold: &DetectionThreshold,
    step: f64,
    p_noise_w: f64,
    opts: &SolverOptions,
) -> Result<OutageCurve, SweepError> {
    let env = EnvironmentSolver::new(scene, opts)?;
    CoverageStudy::compute(&env, &pols.orientations, step, p_noise_w)?.outage_curve(pols, snr_tx_db, threshold)
}

/// Builds the coverage study for one set and returns its captured-SNR curve.
pub fn snr_captured_curve(
    scene: &Scene,
    pols: &PolarizationSet,
    snr_tx_db: &[f64],
    step: f64,
    p_noise_w: f64,
    opts: &SolverOptions,
) -> Result<CapturedCurve, SweepError> {
    let env = EnvironmentSolver::new(scene, opts)?;
    CoverageStudy::compute(&env, &pols.orientations, step, p_noise_w)?.snr_captured_curve(pols, snr_tx_db)
}

/// `lo, lo + step, …, hi` (inclusive within rounding).
pub fn db_range(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, SweepError> {
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(SweepError::EmptyRange);
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{los_scene, polarization_set, PolarizationKind, SPEED_OF_LIGHT};

    #[test]
    fn coverage_annulus_is_open() {
        let lambda = SPEED_OF_LIGHT / 2.4e9;
        let r = Position3::new(0.0, 0.0, 0.3);
        // step λ/2 puts lattice points exactly on the inner radius
        let pts = coverage_positions(r, lambda, lambda / 2.0);
        assert!(pts.iter().all(|p| {
            let d = p.distance(r);
            d > 0.5 * lambda && d < 3.0 * lambda
        }));
        assert!(!pts.iter().any(|p| (p.distance(r) - 0.5 * lambda).abs() < 1e-12));
        assert!(coverage_positions(r, lambda, 7.0 * lambda).is_empty());
        let fine = coverage_positions(r, 0.125, 0.001);
        let area = std::f64::consts::PI * (0.375f64.powi(2) - 0.0625f64.powi(2));
        let expected = area / 1e-6;
        assert!((fine.len() as f64 - expected).abs() / expected < 0.01);
    }

    #[test]
    fn grid_points_and_default() {
        let g = GridSpec {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 0.5,
            step: 0.25,
            z_fixed: 0.3,
        };
        assert_eq!(g.xs().len(), 5);
        assert_eq!(g.points().len(), 15);
        let d = GridSpec::default_for(&los_scene(100.0));
        assert_eq!(d.xs().len(), 40);
        assert_eq!(d.ys().len(), 40);
        let bad = GridSpec { step: 0.0, ..g };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn best_polarization_tie_break() {
        let g = GridSpec {
            x_min: 0.0,
            x_max: 0.0,
            y_min: 0.0,
            y_max: 0.25,
            step: 0.25,
            z_fixed: 0.3,
        };
        let map = ContrastMap {
            grid: g,
            orientations: vec![OrientationAngles::deg(0.0, 0.0), OrientationAngles::deg(90.0, 0.0)],
            budget: LinkBudget::uncalibrated(1.0).unwrap(),
            layers: vec![vec![1.0, 2.0], vec![1.0, 3.0]],
            delta_p: vec![vec![0.0; 2]; 2],
            mask: vec![false, false],
            any_fallback: false,
        };
        let b = best_polarization(&map);
        assert_eq!(b.best_orientation_index, vec![0, 1]);
        assert_eq!(b.best_delta_snr, vec![1.0, 3.0]);
    }

    #[test]
    fn unique_axes_merges_equivalent_labels() {
        let ipr = polarization_set(PolarizationKind::Ipr);
        let (u, map) = unique_axes(&ipr.orientations);
        assert_eq!(map.len(), 81);
        assert_eq!(u.len(), 57);
        for (o, &i) in ipr.orientations.iter().zip(&map) {
            assert!(o.same_axis(&u[i], 1e-12));
        }
    }

    #[test]
    fn db_ranges() {
        assert_eq!(db_range(80.0, 130.0, 5.0).unwrap().len(), 11);
        assert!(db_range(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn masks_near_dipoles() {
        let s = los_scene(100.0);
        assert!(position_masked(&s, s.reader.center + Position3::new(0.05, 0.0, 0.0)));
        assert!(!position_masked(&s, Position3::new(50.0, 0.3, 0.3)));
    }
}
