//! Solver and metric invariants, each measured against an independent
//! reference computation.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use ambpol::metrics::ber_from_delta_snr;
use ambpol::mom::{
    fill_impedance_matrix, impedance_matrix, load_power, mesh_scene, scene_wires, tag_transfer, EnvironmentSolver,
    MeshedScene, SolverOptions, TagPowers, WireKind,
};
use ambpol::scene::{
    los_scene, preset_scene, GroundPlaneSpec, OrientationAngles, Position3, Preset, ScattererSpec, Scene,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub symmetry: f64,
    pub reciprocity: f64,
    pub rank_one: f64,
    pub image: f64,
    pub schur: f64,
    pub refinement: f64,
    pub ber_at_1645: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            symmetry: 1e-10,
            reciprocity: 1e-8,
            rank_one: 1e-8,
            image: 1e-6,
            schur: 1e-8,
            refinement: 0.05,
            ber_at_1645: 5e-4,
        }
    }
}

impl Tolerances {
    fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("symmetry", self.symmetry),
            ("reciprocity", self.reciprocity),
            ("rank_one", self.rank_one),
            ("image", self.image),
            ("schur", self.schur),
            ("refinement", self.refinement),
            ("ber_at_1645", self.ber_at_1645),
        ]
    }

    /// Parses a JSON tolerance file; missing keys keep their defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text).context("tolerance config")?;
        for (name, v) in t.entries() {
            if !(v.is_finite() && v > 0.0) {
                bail!("tolerance config: {name} must be positive, got {v}");
            }
        }
        Ok(t)
    }

    /// `(name, configured, default)` for every tolerance that differs from
    /// its default.
    pub fn overrides(&self) -> Vec<(&'static str, f64, f64)> {
        let d = Self::default().entries();
        self.entries()
            .iter()
            .zip(d)
            .filter(|(a, b)| a.1 != b.1)
            .map(|(a, b)| (a.0, a.1, b.1))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value < tolerance,
        }
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn rel_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Largest `|Z_mn − Z_nm| / |Z_mn|` of the scene's impedance matrix.
pub fn symmetry(scene: &Scene, sph: usize) -> Result<f64> {
    let mesh = mesh_scene(scene, sph)?;
    Ok(impedance_matrix(&mesh).max_relative_asymmetry())
}

/// Relative difference of the source→reader and reader→source transfer
/// currents with 50 Ω on both ports.
pub fn reciprocity(scene: &Scene, sph: usize) -> Result<f64> {
    let mesh = mesh_scene(scene, sph)?;
    let (s, r) = (mesh.source_port.context("source")?, mesh.reader_port.context("reader")?);
    let mut loads = mesh.load_table.clone();
    loads.insert(s, c(50.0));
    loads.insert(r, c(50.0));
    let ctx = fill_impedance_matrix(&mesh).apply_loads(&loads)?;
    let forward = ctx.excite_and_solve(s, c(1.0))?.currents[r];
    let backward = ctx.excite_and_solve(r, c(1.0))?.currents[s];
    Ok((forward - backward).norm() / forward.norm())
}

/// Relative error of the OFF-state currents from a rank-one update of the ON
/// solution against a fresh factorization of the OFF system.
pub fn rank_one(scene: &Scene, opts: &SolverOptions) -> Result<f64> {
    let mesh = mesh_scene(scene, opts.segments_per_halfwave)?;
    let (s, t) = (mesh.source_port.context("source")?, mesh.tag_port.context("tag")?);
    let base = fill_impedance_matrix(&mesh);
    let mut on_loads = mesh.load_table.clone();
    *on_loads.entry(t).or_default() += opts.z_on;
    let on_ctx = base.apply_loads(&on_loads)?;
    let on = on_ctx.excite_and_solve(s, opts.v_source)?;
    let off = on_ctx.switch_tag_state(t, opts.z_open - opts.z_on, &on)?;
    let mut off_loads = mesh.load_table.clone();
    *off_loads.entry(t).or_default() += opts.z_open;
    let full = base.apply_loads(&off_loads)?.excite_and_solve(s, opts.v_source)?;
    Ok(rel_norm(&off.currents, &full.currents))
}

/// Desk-scale scene with random orientations, optional ground and up to
/// three scatterers.
pub fn random_desk_scene(rng: &mut ChaCha8Rng) -> Scene {
    let angle = |rng: &mut ChaCha8Rng| OrientationAngles::deg(rng.random_range(0.0..180.0), rng.random_range(0.0..180.0));
    let z0 = 0.3;
    let mut scene = los_scene(rng.random_range(1.5..4.0));
    let lambda = scene.wavelength();
    scene.source.orientation = angle(rng);
    scene.reader.orientation = angle(rng);
    scene.tag_template.orientation = angle(rng);
    scene.tag_template.center = Position3::new(
        scene.reader.center.x * rng.random_range(0.3..0.7),
        rng.random_range(-0.5..0.5),
        z0 + rng.random_range(-0.1..0.1),
    );
    if rng.random_bool(0.5) {
        scene.ground = GroundPlaneSpec::at(0.0);
    }
    for _ in 0..rng.random_range(0..4) {
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        scene.scatterers.push(ScattererSpec {
            center: Position3::new(
                rng.random_range(-1.0..5.0),
                side * rng.random_range(1.0..2.0),
                z0 + rng.random_range(-0.05..0.05),
            ),
            orientation: angle(rng),
            length: lambda / 2.0,
            wire_radius: lambda / 1000.0,
        });
    }
    scene
}

/// `count` valid random desk scenes from `seed`.
pub fn random_desk_scenes(seed: u64, count: usize, sph: usize) -> Vec<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let s = random_desk_scene(&mut rng);
        if mesh_scene(&s, sph).is_ok() {
            out.push(s);
        }
    }
    out
}

/// Relative difference between the reader power with the ground folded in
/// as images and with the mirror wires meshed explicitly in free space.
pub fn image_equivalence(scene: &Scene, sph: usize) -> Result<f64> {
    if !scene.ground.present {
        bail!("image check needs a ground plane");
    }
    let mesh = mesh_scene(scene, sph)?;
    let (s, r) = (mesh.source_port.context("source")?, mesh.reader_port.context("reader")?);
    let ctx = fill_impedance_matrix(&mesh).apply_loads(&mesh.load_table)?;
    let sol = ctx.excite_and_solve(s, c(1.0))?;
    let folded = ctx.port_reading(&sol, r)?.power_w;

    let h = scene.ground.height_z;
    let real = scene_wires(scene, true, sph);
    let mut wires = real.clone();
    for (i, (_, g)) in real.iter().enumerate() {
        wires.push((WireKind::Extra(i), g.mirrored(h)));
    }
    let explicit = MeshedScene::from_wires(scene.frequency_hz, sph, wires, None)?;
    let n = mesh.n_real;
    let mut loads = BTreeMap::new();
    for (&k, &z) in &mesh.load_table {
        loads.insert(k, z);
        loads.insert(k + n, z);
    }
    let ectx = fill_impedance_matrix(&explicit).apply_loads(&loads)?;
    // image currents are the negated currents of the mirrored geometry
    let mut v = vec![c(0.0); 2 * n];
    v[s] = c(1.0);
    v[s + n] = c(-1.0);
    let currents = ectx.solve_rhs(&v)?;
    let mirrored = load_power(currents[r], scene.reader.load);
    Ok(rel(folded, mirrored))
}

fn max_power_error(a: &TagPowers, b: &TagPowers) -> f64 {
    rel(a.p_on, b.p_on).max(rel(a.p_off, b.p_off))
}

/// Largest relative power difference between the environment-reuse path and
/// a full solve, over the given poses.
pub fn schur_vs_full(scene: &Scene, opts: &SolverOptions, poses: &[(Position3, OrientationAngles)]) -> Result<f64> {
    let env = EnvironmentSolver::new(scene, opts)?;
    let mut worst = 0.0f64;
    for &(p, o) in poses {
        let fast = env.tag_transfer(p, o)?;
        let full = tag_transfer(scene, p, o, opts)?;
        worst = worst.max(max_power_error(&fast, &full));
    }
    Ok(worst)
}

/// Relative change of `P_on` and of `|P_on − P_off|` between 11 and 21
/// segments per half wavelength (the larger of the two).
pub fn refinement_drift(scene: &Scene, pose: (Position3, OrientationAngles)) -> Result<f64> {
    let coarse = tag_transfer(scene, pose.0, pose.1, &SolverOptions::with_segments(11))?;
    let fine = tag_transfer(scene, pose.0, pose.1, &SolverOptions::with_segments(21))?;
    let dp = |t: &TagPowers| (t.p_on - t.p_off).abs();
    Ok(rel(coarse.p_on, fine.p_on).max(rel(dp(&coarse), dp(&fine))))
}

fn small_ground_scene() -> Scene {
    let mut s = los_scene(3.0);
    s.ground = GroundPlaneSpec::at(0.0);
    s.source.orientation = OrientationAngles::deg(30.0, 20.0);
    s.reader.orientation = OrientationAngles::deg(60.0, 100.0);
    s
}

/// Runs every check on built-in scenes, plus the scene-dependent checks on
/// `extra` when given.
pub fn run_all(tol: &Tolerances, extra: Option<&Scene>) -> Result<Vec<CheckResult>> {
    let opts = SolverOptions::default();
    let sph = opts.segments_per_halfwave;
    let los = preset_scene(Preset::LosCrossPol)?.scene;
    let desk = preset_scene(Preset::Table1Desk)?.scene;
    let short = los_scene(3.0);
    let mut out = vec![
        CheckResult::new("symmetry/los", symmetry(&los, sph)?, tol.symmetry),
        CheckResult::new("symmetry/table1-desk", symmetry(&desk, sph)?, tol.symmetry),
        CheckResult::new("reciprocity/table1-desk", reciprocity(&desk, sph)?, tol.reciprocity),
        CheckResult::new("rank-one/los", rank_one(&los, &opts)?, tol.rank_one),
        CheckResult::new("rank-one/table1-desk", rank_one(&desk, &opts)?, tol.rank_one),
    ];
    let mut worst = 0.0f64;
    for s in random_desk_scenes(11, 10, sph) {
        worst = worst.max(rank_one(&s, &opts)?);
    }
    out.push(CheckResult::new("rank-one/random-desk-x10", worst, tol.rank_one));
    out.push(CheckResult::new(
        "image/short-line",
        image_equivalence(&small_ground_scene(), sph)?,
        tol.image,
    ));
    let poses = [
        (Position3::new(1.5, 0.3, 0.3), OrientationAngles::deg(45.0, 90.0)),
        (Position3::new(2.0, 0.5, 0.35), OrientationAngles::deg(112.5, 45.0)),
    ];
    out.push(CheckResult::new(
        "schur/short-line",
        schur_vs_full(&short, &opts, &poses)?,
        tol.schur,
    ));
    out.push(CheckResult::new(
        "refinement/los",
        refinement_drift(&los, (Position3::new(50.0, 0.3, 0.3), OrientationAngles::deg(45.0, 90.0)))?,
        tol.refinement,
    ));
    out.push(CheckResult::new("ber/zero", (ber_from_delta_snr(0.0) - 0.5).abs(), f64::MIN_POSITIVE));
    out.push(CheckResult::new(
        "ber/1.645",
        (ber_from_delta_snr(1.645) - 1e-2).abs(),
        tol.ber_at_1645,
    ));
    if let Some(s) = extra {
        out.push(CheckResult::new("symmetry/scene", symmetry(s, sph)?, tol.symmetry));
        out.push(CheckResult::new("reciprocity/scene", reciprocity(s, sph)?, tol.reciprocity));
        out.push(CheckResult::new("rank-one/scene", rank_one(s, &opts)?, tol.rank_one));
        if s.ground.present {
            out.push(CheckResult::new("image/scene", image_equivalence(s, sph)?, tol.image));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_overrides_are_listed() {
        let t = Tolerances::from_json(r#"{"rank_one": 1e-6}"#).unwrap();
        assert_eq!(t.overrides(), vec![("rank_one", 1e-6, 1e-8)]);
        assert!(Tolerances::default().overrides().is_empty());
        assert!(Tolerances::from_json(r#"{"rank_one": -1}"#).is_err());
        assert!(Tolerances::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn ber_zero_check_is_exact() {
        let r = CheckResult::new("ber/zero", (ber_from_delta_snr(0.0) - 0.5).abs(), f64::MIN_POSITIVE);
        assert!(r.passed);
    }
}
