//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;

use ambpol::analytic::{
    degree_grid, opssa_closed_form, opssa_exhaustive, orientation_match, AnalyticError, ProjectionModel,
};
use ambpol::mom::EnvironmentSolver;
use ambpol::scene::{preset_scene_seeded, OrientationAngles, PolarizationSet, Preset, Scene, DEFAULT_SEED};
use ambpol::sweep::{
    best_csv, best_polarization, calibrated_budget, carpet_csv, contrast_map_with, layer_csv, orientation_union,
    CoverageStudy, GridSpec, OutageCurve,
};

use crate::heatmap::{render_png, ColorScale};
use crate::manifest::{write_atomic, MetricSettings, OutputSet, SolverSettings};
use crate::parse::{
    load_pols, load_pols_list, parse_grid, parse_orientation, parse_range, parse_triple, MetricArgs, SceneArgs,
    SolverArgs,
};
use crate::selfcheck::{run_all, Tolerances};

/// What a command produced, for the exit status.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Invariant checks that failed.
    pub flags: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SceneGenArgs {
    /// Built-in scene: table1, table1-desk, los, chamber.
    #[arg(long)]
    pub preset: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Scene file to write.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn scene_gen(a: &SceneGenArgs) -> Result<Outcome> {
    let preset: Preset = a.preset.parse()?;
    let scene = preset_scene_seeded(preset, a.seed)?.scene;
    write_atomic(&a.out, scene.to_json().as_bytes())?;
    println!(
        "wrote {} ({} scatterers, ground {})",
        a.out.display(),
        scene.scatterers.len(),
        if scene.ground.present { "present" } else { "absent" }
    );
    Ok(Outcome::default())
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Tag orientation set: nr, nr-worst, 4pr, ipr or custom:<file>.
    #[arg(long, default_value = "4pr")]
    pub pols: String,
    /// Grid `x0:x1:y0:y1:step` in meters (default: 40 x 40 cells over 6λ
    /// around the reader).
    #[arg(long)]
    pub grid: Option<String>,
    /// Transmit SNR in dB (single value).
    #[arg(long, default_value = "110")]
    pub snr_tx: String,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub metrics: MetricArgs,
    /// Heatmap color scale `lo:hi:step` in dB.
    #[arg(long, default_value = "-10:40:5")]
    pub color_range: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn map(a: &MapArgs) -> Result<Outcome> {
    let loaded = a.scene.load()?;
    let scene = &loaded.scene;
    let pols = load_pols(&a.pols)?;
    let grid = match &a.grid {
        Some(g) => parse_grid(g, scene.tag_template.center.z)?,
        None => GridSpec::default_for(scene),
    };
    let snr = match parse_range(&a.snr_tx)?.as_slice() {
        [v] => *v,
        _ => bail!("map takes a single --snr-tx value"),
    };
    let (lo, hi, step) = parse_triple(&a.color_range)?;
    let scale = ColorScale { lo, hi, step };
    let opts = a.solver.options()?;
    let metrics = MetricSettings::new(&a.metrics)?;

    let mut out = OutputSet::create(&a.out, "map")?;
    let env = EnvironmentSolver::new(scene, &opts)?;
    let budget = calibrated_budget(&env, a.metrics.p_noise, snr)?;
    let cmap = contrast_map_with(&env, &grid, &pols, &budget)?;
    let best = best_polarization(&cmap);

    out.write_scene(&loaded.text, loaded.seed)?;
    let (nx, ny) = (grid.xs().len(), grid.ys().len());
    for k in 0..cmap.orientations.len() {
        out.write(&format!("layer_{k:02}.csv"), layer_csv(&cmap, k).as_bytes())?;
        out.write(&format!("layer_{k:02}.png"), &render_png(&cmap.layers[k], nx, ny, &scale)?)?;
    }
    out.write("best.csv", best_csv(&cmap, &best).as_bytes())?;
    out.write("carpet.csv", carpet_csv(&cmap, &best).as_bytes())?;
    out.write("best.png", &render_png(&best.best_delta_snr, nx, ny, &scale)?)?;

    let unmasked: Vec<f64> = best
        .best_delta_snr
        .iter()
        .zip(&best.mask)
        .filter(|(_, m)| !**m)
        .map(|(v, _)| *v)
        .collect();
    let covered = unmasked.iter().filter(|&&v| v >= a.metrics.threshold_db).count();
    let mut flags = Vec::new();
    if unmasked.iter().any(|v| !v.is_finite()) {
        flags.push("non-finite contrast in an unmasked cell".to_string());
    }
    println!(
        "{}: {} x {} cells, {} unmasked, {} at or above {} dB",
        pols.name,
        nx,
        ny,
        unmasked.len(),
        covered,
        a.metrics.threshold_db
    );

    let m = &mut out.manifest;
    m.solver = Some(SolverSettings::new(&opts, scene));
    m.metrics = Some(metrics);
    m.parameters = json!({
        "polarization_set": pols,
        "grid": grid,
        "snr_tx_db": snr,
        "calibration": budget.calibration,
        "p_tx_ref_w": env.transmit_power(),
        "environment_condition_estimate": env.condition_estimate(),
        "color_scale_db": [lo, hi, step],
        "cells": nx * ny,
        "unmasked_cells": unmasked.len(),
        "cells_meeting_threshold": covered,
    });
    if cmap.any_fallback {
        m.notes.push("rank-one update fell back to a full solve for some cells".into());
    }
    m.flags = flags.clone();
    out.finish()?;
    Ok(Outcome { flags })
}

#[derive(Debug, Args)]
pub struct OutageArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Comma-separated tag types (nr, nr-worst, 4pr, ipr, custom:<file>).
    #[arg(long, default_value = "nr,4pr,ipr")]
    pub pols: String,
    /// Transmit SNR sweep `lo:hi:step` in dB.
    #[arg(long, default_value = "80:130:5")]
    pub snr_tx: String,
    /// Coverage lattice pitch, meters.
    #[arg(long, default_value_t = 0.005)]
    pub step: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub metrics: MetricArgs,
    #[arg(long)]
    pub out: PathBuf,
}

fn is_subset(a: &PolarizationSet, b: &PolarizationSet) -> bool {
    a.orientations.iter().all(|o| b.orientations.contains(o))
}

/// Failed checks: monotonicity of each curve and dominance of every
/// superset's curve over its subsets'.
pub fn curve_flags(sets: &[PolarizationSet], curves: &[OutageCurve]) -> Vec<String> {
    let mut flags = Vec::new();
    for c in curves {
        if !c.is_non_increasing() {
            flags.push(format!("outage curve '{}' increases with SNR^Tx", c.tag_type));
        }
    }
    for (i, a) in sets.iter().enumerate() {
        for (j, b) in sets.iter().enumerate() {
            if i != j && is_subset(a, b) {
                let bad = curves[j].outage.iter().zip(&curves[i].outage).any(|(ob, oa)| ob > oa);
                if bad {
                    flags.push(format!("'{}' has higher outage than its subset '{}'", b.name, a.name));
                }
            }
        }
    }
    flags
}

pub fn outage(a: &OutageArgs) -> Result<Outcome> {
    let loaded = a.scene.load()?;
    let scene = &loaded.scene;
    let sets = load_pols_list(&a.pols)?;
    let snr = parse_range(&a.snr_tx)?;
    if !(a.step.is_finite() && a.step > 0.0) {
        bail!("--step must be positive, got {}", a.step);
    }
    let threshold = a.metrics.threshold()?;
    let opts = a.solver.options()?;
    let metrics = MetricSettings::new(&a.metrics)?;

    let mut out = OutputSet::create(&a.out, "outage")?;
    let env = EnvironmentSolver::new(scene, &opts)?;
    let union = orientation_union(&sets);
    let study = CoverageStudy::compute(&env, &union, a.step, a.metrics.p_noise)?;
    out.write_scene(&loaded.text, loaded.seed)?;
    let mut curves = Vec::with_capacity(sets.len());
    let mut captured = Vec::with_capacity(sets.len());
    for s in &sets {
        let c = study.outage_curve(s, &snr, &threshold)?;
        let k = study.snr_captured_curve(s, &snr)?;
        out.write(&format!("outage_{}.csv", s.name), c.to_csv().as_bytes())?;
        out.write(&format!("captured_{}.csv", s.name), k.to_csv().as_bytes())?;
        curves.push(c);
        captured.push(k);
    }
    let flags = curve_flags(&sets, &curves);

    let mut table = String::from("snr_tx_db");
    for s in &sets {
        let _ = write!(table, "  {:>10}", s.name);
    }
    for (i, x) in snr.iter().enumerate() {
        let _ = write!(table, "\n{x:>9}");
        for c in &curves {
            let _ = write!(table, "  {:>10.4}", c.outage[i]);
        }
    }
    println!(
        "{} coverage positions ({} candidates)\n{table}",
        study.positions.len(),
        study.candidate_positions
    );
    for f in &flags {
        eprintln!("flag: {f}");
    }

    let m = &mut out.manifest;
    m.solver = Some(SolverSettings::new(&opts, scene));
    m.metrics = Some(metrics);
    m.parameters = json!({
        "polarization_sets": sets,
        "snr_tx_db": snr,
        "coverage_step_m": a.step,
        "coverage_positions": study.positions.len(),
        "candidate_positions": study.candidate_positions,
        "p_tx_ref_w": study.p_tx_ref,
        "environment_condition_estimate": env.condition_estimate(),
    });
    if study.sparse {
        m.notes.push(format!(
            "only {} coverage positions; consider a finer --step",
            study.positions.len()
        ));
    }
    if study.any_fallback {
        m.notes.push("rank-one update fell back to a full solve for some positions".into());
    }
    m.flags = flags.clone();
    out.finish()?;
    Ok(Outcome { flags })
}

#[derive(Debug, Args)]
pub struct OpssaArgs {
    /// Source orientation `phi,theta` in degrees.
    #[arg(long, default_value = "0,0")]
    pub source: String,
    /// Reader orientation `phi,theta` in degrees.
    #[arg(long, conflicts_with = "sweep_step", required_unless_present = "sweep_step")]
    pub reader: Option<String>,
    /// Sweep reader φ and θ over [0, 90] with this step, degrees.
    #[arg(long)]
    pub sweep_step: Option<f64>,
    /// Step of the exhaustive tag grid, degrees.
    #[arg(long, default_value_t = 1.0)]
    pub tag_step: f64,
    /// Require the closed-form optimum (fails for a non-vertical source).
    #[arg(long)]
    pub closed_form: bool,
    /// Directory for opssa.csv and the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const OPSSA_CSV_HEADER: &str = "phi_r_deg,theta_r_deg,closed_phi_deg,closed_theta_deg,branch,tie,closed_objective,exhaustive_phi_deg,exhaustive_theta_deg,exhaustive_objective,match";

pub fn opssa(a: &OpssaArgs) -> Result<Outcome> {
    let source = parse_orientation(&a.source)?;
    if !(a.tag_step > 0.0 && a.tag_step <= 90.0) {
        bail!("--tag-step must lie in (0, 90], got {}", a.tag_step);
    }
    let readers: Vec<OrientationAngles> = match (&a.reader, a.sweep_step) {
        (Some(r), _) => vec![parse_orientation(r)?],
        (None, Some(step)) => {
            if !(step > 0.0) {
                bail!("--sweep-step must be positive");
            }
            let g = degree_grid(0.0, 90.0, step);
            g.iter()
                .flat_map(|&p| g.iter().map(move |&t| OrientationAngles::deg(p, t)))
                .collect()
        }
        (None, None) => bail!("one of --reader or --sweep-step is required"),
    };
    let vertical = source.phi_deg == 0.0;
    if a.closed_form && !vertical {
        return Err(AnalyticError::NonVerticalSource(source.phi_deg)).context("--closed-form");
    }
    // the half-open ranges [0, 180) cover every axis once up to sign
    let tag_grid = degree_grid(0.0, 180.0 - a.tag_step * 1e-6, a.tag_step);
    let mut csv = String::from(OPSSA_CSV_HEADER);
    csv.push('\n');
    let mut flags = Vec::new();
    for r in &readers {
        let model = ProjectionModel::new(source, *r);
        let ex = opssa_exhaustive(&model, &tag_grid, &tag_grid)?;
        let _ = write!(csv, "{},{},", r.phi_deg, r.theta_deg);
        if vertical {
            let cf = opssa_closed_form(source, *r)?;
            let m = orientation_match(cf.orientation, ex.orientation);
            let branch = serde_json::to_value(cf.branch)?;
            let _ = write!(
                csv,
                "{},{},{},{},{},",
                cf.orientation.phi_deg,
                cf.orientation.theta_deg,
                branch.as_str().unwrap_or_default(),
                cf.tie,
                cf.objective
            );
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                ex.orientation.phi_deg, ex.orientation.theta_deg, ex.objective, m
            );
            if ex.objective > cf.objective + 1e-12 {
                flags.push(format!("grid search beats the closed form at reader {r}"));
            }
        } else {
            let _ = writeln!(
                csv,
                ",,,,,{},{},{},",
                ex.orientation.phi_deg, ex.orientation.theta_deg, ex.objective
            );
        }
    }
    print!("{csv}");
    if let Some(dir) = &a.out {
        let mut out = OutputSet::create(dir, "opssa")?;
        out.write("opssa.csv", csv.as_bytes())?;
        out.manifest.parameters = json!({
            "source": source,
            "readers": readers.len(),
            "tag_step_deg": a.tag_step,
            "closed_form_required": a.closed_form,
        });
        out.manifest.flags = flags.clone();
        out.finish()?;
    }
    for f in &flags {
        eprintln!("flag: {f}");
    }
    Ok(Outcome { flags })
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    /// Tolerance overrides (JSON object; missing keys keep defaults).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also run the scene-dependent checks on this scene file.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Directory for selfcheck.json and the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn selfcheck(a: &SelfcheckArgs) -> Result<Outcome> {
    let tol = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Tolerances::from_json(&text).with_context(|| format!("{}", p.display()))?
        }
        None => Tolerances::default(),
    };
    let scene = match &a.scene {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(Scene::from_json(&text).with_context(|| format!("scene file {}", p.display()))?)
        }
        None => None,
    };
    for (name, v, d) in tol.overrides() {
        println!("config  {name} = {v:e} (default {d:e})");
    }
    let results = run_all(&tol, scene.as_ref())?;
    let mut flags = Vec::new();
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status}  {:<28} {:.3e}  (< {:.1e})", r.name, r.value, r.tolerance);
        if !r.passed {
            flags.push(r.name.clone());
        }
    }
    if let Some(dir) = &a.out {
        let mut out = OutputSet::create(dir, "selfcheck")?;
        let mut text = serde_json::to_string_pretty(&results)?;
        text.push('\n');
        out.write("selfcheck.json", text.as_bytes())?;
        out.manifest.parameters = json!({ "tolerances": tol });
        out.manifest.flags = flags.clone();
        out.finish()?;
    }
    Ok(Outcome { flags })
}
