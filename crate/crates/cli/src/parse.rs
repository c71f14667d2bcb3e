//! Flag value parsers and scene/polarization loading shared by subcommands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;

use ambpol::metrics::{DetectionThreshold, DEFAULT_BER_TARGET, DEFAULT_THRESHOLD_DB};
use ambpol::mom::{SolverOptions, DEFAULT_SEGMENTS_PER_HALFWAVE, DEFAULT_Z_OPEN};
use ambpol::scene::{
    polarization_set, preset_scene_seeded, OrientationAngles, PolarizationKind, PolarizationSet, Preset, Scene,
    DEFAULT_SEED,
};
use ambpol::sweep::{db_range, GridSpec};
use num_complex::Complex64;

/// `lo:hi:step`, or a single value.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| -> Result<f64> { p.trim().parse::<f64>().with_context(|| format!("bad number '{p}' in '{s}'")) };
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [lo, hi, step] => Ok(db_range(num(lo)?, num(hi)?, num(step)?).with_context(|| format!("range '{s}'"))?),
        _ => bail!("expected lo:hi:step or a single value, got '{s}'"),
    }
}

/// `lo:hi:step` with exactly three fields.
pub fn parse_triple(s: &str) -> Result<(f64, f64, f64)> {
    let v: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad number '{p}' in '{s}'")))
        .collect::<Result<_>>()?;
    match v.as_slice() {
        [lo, hi, step] if step > &0.0 && hi > lo => Ok((*lo, *hi, *step)),
        [_, _, _] => bail!("'{s}' needs hi > lo and step > 0"),
        _ => bail!("expected lo:hi:step, got '{s}'"),
    }
}

/// `x0:x1:y0:y1:step` at height `z`.
pub fn parse_grid(s: &str, z: f64) -> Result<GridSpec> {
    let v: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad number '{p}' in grid '{s}'")))
        .collect::<Result<_>>()?;
    let [x_min, x_max, y_min, y_max, step] = v.as_slice() else {
        bail!("expected x0:x1:y0:y1:step, got '{s}'");
    };
    let g = GridSpec {
        x_min: *x_min,
        x_max: *x_max,
        y_min: *y_min,
        y_max: *y_max,
        step: *step,
        z_fixed: z,
    };
    g.validate()?;
    Ok(g)
}

/// `phi,theta` in degrees.
pub fn parse_orientation(s: &str) -> Result<OrientationAngles> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad angle '{p}' in '{s}'")))
        .collect::<Result<_>>()?;
    let [phi, theta] = v.as_slice() else {
        bail!("expected phi,theta in degrees, got '{s}'");
    };
    Ok(OrientationAngles::new(*phi, *theta)?)
}

/// One set: a built-in name or `custom:<file>`.
pub fn load_pols(spec: &str) -> Result<PolarizationSet> {
    if let Some(path) = spec.strip_prefix("custom:") {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
        let name = Path::new(path)
            .file_stem()
            .map_or("custom".to_string(), |s| s.to_string_lossy().into_owned());
        return PolarizationSet::custom_from_json(&name, &text).with_context(|| format!("polarization file {path}"));
    }
    let kind: PolarizationKind = spec.parse()?;
    Ok(polarization_set(kind))
}

/// Comma-separated list of sets.
pub fn load_pols_list(spec: &str) -> Result<Vec<PolarizationSet>> {
    let sets: Vec<PolarizationSet> = spec.split(',').map(|s| load_pols(s.trim())).collect::<Result<_>>()?;
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            if sets[i].name == sets[j].name {
                bail!("polarization set '{}' listed twice", sets[i].name);
            }
        }
    }
    Ok(sets)
}

#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    /// Scene file (JSON).
    #[arg(long, conflicts_with = "preset")]
    pub scene: Option<PathBuf>,
    /// Built-in scene: table1, table1-desk, los, chamber.
    #[arg(long)]
    pub preset: Option<String>,
    /// Seed for preset scatterer placement.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub struct LoadedScene {
    pub scene: Scene,
    /// Canonical JSON text of the scene; hashed into the manifest.
    pub text: String,
    pub seed: Option<u64>,
}

impl SceneArgs {
    pub fn load(&self) -> Result<LoadedScene> {
        match (&self.scene, &self.preset) {
            (Some(path), _) => {
                if self.seed.is_some() {
                    bail!("--seed only applies to --preset");
                }
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let scene = Scene::from_json(&text).with_context(|| format!("scene file {}", path.display()))?;
                Ok(LoadedScene {
                    seed: scene.rng_seed,
                    text: scene.to_json(),
                    scene,
                })
            }
            (None, Some(name)) => {
                let preset: Preset = name.parse()?;
                let seed = self.seed.unwrap_or(DEFAULT_SEED);
                let scene = preset_scene_seeded(preset, seed)?.scene;
                Ok(LoadedScene {
                    seed: Some(seed),
                    text: scene.to_json(),
                    scene,
                })
            }
            (None, None) => bail!("one of --scene or --preset is required"),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Segments per half wavelength (odd, at least 5).
    #[arg(long, default_value_t = DEFAULT_SEGMENTS_PER_HALFWAVE)]
    pub segments: usize,
    /// Open-circuit load of the tag's OFF state, ohms.
    #[arg(long, default_value_t = DEFAULT_Z_OPEN)]
    pub z_open: f64,
}

impl SolverArgs {
    pub fn options(&self) -> Result<SolverOptions> {
        if !(self.z_open.is_finite() && self.z_open > 0.0) {
            bail!("--z-open must be positive, got {}", self.z_open);
        }
        Ok(SolverOptions {
            segments_per_halfwave: self.segments,
            z_open: Complex64::new(self.z_open, 0.0),
            ..SolverOptions::default()
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct MetricArgs {
    /// Receiver noise power, watts.
    #[arg(long, default_value_t = 1.0)]
    pub p_noise: f64,
    /// Contrast target, dB.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_DB)]
    pub threshold_db: f64,
    /// Bit error rate target (recorded with the threshold it implies).
    #[arg(long, default_value_t = DEFAULT_BER_TARGET)]
    pub ber_target: f64,
}

impl MetricArgs {
    pub fn threshold(&self) -> Result<DetectionThreshold> {
        if !(self.p_noise.is_finite() && self.p_noise > 0.0) {
            bail!("--p-noise must be positive, got {}", self.p_noise);
        }
        Ok(DetectionThreshold::new(self.threshold_db, self.ber_target)?)
    }
}
