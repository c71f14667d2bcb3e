//! Output directories, atomic writes and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use ambpol::mom::SolverOptions;
use ambpol::scene::Scene;

use crate::parse::MetricArgs;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().context("output path has no file name")?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| -> Result<()> {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSettings {
    pub segments_per_halfwave: usize,
    pub dipole_radius_m: f64,
    pub tag_radius_m: f64,
    pub z_open_ohm: f64,
    pub z_on_ohm: f64,
    pub v_source_v: f64,
}

impl SolverSettings {
    pub fn new(opts: &SolverOptions, scene: &Scene) -> Self {
        Self {
            segments_per_halfwave: opts.segments_per_halfwave,
            dipole_radius_m: scene.source.wire_radius,
            tag_radius_m: scene.tag_template.wire_radius,
            z_open_ohm: opts.z_open.re,
            z_on_ohm: opts.z_on.re,
            v_source_v: opts.v_source.re,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricSettings {
    pub p_noise_w: f64,
    pub threshold_db: f64,
    pub ber_target: f64,
    /// Contrast at which the BER formula reaches `ber_target`.
    pub ber_implied_threshold_db: f64,
}

impl MetricSettings {
    pub fn new(m: &MetricArgs) -> Result<Self> {
        let t = m.threshold()?;
        Ok(Self {
            p_noise_w: m.p_noise,
            threshold_db: t.delta_snr_target_db,
            ber_target: t.ber_target,
            ber_implied_threshold_db: t.ber_implied_target_db(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub command_line: Vec<String>,
    pub scene_sha256: Option<String>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub solver: Option<SolverSettings>,
    pub metrics: Option<MetricSettings>,
    pub parameters: serde_json::Value,
    pub outputs: Vec<String>,
    /// Invariant checks that failed; empty on a clean run.
    pub flags: Vec<String>,
    /// Non-fatal observations (sparse sampling, solver fallbacks).
    pub notes: Vec<String>,
    pub duration_s: f64,
}

/// Collects the files of one run and finishes with its manifest.
pub struct OutputSet {
    dir: PathBuf,
    started: Instant,
    pub manifest: RunManifest,
}

impl OutputSet {
    pub fn create(dir: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            started: Instant::now(),
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                command_line: std::env::args().collect(),
                scene_sha256: None,
                seed: None,
                threads: rayon::current_num_threads(),
                solver: None,
                metrics: None,
                parameters: serde_json::Value::Null,
                outputs: Vec::new(),
                flags: Vec::new(),
                notes: Vec::new(),
                duration_s: 0.0,
            },
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    /// Stores the scene text next to the outputs and records its hash.
    pub fn write_scene(&mut self, text: &str, seed: Option<u64>) -> Result<()> {
        self.manifest.scene_sha256 = Some(sha256_hex(text.as_bytes()));
        self.manifest.seed = seed;
        self.write("scene.json", text.as_bytes())
    }

    pub fn finish(mut self) -> Result<RunManifest> {
        self.manifest.duration_s = self.started.elapsed().as_secs_f64();
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        write_atomic(&self.dir.join(MANIFEST_FILE), text.as_bytes())?;
        Ok(self.manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_hex_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
