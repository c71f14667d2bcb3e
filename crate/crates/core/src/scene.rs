//! Scene geometry: dipoles, scatterers, the ground plane, tag polarization
//! sets and the scenario presets.
//!
//! Angles follow one convention throughout the crate: `phi_deg` is the polar
//! tilt from +z and `theta_deg` the azimuth from +x, so a dipole axis is
//! `(sin φ cos θ, sin φ sin θ, cos φ)`. A dipole and its negation are the same
//! antenna, which is why orientations live on a half-sphere.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Current scene file schema.
pub const SCHEMA_VERSION: u32 = 1;

/// Seed used by presets when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 7;

/// Default wire radius as a fraction of the wavelength.
pub const DEFAULT_RADIUS_FRACTION: f64 = 1.0e-3;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid orientation ({phi}, {theta}): angles must be finite and within [0, 180] degrees")]
    InvalidOrientation { phi: f64, theta: f64 },
    #[error("non-finite coordinate in {0}")]
    NonFinite(String),
    #[error("invalid {what}: {reason}")]
    InvalidWire { what: String, reason: String },
    #[error("{a} and {b} centers are {distance:.4} m apart, must exceed half a wavelength ({limit:.4} m)")]
    DipolesTooClose {
        a: String,
        b: String,
        distance: f64,
        limit: f64,
    },
    #[error("{0} does not lie strictly above the ground plane")]
    BelowGround(String),
    #[error("frequency must be positive and finite, got {0}")]
    InvalidFrequency(f64),
    #[error("unsupported scene schema_version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("scene file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("invalid polarization set: {0}")]
    InvalidPolarizationSet(String),
    #[error("scatterer placement infeasible: {placed} of {requested} placed after {attempts} attempts")]
    Infeasible {
        placed: usize,
        requested: usize,
        attempts: usize,
    },
}

/// A point (or direction) in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Self {
        self * (1.0 / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Position3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Position3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Position3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Position3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Dipole orientation in degrees.
///
/// Constructed values accept the closed range `[0, 180]` on both angles so
/// that grid labels such as `(180, 90)` survive; [`OrientationAngles::canonical`]
/// folds any value onto the half-open half-sphere `[0, 180) × [0, 180)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationAngles {
    pub phi_deg: f64,
    pub theta_deg: f64,
}

impl OrientationAngles {
    pub fn new(phi_deg: f64, theta_deg: f64) -> Result<Self, SceneError> {
        let ok = |a: f64| a.is_finite() && (0.0..=180.0).contains(&a);
        if ok(phi_deg) && ok(theta_deg) {
            Ok(Self { phi_deg, theta_deg })
        } else {
            Err(SceneError::InvalidOrientation {
                phi: phi_deg,
                theta: theta_deg,
            })
        }
    }

    /// Unchecked constructor for compile-time constants.
    pub const fn deg(phi_deg: f64, theta_deg: f64) -> Self {
        Self { phi_deg, theta_deg }
    }

    pub fn axis(&self) -> Position3 {
        orientation_to_axis(*self)
    }

    /// Representative on the half-sphere `phi ∈ [0,180)`, `theta ∈ [0,180)`.
    pub fn canonical(&self) -> Self {
        let mut phi = self.phi_deg.rem_euclid(360.0);
        let mut theta = self.theta_deg;
        if phi > 180.0 {
            phi = 360.0 - phi;
            theta += 180.0;
        }
        theta = theta.rem_euclid(360.0);
        if theta >= 180.0 {
            theta -= 180.0;
            phi = 180.0 - phi;
        }
        if phi >= 180.0 {
            // (180, θ) is the vertical axis pointing down, same antenna as (0, θ)
            phi = 0.0;
        }
        Self {
            phi_deg: phi,
            theta_deg: theta,
        }
    }

    /// Canonical orientation of an arbitrary non-zero axis.
    pub fn from_axis(v: Position3) -> Self {
        let u = v.normalized();
        let phi = u.z.clamp(-1.0, 1.0).acos().to_degrees();
        let theta = if u.x == 0.0 && u.y == 0.0 {
            0.0
        } else {
            u.y.atan2(u.x).to_degrees()
        };
        Self {
            phi_deg: phi,
            theta_deg: theta,
        }
        .canonical()
    }

    /// True when both orientations describe the same (sign-free) axis.
    pub fn same_axis(&self, other: &Self, tol: f64) -> bool {
        self.axis().dot(other.axis()).abs() >= 1.0 - tol
    }
}

impl fmt::Display for OrientationAngles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.phi_deg, self.theta_deg)
    }
}

/// Unit axis `(sin φ cos θ, sin φ sin θ, cos φ)`.
pub fn orientation_to_axis(o: OrientationAngles) -> Position3 {
    let (sp, cp) = o.phi_deg.to_radians().sin_cos();
    let (st, ct) = o.theta_deg.to_radians().sin_cos();
    Position3::new(sp * ct, sp * st, cp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Tag,
    Reader,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Source => "source",
            Role::Tag => "tag",
            Role::Reader => "reader",
        })
    }
}

/// A center-fed straight dipole. For the reader `load` is the receiver
/// impedance, for the tag the load of its current state, and for the source
/// it is ignored (the feed is an ideal delta-gap generator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipoleSpec {
    pub center: Position3,
    pub orientation: OrientationAngles,
    pub length: f64,
    pub wire_radius: f64,
    pub role: Role,
    pub load: Complex64,
}

impl DipoleSpec {
    pub fn half_wave(
        role: Role,
        center: Position3,
        orientation: OrientationAngles,
        wavelength: f64,
        load: Complex64,
    ) -> Self {
        Self {
            center,
            orientation,
            length: wavelength / 2.0,
            wire_radius: wavelength * DEFAULT_RADIUS_FRACTION,
            role,
            load,
        }
    }

    pub fn endpoints(&self) -> (Position3, Position3) {
        wire_endpoints(self.center, self.orientation, self.length)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let what = format!("{} dipole", self.role);
        validate_wire(&what, self.center, self.orientation, self.length, self.wire_radius)?;
        if self.wire_radius > self.length / 50.0 {
            return Err(SceneError::InvalidWire {
                what,
                reason: format!(
                    "radius {} exceeds length/50 = {}",
                    self.wire_radius,
                    self.length / 50.0
                ),
            });
        }
        if !(self.load.re.is_finite() && self.load.im.is_finite()) {
            return Err(SceneError::InvalidWire {
                what,
                reason: "non-finite load".into(),
            });
        }
        Ok(())
    }
}

/// A passive conductive line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScattererSpec {
    pub center: Position3,
    pub orientation: OrientationAngles,
    pub length: f64,
    pub wire_radius: f64,
}

impl ScattererSpec {
    pub fn endpoints(&self) -> (Position3, Position3) {
        wire_endpoints(self.center, self.orientation, self.length)
    }
}

fn wire_endpoints(center: Position3, o: OrientationAngles, length: f64) -> (Position3, Position3) {
    let half = o.axis() * (length / 2.0);
    (center - half, center + half)
}

fn validate_wire(
    what: &str,
    center: Position3,
    o: OrientationAngles,
    length: f64,
    radius: f64,
) -> Result<(), SceneError> {
    if !center.is_finite() {
        return Err(SceneError::NonFinite(what.to_string()));
    }
    OrientationAngles::new(o.phi_deg, o.theta_deg)?;
    if !(length.is_finite() && length > 0.0) {
        return Err(SceneError::InvalidWire {
            what: what.to_string(),
            reason: format!("length must be positive, got {length}"),
        });
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(SceneError::InvalidWire {
            what: what.to_string(),
            reason: format!("radius must be positive, got {radius}"),
        });
    }
    Ok(())
}

/// Perfectly conducting plane `z = height_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPlaneSpec {
    pub present: bool,
    pub height_z: f64,
}

impl GroundPlaneSpec {
    pub const NONE: Self = Self {
        present: false,
        height_z: 0.0,
    };

    pub fn at(height_z: f64) -> Self {
        Self {
            present: true,
            height_z,
        }
    }
}

/// Everything the solver needs to know about the environment.
///
/// The tag template supplies the tag's wire parameters; its pose is replaced
/// per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub schema_version: u32,
    pub frequency_hz: f64,
    pub source: DipoleSpec,
    pub reader: DipoleSpec,
    pub tag_template: DipoleSpec,
    pub scatterers: Vec<ScattererSpec>,
    pub ground: GroundPlaneSpec,
    pub rng_seed: Option<u64>,
}

impl Scene {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    pub fn dipoles(&self) -> [&DipoleSpec; 3] {
        [&self.source, &self.reader, &self.tag_template]
    }

    /// Same scene with the tag moved to `center` and rotated to `orientation`.
    pub fn with_tag_pose(&self, center: Position3, orientation: OrientationAngles) -> Self {
        let mut s = self.clone();
        s.tag_template.center = center;
        s.tag_template.orientation = orientation;
        s
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SceneError::SchemaVersion(self.schema_version));
        }
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return Err(SceneError::InvalidFrequency(self.frequency_hz));
        }
        for d in self.dipoles() {
            d.validate()?;
        }
        let roles = [
            (&self.source, Role::Source),
            (&self.reader, Role::Reader),
            (&self.tag_template, Role::Tag),
        ];
        for (d, role) in roles {
            if d.role != role {
                return Err(SceneError::InvalidWire {
                    what: format!("{role} dipole"),
                    reason: format!("role field says {}", d.role),
                });
            }
        }
        let limit = self.wavelength() / 2.0;
        let ds = self.dipoles();
        for i in 0..ds.len() {
            for j in i + 1..ds.len() {
                let distance = ds[i].center.distance(ds[j].center);
                if distance <= limit {
                    return Err(SceneError::DipolesTooClose {
                        a: ds[i].role.to_string(),
                        b: ds[j].role.to_string(),
                        distance,
                        limit,
                    });
                }
            }
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            validate_wire(
                &format!("scatterer {i}"),
                s.center,
                s.orientation,
                s.length,
                s.wire_radius,
            )?;
        }
        if self.ground.present {
            let h = self.ground.height_z;
            if !h.is_finite() {
                return Err(SceneError::NonFinite("ground plane".into()));
            }
            for d in self.dipoles() {
                let (a, b) = d.endpoints();
                if a.z.min(b.z) <= h {
                    return Err(SceneError::BelowGround(format!("{} dipole", d.role)));
                }
            }
            for (i, s) in self.scatterers.iter().enumerate() {
                let (a, b) = s.endpoints();
                if a.z.min(b.z) <= h {
                    return Err(SceneError::BelowGround(format!("scatterer {i}")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene serializes");
        s.push('\n');
        s
    }

    /// Parses and validates a scene document.
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => return Err(SceneError::SchemaVersion(v as u32)),
            None => {
                return Err(SceneError::InvalidWire {
                    what: "scene file".into(),
                    reason: "missing mandatory schema_version".into(),
                })
            }
        }
        // Re-parse from text so serde reports line/column on type errors.
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolarizationLabel {
    NR,
    FourPR,
    IPR,
    Custom,
}

/// Which built-in orientation set to construct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarizationKind {
    /// Fixed tag at the best average orientation (45, 90).
    Nr,
    /// Fixed tag at the worst average orientation (90, 90).
    NrWorst,
    FourPr,
    Ipr,
}

impl FromStr for PolarizationKind {
    type Err = SceneError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nr" | "nr-best" => Ok(Self::Nr),
            "nr-worst" => Ok(Self::NrWorst),
            "4pr" => Ok(Self::FourPr),
            "ipr" => Ok(Self::Ipr),
            other => Err(SceneError::InvalidPolarizationSet(format!(
                "unknown set '{other}'"
            ))),
        }
    }
}

/// The candidate tag orientations of one tag type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationSet {
    pub label: PolarizationLabel,
    pub name: String,
    pub orientations: Vec<OrientationAngles>,
}

impl PolarizationSet {
    pub fn new(
        label: PolarizationLabel,
        name: impl Into<String>,
        orientations: Vec<OrientationAngles>,
    ) -> Result<Self, SceneError> {
        if orientations.is_empty() {
            return Err(SceneError::InvalidPolarizationSet("empty".into()));
        }
        for o in &orientations {
            OrientationAngles::new(o.phi_deg, o.theta_deg)?;
        }
        for i in 0..orientations.len() {
            for j in i + 1..orientations.len() {
                if orientations[i] == orientations[j] {
                    return Err(SceneError::InvalidPolarizationSet(format!(
                        "duplicate orientation {}",
                        orientations[i]
                    )));
                }
            }
        }
        let expected = match label {
            PolarizationLabel::NR => Some(1),
            PolarizationLabel::FourPR => Some(4),
            PolarizationLabel::IPR => Some(81),
            PolarizationLabel::Custom => None,
        };
        if let Some(n) = expected {
            if orientations.len() != n {
                return Err(SceneError::InvalidPolarizationSet(format!(
                    "{label:?} requires {n} orientations, got {}",
                    orientations.len()
                )));
            }
        }
        Ok(Self {
            label,
            name: name.into(),
            orientations,
        })
    }

    pub fn len(&self) -> usize {
        self.orientations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orientations.is_empty()
    }

    /// Parses a custom set: a JSON array of `[phi_deg, theta_deg]` pairs.
    pub fn custom_from_json(name: &str, text: &str) -> Result<Self, SceneError> {
        let pairs: Vec<[f64; 2]> = serde_json::from_str(text)?;
        let orientations = pairs
            .into_iter()
            .map(|[p, t]| OrientationAngles::new(p, t))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(PolarizationLabel::Custom, name, orientations)
    }
}

/// Step of the ideal-tag orientation grid, degrees.
pub const IPR_STEP_DEG: f64 = 22.5;

pub fn polarization_set(kind: PolarizationKind) -> PolarizationSet {
    let d = OrientationAngles::deg;
    let (label, name, orientations) = match kind {
        PolarizationKind::Nr => (PolarizationLabel::NR, "nr", vec![d(45.0, 90.0)]),
        PolarizationKind::NrWorst => (PolarizationLabel::NR, "nr-worst", vec![d(90.0, 90.0)]),
        PolarizationKind::FourPr => (
            PolarizationLabel::FourPR,
            "4pr",
            vec![d(0.0, 90.0), d(45.0, 90.0), d(90.0, 90.0), d(135.0, 90.0)],
        ),
        PolarizationKind::Ipr => {
            let mut v = Vec::with_capacity(81);
            for i in 0..9 {
                for j in 0..9 {
                    v.push(d(i as f64 * IPR_STEP_DEG, j as f64 * IPR_STEP_DEG));
                }
            }
            (PolarizationLabel::IPR, "ipr", v)
        }
    };
    PolarizationSet::new(label, name, orientations).expect("built-in sets are valid")
}

/// Built-in scenario geometries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Scattering scene: reader 100 m from the source, 20 scatterers, ground.
    Table1Scattering,
    /// Same scattering layout with the reader 10 m away (desk-scale runs).
    Table1Desk,
    /// Source, tag and cross-polarized reader in free space.
    LosCrossPol,
    /// Short-range chamber layout with six wire-grid reflector panels.
    ExperimentChamber,
}

impl FromStr for Preset {
    type Err = SceneError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "table1" | "table1-scattering" => Ok(Self::Table1Scattering),
            "table1-desk" => Ok(Self::Table1Desk),
            "los" | "los-crosspol" => Ok(Self::LosCrossPol),
            "chamber" | "experiment-chamber" => Ok(Self::ExperimentChamber),
            other => Err(SceneError::UnknownPreset(other.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PresetScene {
    pub scene: Scene,
    pub polarization_sets: Vec<PolarizationSet>,
}

pub const DEFAULT_FREQUENCY_HZ: f64 = 2.4e9;
pub const DEFAULT_READER_LOAD_OHMS: f64 = 50.0;

pub fn preset_scene(preset: Preset) -> Result<PresetScene, SceneError> {
    preset_scene_seeded(preset, DEFAULT_SEED)
}

pub fn preset_scene_seeded(preset: Preset, seed: u64) -> Result<PresetScene, SceneError> {
    let all_sets = || {
        vec![
            polarization_set(PolarizationKind::Nr),
            polarization_set(PolarizationKind::NrWorst),
            polarization_set(PolarizationKind::FourPr),
            polarization_set(PolarizationKind::Ipr),
        ]
    };
    let scene = match preset {
        Preset::Table1Scattering => table1_scene(100.0, seed)?,
        Preset::Table1Desk => table1_scene(10.0, seed)?,
        Preset::LosCrossPol => los_scene(100.0),
        Preset::ExperimentChamber => chamber_scene(),
    };
    let polarization_sets = match preset {
        Preset::ExperimentChamber => vec![polarization_set(PolarizationKind::FourPr)],
        _ => all_sets(),
    };
    scene.validate()?;
    Ok(PresetScene {
        scene,
        polarization_sets,
    })
}

/// Free-space source/tag/reader line: vertical source at (0, 0, 0.3), reader
/// along y at `(reader_x, 0, 0.3)`, tag template halfway at (45, 90).
pub fn los_scene(reader_x: f64) -> Scene {
    let f = DEFAULT_FREQUENCY_HZ;
    let lambda = SPEED_OF_LIGHT / f;
    let d = OrientationAngles::deg;
    Scene {
        schema_version: SCHEMA_VERSION,
        frequency_hz: f,
        source: DipoleSpec::half_wave(
            Role::Source,
            Position3::new(0.0, 0.0, 0.3),
            d(0.0, 0.0),
            lambda,
            Complex64::new(0.0, 0.0),
        ),
        reader: DipoleSpec::half_wave(
            Role::Reader,
            Position3::new(reader_x, 0.0, 0.3),
            d(90.0, 90.0),
            lambda,
            Complex64::new(DEFAULT_READER_LOAD_OHMS, 0.0),
        ),
        tag_template: DipoleSpec::half_wave(
            Role::Tag,
            Position3::new(reader_x / 2.0, 0.3, 0.3),
            d(45.0, 90.0),
            lambda,
            Complex64::new(0.0, 0.0),
        ),
        scatterers: Vec::new(),
        ground: GroundPlaneSpec::NONE,
        rng_seed: None,
    }
}

fn table1_scene(reader_x: f64, seed: u64) -> Result<Scene, SceneError> {
    let mut scene = los_scene(reader_x);
    scene.ground = GroundPlaneSpec::at(0.0);
    let lambda = scene.wavelength();
    let constraints = ScattererConstraints::for_wavelength(lambda);
    scene.scatterers = generate_scatterers(seed, 20, &scene, &constraints)?;
    scene.rng_seed = Some(seed);
    Ok(scene)
}

/// Placement rules for random scatterers.
#[derive(Debug, Clone)]
pub struct ScattererConstraints {
    /// Every scatterer center stays farther than this from every dipole center.
    pub min_dist_to_dipoles: f64,
    /// Every scatterer center stays closer than this to the reader.
    pub max_dist_to_reader: f64,
    /// Minimum wire-to-wire gap between scatterers, and to the ground plane.
    pub min_wire_clearance: f64,
    pub length: f64,
    pub wire_radius: f64,
    pub max_attempts: usize,
}

impl ScattererConstraints {
    pub fn for_wavelength(lambda: f64) -> Self {
        Self {
            min_dist_to_dipoles: lambda,
            max_dist_to_reader: 10.0 * lambda,
            min_wire_clearance: lambda / 20.0,
            length: lambda / 2.0,
            wire_radius: lambda * DEFAULT_RADIUS_FRACTION,
            max_attempts: 100_000,
        }
    }
}

/// Rejection-samples `count` scatterers in the ball of radius
/// `max_dist_to_reader` around the reader. Axes are uniform on the sphere
/// and folded onto the half-sphere.
pub fn generate_scatterers(
    seed: u64,
    count: usize,
    scene: &Scene,
    c: &ScattererConstraints,
) -> Result<Vec<ScattererSpec>, SceneError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<ScattererSpec> = Vec::with_capacity(count);
    let reader = scene.reader.center;
    let r = c.max_dist_to_reader;
    let mut attempts = 0usize;
    while out.len() < count {
        if attempts >= c.max_attempts {
            return Err(SceneError::Infeasible {
                placed: out.len(),
                requested: count,
                attempts,
            });
        }
        attempts += 1;
        let offset = Position3::new(
            rng.random_range(-r..r),
            rng.random_range(-r..r),
            rng.random_range(-r..r),
        );
        let z_axis: f64 = rng.random_range(-1.0..1.0);
        let azimuth: f64 = rng.random_range(0.0..360.0);
        if offset.norm() >= r {
            continue;
        }
        let center = reader + offset;
        if scene
            .dipoles()
            .iter()
            .any(|d| d.center.distance(center) <= c.min_dist_to_dipoles)
        {
            continue;
        }
        let orientation = OrientationAngles {
            phi_deg: z_axis.acos().to_degrees(),
            theta_deg: azimuth,
        }
        .canonical();
        let cand = ScattererSpec {
            center,
            orientation,
            length: c.length,
            wire_radius: c.wire_radius,
        };
        let (a, b) = cand.endpoints();
        if scene.ground.present && a.z.min(b.z) <= scene.ground.height_z + c.min_wire_clearance {
            continue;
        }
        let clear = out.iter().all(|s| {
            let (p, q) = s.endpoints();
            segment_distance(a, b, p, q) > c.min_wire_clearance
        });
        if !clear {
            continue;
        }
        out.push(cand);
    }
    Ok(out)
}

/// Minimum distance between segments `[p1, q1]` and `[p2, q2]`.
pub fn segment_distance(p1: Position3, q1: Position3, p2: Position3, q2: Position3) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(d1);
    let e = d2.dot(d2);
    let f = d2.dot(r);
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return r.norm();
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    c1.distance(c2)
}

/// Wire-grid reflector: two crossed layers of parallel wires, offset along
/// the panel normal so the layers never touch.
#[derive(Debug, Clone)]
pub struct ReflectorPanel {
    pub center: Position3,
    pub normal: Position3,
    pub width: f64,
    pub height: f64,
}

impl ReflectorPanel {
    pub fn wires(&self, pitch: f64, radius: f64, layer_gap: f64) -> Vec<ScattererSpec> {
        let n = self.normal.normalized();
        let helper = if n.z.abs() < 0.9 {
            Position3::new(0.0, 0.0, 1.0)
        } else {
            Position3::new(1.0, 0.0, 0.0)
        };
        let u = n.cross(helper).normalized();
        let v = n.cross(u).normalized();
        let mut out = Vec::new();
        let layer = |dir: Position3, across: Position3, len: f64, span: f64, shift: f64| {
            let count = (span / pitch).floor() as usize + 1;
            let start = -((count - 1) as f64) * pitch / 2.0;
            (0..count)
                .map(|i| ScattererSpec {
                    center: self.center + across * (start + i as f64 * pitch) + n * shift,
                    orientation: OrientationAngles::from_axis(dir),
                    length: len,
                    wire_radius: radius,
                })
                .collect::<Vec<_>>()
        };
        out.extend(layer(u, v, self.width, self.height, -layer_gap / 2.0));
        out.extend(layer(v, u, self.height, self.width, layer_gap / 2.0));
        out
    }
}

/// Fixed layout of the six chamber panels, sizes in wavelengths.
fn chamber_panels(lambda: f64) -> Vec<ReflectorPanel> {
    let p = Position3::new;
    let panel = |c: Position3, n: Position3, w: f64, h: f64| ReflectorPanel {
        center: c,
        normal: n,
        width: w * lambda,
        height: h * lambda,
    };
    vec![
        panel(p(-0.25, 0.0, 0.0), p(1.0, 0.0, 0.0), 1.0, 0.8),
        panel(p(0.62, 0.05, 0.02), p(-1.0, 0.2, 0.0), 0.8, 0.8),
        panel(p(0.17, 0.42, 0.05), p(0.1, -1.0, 0.0), 0.9, 0.7),
        panel(p(0.12, -0.45, -0.03), p(0.0, 1.0, 0.2), 0.7, 0.7),
        panel(p(0.20, 0.0, 0.38), p(0.2, 0.1, -1.0), 0.8, 0.6),
        panel(p(0.15, 0.05, -0.40), p(-0.1, 0.0, 1.0), 0.6, 0.6),
    ]
}

fn chamber_scene() -> Scene {
    let f = DEFAULT_FREQUENCY_HZ;
    let lambda = SPEED_OF_LIGHT / f;
    let d = OrientationAngles::deg;
    let radius = lambda * DEFAULT_RADIUS_FRACTION;
    let scatterers = chamber_panels(lambda)
        .iter()
        .flat_map(|p| p.wires(lambda / 10.0, radius, lambda / 100.0))
        .collect();
    Scene {
        schema_version: SCHEMA_VERSION,
        frequency_hz: f,
        source: DipoleSpec::half_wave(
            Role::Source,
            Position3::new(0.0, 0.0, 0.0),
            d(0.0, 0.0),
            lambda,
            Complex64::new(0.0, 0.0),
        ),
        reader: DipoleSpec::half_wave(
            Role::Reader,
            Position3::new(0.35, 0.0, 0.0),
            d(90.0, 90.0),
            lambda,
            Complex64::new(DEFAULT_READER_LOAD_OHMS, 0.0),
        ),
        tag_template: DipoleSpec::half_wave(
            Role::Tag,
            Position3::new(0.175, 0.0, 0.0),
            d(45.0, 90.0),
            lambda,
            Complex64::new(0.0, 0.0),
        ),
        scatterers,
        ground: GroundPlaneSpec::NONE,
        rng_seed: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_axis(o: OrientationAngles, e: [f64; 3]) {
        let u = o.axis();
        assert_abs_diff_eq!(u.x, e[0], epsilon = 1e-12);
        assert_abs_diff_eq!(u.y, e[1], epsilon = 1e-12);
        assert_abs_diff_eq!(u.z, e[2], epsilon = 1e-12);
        assert_abs_diff_eq!(u.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn axis_convention() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_axis(OrientationAngles::deg(0.0, 0.0), [0.0, 0.0, 1.0]);
        assert_axis(OrientationAngles::deg(90.0, 90.0), [0.0, 1.0, 0.0]);
        assert_axis(OrientationAngles::deg(45.0, 90.0), [0.0, h, h]);
    }

    #[test]
    fn canonical_folds_negated_axis() {
        let o = OrientationAngles::deg(30.0, 250.0).canonical();
        assert_abs_diff_eq!(o.phi_deg, 150.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.theta_deg, 70.0, epsilon = 1e-12);
        let down = OrientationAngles::deg(180.0, 40.0).canonical();
        assert_eq!(down.phi_deg, 0.0);
        let edge = OrientationAngles::deg(60.0, 180.0).canonical();
        assert_abs_diff_eq!(edge.phi_deg, 120.0, epsilon = 1e-12);
        assert_abs_diff_eq!(edge.theta_deg, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_out_of_range_angles() {
        assert!(OrientationAngles::new(-1.0, 0.0).is_err());
        assert!(OrientationAngles::new(0.0, f64::NAN).is_err());
        assert!(OrientationAngles::new(180.0, 180.0).is_ok());
    }

    #[test]
    fn presets_match_table_values() {
        let t1 = preset_scene(Preset::Table1Scattering).unwrap().scene;
        assert_eq!(t1.reader.center, Position3::new(100.0, 0.0, 0.3));
        assert_eq!(t1.source.center, Position3::new(0.0, 0.0, 0.3));
        assert_eq!(t1.reader.load, Complex64::new(50.0, 0.0));
        assert_eq!(t1.scatterers.len(), 20);
        assert!(t1.ground.present);
        let lambda = t1.wavelength();
        for s in &t1.scatterers {
            assert_abs_diff_eq!(s.length, lambda / 2.0, epsilon = 1e-15);
        }

        let los = preset_scene(Preset::LosCrossPol).unwrap().scene;
        assert!(los.scatterers.is_empty());
        assert!(!los.ground.present);

        let ch = preset_scene(Preset::ExperimentChamber).unwrap().scene;
        assert_abs_diff_eq!(ch.source.center.distance(ch.reader.center), 0.35, epsilon = 1e-15);
        assert!(!ch.ground.present);
        assert!(!ch.scatterers.is_empty());
    }

    #[test]
    fn scatterers_respect_constraints() {
        let scene = los_scene(100.0);
        let mut scene = scene;
        scene.ground = GroundPlaneSpec::at(0.0);
        let lambda = scene.wavelength();
        let c = ScattererConstraints::for_wavelength(lambda);
        let a = generate_scatterers(7, 20, &scene, &c).unwrap();
        assert_eq!(a.len(), 20);
        for s in &a {
            for d in scene.dipoles() {
                assert!(s.center.distance(d.center) > lambda);
            }
            assert!(s.center.distance(scene.reader.center) < 10.0 * lambda);
            let o = s.orientation;
            assert!((0.0..180.0).contains(&o.phi_deg) && (0.0..180.0).contains(&o.theta_deg));
        }
        let b = generate_scatterers(7, 20, &scene, &c).unwrap();
        assert_eq!(a, b);
        assert!(generate_scatterers(7, 0, &scene, &c).unwrap().is_empty());
    }

    #[test]
    fn infeasible_placement_reports_error() {
        let scene = los_scene(100.0);
        let mut c = ScattererConstraints::for_wavelength(scene.wavelength());
        c.max_dist_to_reader = c.min_dist_to_dipoles * 0.5;
        c.max_attempts = 1000;
        assert!(matches!(
            generate_scatterers(1, 3, &scene, &c),
            Err(SceneError::Infeasible { .. })
        ));
    }

    #[test]
    fn polarization_sets() {
        let four = polarization_set(PolarizationKind::FourPr);
        assert_eq!(four.len(), 4);
        assert!(four.orientations.contains(&OrientationAngles::deg(135.0, 90.0)));
        let ipr = polarization_set(PolarizationKind::Ipr);
        assert_eq!(ipr.len(), 81);
        for o in &four.orientations {
            assert!(ipr.orientations.contains(o));
        }
        let worst = polarization_set(PolarizationKind::NrWorst);
        assert_eq!(worst.orientations, vec![OrientationAngles::deg(90.0, 90.0)]);
        assert!(PolarizationSet::new(PolarizationLabel::FourPR, "x", vec![OrientationAngles::deg(0.0, 0.0)]).is_err());
        assert!(PolarizationSet::new(
            PolarizationLabel::Custom,
            "x",
            vec![OrientationAngles::deg(0.0, 0.0), OrientationAngles::deg(0.0, 0.0)]
        )
        .is_err());
    }

    #[test]
    fn scene_json_round_trip_and_errors() {
        let scene = preset_scene(Preset::Table1Scattering).unwrap().scene;
        let text = scene.to_json();
        assert_eq!(Scene::from_json(&text).unwrap(), scene);

        let no_version = text.replace("\"schema_version\": 1,", "");
        assert!(Scene::from_json(&no_version).is_err());

        let broken = text.replacen("\"frequency_hz\": ", "\"frequency_hz\": \"x", 1);
        let err = Scene::from_json(&broken).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn close_dipoles_rejected() {
        let mut scene = los_scene(100.0);
        scene.tag_template.center = scene.reader.center + Position3::new(0.05, 0.0, 0.0);
        assert!(matches!(scene.validate(), Err(SceneError::DipolesTooClose { .. })));
    }

    #[test]
    fn segment_distance_cases() {
        let p = Position3::new;
        assert_abs_diff_eq!(
            segment_distance(p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(1., 1., 0.)),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            segment_distance(p(0., 0., 0.), p(1., 0., 0.), p(0.5, -1., 1.), p(0.5, 1., 1.)),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            segment_distance(p(0., 0., 0.), p(1., 0., 0.), p(2., 0., 0.), p(3., 0., 0.)),
            1.0,
            epsilon = 1e-15
        );
    }
}
