//! Segmentation of scene wires into pulse-basis segments.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::quad::Line;
use super::MomError;
use crate::scene::{segment_distance, Position3, Scene, SPEED_OF_LIGHT};

/// What a wire represents in the scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireKind {
    Source,
    Reader,
    Tag,
    Scatterer(usize),
    /// Caller-defined wire (for example an explicit mirror copy).
    Extra(usize),
}

impl WireKind {
    fn is_dipole(self) -> bool {
        matches!(self, WireKind::Source | WireKind::Reader | WireKind::Tag)
    }
}

/// A straight wire split into equal segments `points[j]..points[j+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WireGeom {
    pub points: Vec<Position3>,
    pub radius: f64,
}

impl WireGeom {
    pub fn straight(a: Position3, b: Position3, radius: f64, segments: usize) -> Self {
        let points = (0..=segments)
            .map(|i| a + (b - a) * (i as f64 / segments as f64))
            .collect();
        Self { points, radius }
    }

    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn start(&self) -> Position3 {
        self.points[0]
    }

    pub fn end(&self) -> Position3 {
        self.points[self.points.len() - 1]
    }

    pub fn segment(&self, j: usize) -> Line {
        Line::between(self.points[j], self.points[j + 1])
    }

    pub fn center(&self, j: usize) -> Position3 {
        (self.points[j] + self.points[j + 1]) * 0.5
    }

    /// Charge cell around point `a`: half segments at the wire ends, otherwise
    /// the span between the neighbouring segment centers.
    pub fn charge_cell(&self, a: usize) -> Line {
        let m = self.segments();
        let lo = if a == 0 { self.points[0] } else { self.center(a - 1) };
        let hi = if a == m { self.points[m] } else { self.center(a) };
        Line::between(lo, hi)
    }

    /// Mirror image in the plane `z = h`, same point order.
    pub fn mirrored(&self, h: f64) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| Position3::new(p.x, p.y, 2.0 * h - p.z))
                .collect(),
            radius: self.radius,
        }
    }

    pub fn min_z(&self) -> f64 {
        self.start().z.min(self.end().z)
    }

    pub fn distance_to(&self, other: &WireGeom) -> f64 {
        segment_distance(self.start(), self.end(), other.start(), other.end())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshWire {
    pub kind: WireKind,
    pub geom: WireGeom,
    /// Index of the wire's first segment in the unknown vector.
    pub first_segment: usize,
}

impl MeshWire {
    pub fn center_segment(&self) -> usize {
        self.first_segment + self.geom.segments() / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireSegment {
    pub start: Position3,
    pub end: Position3,
    pub radius: f64,
    pub wire: usize,
    pub image: bool,
}

/// Segmented scene. Real segments come first; when a ground plane is present
/// image segment `k + n_real` mirrors real segment `k` and carries the
/// negated current of the mirrored geometry.
#[derive(Debug, Clone)]
pub struct MeshedScene {
    pub frequency_hz: f64,
    pub segments_per_halfwave: usize,
    pub wires: Vec<MeshWire>,
    pub segments: Vec<WireSegment>,
    pub n_real: usize,
    pub ground_z: Option<f64>,
    pub source_port: Option<usize>,
    pub reader_port: Option<usize>,
    pub tag_port: Option<usize>,
    pub load_table: BTreeMap<usize, Complex64>,
}

impl MeshedScene {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    /// Number of unknowns after image folding.
    pub fn unknowns(&self) -> usize {
        self.n_real
    }

    pub fn is_image(&self, segment: usize) -> bool {
        self.segments.get(segment).is_some_and(|s| s.image)
    }

    /// Builds a mesh from explicit wires; ports are the center segments of
    /// the source/reader/tag wires when present.
    pub fn from_wires(
        frequency_hz: f64,
        segments_per_halfwave: usize,
        wires: Vec<(WireKind, WireGeom)>,
        ground_z: Option<f64>,
    ) -> Result<Self, MomError> {
        check_segments_per_halfwave(segments_per_halfwave)?;
        let mut mesh_wires = Vec::with_capacity(wires.len());
        let mut segments = Vec::new();
        for (w, (kind, geom)) in wires.into_iter().enumerate() {
            if let Some(h) = ground_z {
                if geom.min_z() <= h {
                    return Err(MomError::GroundIntersection(format!("{kind:?}")));
                }
            }
            let first_segment = segments.len();
            for j in 0..geom.segments() {
                segments.push(WireSegment {
                    start: geom.points[j],
                    end: geom.points[j + 1],
                    radius: geom.radius,
                    wire: w,
                    image: false,
                });
            }
            mesh_wires.push(MeshWire {
                kind,
                geom,
                first_segment,
            });
        }
        for i in 0..mesh_wires.len() {
            for j in i + 1..mesh_wires.len() {
                let (a, b) = (&mesh_wires[i].geom, &mesh_wires[j].geom);
                let distance = a.distance_to(b);
                if distance < a.radius + b.radius {
                    return Err(MomError::Overlap {
                        a: format!("{:?}", mesh_wires[i].kind),
                        b: format!("{:?}", mesh_wires[j].kind),
                        distance,
                    });
                }
            }
        }
        let n_real = segments.len();
        if let Some(h) = ground_z {
            let images: Vec<WireSegment> = segments
                .iter()
                .map(|s| WireSegment {
                    start: Position3::new(s.start.x, s.start.y, 2.0 * h - s.start.z),
                    end: Position3::new(s.end.x, s.end.y, 2.0 * h - s.end.z),
                    image: true,
                    ..*s
                })
                .collect();
            segments.extend(images);
        }
        let port = |k: WireKind| {
            mesh_wires
                .iter()
                .find(|w| w.kind == k)
                .map(MeshWire::center_segment)
        };
        Ok(Self {
            frequency_hz,
            segments_per_halfwave,
            source_port: port(WireKind::Source),
            reader_port: port(WireKind::Reader),
            tag_port: port(WireKind::Tag),
            wires: mesh_wires,
            segments,
            n_real,
            ground_z,
            load_table: BTreeMap::new(),
        })
    }
}

pub fn check_segments_per_halfwave(n: usize) -> Result<(), MomError> {
    if n % 2 == 0 {
        return Err(MomError::EvenSegments(n));
    }
    if n < 5 {
        return Err(MomError::TooFewSegments(n));
    }
    Ok(())
}

/// Segment count for a wire of `length`: segments no longer than
/// `λ / (2·segments_per_halfwave)`, odd for fed dipoles.
pub fn segment_count(length: f64, wavelength: f64, segments_per_halfwave: usize, odd: bool) -> usize {
    let target = wavelength / (2.0 * segments_per_halfwave as f64);
    let mut n = ((length / target) * (1.0 - 1e-9)).ceil().max(1.0) as usize;
    if odd && n % 2 == 0 {
        n += 1;
    }
    n
}

fn wire_geom(
    kind: WireKind,
    ends: (Position3, Position3),
    length: f64,
    radius: f64,
    wavelength: f64,
    sph: usize,
) -> WireGeom {
    let n = segment_count(length, wavelength, sph, kind.is_dipole());
    WireGeom::straight(ends.0, ends.1, radius, n)
}

/// Wires of `scene` in solver order: source, reader, tag (optional), then
/// scatterers.
pub fn scene_wires(scene: &Scene, include_tag: bool, sph: usize) -> Vec<(WireKind, WireGeom)> {
    let lambda = scene.wavelength();
    let mut out = Vec::with_capacity(3 + scene.scatterers.len());
    let mut dipoles = vec![(WireKind::Source, &scene.source), (WireKind::Reader, &scene.reader)];
    if include_tag {
        dipoles.push((WireKind::Tag, &scene.tag_template));
    }
    for (kind, d) in dipoles {
        out.push((
            kind,
            wire_geom(kind, d.endpoints(), d.length, d.wire_radius, lambda, sph),
        ));
    }
    for (i, s) in scene.scatterers.iter().enumerate() {
        let kind = WireKind::Scatterer(i);
        out.push((
            kind,
            wire_geom(kind, s.endpoints(), s.length, s.wire_radius, lambda, sph),
        ));
    }
    out
}

/// Tag wire geometry for a given pose, using the scene's tag template.
pub fn tag_geom(scene: &Scene, center: Position3, orientation: crate::scene::OrientationAngles, sph: usize) -> WireGeom {
    let t = &scene.tag_template;
    let half = orientation.axis() * (t.length / 2.0);
    wire_geom(
        WireKind::Tag,
        (center - half, center + half),
        t.length,
        t.wire_radius,
        scene.wavelength(),
        sph,
    )
}

/// Segments the whole scene, tag included.
pub fn mesh_scene(scene: &Scene, segments_per_halfwave: usize) -> Result<MeshedScene, MomError> {
    check_segments_per_halfwave(segments_per_halfwave)?;
    scene.validate()?;
    let ground = scene.ground.present.then_some(scene.ground.height_z);
    let mut mesh = MeshedScene::from_wires(
        scene.frequency_hz,
        segments_per_halfwave,
        scene_wires(scene, true, segments_per_halfwave),
        ground,
    )?;
    if let Some(r) = mesh.reader_port {
        mesh.load_table.insert(r, scene.reader.load);
    }
    if let Some(t) = mesh.tag_port {
        mesh.load_table.insert(t, scene.tag_template.load);
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{preset_scene, Preset};

    #[test]
    fn los_preset_counts() {
        let scene = preset_scene(Preset::LosCrossPol).unwrap().scene;
        let mesh = mesh_scene(&scene, 11).unwrap();
        assert_eq!(mesh.segments.len(), 33);
        assert_eq!(mesh.n_real, 33);
        let ports = [mesh.source_port, mesh.reader_port, mesh.tag_port];
        assert_eq!(ports, [Some(5), Some(16), Some(27)]);
    }

    #[test]
    fn table1_counts_with_images() {
        let scene = preset_scene(Preset::Table1Scattering).unwrap().scene;
        let mesh = mesh_scene(&scene, 11).unwrap();
        assert_eq!(mesh.n_real, 23 * 11);
        assert_eq!(mesh.segments.len(), 2 * 23 * 11);
        for k in 0..mesh.n_real {
            let (r, i) = (mesh.segments[k], mesh.segments[k + mesh.n_real]);
            assert!(!r.image && i.image);
            assert_eq!(i.start.z, -r.start.z);
            assert_eq!(i.start.x, r.start.x);
        }
    }

    #[test]
    fn segment_rules() {
        let scene = preset_scene(Preset::LosCrossPol).unwrap().scene;
        assert!(matches!(mesh_scene(&scene, 10), Err(MomError::EvenSegments(10))));
        assert!(matches!(mesh_scene(&scene, 3), Err(MomError::TooFewSegments(3))));
        let lambda = scene.wavelength();
        assert_eq!(segment_count(lambda / 2.0, lambda, 11, true), 11);
        assert_eq!(segment_count(lambda / 2.0, lambda, 21, true), 21);
        assert_eq!(segment_count(0.8 * lambda, lambda, 11, false), 18);
        let mesh = mesh_scene(&scene, 5).unwrap();
        for s in &mesh.segments {
            assert!(s.start.distance(s.end) <= lambda / 10.0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn ground_intersection_and_overlap() {
        let g = WireGeom::straight(Position3::new(0.0, 0.0, -0.1), Position3::new(0.0, 0.0, 0.1), 1e-3, 5);
        assert!(matches!(
            MeshedScene::from_wires(2.4e9, 5, vec![(WireKind::Extra(0), g.clone())], Some(0.0)),
            Err(MomError::GroundIntersection(_))
        ));
        let h = WireGeom::straight(Position3::new(-0.1, 0.0, 0.0), Position3::new(0.1, 0.0, 0.0), 1e-3, 5);
        assert!(matches!(
            MeshedScene::from_wires(2.4e9, 5, vec![(WireKind::Extra(0), g), (WireKind::Extra(1), h)], None),
            Err(MomError::Overlap { .. })
        ));
    }

    #[test]
    fn charge_cells_tile_the_wire() {
        let g = WireGeom::straight(Position3::new(0.0, 0.0, 0.0), Position3::new(0.0, 0.0, 1.0), 1e-3, 5);
        let total: f64 = (0..=5).map(|a| g.charge_cell(a).len).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((g.charge_cell(0).len - 0.1).abs() < 1e-12);
        assert!((g.charge_cell(2).len - 0.2).abs() < 1e-12);
    }
}
