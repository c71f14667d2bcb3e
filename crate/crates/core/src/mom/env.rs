//! Tag sweeps over a fixed environment.
//!
//! With the environment unknowns `x` and tag unknowns `y`, the full system is
//!
//! ```text
//! [ A   C ] [x]   [v]
//! [ Cᵀ  B ] [y] = [0]
//! ```
//!
//! so `x = A⁻¹v − A⁻¹C y` and `(B − Cᵀ A⁻¹ C) y = −Cᵀ A⁻¹ v`. The environment
//! inverse is computed once; each pose only needs the coupling block `C`, a
//! product with `A⁻¹`, and a solve of size equal to the tag's segment count.

use num_complex::Complex64;

use super::fill::{coupling_block, raw_block, Consts};
use super::linalg::{CMatrix, Lu};
use super::mesh::{check_segments_per_halfwave, scene_wires, tag_geom, MeshWire, MeshedScene, WireGeom};
use super::solve::{fill_impedance_matrix, load_power, MIN_UPDATE_DENOMINATOR};
use super::{check_tag_pose, MomError, SolverOptions, TagPowers};
use crate::scene::{OrientationAngles, Position3, Scene};

/// Factorized tag-free environment, shareable read-only across threads.
#[derive(Debug, Clone)]
pub struct EnvironmentSolver {
    scene: Scene,
    opts: SolverOptions,
    consts: Consts,
    ground_z: Option<f64>,
    wires: Vec<MeshWire>,
    source_port: usize,
    reader_port: usize,
    reader_load: Complex64,
    ainv: CMatrix,
    u0: Vec<Complex64>,
    condition: f64,
    /// Symmetrized free-space self block of the tag wire; it does not
    /// depend on the pose.
    tag_self: CMatrix,
}

impl EnvironmentSolver {
    pub fn new(scene: &Scene, opts: &SolverOptions) -> Result<Self, MomError> {
        check_segments_per_halfwave(opts.segments_per_halfwave)?;
        scene.validate()?;
        let ground_z = scene.ground.present.then_some(scene.ground.height_z);
        let mut mesh = MeshedScene::from_wires(
            scene.frequency_hz,
            opts.segments_per_halfwave,
            scene_wires(scene, false, opts.segments_per_halfwave),
            ground_z,
        )?;
        let source_port = mesh.source_port.ok_or(MomError::MissingPort("source"))?;
        let reader_port = mesh.reader_port.ok_or(MomError::MissingPort("reader"))?;
        mesh.load_table.insert(reader_port, scene.reader.load);
        let ctx = fill_impedance_matrix(&mesh).apply_loads(&mesh.load_table)?;
        let lu = ctx.lu()?;
        let condition = ctx.condition_estimate()?;
        let mut v = vec![Complex64::new(0.0, 0.0); ctx.dim()];
        v[source_port] = opts.v_source;
        let u0 = lu.solve(&v);
        let ainv = lu.inverse();
        let template = tag_geom(
            scene,
            scene.tag_template.center,
            scene.tag_template.orientation,
            opts.segments_per_halfwave,
        );
        let consts = Consts::new(scene.frequency_hz);
        let tag_self = coupling_block(&template, &template, None, &consts);
        Ok(Self {
            scene: scene.clone(),
            opts: *opts,
            consts,
            ground_z,
            wires: mesh.wires,
            source_port,
            reader_port,
            reader_load: scene.reader.load,
            ainv,
            u0,
            condition,
            tag_self,
        })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    /// Number of environment unknowns.
    pub fn dim(&self) -> usize {
        self.u0.len()
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    /// Generator power `½ Re(V I*)` with the tag absent.
    pub fn transmit_power(&self) -> f64 {
        0.5 * (self.opts.v_source * self.u0[self.source_port].conj()).re
    }

    /// Reader power with the tag absent.
    pub fn direct_reader_power(&self) -> f64 {
        load_power(self.u0[self.reader_port], self.reader_load)
    }

    /// Validates a pose and returns the tag wire for it.
    pub fn tag_wire(&self, center: Position3, orientation: OrientationAngles) -> Result<WireGeom, MomError> {
        check_tag_pose(&self.scene, center, orientation)?;
        let tag = tag_geom(&self.scene, center, orientation, self.opts.segments_per_halfwave);
        if let Some(h) = self.ground_z {
            if tag.min_z() <= h {
                return Err(MomError::GroundIntersection("Tag".into()));
            }
        }
        for w in &self.wires {
            let distance = tag.distance_to(&w.geom);
            if distance < tag.radius + w.geom.radius {
                return Err(MomError::Overlap {
                    a: "Tag".into(),
                    b: format!("{:?}", w.kind),
                    distance,
                });
            }
        }
        Ok(tag)
    }

    pub fn tag_transfer(&self, center: Position3, orientation: OrientationAngles) -> Result<TagPowers, MomError> {
        self.tag_transfer_batch(center, &[orientation])
            .pop()
            .expect("one result per orientation")
    }

    /// Both tag states for every orientation at one position.
    pub fn tag_transfer_batch(
        &self,
        center: Position3,
        orientations: &[OrientationAngles],
    ) -> Vec<Result<TagPowers, MomError>> {
        let n = self.dim();
        let mut results: Vec<Option<Result<TagPowers, MomError>>> = vec![None; orientations.len()];
        let mut valid: Vec<(usize, WireGeom)> = Vec::new();
        for (i, o) in orientations.iter().enumerate() {
            match self.tag_wire(center, *o) {
                Ok(g) => valid.push((i, g)),
                Err(e) => results[i] = Some(Err(e)),
            }
        }
        if !valid.is_empty() {
            let t = valid[0].1.segments();
            let cols = valid.len() * t;
            let mut c_all = CMatrix::zeros(n, cols);
            let mut self_blocks = Vec::with_capacity(valid.len());
            for (v, (_, tag)) in valid.iter().enumerate() {
                for w in &self.wires {
                    let b = coupling_block(&w.geom, tag, self.ground_z, &self.consts);
                    for i in 0..b.rows() {
                        for j in 0..t {
                            c_all[(w.first_segment + i, v * t + j)] = b[(i, j)];
                        }
                    }
                }
                self_blocks.push(self.tag_self_block(tag));
            }
            let g_all = self.ainv.matmul(&c_all);
            for (v, (idx, _)) in valid.iter().enumerate() {
                let r = self.solve_tag(&c_all, &g_all, &self_blocks[v], v * t, t);
                results[*idx] = Some(r);
            }
        }
        results.into_iter().map(|r| r.expect("filled")).collect()
    }

    fn tag_self_block(&self, tag: &WireGeom) -> CMatrix {
        let mut b = self.tag_self.clone();
        if let Some(h) = self.ground_z {
            let img = raw_block(tag, &tag.mirrored(h), &self.consts);
            let t = b.rows();
            for i in 0..t {
                for j in 0..t {
                    b[(i, j)] -= 0.5 * (img[(i, j)] + img[(j, i)]);
                }
            }
        }
        b
    }

    fn solve_tag(
        &self,
        c_all: &CMatrix,
        g_all: &CMatrix,
        b: &CMatrix,
        col0: usize,
        t: usize,
    ) -> Result<TagPowers, MomError> {
        let n = self.dim();
        let port = t / 2;
        let mut s = b.clone();
        s[(port, port)] += self.opts.z_on;
        let mut rhs = vec![Complex64::new(0.0, 0.0); t];
        for i in 0..n {
            let ci = &c_all.row(i)[col0..col0 + t];
            let gi = &g_all.row(i)[col0..col0 + t];
            let ui = self.u0[i];
            for a in 0..t {
                let ca = ci[a];
                rhs[a] -= ca * ui;
                for (bb, g) in gi.iter().enumerate() {
                    s[(a, bb)] -= ca * g;
                }
            }
        }
        let lu = Lu::factor(&s).map_err(|e| match e {
            super::linalg::LuError::Singular { column } => MomError::Singular { column },
        })?;
        let y_on = lu.solve(&rhs);
        let delta = self.opts.z_open - self.opts.z_on;
        let mut e = vec![Complex64::new(0.0, 0.0); t];
        e[port] = Complex64::new(1.0, 0.0);
        let w = lu.solve(&e);
        let denom = Complex64::new(1.0, 0.0) + delta * w[port];
        let (y_off, used_fallback) = if denom.norm() < MIN_UPDATE_DENOMINATOR {
            let mut s_off = s.clone();
            s_off[(port, port)] += delta;
            let lu_off = Lu::factor(&s_off).map_err(|e| match e {
                super::linalg::LuError::Singular { column } => MomError::Singular { column },
            })?;
            (lu_off.solve(&rhs), true)
        } else {
            let scale = delta * y_on[port] / denom;
            (y_on.iter().zip(&w).map(|(y, wi)| y - scale * wi).collect(), false)
        };
        let g_r = &g_all.row(self.reader_port)[col0..col0 + t];
        let reader = |y: &[Complex64]| -> Complex64 {
            self.u0[self.reader_port] - g_r.iter().zip(y).map(|(g, yy)| g * yy).sum::<Complex64>()
        };
        let reader_on = reader(&y_on);
        let reader_off = reader(&y_off);
        Ok(TagPowers {
            p_on: load_power(reader_on, self.reader_load),
            p_off: load_power(reader_off, self.reader_load),
            reader_on,
            reader_off,
            used_fallback,
        })
    }
}
