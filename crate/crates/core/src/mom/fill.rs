//! Impedance-matrix entries for pulse-basis currents with point matching at
//! segment centers.
//!
//! The current on segment `j` is constant along the segment direction. Its
//! charge is smeared uniformly over the charge cells around the segment's two
//! end points, so the scalar-potential term becomes a second difference of
//! cell-averaged kernel integrals. Potentials are sampled at charge-cell
//! centroids: the node itself in the interior, a quarter segment in from each
//! wire tip.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::linalg::CMatrix;
use super::mesh::{MeshedScene, WireGeom};
use super::quad::kernel_integral;
use crate::scene::SPEED_OF_LIGHT;

pub const MU0: f64 = 4.0e-7 * PI;

pub fn epsilon0() -> f64 {
    1.0 / (MU0 * SPEED_OF_LIGHT * SPEED_OF_LIGHT)
}

/// Frequency-dependent constants of the field equations.
#[derive(Debug, Clone, Copy)]
pub struct Consts {
    pub k: f64,
    /// `jωμ / 4π`
    pub vector_coef: Complex64,
    /// `1 / (jωε 4π)`
    pub scalar_coef: Complex64,
}

impl Consts {
    pub fn new(frequency_hz: f64) -> Self {
        let omega = 2.0 * PI * frequency_hz;
        Self {
            k: omega / SPEED_OF_LIGHT,
            vector_coef: Complex64::new(0.0, omega * MU0 / (4.0 * PI)),
            scalar_coef: Complex64::new(0.0, -1.0 / (omega * epsilon0() * 4.0 * PI)),
        }
    }
}

/// Voltage induced on each segment of `obs` by a unit current on each
/// segment of `src` (rows: observation segments, columns: source segments).
/// The reduced kernel uses the source wire's radius.
pub fn raw_block(obs: &WireGeom, src: &WireGeom, c: &Consts) -> CMatrix {
    let mo = obs.segments();
    let ms = src.segments();
    let a = src.radius;
    let cells: Vec<_> = (0..=ms).map(|j| src.charge_cell(j)).collect();
    // phi[b][j]: cell-averaged kernel of source cell j seen at the centroid of
    // observation cell b
    let mut phi = vec![Complex64::new(0.0, 0.0); (mo + 1) * (ms + 1)];
    for b in 0..=mo {
        let p = obs.charge_cell(b).center();
        for (j, cell) in cells.iter().enumerate() {
            phi[b * (ms + 1) + j] = kernel_integral(cell, p, a, c.k) / cell.len;
        }
    }
    let src_lines: Vec<_> = (0..ms).map(|j| src.segment(j)).collect();
    let mut out = CMatrix::zeros(mo, ms);
    for i in 0..mo {
        let line_i = obs.segment(i);
        let ci = line_i.center();
        for (j, line_j) in src_lines.iter().enumerate() {
            let vec_part = c.vector_coef
                * (line_i.len * line_i.dir.dot(line_j.dir))
                * kernel_integral(line_j, ci, a, c.k);
            let f = |b: usize, jj: usize| phi[b * (ms + 1) + jj];
            let second = f(i + 1, j + 1) - f(i + 1, j) - f(i, j + 1) + f(i, j);
            out[(i, j)] = vec_part + c.scalar_coef * second;
        }
    }
    out
}

/// `raw(obs ← src)` minus the contribution of `src`'s image in the ground
/// plane, if any.
pub fn folded_block(obs: &WireGeom, src: &WireGeom, ground_z: Option<f64>, c: &Consts) -> CMatrix {
    let mut block = raw_block(obs, src, c);
    if let Some(h) = ground_z {
        let img = raw_block(obs, &src.mirrored(h), c);
        for (v, w) in block.as_mut_slice().iter_mut().zip(img.as_slice()) {
            *v -= w;
        }
    }
    block
}

/// Symmetrized coupling between two wires: entry `(i, j)` is the average of
/// the folded `obs ← src` and `src ← obs` interactions.
pub fn coupling_block(obs: &WireGeom, src: &WireGeom, ground_z: Option<f64>, c: &Consts) -> CMatrix {
    let forward = folded_block(obs, src, ground_z, c);
    let backward = folded_block(src, obs, ground_z, c);
    let mut out = forward;
    for i in 0..out.rows() {
        for j in 0..out.cols() {
            out[(i, j)] = 0.5 * (out[(i, j)] + backward[(j, i)]);
        }
    }
    out
}

/// Unloaded, complex-symmetric impedance matrix of the real segments with
/// images folded in.
pub fn impedance_matrix(mesh: &MeshedScene) -> CMatrix {
    let c = Consts::new(mesh.frequency_hz);
    let n = mesh.n_real;
    let mut folded = CMatrix::zeros(n, n);
    for wo in &mesh.wires {
        for ws in &mesh.wires {
            let b = folded_block(&wo.geom, &ws.geom, mesh.ground_z, &c);
            for i in 0..b.rows() {
                for j in 0..b.cols() {
                    folded[(wo.first_segment + i, ws.first_segment + j)] = b[(i, j)];
                }
            }
        }
    }
    let mut z = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            z[(i, j)] = 0.5 * (folded[(i, j)] + folded[(j, i)]);
        }
    }
    z
}
