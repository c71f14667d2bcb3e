//! Loaded systems, excitation, and rank-one tag-state switching.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use super::fill::impedance_matrix;
use super::linalg::{CMatrix, Lu, LuError};
use super::mesh::MeshedScene;
use super::MomError;

/// Solutions are rejected above this estimated 1-norm condition number.
pub const MAX_CONDITION: f64 = 1e12;
/// Rank-one updates with a smaller denominator fall back to a full solve.
pub const MIN_UPDATE_DENOMINATOR: f64 = 1e-14;

#[derive(Debug)]
struct Factor {
    lu: Lu,
    condition: f64,
}

/// Impedance matrix plus the loads applied to it. The factorization is
/// computed on first use and shared between clones.
#[derive(Debug, Clone)]
pub struct SolveContext {
    pub frequency_hz: f64,
    impedance: Arc<CMatrix>,
    n_real: usize,
    n_total: usize,
    loads: BTreeMap<usize, Complex64>,
    factor: Arc<OnceLock<Result<Factor, MomError>>>,
}

/// Segment currents for one excitation. `perturbation` records an extra
/// diagonal term `(port, δ)` solved via a rank-one update.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub currents: Vec<Complex64>,
    pub source_port: usize,
    pub v_source: Complex64,
    pub perturbation: Option<(usize, Complex64)>,
    pub used_fallback: bool,
}

/// Current, load voltage and dissipated power at a loaded port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortReading {
    pub current: Complex64,
    pub voltage: Complex64,
    pub power_w: f64,
}

impl PortReading {
    pub fn new(current: Complex64, load: Complex64) -> Self {
        Self {
            current,
            voltage: load * current,
            power_w: load_power(current, load),
        }
    }
}

/// Time-average power `½|I|² Re(Z)` dissipated in a load.
pub fn load_power(current: Complex64, load: Complex64) -> f64 {
    (0.5 * current.norm_sqr() * load.re).max(0.0)
}

/// Fills the unloaded impedance matrix of `mesh`.
pub fn fill_impedance_matrix(mesh: &MeshedScene) -> SolveContext {
    SolveContext::from_matrix(mesh.frequency_hz, impedance_matrix(mesh), mesh.segments.len())
}

impl SolveContext {
    /// `n_total` counts real plus image segments; indices at or above the
    /// matrix size refer to images.
    pub fn from_matrix(frequency_hz: f64, impedance: CMatrix, n_total: usize) -> Self {
        let n_real = impedance.rows();
        Self {
            frequency_hz,
            impedance: Arc::new(impedance),
            n_real,
            n_total: n_total.max(n_real),
            loads: BTreeMap::new(),
            factor: Arc::new(OnceLock::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.n_real
    }

    /// Unloaded matrix.
    pub fn impedance(&self) -> &CMatrix {
        &self.impedance
    }

    pub fn loads(&self) -> &BTreeMap<usize, Complex64> {
        &self.loads
    }

    pub fn load_at(&self, segment: usize) -> Complex64 {
        self.loads.get(&segment).copied().unwrap_or_default()
    }

    /// Matrix with loads on the diagonal.
    pub fn loaded_matrix(&self) -> CMatrix {
        let mut m = (*self.impedance).clone();
        for (&k, &z) in &self.loads {
            m[(k, k)] += z;
        }
        m
    }

    /// Adds `loads` to the diagonal (accumulating with existing loads).
    pub fn apply_loads(&self, loads: &BTreeMap<usize, Complex64>) -> Result<Self, MomError> {
        let mut out = self.clone();
        for (&k, &z) in loads {
            if k >= self.n_total {
                return Err(MomError::InvalidLoad {
                    segment: k,
                    reason: format!("index out of range ({} segments)", self.n_total),
                });
            }
            if k >= self.n_real {
                return Err(MomError::InvalidLoad {
                    segment: k,
                    reason: "image segments cannot carry loads".into(),
                });
            }
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(MomError::InvalidLoad {
                    segment: k,
                    reason: "non-finite impedance".into(),
                });
            }
            *out.loads.entry(k).or_default() += z;
        }
        out.factor = Arc::new(OnceLock::new());
        Ok(out)
    }

    fn factor(&self) -> Result<&Factor, MomError> {
        self.factor
            .get_or_init(|| {
                let lu = Lu::factor(&self.loaded_matrix()).map_err(|e| match e {
                    LuError::Singular { column } => MomError::Singular { column },
                })?;
                let condition = lu.condition_estimate();
                if !(condition <= MAX_CONDITION) {
                    return Err(MomError::IllConditioned { estimate: condition });
                }
                Ok(Factor { lu, condition })
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn condition_estimate(&self) -> Result<f64, MomError> {
        Ok(self.factor()?.condition)
    }

    pub fn lu(&self) -> Result<&Lu, MomError> {
        Ok(&self.factor()?.lu)
    }

    fn check_port(&self, port: usize) -> Result<(), MomError> {
        if port >= self.n_real {
            Err(MomError::InvalidPort(port))
        } else {
            Ok(())
        }
    }

    /// Solves `Z I = V` with a delta-gap `v_source` at `source_port`.
    pub fn excite_and_solve(&self, source_port: usize, v_source: Complex64) -> Result<Solution, MomError> {
        self.check_port(source_port)?;
        let mut v = vec![Complex64::new(0.0, 0.0); self.n_real];
        v[source_port] = v_source;
        Ok(Solution {
            currents: self.lu()?.solve(&v),
            source_port,
            v_source,
            perturbation: None,
            used_fallback: false,
        })
    }

    /// Arbitrary right-hand side.
    pub fn solve_rhs(&self, v: &[Complex64]) -> Result<Vec<Complex64>, MomError> {
        if v.len() != self.n_real {
            return Err(MomError::InvalidPort(v.len()));
        }
        Ok(self.lu()?.solve(v))
    }

    /// Solution of the system whose `tag_port` diagonal differs from
    /// `base`'s by `delta_z`, via a Sherman–Morrison update.
    pub fn switch_tag_state(
        &self,
        tag_port: usize,
        delta_z: Complex64,
        base: &Solution,
    ) -> Result<Solution, MomError> {
        self.check_port(tag_port)?;
        let prior = match base.perturbation {
            None => Complex64::new(0.0, 0.0),
            Some((p, d)) if p == tag_port => d,
            Some((p, _)) => return Err(MomError::PerturbedElsewhere { port: p }),
        };
        let total = prior + delta_z;
        if delta_z == Complex64::new(0.0, 0.0) {
            return Ok(base.clone());
        }
        let lu = self.lu()?;
        let mut e = vec![Complex64::new(0.0, 0.0); self.n_real];
        e[tag_port] = Complex64::new(1.0, 0.0);
        let w0 = lu.solve(&e);
        let d0 = Complex64::new(1.0, 0.0) + prior * w0[tag_port];
        if d0.norm() < MIN_UPDATE_DENOMINATOR {
            return self.full_solve(base, tag_port, delta_z);
        }
        // column `tag_port` of the inverse of the base system
        let w: Vec<Complex64> = w0.iter().map(|x| x / d0).collect();
        let denom = Complex64::new(1.0, 0.0) + delta_z * w[tag_port];
        if denom.norm() < MIN_UPDATE_DENOMINATOR {
            return self.full_solve(base, tag_port, delta_z);
        }
        let scale = delta_z * base.currents[tag_port] / denom;
        let currents = base
            .currents
            .iter()
            .zip(&w)
            .map(|(x, wi)| x - scale * wi)
            .collect();
        Ok(Solution {
            currents,
            source_port: base.source_port,
            v_source: base.v_source,
            perturbation: (total != Complex64::new(0.0, 0.0)).then_some((tag_port, total)),
            used_fallback: false,
        })
    }

    fn full_solve(&self, base: &Solution, tag_port: usize, delta_z: Complex64) -> Result<Solution, MomError> {
        let total = base.perturbation.map_or(Complex64::new(0.0, 0.0), |(_, d)| d) + delta_z;
        let ctx = self.apply_loads(&BTreeMap::from([(tag_port, total)]))?;
        let mut sol = ctx.excite_and_solve(base.source_port, base.v_source)?;
        sol.perturbation = Some((tag_port, total));
        sol.used_fallback = true;
        Ok(sol)
    }

    /// Reading at a loaded port, including any perturbation in `sol`.
    pub fn port_reading(&self, sol: &Solution, port: usize) -> Result<PortReading, MomError> {
        self.check_port(port)?;
        let mut load = self.load_at(port);
        if let Some((p, d)) = sol.perturbation {
            if p == port {
                load += d;
            }
        }
        Ok(PortReading::new(sol.currents[port], load))
    }

    /// Power delivered by the source generator, `½ Re(V I*)`.
    pub fn input_power(&self, sol: &Solution) -> f64 {
        0.5 * (sol.v_source * sol.currents[sol.source_port].conj()).re
    }
}
