//! Line integrals of the reduced thin-wire kernel `e^{-jkR}/R` over straight
//! segments, `R = sqrt(|r - r'|² + a²)`.

use num_complex::Complex64;

use crate::scene::Position3;

// On a straight wire, observation distances fall on multiples of a quarter
// segment length; the zone limits sit between them so that rounding cannot
// flip a same-wire entry from one rule to the other.

/// Distance from the segment center, in segment lengths, below which the
/// singular part is integrated analytically.
pub const NEAR_ZONE: f64 = 3.1;
/// Beyond this ratio a single center sample with exact linear-phase
/// integration is used.
pub const FAR_ZONE: f64 = 10.1;

const MAX_DEPTH: u32 = 40;

/// A straight integration path `start + t·dir`, `t ∈ [0, len]`.
#[derive(Debug, Clone, Copy)]
pub struct Line {
    pub start: Position3,
    pub dir: Position3,
    pub len: f64,
}

impl Line {
    pub fn between(a: Position3, b: Position3) -> Self {
        let d = b - a;
        let len = d.norm();
        Self {
            start: a,
            dir: d * (1.0 / len),
            len,
        }
    }

    pub fn center(&self) -> Position3 {
        self.start + self.dir * (0.5 * self.len)
    }

    pub fn end(&self) -> Position3 {
        self.start + self.dir * self.len
    }
}

/// `∫_line e^{-jkR}/R dl` observed at `obs` with reduced radius `a`.
pub fn kernel_integral(line: &Line, obs: Position3, a: f64, k: f64) -> Complex64 {
    let c = line.center();
    let dc = obs - c;
    let rc2 = dc.dot(dc);
    let l = line.len;
    if rc2 >= (FAR_ZONE * l) * (FAR_ZONE * l) {
        let rc = (rc2 + a * a).sqrt();
        let cos_a = dc.dot(line.dir) / rc;
        let x = 0.5 * k * l * cos_a;
        let sinc = if x.abs() < 0.5 {
            // Taylor series, truncation below 1e-16 on this range
            let x2 = x * x;
            1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0 * (1.0 - x2 / 110.0 * (1.0 - x2 / 156.0)))))
        } else {
            x.sin() / x
        };
        // mean quadratic path-length term across the segment
        let curvature = k * l * l * (1.0 - cos_a * cos_a) / (24.0 * rc);
        let (s, co) = (k * rc + curvature).sin_cos();
        return Complex64::new(co, -s) * (l * sinc / rc);
    }
    let d = obs - line.start;
    let t0 = d.dot(line.dir);
    let rho2 = (d.dot(d) - t0 * t0).max(0.0) + a * a;
    if rc2 >= (NEAR_ZONE * l) * (NEAR_ZONE * l) {
        return gauss4(l, |t| full_kernel(t - t0, rho2, k));
    }
    let rho = rho2.sqrt();
    let stat = ((l - t0) / rho).asinh() + (t0 / rho).asinh();
    let tol = 1e-12 * (stat.abs() + k * l);
    let smooth = |t: f64| smooth_kernel(t - t0, rho2, k);
    let rest = if t0 > 0.0 && t0 < l {
        adaptive(&smooth, 0.0, t0, tol / 2.0) + adaptive(&smooth, t0, l, tol / 2.0)
    } else {
        adaptive(&smooth, 0.0, l, tol)
    };
    Complex64::new(stat, 0.0) + rest
}

fn full_kernel(s: f64, rho2: f64, k: f64) -> Complex64 {
    let r = (s * s + rho2).sqrt();
    let (sn, cs) = (k * r).sin_cos();
    Complex64::new(cs / r, -sn / r)
}

/// `(e^{-jkR} - 1)/R`, written to avoid cancellation at small `kR`.
fn smooth_kernel(s: f64, rho2: f64, k: f64) -> Complex64 {
    let r = (s * s + rho2).sqrt();
    let h = (0.5 * k * r).sin();
    Complex64::new(-2.0 * h * h / r, -(k * r).sin() / r)
}

fn gauss4(l: f64, f: impl Fn(f64) -> Complex64) -> Complex64 {
    const X: [f64; 2] = [0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
    const W: [f64; 2] = [0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
    let h = 0.5 * l;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..2 {
        acc += (f(h - h * X[i]) + f(h + h * X[i])) * W[i];
    }
    acc * h
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod-15 estimate and its difference from the embedded Gauss-7 rule.
fn gk15(f: &impl Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * GK_WK[7];
    let mut g = fc * GK_WG[3];
    for i in 0..7 {
        let pair = f(c - h * GK_X[i]) + f(c + h * GK_X[i]);
        k += pair * GK_WK[i];
        if i % 2 == 1 {
            g += pair * GK_WG[i / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

fn adaptive(f: &impl Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    let mut stack = vec![(a, b, tol, 0u32)];
    while let Some((lo, hi, t, depth)) = stack.pop() {
        let (v, err) = gk15(f, lo, hi);
        if err <= t || depth >= MAX_DEPTH {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, t / 2.0, depth + 1));
            stack.push((lo, mid, t / 2.0, depth + 1));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson on a heavily refined, singularity-split grid.
    fn brute(line: &Line, obs: Position3, a: f64, k: f64) -> Complex64 {
        let d = obs - line.start;
        let t0 = d.dot(line.dir);
        let rho2 = (d.dot(d) - t0 * t0).max(0.0) + a * a;
        let f = |t: f64| {
            let r = ((t - t0) * (t - t0) + rho2).sqrt();
            Complex64::new((k * r).cos() / r, -(k * r).sin() / r)
        };
        // graded substitution clusters nodes near t0
        let piece = |lo: f64, hi: f64, toward_lo: bool| {
            let n = 200_000;
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                let u0 = i as f64 / n as f64;
                let u1 = (i + 1) as f64 / n as f64;
                let map = |u: f64| {
                    let w = u * u * u;
                    if toward_lo {
                        lo + (hi - lo) * w
                    } else {
                        hi - (hi - lo) * w
                    }
                };
                let (x0, x1) = (map(u0), map(u1));
                let xm = 0.5 * (x0 + x1);
                acc += (f(x0) + f(xm) * 4.0 + f(x1)) * ((x1 - x0).abs() / 6.0);
            }
            acc
        };
        if t0 > 0.0 && t0 < line.len {
            piece(t0, 0.0, true) + piece(t0, line.len, true)
        } else {
            piece(0.0, line.len, t0 <= 0.0)
        }
    }

    #[test]
    fn near_zone_matches_refined_quadrature() {
        let k = 2.0 * std::f64::consts::PI / 0.125;
        let line = Line::between(Position3::new(0.0, 0.0, 0.0), Position3::new(0.0, 0.0, 0.0114));
        let a = 1.25e-4;
        for obs in [
            Position3::new(0.0, 0.0, 0.0057),
            Position3::new(0.0, 0.0, 0.0171),
            Position3::new(0.003, 0.001, 0.002),
            Position3::new(0.0, 0.0, -0.02),
        ] {
            let got = kernel_integral(&line, obs, a, k);
            let want = brute(&line, obs, a, k);
            assert!((got - want).norm() < 1e-8 * want.norm(), "{obs:?}: {got} vs {want}");
        }
    }

    #[test]
    fn middle_and_far_zones_are_accurate() {
        let k = 2.0 * std::f64::consts::PI / 0.125;
        let line = Line::between(Position3::new(0.0, 0.0, 0.0), Position3::new(0.0, 0.0114, 0.0));
        let a = 1.25e-4;
        for (obs, rel) in [
            (Position3::new(0.04, 0.01, 0.0), 1e-7),
            (Position3::new(0.0, 0.09, 0.0), 1e-7),
            (Position3::new(0.2, 0.1, 0.05), 2e-3),
            (Position3::new(5.0, 0.0, 0.0), 1e-5),
        ] {
            let got = kernel_integral(&line, obs, a, k);
            let want = brute(&line, obs, a, k);
            assert!((got - want).norm() < rel * want.norm(), "{obs:?}: {got} vs {want}");
        }
    }

    #[test]
    fn static_limit_matches_closed_form() {
        let line = Line::between(Position3::new(0.0, 0.0, 0.0), Position3::new(1.0, 0.0, 0.0));
        let a = 0.01;
        let got = kernel_integral(&line, Position3::new(0.5, 0.0, 0.0), a, 0.0);
        let want = 2.0 * (0.5f64 / a).asinh();
        assert!((got.re - want).abs() < 1e-12 && got.im == 0.0);
    }
}
