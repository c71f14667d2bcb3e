//! PNG rendering of grid maps on a fixed dB color scale.
//!
//! Values are clamped to `[lo, hi]` and quantized to bands of `step` dB, then
//! mapped onto a five-stop palette running dark blue, blue, teal, yellow,
//! red. Masked cells are mid gray. North (larger y) is at the top.

use anyhow::Result;
use image::{codecs::png::PngEncoder, ImageEncoder, Rgb, RgbImage};

/// Pixels per grid cell edge.
pub const CELL_PIXELS: u32 = 8;

const PALETTE: [[f64; 3]; 5] = [
    [20.0, 24.0, 82.0],
    [33.0, 102.0, 172.0],
    [42.0, 160.0, 140.0],
    [245.0, 220.0, 60.0],
    [200.0, 30.0, 30.0],
];
const MASKED: Rgb<u8> = Rgb([128, 128, 128]);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorScale {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl ColorScale {
    pub fn color(&self, v: f64) -> Rgb<u8> {
        if v.is_nan() {
            return MASKED;
        }
        let clamped = v.clamp(self.lo, self.hi);
        let banded = self.lo + ((clamped - self.lo) / self.step).floor() * self.step;
        let t = ((banded - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0);
        let x = t * (PALETTE.len() - 1) as f64;
        let i = (x.floor() as usize).min(PALETTE.len() - 2);
        let f = x - i as f64;
        let mut c = [0u8; 3];
        for k in 0..3 {
            c[k] = (PALETTE[i][k] + f * (PALETTE[i + 1][k] - PALETTE[i][k])).round() as u8;
        }
        Rgb(c)
    }
}

/// Renders `values` (row-major, x fastest, NaN = masked) as PNG bytes.
pub fn render_png(values: &[f64], nx: usize, ny: usize, scale: &ColorScale) -> Result<Vec<u8>> {
    assert_eq!(values.len(), nx * ny);
    let (w, h) = (nx as u32 * CELL_PIXELS, ny as u32 * CELL_PIXELS);
    let img = RgbImage::from_fn(w, h, |px, py| {
        let cx = (px / CELL_PIXELS) as usize;
        let cy = ny - 1 - (py / CELL_PIXELS) as usize;
        scale.color(values[cy * nx + cx])
    });
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(img.as_raw(), w, h, image::ExtendedColorType::Rgb8)?;
    Ok(out)
}
