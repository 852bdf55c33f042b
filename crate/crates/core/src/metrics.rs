//! PSNR and SSIM between a reference and a reconstruction.

use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Two equally sized images, column-major or row-major alike, with dynamic range `peak`.
#[derive(Debug, Clone, Copy)]
pub struct ImagePair<'a> {
    reference: &'a [f64],
    reconstructed: &'a [f64],
    width: usize,
    height: usize,
    peak: f64,
}

impl<'a> ImagePair<'a> {
    pub fn new(
        reference: &'a [f64],
        reconstructed: &'a [f64],
        width: usize,
        height: usize,
        peak: f64,
    ) -> Result<Self> {
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::InvalidShape("image dimensions overflow".into()))?;
        if reference.len() != n || reconstructed.len() != n {
            return Err(Error::InvalidShape(format!(
                "expected {width}x{height} = {n} pixels, got {} and {}",
                reference.len(),
                reconstructed.len()
            )));
        }
        if n == 0 {
            return Err(Error::InvalidShape("empty image".into()));
        }
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(Error::Domain(format!("dynamic range must be positive, got {peak}")));
        }
        Ok(Self {
            reference,
            reconstructed,
            width,
            height,
            peak,
        })
    }

    /// Square `side x side` images.
    pub fn square(reference: &'a [f64], reconstructed: &'a [f64], side: usize, peak: f64) -> Result<Self> {
        Self::new(reference, reconstructed, side, side, peak)
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }
}

pub fn mse(pair: &ImagePair<'_>) -> f64 {
    let sum: f64 = pair
        .reference
        .iter()
        .zip(pair.reconstructed)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    sum / pair.reference.len() as f64
}

/// `10 log10(L^2 / MSE)` in dB; `+inf` for identical images.
pub fn psnr(pair: &ImagePair<'_>) -> f64 {
    let e = mse(pair);
    if e == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (pair.peak * pair.peak / e).log10()
    }
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let t = i as f64 - c;
        *v = (-t * t / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable valid-mode filtering of a row-major `width x height` field.
fn filter_valid(field: &[f64], width: usize, height: usize, w: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = width - SSIM_WINDOW + 1;
    let oh = height - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; ow * height];
    for r in 0..height {
        let row = &field[r * width..(r + 1) * width];
        for c in 0..ow {
            horiz[r * ow + c] = w.iter().zip(&row[c..c + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for (k, wk) in w.iter().enumerate() {
            let src = &horiz[(r + k) * ow..(r + k + 1) * ow];
            for (o, s) in out[r * ow..(r + 1) * ow].iter_mut().zip(src) {
                *o += wk * s;
            }
        }
    }
    out
}

/// Mean local SSIM over every fully contained 11x11 Gaussian window.
pub fn ssim(pair: &ImagePair<'_>) -> Result<f64> {
    let (width, height) = (pair.width, pair.height);
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        return Err(Error::Domain(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {width}x{height}"
        )));
    }
    let w = gaussian_window();
    let x = pair.reference;
    let y = pair.reconstructed;
    let filt = |f: &[f64]| filter_valid(f, width, height, &w);
    let mu_x = filt(x);
    let mu_y = filt(y);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let (s_xx, s_yy, s_xy) = (filt(&xx), filt(&yy), filt(&xy));

    let c1 = (SSIM_K1 * pair.peak).powi(2);
    let c2 = (SSIM_K2 * pair.peak).powi(2);
    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = s_xx[i] - mx * mx;
        let vy = s_yy[i] - my * my;
        let cov = s_xy[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
            / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / mu_x.len() as f64)
}
