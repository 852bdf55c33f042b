//! In-memory sense, recover and evaluate steps shared by the commands.

use std::sync::Arc;
use std::time::Instant;

use bigcs_core::linop::{srm_op, LinearOperator, Operator, SrmSpec};
use bigcs_core::metrics::{psnr, ssim, ImagePair};
use bigcs_core::solver::{LambdaRule, SolverParams};
use bigcs_core::tssp::{recover_tssp, recover_unweighted, EpsilonRule, Recovery, TsspConfig};
use bigcs_core::wavelet::{wavelet_synthesis_op, WaveletLayout};

use crate::bundle::{MeasurementBundle, Weighting};
use crate::image::{quantize, Depth, Image};
use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SenseOptions {
    pub rate: f64,
    pub seed: u64,
    pub levels: Option<usize>,
    pub lambda: LambdaRule,
    pub weighting: Weighting,
    pub p_percent: f64,
    pub epsilon: EpsilonRule,
    /// Dynamic range; defaults to the one implied by the image depth.
    pub peak: Option<f64>,
}

impl Default for SenseOptions {
    fn default() -> Self {
        let tssp = TsspConfig::default();
        Self {
            rate: 0.25,
            seed: 0,
            levels: None,
            lambda: tssp.lambda,
            weighting: Weighting::Tree,
            p_percent: tssp.p_percent,
            epsilon: tssp.epsilon,
            peak: None,
        }
    }
}

/// `y = Phi vec(U)` packed with everything recovery needs.
pub fn sense(img: &Image, opts: &SenseOptions) -> Result<MeasurementBundle> {
    if !img.is_square_pow2() {
        return Err(CliError::BadInput(format!(
            "image is {}x{}; sensing needs a power-of-two square",
            img.width, img.height
        )));
    }
    if !(opts.rate > 0.0 && opts.rate <= 1.0) {
        return Err(CliError::BadInput(format!("measurement rate {} not in (0, 1]", opts.rate)));
    }
    let side = img.width;
    let levels = opts.levels.unwrap_or_else(|| WaveletLayout::default_levels(side));
    WaveletLayout::new(side, levels)?;
    let peak = opts.peak.unwrap_or_else(|| img.depth.peak());
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(CliError::BadInput(format!("dynamic range must be positive, got {peak}")));
    }
    let spec = SrmSpec::from_rate(side * side, opts.rate, opts.seed)?;
    let y = srm_op(spec)?.forward(&img.to_column_major());
    Ok(MeasurementBundle {
        side: side as u32,
        seed: opts.seed,
        levels: levels as u8,
        lambda: opts.lambda,
        weighting: opts.weighting,
        p_percent: opts.p_percent,
        epsilon: opts.epsilon,
        peak,
        y,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RecoverOptions {
    pub solver: SolverParams,
    /// Forces `W = I` regardless of the bundle.
    pub no_weights: bool,
    pub no_warm_start: bool,
    pub levels: Option<usize>,
    pub lambda: Option<LambdaRule>,
    pub p_percent: Option<f64>,
    pub epsilon: Option<EpsilonRule>,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub side: usize,
    pub peak: f64,
    /// Unclamped pixels, row-major.
    pub pixels: Vec<f64>,
    pub recovery: Recovery,
    /// Solver wall-clock, excluding file I/O and operator construction.
    pub seconds: f64,
}

impl Reconstruction {
    /// Clamped and rounded to the output depth.
    pub fn to_image(&self) -> Image {
        let (depth, round) = if self.peak <= 255.0 {
            (Depth::Eight, true)
        } else if self.peak <= 65535.0 {
            (Depth::Sixteen, true)
        } else {
            (Depth::Float, false)
        };
        let pixels = self
            .pixels
            .iter()
            .map(|&v| if round { quantize(v, self.peak) } else { v.clamp(0.0, self.peak) })
            .collect();
        Image {
            width: self.side,
            height: self.side,
            depth,
            pixels,
        }
    }

    /// Clamped to `[0, L]`, not rounded.
    pub fn to_float_image(&self) -> Image {
        Image {
            width: self.side,
            height: self.side,
            depth: Depth::Float,
            pixels: self.pixels.iter().map(|v| v.clamp(0.0, self.peak)).collect(),
        }
    }

    pub fn iterations(&self) -> usize {
        self.recovery.total_iterations()
    }
}

pub fn recover(bundle: &MeasurementBundle, opts: &RecoverOptions) -> Result<Reconstruction> {
    let side = bundle.side as usize;
    let levels = opts.levels.unwrap_or(bundle.levels as usize);
    let layout = WaveletLayout::new(side, levels)?;
    let spec = SrmSpec::new(side * side, bundle.m(), bundle.seed)?;
    let phi: Operator = Arc::new(srm_op(spec)?);
    let lambda = opts.lambda.unwrap_or(bundle.lambda);
    let weighted = bundle.weighting == Weighting::Tree && !opts.no_weights;

    let start = Instant::now();
    let recovery = if weighted {
        let cfg = TsspConfig {
            p_percent: opts.p_percent.unwrap_or(bundle.p_percent),
            epsilon: opts.epsilon.unwrap_or(bundle.epsilon),
            lambda,
            solver: opts.solver,
            warm_start: !opts.no_warm_start,
        };
        recover_tssp(&bundle.y, &phi, &layout, &cfg)?
    } else {
        recover_unweighted(&bundle.y, &phi, &layout, lambda, opts.solver)?
    };
    let seconds = start.elapsed().as_secs_f64();

    let colmajor = wavelet_synthesis_op(layout).forward(&recovery.coefficients);
    let image = Image::from_column_major(side, Depth::Float, &colmajor)?;
    Ok(Reconstruction {
        side,
        peak: bundle.peak,
        pixels: image.pixels,
        recovery,
        seconds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quality {
    pub psnr: f64,
    pub ssim: f64,
}

pub fn evaluate(reference: &Image, reconstructed: &Image, peak: f64) -> Result<Quality> {
    if (reference.width, reference.height) != (reconstructed.width, reconstructed.height) {
        return Err(CliError::BadInput(format!(
            "dimension mismatch: {}x{} vs {}x{}",
            reference.width, reference.height, reconstructed.width, reconstructed.height
        )));
    }
    let pair = ImagePair::new(
        &reference.pixels,
        &reconstructed.pixels,
        reference.width,
        reference.height,
        peak,
    )?;
    Ok(Quality {
        psnr: psnr(&pair),
        ssim: ssim(&pair)?,
    })
}

/// Memory estimate in bytes for recovering an `n`-pixel image from `m` measurements.
pub fn memory_estimate(n: usize, m: usize) -> usize {
    (m + 6 * n) * std::mem::size_of::<f64>()
}
