//! Measurement-rate sweeps: one row per (image, rate, seed, method).

use std::io::Write;

use rayon::prelude::*;

use crate::bundle::Weighting;
use crate::image::Image;
use crate::pipeline::{evaluate, memory_estimate, recover, sense, RecoverOptions, SenseOptions};
use crate::{CliError, Result};

pub const THREADS_ENV: &str = "BIGCS_THREADS";
pub const CURVE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Tree,
    NoWeights,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Tree => "tssp",
            Method::NoWeights => "no-weights",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchImage {
    pub id: String,
    pub image: Image,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub images: Vec<BenchImage>,
    pub rates: Vec<f64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub sense: SenseOptions,
    pub recover: RecoverOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub image: String,
    pub side: usize,
    pub rate: f64,
    pub seed: u64,
    pub method: Method,
    pub seconds: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub iterations: usize,
    /// Iterations of the first (cold-start) solve to reach a normalized error of 1e-3.
    pub iterations_to_threshold: usize,
    pub memory_bytes: usize,
    pub error: Option<String>,
}

/// `(F(x^k) - F(x*)) / F(x^k)` of the first solve of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub image: String,
    pub rate: f64,
    pub seed: u64,
    pub method: Method,
    pub normalized_errors: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Cell<'a> {
    image: &'a BenchImage,
    rate: f64,
    seed: u64,
    method: Method,
}

fn run_cell(cell: Cell<'_>, cfg: &BenchConfig) -> (BenchRow, Option<Curve>) {
    let n = cell.image.image.width * cell.image.image.height;
    let mut row = BenchRow {
        image: cell.image.id.clone(),
        side: cell.image.image.width,
        rate: cell.rate,
        seed: cell.seed,
        method: cell.method,
        seconds: f64::NAN,
        psnr: f64::NAN,
        ssim: f64::NAN,
        iterations: 0,
        iterations_to_threshold: 0,
        memory_bytes: 0,
        error: None,
    };
    let outcome = (|| -> Result<_> {
        let opts = SenseOptions {
            rate: cell.rate,
            seed: cell.seed,
            weighting: match cell.method {
                Method::Tree => Weighting::Tree,
                Method::NoWeights => Weighting::None,
            },
            ..cfg.sense
        };
        let bundle = sense(&cell.image.image, &opts)?;
        let rec = recover(&bundle, &cfg.recover)?;
        let quality = evaluate(&cell.image.image, &rec.to_image(), bundle.peak)?;
        Ok((bundle.m(), rec, quality))
    })();
    match outcome {
        Ok((m, rec, quality)) => {
            let first = &rec.recovery.stages[0].trace;
            row.seconds = rec.seconds;
            row.psnr = quality.psnr;
            row.ssim = quality.ssim;
            row.iterations = rec.iterations();
            row.iterations_to_threshold = first.iterations_to(CURVE_THRESHOLD);
            row.memory_bytes = memory_estimate(n, m);
            let curve = Curve {
                image: row.image.clone(),
                rate: row.rate,
                seed: row.seed,
                method: row.method,
                normalized_errors: first.normalized_errors(),
            };
            (row, Some(curve))
        }
        Err(e) => {
            row.error = Some(e.to_string());
            (row, None)
        }
    }
}

/// Thread cap from `BIGCS_THREADS`; `None` leaves rayon's default.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(CliError::BadInput(format!("{THREADS_ENV}={v} is not a positive integer"))),
            Ok(k) => Ok(Some(k)),
        },
        Err(_) => Ok(None),
    }
}

/// Runs every cell; rows come back in (image, rate, seed, method) order whatever
/// the scheduling. Failed cells are reported in their row.
pub fn run(cfg: &BenchConfig, threads: Option<usize>) -> Result<(Vec<BenchRow>, Vec<Curve>)> {
    let mut cells = Vec::new();
    for image in &cfg.images {
        for &rate in &cfg.rates {
            for &seed in &cfg.seeds {
                for &method in &cfg.methods {
                    cells.push(Cell {
                        image,
                        rate,
                        seed,
                        method,
                    });
                }
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        builder = builder.num_threads(k);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::BadInput(format!("thread pool: {e}")))?;
    let results: Vec<(BenchRow, Option<Curve>)> =
        pool.install(|| cells.par_iter().map(|&c| run_cell(c, cfg)).collect());
    let (rows, curves): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok((rows, curves.into_iter().flatten().collect()))
}

pub const ROW_HEADER: [&str; 12] = [
    "image",
    "n",
    "mr",
    "seed",
    "method",
    "seconds",
    "psnr_db",
    "ssim",
    "iterations",
    "iterations_to_1e-3",
    "memory_bytes",
    "error",
];

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn write_rows<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::BadInput(format!("writing CSV: {e}"));
    w.write_record(ROW_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.image.clone(),
            (r.side * r.side).to_string(),
            r.rate.to_string(),
            r.seed.to_string(),
            r.method.name().to_string(),
            fmt_f64(r.seconds),
            fmt_f64(r.psnr),
            fmt_f64(r.ssim),
            r.iterations.to_string(),
            r.iterations_to_threshold.to_string(),
            r.memory_bytes.to_string(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io("flushing CSV", e))
}

pub fn write_curves<W: Write>(out: W, curves: &[Curve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::BadInput(format!("writing CSV: {e}"));
    w.write_record(["image", "mr", "seed", "method", "iteration", "normalized_error"])
        .map_err(err)?;
    for c in curves {
        for (k, e) in c.normalized_errors.iter().enumerate() {
            w.write_record([
                c.image.clone(),
                c.rate.to_string(),
                c.seed.to_string(),
                c.method.name().to_string(),
                k.to_string(),
                format!("{e:e}"),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| CliError::io("flushing CSV", e))
}
