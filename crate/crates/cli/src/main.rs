use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bigcs::bench::{self, BenchConfig, BenchImage, Method};
use bigcs::bundle::{MeasurementBundle, Weighting};
use bigcs::image::{self, Fit};
use bigcs::pipeline::{self, RecoverOptions, SenseOptions};
use bigcs::{CliError, Result};
use bigcs_core::solver::{LambdaRule, SolverParams};
use bigcs_core::tssp::EpsilonRule;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bigcs", version, about = "Compressive sensing of large grayscale images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure an image into a bundle
    Sense(SenseArgs),
    /// Reconstruct an image from a bundle
    Recover(RecoverArgs),
    /// Compare a reconstruction against its reference
    Eval(EvalArgs),
    /// Sweep images, measurement rates and seeds
    Bench(BenchArgs),
}

fn parse_lambda(s: &str) -> std::result::Result<LambdaRule, String> {
    let relative = |v: &str| {
        v.parse::<f64>()
            .map(LambdaRule::Relative)
            .map_err(|e| format!("bad lambda factor {v:?}: {e}"))
    };
    match s {
        "auto" => Ok(LambdaRule::default()),
        _ => match s.strip_prefix("auto:") {
            Some(v) => relative(v),
            None => s
                .parse::<f64>()
                .map(LambdaRule::Fixed)
                .map_err(|e| format!("expected auto, auto:FACTOR or a number, got {s:?}: {e}")),
        },
    }
}

fn parse_epsilon(s: &str) -> std::result::Result<EpsilonRule, String> {
    let num = |v: &str| v.parse::<f64>().map_err(|e| format!("bad epsilon {v:?}: {e}"));
    if let Some(v) = s.strip_prefix("abs:") {
        num(v).map(EpsilonRule::Absolute)
    } else {
        num(s.strip_prefix("rel:").unwrap_or(s)).map(EpsilonRule::Relative)
    }
}

#[derive(Args, Clone)]
struct FitArgs {
    /// Zero-pad non-square or non-power-of-two images
    #[arg(long, conflicts_with = "crop")]
    pad: bool,
    /// Center-crop to the largest power-of-two square
    #[arg(long)]
    crop: bool,
}

impl FitArgs {
    fn fit(&self) -> Fit {
        match (self.pad, self.crop) {
            (true, _) => Fit::Pad,
            (_, true) => Fit::Crop,
            _ => Fit::Exact,
        }
    }
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Wavelet levels S [default: log2(N) - 4 clamped to [3, log2(N)]]
    #[arg(long)]
    levels: Option<usize>,
    /// auto, auto:FACTOR (FACTOR * ||(Phi Psi)^T y||_inf) or a fixed value
    #[arg(long, value_parser = parse_lambda)]
    lambda: Option<LambdaRule>,
    /// Share of level-S detail coefficients taken as tree roots
    #[arg(long)]
    p_percent: Option<f64>,
    /// Pruning threshold: FRACTION of max |x| (also rel:FRACTION) or abs:VALUE
    #[arg(long, value_parser = parse_epsilon)]
    epsilon: Option<EpsilonRule>,
    /// Plain l1 recovery without tree weights
    #[arg(long)]
    no_weights: bool,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// tau = TAU_SAFETY / lambda_max(A^T A), in (0, 2)
    #[arg(long, default_value_t = 1.9)]
    tau_safety: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Start every stage from zero instead of the previous solution
    #[arg(long)]
    no_warm_start: bool,
}

impl SolverArgs {
    fn params(&self) -> SolverParams {
        SolverParams {
            tau_safety: self.tau_safety,
            beta: self.beta,
            gamma: self.gamma,
            tol: self.tol,
            max_iter: self.max_iter,
            ..SolverParams::default()
        }
    }
}

#[derive(Args)]
struct SenseArgs {
    image: PathBuf,
    /// Measurement rate m/n in (0, 1]
    #[arg(long)]
    mr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dynamic range L [default: from the bit depth]
    #[arg(long)]
    peak: Option<f64>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RecoverArgs {
    bundle: PathBuf,
    /// Output image; .f64 or .raw writes floats, anything else PGM
    #[arg(long)]
    out: PathBuf,
    /// Directory for the per-stage and per-iteration CSV traces
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct EvalArgs {
    reference: PathBuf,
    reconstructed: PathBuf,
    /// Dynamic range L [default: from the reference bit depth]
    #[arg(long)]
    peak: Option<f64>,
    /// Append a row to this CSV file
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, num_args = 1.., required = true)]
    images: Vec<PathBuf>,
    /// Comma-separated measurement rates
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    mr: Vec<f64>,
    /// Comma-separated seeds
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Comma-separated methods: tssp, no-weights
    #[arg(long, value_delimiter = ',', default_value = "tssp,no-weights")]
    methods: Vec<String>,
    #[arg(long)]
    peak: Option<f64>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Result rows
    #[arg(long)]
    out: PathBuf,
    /// Normalized-error curves
    #[arg(long)]
    curves: Option<PathBuf>,
}

fn sense_options(model: &ModelArgs, peak: Option<f64>) -> SenseOptions {
    let base = SenseOptions::default();
    SenseOptions {
        levels: model.levels,
        lambda: model.lambda.unwrap_or(base.lambda),
        weighting: if model.no_weights { Weighting::None } else { Weighting::Tree },
        p_percent: model.p_percent.unwrap_or(base.p_percent),
        epsilon: model.epsilon.unwrap_or(base.epsilon),
        peak,
        ..base
    }
}

fn recover_options(model: &ModelArgs, solver: &SolverArgs) -> RecoverOptions {
    RecoverOptions {
        solver: solver.params(),
        no_weights: model.no_weights,
        no_warm_start: solver.no_warm_start,
        levels: model.levels,
        lambda: model.lambda,
        p_percent: model.p_percent,
        epsilon: model.epsilon,
    }
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| CliError::io(format!("creating {}", path.display()), e))
}

fn cmd_sense(args: SenseArgs) -> Result<()> {
    let img = image::fit_square(image::read(&args.image)?, args.fit.fit())?;
    let opts = SenseOptions {
        rate: args.mr,
        seed: args.seed,
        ..sense_options(&args.model, args.peak)
    };
    let bundle = pipeline::sense(&img, &opts)?;
    bundle.write(&args.out)?;
    eprintln!(
        "sensed {0}x{0} image: m = {1} ({2:.4} of n), {3} bytes",
        bundle.side,
        bundle.m(),
        bundle.rate(),
        bundle.encoded_len()
    );
    Ok(())
}

fn cmd_recover(args: RecoverArgs) -> Result<()> {
    let bundle = MeasurementBundle::read(&args.bundle)?;
    let rec = pipeline::recover(&bundle, &recover_options(&args.model, &args.solver))?;
    let out = if image::is_float_path(&args.out) { rec.to_float_image() } else { rec.to_image() };
    image::write(&args.out, &out, rec.peak)?;
    if let Some(dir) = &args.trace_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        let write = |name: String, text: String| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
        };
        write("stages.csv".into(), rec.recovery.stages_csv())?;
        for s in &rec.recovery.stages {
            write(format!("stage_{}.csv", s.stage), s.trace.to_csv())?;
        }
    }
    eprintln!(
        "recovered {0}x{0} image: {1} stage(s), {2} iterations, {3:.3} s",
        rec.side,
        rec.recovery.stages.len(),
        rec.iterations(),
        rec.seconds
    );
    Ok(())
}

fn fmt_psnr(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let reference = image::read(&args.reference)?;
    let reconstructed = image::read(&args.reconstructed)?;
    let peak = args.peak.unwrap_or_else(|| reference.depth.peak());
    let q = pipeline::evaluate(&reference, &reconstructed, peak)?;
    println!("psnr_db={} ssim={:.6}", fmt_psnr(q.psnr), q.ssim);
    if let Some(path) = &args.csv {
        let fresh = !path.exists();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| CliError::io(format!("opening {}", path.display()), e))?;
        let mut w = csv::Writer::from_writer(file);
        let err = |e: csv::Error| CliError::BadInput(format!("writing CSV: {e}"));
        if fresh {
            w.write_record(["reference", "reconstructed", "psnr_db", "ssim"]).map_err(err)?;
        }
        w.write_record([
            args.reference.display().to_string(),
            args.reconstructed.display().to_string(),
            if q.psnr.is_infinite() { "inf".into() } else { q.psnr.to_string() },
            q.ssim.to_string(),
        ])
        .map_err(err)?;
        w.flush().map_err(|e| CliError::io("flushing CSV", e))?;
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let mut images = Vec::new();
    for path in &args.images {
        let img = image::fit_square(image::read(path)?, args.fit.fit())?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        images.push(BenchImage { id, image: img });
    }
    let methods = args
        .methods
        .iter()
        .map(|m| match m.as_str() {
            "tssp" => Ok(Method::Tree),
            "no-weights" => Ok(Method::NoWeights),
            other => Err(CliError::BadInput(format!("unknown method {other:?}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let cfg = BenchConfig {
        images,
        rates: args.mr.clone(),
        seeds: args.seeds.clone(),
        methods,
        sense: sense_options(&args.model, args.peak),
        recover: recover_options(&args.model, &args.solver),
    };
    let (rows, curves) = bench::run(&cfg, bench::thread_cap()?)?;
    bench::write_rows(create(&args.out)?, &rows)?;
    if let Some(path) = &args.curves {
        bench::write_curves(create(path)?, &curves)?;
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    eprintln!("{} cell(s), {} failed", rows.len(), failed);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sense(a) => cmd_sense(a),
        Command::Recover(a) => cmd_recover(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(io::stderr(), "bigcs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
