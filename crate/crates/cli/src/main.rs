//! `clearn`: simulate data, train and apply C-learning models, calibrate SVM
//! scores, and run replication experiments.

mod model;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use clearn::calibration::{
    fit_rho, platt_fit, platt_prob, sollich_prob, svm_prob, PlattFit, DEFAULT_BRACKET,
};
use clearn::data::{gen_disk, gen_sine, load_csv, save_csv, Dataset};
use clearn::eval::{replicate, write_outputs, Protocol};
use clearn::io::write_atomic;
use clearn::kernels::{sigma_mean_pairwise, sigma_median_between_classes, KernelSpec};
use clearn::select::{cv_select, CvGrid, DEFAULT_FOLDS};
use clearn::solver::{fit_kernel, fit_linear, fit_svm_smoothed_with, LossScale, TrainConfig};
use clearn::{Error, Result};
use model::{load_json, save_json, CalibrationFile, ModelFile};

#[derive(Parser)]
#[command(name = "clearn", version, about = "C-learning and SVM probability calibration")]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a simulated dataset and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit a model, optionally choosing gamma and omega by cross-validation.
    Train(TrainArgs),
    /// Score a dataset with a saved model.
    Predict(PredictArgs),
    /// Fit the coherence link (and Platt's sigmoid) to a model's scores.
    Calibrate(CalibrateArgs),
    /// Run a replication experiment described by a JSON protocol.
    Replicate(ReplicateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SimKind {
    Disk,
    Sine,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    kind: SimKind,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Fraction of disk labels flipped at random.
    #[arg(long, default_value_t = 0.2)]
    flip_fraction: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Expansion {
    Kernel,
    Linear,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrainMethod {
    /// C-loss with the elastic-net penalty.
    CLearning,
    /// Hinge-loss SVM via the smoothed continuation (kernel only, omega = 0).
    Svm,
}

#[derive(Clone, Copy, ValueEnum)]
enum SigmaMode {
    /// Median distance between positive and negative inputs.
    MedianBetween,
    /// Mean pairwise distance among all inputs.
    MeanPairwise,
    /// Use `--sigma`.
    Fixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossScaleArg {
    CLoss,
    VLoss,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "kernel")]
    expansion: Expansion,
    #[arg(long, value_enum, default_value = "c-learning")]
    method: TrainMethod,
    #[arg(long, default_value_t = 1e-3)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    omega: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, value_enum, default_value = "median-between")]
    sigma_mode: SigmaMode,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, value_enum, default_value = "c-loss")]
    loss_scale: LossScaleArg,
    /// Comma-separated gamma candidates; enables cross-validation.
    #[arg(long, value_delimiter = ',')]
    gamma_grid: Option<Vec<f64>>,
    /// Comma-separated omega candidates; enables cross-validation.
    #[arg(long, value_delimiter = ',')]
    omega_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    cv_folds: usize,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    max_inner: Option<usize>,
    #[arg(long)]
    eps_outer: Option<f64>,
    #[arg(long)]
    eps_inner: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProbMode {
    None,
    /// Coherence link at the calibrated rho, or the training rho.
    Crho,
    Platt,
    Sollich,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "none")]
    with_probability: ProbMode,
    /// Output of `calibrate`; required for `platt`.
    #[arg(long)]
    calibration: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplicateArgs {
    #[arg(long)]
    protocol: PathBuf,
    #[arg(long, default_value_t = 20)]
    n_reps: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Simulate(a) => simulate(a, seed),
        Command::Train(a) => train(a, seed),
        Command::Predict(a) => predict(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Replicate(a) => run_replicate(a, seed),
    }
}

fn simulate(a: SimulateArgs, seed: u64) -> Result<()> {
    let ds = match a.kind {
        SimKind::Disk => gen_disk(a.n, a.flip_fraction, seed)?,
        SimKind::Sine => gen_sine(a.n, seed)?,
    };
    save_csv(&ds, &a.out)
}

fn kernel_spec(a: &TrainArgs, data: &Dataset) -> Result<KernelSpec> {
    let sigma = match (a.sigma_mode, a.sigma) {
        (SigmaMode::Fixed, Some(s)) => s,
        (SigmaMode::Fixed, None) => return Err(Error::InvalidArgument("--sigma-mode fixed needs --sigma".into())),
        (_, Some(_)) => return Err(Error::InvalidArgument("--sigma needs --sigma-mode fixed".into())),
        (SigmaMode::MedianBetween, None) => sigma_median_between_classes(data.x().view(), data.y().view())?,
        (SigmaMode::MeanPairwise, None) => sigma_mean_pairwise(data.x().view())?,
    };
    KernelSpec::rbf(sigma)
}

fn config(a: &TrainArgs, gamma: f64, omega: f64) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::new(gamma, omega, a.rho)?;
    cfg.loss_scale = match a.loss_scale {
        LossScaleArg::CLoss => LossScale::CLoss,
        LossScaleArg::VLoss => LossScale::VLoss,
    };
    if let Some(v) = a.max_outer {
        cfg.max_outer = v;
    }
    if let Some(v) = a.max_inner {
        cfg.max_inner = v;
    }
    if let Some(v) = a.eps_outer {
        cfg.eps_outer = v;
    }
    if let Some(v) = a.eps_inner {
        cfg.eps_inner = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Fit on `train` at `(gamma, omega)`.
fn fit_one(a: &TrainArgs, train: &Dataset, spec: Option<KernelSpec>, gamma: f64, omega: f64) -> Result<ModelFile> {
    let cfg = config(a, gamma, omega)?;
    match (a.expansion, a.method, spec) {
        (Expansion::Linear, _, _) => {
            let fit = fit_linear(train, &cfg)?;
            Ok(ModelFile::from_linear(&fit.model, cfg, fit.converged, fit.outer_iterations))
        }
        (Expansion::Kernel, TrainMethod::CLearning, Some(spec)) => {
            let fit = fit_kernel(train, spec, &cfg)?;
            Ok(ModelFile::from_kernel(&fit.model, "c_learning", cfg, fit.converged, fit.outer_iterations))
        }
        (Expansion::Kernel, TrainMethod::Svm, Some(spec)) => {
            let fit = fit_svm_smoothed_with(train, spec, gamma, &cfg)?;
            let cfg = TrainConfig { omega: 0.0, rho: 1.0, loss_scale: LossScale::VLoss, ..cfg };
            Ok(ModelFile::from_kernel(&fit.model, "svm", cfg, fit.converged, fit.outer_iterations))
        }
        (Expansion::Kernel, _, None) => unreachable!("kernel spec computed for kernel expansion"),
    }
}

fn train(a: TrainArgs, seed: u64) -> Result<()> {
    if a.method == TrainMethod::Svm {
        if a.expansion == Expansion::Linear {
            return Err(Error::InvalidArgument("--method svm needs --expansion kernel".into()));
        }
        if a.omega != 0.0 || a.omega_grid.is_some() {
            return Err(Error::InvalidArgument("--method svm has no omega".into()));
        }
    }
    let data = load_csv(&a.data)?;
    let spec = match a.expansion {
        Expansion::Kernel => Some(kernel_spec(&a, &data)?),
        Expansion::Linear => None,
    };
    let file = if a.gamma_grid.is_some() || a.omega_grid.is_some() {
        let grid = CvGrid {
            gammas: a.gamma_grid.clone().unwrap_or_else(|| vec![a.gamma]),
            omegas: a.omega_grid.clone().unwrap_or_else(|| vec![a.omega]),
        };
        for &g in &grid.gammas {
            for &w in &grid.omegas {
                config(&a, g, w)?;
            }
        }
        let cv = cv_select(&data, &grid, a.cv_folds, seed, |tr, va, g, w| {
            fit_one(&a, tr, spec, g, w)?.model()?.scores(va.x().view())
        })?;
        let mut file = fit_one(&a, &data, spec, cv.gamma, cv.omega)?;
        file.cv = Some(cv);
        file
    } else {
        fit_one(&a, &data, spec, a.gamma, a.omega)?
    };
    save_json(&file, &a.out)
}

fn predict(a: PredictArgs) -> Result<()> {
    let file: ModelFile = load_json(&a.model)?;
    let data = load_csv(&a.data)?;
    let scores = file.model()?.scores(data.x().view())?;
    let calibration: Option<CalibrationFile> = a.calibration.as_deref().map(load_json).transpose()?;
    let link: Option<Box<dyn Fn(f64) -> Result<f64>>> = match a.with_probability {
        ProbMode::None => None,
        ProbMode::Crho => {
            let rho = calibration.as_ref().map_or(file.config.rho, |c| c.rho_hat);
            Some(Box::new(move |f| svm_prob(rho, f)))
        }
        ProbMode::Platt => {
            let pf: PlattFit = calibration
                .as_ref()
                .map(|c| c.platt)
                .ok_or_else(|| Error::InvalidArgument("--with-probability platt needs --calibration".into()))?;
            Some(Box::new(move |f| Ok(platt_prob(&pf, f))))
        }
        ProbMode::Sollich => Some(Box::new(|f| Ok(sollich_prob(f)))),
    };
    let mut out = String::from(if link.is_some() { "score,label,probability\n" } else { "score,label\n" });
    for &f in &scores {
        let label = if f > 0.0 { 1 } else { -1 };
        match &link {
            Some(p) => out.push_str(&format!("{f},{label},{}\n", p(f)?)),
            None => out.push_str(&format!("{f},{label}\n")),
        }
    }
    write_atomic(&a.out, out.as_bytes())
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let file: ModelFile = load_json(&a.model)?;
    let data = load_csv(&a.data)?;
    let scores = file.model()?.scores(data.x().view())?.to_vec();
    let labels = data.y().to_vec();
    let fit = fit_rho(&scores, &labels, DEFAULT_BRACKET)?;
    let platt = platt_fit(&scores, &labels)?;
    save_json(&CalibrationFile::new(&fit, platt, scores.len()), &a.out)
}

fn run_replicate(a: ReplicateArgs, seed: u64) -> Result<()> {
    let protocol: Protocol = serde_json::from_str(&std::fs::read_to_string(&a.protocol)?)?;
    let summary = replicate(&protocol, a.n_reps, seed)?;
    write_outputs(&summary, &a.out_dir)?;
    if !summary.failures.is_empty() {
        eprintln!("{} of {} replications failed; see summary.json", summary.failures.len(), a.n_reps);
    }
    Ok(())
}
