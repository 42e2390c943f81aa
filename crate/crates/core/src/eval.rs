//! Metrics and the multi-replication simulation harness.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    fit_rho, platt_fit, platt_log_prob, sollich_log_prob, svm_log_prob, DEFAULT_BRACKET,
};
use crate::data::{gen_disk, gen_sine, split, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::kernels::{gram_square, sigma_median_between_classes, KernelSpec};
use crate::select::{cv_select, CvGrid};
use crate::solver::{fit_kernel, fit_kernel_with_gram, fit_svm_smoothed_with, Scorer, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Predict `+1` iff the score is positive.
    Score,
    /// Predict `+1` iff the probability exceeds 1/2.
    Probability,
}

fn check_aligned(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    if a == 0 {
        return Err(Error::InvalidInput("empty input".into()));
    }
    Ok(())
}

/// Classification error rate. A score of exactly 0 (or a probability of
/// exactly 1/2) counts as an error.
pub fn cer(values: &[f64], labels: &[f64], mode: ThresholdMode) -> Result<f64> {
    check_aligned(labels.len(), values.len())?;
    let errors = values
        .iter()
        .zip(labels)
        .filter(|(v, y)| {
            let margin = match mode {
                ThresholdMode::Score => **v,
                ThresholdMode::Probability => **v - 0.5,
            };
            margin * **y <= 0.0
        })
        .count();
    Ok(errors as f64 / labels.len() as f64)
}

fn check_probs(true_eta: &[f64], est: &[f64]) -> Result<()> {
    check_aligned(true_eta.len(), est.len())?;
    if let Some(e) = est.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(Error::MetricDomain(format!("estimated probability {e} outside (0, 1)")));
    }
    if let Some(t) = true_eta.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::MetricDomain(format!("true probability {t} outside [0, 1]")));
    }
    Ok(())
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 { 0.0 } else { x * y.ln() }
}

/// Mean Kullback-Leibler divergence of `est` from `true_eta`.
pub fn gkl(true_eta: &[f64], est: &[f64]) -> Result<f64> {
    check_probs(true_eta, est)?;
    let total: f64 = true_eta
        .iter()
        .zip(est)
        .map(|(&t, &e)| xlogy(t, t / e) + xlogy(1.0 - t, (1.0 - t) / (1.0 - e)))
        .sum();
    Ok(total / est.len() as f64)
}

/// Mean cross-entropy `-eta log est - (1 - eta) log(1 - est)`; equals
/// [`gkl`] plus the mean binary entropy of `true_eta`.
pub fn cross_entropy(true_eta: &[f64], est: &[f64]) -> Result<f64> {
    check_probs(true_eta, est)?;
    let total: f64 = true_eta
        .iter()
        .zip(est)
        .map(|(&t, &e)| -xlogy(t, e) - xlogy(1.0 - t, 1.0 - e))
        .sum();
    Ok(total / est.len() as f64)
}

fn check_logs(true_eta: &[f64], logs: &[(f64, f64)]) -> Result<()> {
    check_aligned(true_eta.len(), logs.len())?;
    if let Some(t) = true_eta.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::MetricDomain(format!("true probability {t} outside [0, 1]")));
    }
    Ok(())
}

/// Per-sample cross-entropy from `(ln est, ln(1 - est))`; infinite only when
/// an impossible outcome has positive true probability.
fn cross_entropy_term(t: f64, (lp, lq): (f64, f64)) -> f64 {
    let a = if t == 0.0 { 0.0 } else { -t * lp };
    let b = if t == 1.0 { 0.0 } else { -(1.0 - t) * lq };
    a + b
}

fn entropy(t: f64) -> f64 {
    -xlogy(t, t) - xlogy(1.0 - t, 1.0 - t)
}

/// [`gkl`] from log-probabilities, which stay finite where the
/// probabilities themselves round to 0 or 1.
pub fn gkl_from_logs(true_eta: &[f64], logs: &[(f64, f64)]) -> Result<f64> {
    check_logs(true_eta, logs)?;
    let mut total = 0.0;
    for (&t, &l) in true_eta.iter().zip(logs) {
        total += (cross_entropy_term(t, l) - entropy(t)).max(0.0);
    }
    finite_metric(total / logs.len() as f64)
}

/// [`cross_entropy`] from log-probabilities.
pub fn cross_entropy_from_logs(true_eta: &[f64], logs: &[(f64, f64)]) -> Result<f64> {
    check_logs(true_eta, logs)?;
    let total: f64 = true_eta.iter().zip(logs).map(|(&t, &l)| cross_entropy_term(t, l)).sum();
    finite_metric(total / logs.len() as f64)
}

fn finite_metric(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::MetricDomain("estimate assigns zero probability to a possible class".into()))
    }
}

/// Sample mean and standard deviation with the `n - 1` divisor (0 for a
/// single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    if values.iter().all(|v| *v == values[0]) {
        return (values[0], 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    Disk { n: usize, flip_fraction: f64 },
    Sine { n: usize },
}

impl Generator {
    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        match *self {
            Generator::Disk { n, flip_fraction } => gen_disk(n, flip_fraction, seed),
            Generator::Sine { n } => gen_sine(n, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Smoothed SVM with the fitted-`rho` coherence link.
    SvmCrho,
    /// Smoothed SVM with Platt's sigmoid.
    SvmPlatt,
    /// Smoothed SVM with Sollich's link.
    SvmSollich,
    /// Kernel C-learning with the coherence link at the training `rho`.
    CLearning,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::SvmCrho => "svm_crho",
            Method::SvmPlatt => "svm_platt",
            Method::SvmSollich => "svm_sollich",
            Method::CLearning => "c_learning",
        }
    }
}

/// Everything one replication needs besides its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub name: String,
    pub generator: Generator,
    pub train_fraction: f64,
    pub methods: Vec<Method>,
    /// Candidate `gamma` values for the SVM.
    pub svm_gammas: Vec<f64>,
    /// `(gamma, omega)` grid for C-learning.
    pub c_grid: CvGrid,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Iteration caps for every fit in the protocol.
    #[serde(default)]
    pub caps: SolverCaps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverCaps {
    pub max_outer: usize,
    pub max_inner: usize,
}

impl Default for SolverCaps {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self { max_outer: d.max_outer, max_inner: d.max_inner }
    }
}

fn default_folds() -> usize {
    crate::select::DEFAULT_FOLDS
}

fn default_rho() -> f64 {
    1.0
}

impl Protocol {
    /// The simulation set-up: 1000 points, 10% for training, RBF bandwidth
    /// from the training data, all four methods.
    pub fn simulation(name: &str, generator: Generator) -> Self {
        Self {
            name: name.to_string(),
            generator,
            train_fraction: 0.1,
            methods: vec![Method::SvmCrho, Method::SvmPlatt, Method::SvmSollich, Method::CLearning],
            svm_gammas: vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1],
            c_grid: CvGrid { gammas: vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1], omegas: vec![0.0, 0.5, 1.0] },
            cv_folds: default_folds(),
            rho: default_rho(),
            caps: SolverCaps::default(),
        }
    }

    /// [`Protocol::simulation`] with grids and iteration caps cut down so
    /// that 20 replications of both generators run in minutes on one core.
    pub fn desk(name: &str, generator: Generator) -> Self {
        Self {
            svm_gammas: vec![3e-4, 1e-3, 3e-3, 1e-2],
            c_grid: CvGrid { gammas: vec![1e-4, 1e-3, 1e-2], omegas: vec![0.0, 0.5, 1.0] },
            caps: SolverCaps { max_outer: 30, max_inner: 200 },
            ..Self::simulation(name, generator)
        }
    }

    fn config(&self, gamma: f64, omega: f64, rho: f64) -> Result<TrainConfig> {
        let cfg = TrainConfig { max_outer: self.caps.max_outer, max_inner: self.caps.max_inner, ..TrainConfig::new(gamma, omega, rho)? };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("protocol lists no methods".into()));
        }
        if self.svm_gammas.is_empty() {
            return Err(Error::InvalidParameter("empty svm gamma grid".into()));
        }
        self.c_grid.validate()?;
        for &g in &self.svm_gammas {
            self.config(g, 0.0, self.rho)?;
        }
        for &g in &self.c_grid.gammas {
            for &w in &self.c_grid.omegas {
                self.config(g, w, self.rho)?;
            }
        }
        Ok(())
    }
}

pub const METRICS: [&str; 5] = ["gkl", "cross_entropy", "cer", "cer_prob", "rho_hat"];

/// Metrics of one method on one replication's test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub gkl: f64,
    pub cross_entropy: f64,
    /// Error rate of the raw score's sign (Platt: of the probability).
    pub cer: f64,
    /// Error rate of thresholding the probability at 1/2.
    pub cer_prob: f64,
    /// Fitted temperature (fitted-`rho` method only).
    pub rho_hat: Option<f64>,
    pub gamma: f64,
    pub omega: f64,
    pub converged: bool,
}

impl MethodMetrics {
    pub fn get(&self, metric: &str) -> Option<f64> {
        match metric {
            "gkl" => Some(self.gkl),
            "cross_entropy" => Some(self.cross_entropy),
            "cer" => Some(self.cer),
            "cer_prob" => Some(self.cer_prob),
            "rho_hat" => self.rho_hat,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub seed: u64,
    pub results: Vec<(Method, MethodMetrics)>,
}

/// Run every method of `protocol` on the data drawn with `seed`.
pub fn run_replication(protocol: &Protocol, seed: u64) -> Result<Replication> {
    let data = protocol.generator.generate(seed)?;
    let (train, test) = split(&data, SplitSpec { train_fraction: protocol.train_fraction, seed })?;
    let true_eta = test
        .true_eta()
        .ok_or_else(|| Error::InvalidInput("test data carries no true probabilities".into()))?
        .to_vec();
    let labels = test.y().to_vec();
    let sigma = sigma_median_between_classes(train.x().view(), train.y().view())?;
    let spec = KernelSpec::rbf(sigma)?;
    let mut results = Vec::new();

    let wants_svm = protocol.methods.iter().any(|m| matches!(m, Method::SvmCrho | Method::SvmPlatt | Method::SvmSollich));
    if wants_svm {
        let base = protocol.config(protocol.svm_gammas[0], 0.0, protocol.rho)?;
        let grid = CvGrid { gammas: protocol.svm_gammas.clone(), omegas: vec![0.0] };
        let cv = cv_select(&train, &grid, protocol.cv_folds, seed, |tr, va, g, _| {
            let fit = fit_svm_smoothed_with(tr, spec, g, &base)?;
            fit.model.score_rows(va.x().view())
        })?;
        let fit = fit_svm_smoothed_with(&train, spec, cv.gamma, &base)?;
        let train_scores = fit.model.score_rows(train.x().view())?.to_vec();
        let test_scores = fit.model.score_rows(test.x().view())?.to_vec();
        let score_cer = cer(&test_scores, &labels, ThresholdMode::Score)?;
        let train_labels = train.y().as_slice().expect("contiguous");
        for &m in &protocol.methods {
            let (est, rho_hat, cer_value) = match m {
                Method::SvmCrho => {
                    let cal = fit_rho(&train_scores, train_labels, DEFAULT_BRACKET)?;
                    let est = Estimates::from_link(&test_scores, true, |f| svm_log_prob(cal.rho_hat, f))?;
                    (est, Some(cal.rho_hat), score_cer)
                }
                Method::SvmPlatt => {
                    let pf = platt_fit(&train_scores, train_labels)?;
                    let est = Estimates::from_link(&test_scores, false, |f| Ok(platt_log_prob(&pf, f)))?;
                    let c = cer(&est.decision, &labels, ThresholdMode::Score)?;
                    (est, None, c)
                }
                Method::SvmSollich => {
                    let est = Estimates::from_link(&test_scores, true, |f| Ok(sollich_log_prob(f)))?;
                    (est, None, score_cer)
                }
                Method::CLearning => continue,
            };
            results.push((m, metrics(&true_eta, &labels, &est, rho_hat, cer_value, cv.gamma, 0.0, fit.converged)?));
        }
    }

    if protocol.methods.contains(&Method::CLearning) {
        let rho = protocol.rho;
        let cv = cv_select(&train, &protocol.c_grid, protocol.cv_folds, seed, |tr, va, g, w| {
            let cfg = protocol.config(g, w, rho)?;
            let fit = fit_kernel(tr, spec, &cfg)?;
            fit.model.score_rows(va.x().view())
        })?;
        let cfg = protocol.config(cv.gamma, cv.omega, rho)?;
        let k = gram_square(&spec, train.x().view())?.entries;
        let fit = fit_kernel_with_gram(&train, spec, k.view(), &cfg, None)?;
        let test_scores = fit.model.score_rows(test.x().view())?.to_vec();
        let est = Estimates::from_link(&test_scores, true, |f| svm_log_prob(rho, f))?;
        let c = cer(&test_scores, &labels, ThresholdMode::Score)?;
        results.push((Method::CLearning, metrics(&true_eta, &labels, &est, None, c, cv.gamma, cv.omega, fit.converged)?));
    }

    results.sort_by_key(|(m, _)| protocol.methods.iter().position(|x| x == m));
    Ok(Replication { seed, results })
}

/// Log class probabilities on the test set and the decision
/// `ln(est / (1 - est))` they imply.
struct Estimates {
    logs: Vec<(f64, f64)>,
    decision: Vec<f64>,
}

impl Estimates {
    /// `sign_link` marks links that are strictly increasing in the score and
    /// equal 1/2 at zero; where their log-odds underflow to zero the sign of
    /// the score is the exact decision.
    fn from_link(scores: &[f64], sign_link: bool, link: impl Fn(f64) -> Result<(f64, f64)>) -> Result<Self> {
        let mut logs = Vec::with_capacity(scores.len());
        let mut decision = Vec::with_capacity(scores.len());
        for &f in scores {
            let (lp, lq) = link(f)?;
            let odds = lp - lq;
            logs.push((lp, lq));
            decision.push(if odds == 0.0 && sign_link { f } else { odds });
        }
        Ok(Self { logs, decision })
    }
}

#[allow(clippy::too_many_arguments)]
fn metrics(
    true_eta: &[f64],
    labels: &[f64],
    est: &Estimates,
    rho_hat: Option<f64>,
    cer_value: f64,
    gamma: f64,
    omega: f64,
    converged: bool,
) -> Result<MethodMetrics> {
    Ok(MethodMetrics {
        gkl: gkl_from_logs(true_eta, &est.logs)?,
        cross_entropy: cross_entropy_from_logs(true_eta, &est.logs)?,
        cer: cer_value,
        cer_prob: cer(&est.decision, labels, ThresholdMode::Score)?,
        rho_hat,
        gamma,
        omega,
        converged,
    })
}

/// Aggregate of one metric of one method across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub method: Method,
    pub metric: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub n_reps: usize,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub protocol: Protocol,
    pub n_requested: usize,
    pub base_seed: u64,
    pub reports: Vec<ReplicationReport>,
    pub failures: Vec<ReplicationFailure>,
    #[serde(skip)]
    pub replications: Vec<Replication>,
}

impl ReplicationSummary {
    pub fn report(&self, method: Method, metric: &str) -> Option<&ReplicationReport> {
        self.reports.iter().find(|r| r.method == method && r.metric == metric)
    }
}

/// Run `n_reps` replications with seeds `base_seed + r`, in parallel.
/// Failed replications are excluded and listed.
pub fn replicate(protocol: &Protocol, n_reps: usize, base_seed: u64) -> Result<ReplicationSummary> {
    protocol.validate()?;
    if n_reps == 0 {
        return Err(Error::InvalidParameter("n_reps must be positive".into()));
    }
    let outcomes: Vec<(u64, Result<Replication>)> = (0..n_reps as u64)
        .into_par_iter()
        .map(|r| {
            let seed = base_seed.wrapping_add(r);
            (seed, run_replication(protocol, seed))
        })
        .collect();

    let mut replications = Vec::new();
    let mut failures = Vec::new();
    for (seed, outcome) in outcomes {
        match outcome {
            Ok(rep) => replications.push(rep),
            Err(e) => failures.push(ReplicationFailure { seed, error: e.to_string() }),
        }
    }
    replications.sort_by_key(|r| r.seed);

    let mut reports = Vec::new();
    for &method in &protocol.methods {
        for metric in METRICS {
            let mut values = Vec::new();
            let mut seeds = Vec::new();
            for rep in &replications {
                if let Some(v) = rep.results.iter().find(|(m, _)| *m == method).and_then(|(_, mm)| mm.get(metric)) {
                    values.push(v);
                    seeds.push(rep.seed);
                }
            }
            if values.is_empty() {
                continue;
            }
            let (mean, std) = mean_std(&values);
            reports.push(ReplicationReport { method, metric: metric.to_string(), n_reps: values.len(), values, mean, std, seeds });
        }
    }
    Ok(ReplicationSummary { protocol: protocol.clone(), n_requested: n_reps, base_seed, reports, failures, replications })
}

/// One row per (replication, method).
pub fn per_rep_csv(summary: &ReplicationSummary) -> String {
    let mut s = String::from("seed,method,gkl,cross_entropy,cer,cer_prob,rho_hat,gamma,omega,converged\n");
    for rep in &summary.replications {
        for (m, mm) in &rep.results {
            let rho = mm.rho_hat.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                rep.seed,
                m.name(),
                mm.gkl,
                mm.cross_entropy,
                mm.cer,
                mm.cer_prob,
                rho,
                mm.gamma,
                mm.omega,
                mm.converged
            );
        }
    }
    s
}

/// Long format: one row per (replication, method, metric).
pub fn long_csv(summary: &ReplicationSummary) -> String {
    let mut s = String::from("seed,method,metric,value\n");
    for rep in &summary.replications {
        for (m, mm) in &rep.results {
            for metric in METRICS {
                if let Some(v) = mm.get(metric) {
                    let _ = writeln!(s, "{},{},{},{}", rep.seed, m.name(), metric, v);
                }
            }
        }
    }
    s
}

/// Write `per_rep.csv`, `long.csv` and `summary.json` into `dir`.
pub fn write_outputs(summary: &ReplicationSummary, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join("per_rep.csv"), per_rep_csv(summary).as_bytes())?;
    write_atomic(&dir.join("long.csv"), long_csv(summary).as_bytes())?;
    let mut json = serde_json::to_string_pretty(summary)?;
    json.push('\n');
    write_atomic(&dir.join("summary.json"), json.as_bytes())?;
    Ok(())
}

/// Test-set scores of a fitted model, for callers outside the harness.
pub fn scores_on<M: Scorer>(model: &M, data: &Dataset) -> Result<Array1<f64>> {
    model.score_rows(data.x().view())
}
