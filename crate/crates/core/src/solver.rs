//! Elastic-net regularized C-learning by pathwise coordinate descent.
//!
//! Both expansions share one engine. Scores are `f = alpha + Phi beta` where
//! the design `Phi` is the kernel matrix `K` (kernel expansion) or the
//! feature matrix `X` (linear expansion), and the quadratic part of the
//! penalty is `beta' P beta / 2` with `P = K` or `P = I` respectively:
//!
//! ```text
//! (1/n) sum_i loss(y_i f_i) + gamma * ((1 - omega) beta' P beta / 2 + omega |beta|_1)
//! ```
//!
//! The outer loop re-forms the Newton quadratic of the coherence loss at the
//! current scores (weights `q(1-q)/(n rho)`, working responses `z`), the inner
//! loop solves that penalized weighted least-squares problem by cyclic
//! coordinate descent with soft-thresholding. The quadratic is always the one
//! of `V_{rho,1}`; the C-loss objective differs from it by the constant factor
//! `rho * log(1 + e^{1/rho})`, which is folded into `gamma`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, CowArray, Ix2};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{gram, gram_square, KernelSpec};
use crate::loss::{sigmoid, sigmoid_var, softplus};

const Q_CLAMP: f64 = 1e-12;
const MAX_HALVINGS: usize = 20;

/// Which loss the objective is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossScale {
    /// `C_{rho,1}`, equal to 1 at margin 0.
    #[default]
    CLoss,
    /// The unnormalized coherence function `V_{rho,1}`.
    VLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub omega: f64,
    pub rho: f64,
    pub eps_outer: f64,
    pub eps_inner: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub loss_scale: LossScale,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.01,
            omega: 0.5,
            rho: 1.0,
            eps_outer: 1e-5,
            eps_inner: 1e-5,
            max_outer: 200,
            max_inner: 2000,
            loss_scale: LossScale::CLoss,
        }
    }
}

impl TrainConfig {
    pub fn new(gamma: f64, omega: f64, rho: f64) -> Result<Self> {
        let cfg = Self { gamma, omega, rho, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return bad(format!("omega must lie in [0, 1], got {}", self.omega));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.eps_outer > 0.0 && self.eps_inner > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return bad("iteration caps must be positive".into());
        }
        Ok(())
    }

    /// `rho * log(1 + e^{1/rho})`: `V_{rho,1} = scale * C_{rho,1}`.
    pub fn c_loss_scale(&self) -> f64 {
        self.rho * softplus(1.0 / self.rho)
    }

    /// Penalty weight against the `V`-loss quadratic.
    pub fn effective_gamma(&self) -> f64 {
        match self.loss_scale {
            LossScale::CLoss => self.gamma * self.c_loss_scale(),
            LossScale::VLoss => self.gamma,
        }
    }

    /// Loss of one margin in the configured scale.
    pub fn loss(&self, margin: f64) -> f64 {
        let v = self.rho * softplus((1.0 - margin) / self.rho);
        match self.loss_scale {
            LossScale::CLoss => v / self.c_loss_scale(),
            LossScale::VLoss => v,
        }
    }
}

/// Kernel-expansion classifier `f(x) = alpha + sum_i beta_i K(x_i, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub alpha: f64,
    pub beta: Array1<f64>,
    pub spec: KernelSpec,
    pub support: Array2<f64>,
}

/// Linear classifier `f(x) = a + x'b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub a: f64,
    pub b: Array1<f64>,
}

/// Anything that maps inputs to real-valued scores.
pub trait Scorer {
    fn input_dim(&self) -> usize;

    fn score_rows(&self, x: ArrayView2<f64>) -> Result<Array1<f64>>;

    fn predict_score(&self, x: ArrayView1<f64>) -> Result<f64> {
        let row = x.insert_axis(Axis(0));
        Ok(self.score_rows(row)?[0])
    }
}

impl KernelModel {
    pub fn zeros(spec: KernelSpec, support: Array2<f64>) -> Self {
        let n = support.nrows();
        Self { alpha: 0.0, beta: Array1::zeros(n), spec, support }
    }

    /// Number of nonzero expansion coefficients.
    pub fn n_support(&self) -> usize {
        self.beta.iter().filter(|b| **b != 0.0).count()
    }
}

impl Scorer for KernelModel {
    fn input_dim(&self) -> usize {
        self.support.ncols()
    }

    fn score_rows(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.support.ncols() {
            return Err(Error::DimensionMismatch { expected: self.support.ncols(), found: x.ncols() });
        }
        if self.beta.len() != self.support.nrows() {
            return Err(Error::DimensionMismatch { expected: self.support.nrows(), found: self.beta.len() });
        }
        let k = gram(&self.spec, x, self.support.view())?.entries;
        Ok(k.dot(&self.beta) + self.alpha)
    }
}

impl LinearModel {
    pub fn zeros(d: usize) -> Self {
        Self { a: 0.0, b: Array1::zeros(d) }
    }
}

impl Scorer for LinearModel {
    fn input_dim(&self) -> usize {
        self.b.len()
    }

    fn score_rows(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.b.len() {
            return Err(Error::DimensionMismatch { expected: self.b.len(), found: x.ncols() });
        }
        Ok(x.dot(&self.b) + self.a)
    }
}

/// A fitted model and how the fit went.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit<M> {
    pub model: M,
    pub converged: bool,
    pub outer_iterations: usize,
    /// Objective after initialization and after each outer iteration.
    pub objective_trace: Vec<f64>,
}

/// `sign(mu) * (|mu| - nu)_+`.
#[inline]
pub fn soft_threshold(mu: f64, nu: f64) -> f64 {
    debug_assert!(nu >= 0.0);
    if mu > nu {
        mu - nu
    } else if mu < -nu {
        mu + nu
    } else {
        0.0
    }
}

/// Newton quadratic of `(1/n) sum_i V_{rho,1}(y_i f_i)` at given scores.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonState {
    pub q: Array1<f64>,
    pub z: Array1<f64>,
    /// `q_i (1 - q_i) / (n rho)`.
    pub weights: Array1<f64>,
    pub rho: f64,
}

impl NewtonState {
    pub fn from_scores(scores: ArrayView1<f64>, y: ArrayView1<f64>, rho: f64) -> Result<Self> {
        if scores.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: y.len(), found: scores.len() });
        }
        let n = y.len();
        let mut q = Array1::zeros(n);
        let mut z = Array1::zeros(n);
        let mut weights = Array1::zeros(n);
        for i in 0..n {
            let t = (1.0 - y[i] * scores[i]) / rho;
            let qi = sigmoid(t).clamp(Q_CLAMP, 1.0 - Q_CLAMP);
            // 1 - q from the other tail, clamped consistently
            let one_minus = sigmoid(-t).clamp(Q_CLAMP, 1.0 - Q_CLAMP);
            q[i] = qi;
            z[i] = scores[i] + rho / (y[i] * one_minus);
            weights[i] = sigmoid_var(t).max(Q_CLAMP * (1.0 - Q_CLAMP)) / (n as f64 * rho);
        }
        Ok(Self { q, z, weights, rho })
    }

    /// `q_i (1 - q_i)`, the unnormalized working weights.
    pub fn raw_weights(&self) -> Array1<f64> {
        &self.weights * (self.weights.len() as f64 * self.rho)
    }
}

/// Newton state of a model on a dataset.
pub fn newton_state<M: Scorer>(model: &M, data: &Dataset, cfg: &TrainConfig) -> Result<NewtonState> {
    let scores = model.score_rows(data.x().view())?;
    NewtonState::from_scores(scores.view(), data.y().view(), cfg.rho)
}

/// Weighted mean of `z_i - (Phi beta)_i`: the offset minimizing the quadratic
/// for fixed coefficients.
pub fn update_alpha(state: &NewtonState, beta_effect: ArrayView1<f64>) -> Result<f64> {
    if beta_effect.len() != state.z.len() {
        return Err(Error::DimensionMismatch { expected: state.z.len(), found: beta_effect.len() });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for ((w, z), e) in state.weights.iter().zip(&state.z).zip(beta_effect) {
        num += w * (z - e);
        den += w;
    }
    if den <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    Ok(num / den)
}

/// Closed-form coordinate minimizer
/// `S(t - g (1 - omega) pen, g omega) / (curv + g (1 - omega) p_jj)`; zero
/// when the denominator vanishes.
#[inline]
fn coordinate_value(t: f64, pen: f64, curv: f64, p_jj: f64, gamma: f64, omega: f64) -> f64 {
    let den = curv + gamma * (1.0 - omega) * p_jj;
    if den <= 0.0 {
        return 0.0;
    }
    soft_threshold(t - gamma * (1.0 - omega) * pen, gamma * omega) / den
}

fn check_beta_check(j: usize, beta_check: ArrayView1<f64>) -> Result<()> {
    if j >= beta_check.len() {
        return Err(Error::InvalidArgument(format!("coordinate {j} out of range")));
    }
    if beta_check[j] != 0.0 {
        return Err(Error::InvalidArgument(format!("beta_check[{j}] must be zero")));
    }
    Ok(())
}

/// One kernel-expansion coordinate update for `beta_j`, with `beta_check`
/// the current coefficients with entry `j` zeroed.
pub fn update_beta_j(
    j: usize,
    state: &NewtonState,
    alpha_tilde: f64,
    beta_check: ArrayView1<f64>,
    k: ArrayView2<f64>,
    cfg: &TrainConfig,
) -> Result<f64> {
    check_beta_check(j, beta_check)?;
    if k.nrows() != state.z.len() || k.ncols() != beta_check.len() {
        return Err(Error::DimensionMismatch { expected: state.z.len(), found: k.nrows() });
    }
    let fitted = k.dot(&beta_check);
    let col = k.column(j);
    let (t, curv) = column_terms(state, alpha_tilde, fitted.view(), col);
    let pen = k.row(j).dot(&beta_check);
    Ok(coordinate_value(t, pen, curv, k[[j, j]], cfg.effective_gamma(), cfg.omega))
}

/// One linear-expansion coordinate update for `b_j`; the quadratic penalty
/// is `|b|^2 / 2`, so its cross term vanishes.
pub fn update_b_j(
    j: usize,
    state: &NewtonState,
    a_tilde: f64,
    b_check: ArrayView1<f64>,
    x: ArrayView2<f64>,
    cfg: &TrainConfig,
) -> Result<f64> {
    check_beta_check(j, b_check)?;
    if x.nrows() != state.z.len() || x.ncols() != b_check.len() {
        return Err(Error::DimensionMismatch { expected: state.z.len(), found: x.nrows() });
    }
    let fitted = x.dot(&b_check);
    let (t, curv) = column_terms(state, a_tilde, fitted.view(), x.column(j));
    Ok(coordinate_value(t, 0.0, curv, 1.0, cfg.effective_gamma(), cfg.omega))
}

/// `t = sum_i w_i phi_ij (z_i - alpha - fitted_i)` and `sum_i w_i phi_ij^2`.
fn column_terms(state: &NewtonState, alpha: f64, fitted: ArrayView1<f64>, col: ArrayView1<f64>) -> (f64, f64) {
    let mut t = 0.0;
    let mut curv = 0.0;
    for i in 0..col.len() {
        let w = state.weights[i];
        t += w * col[i] * (state.z[i] - alpha - fitted[i]);
        curv += w * col[i] * col[i];
    }
    (t, curv)
}

/// Dot product with four independent accumulators, in a fixed order.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let mut acc = [0.0; 4];
    let chunks = n / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Floors tried on the working weights `q(1-q)` when no halving of the
/// Newton step descends. `1/4` bounds the curvature of the loss, so the last
/// level majorizes it and always descends.
const WEIGHT_FLOORS: [f64; 3] = [1e-3, 1e-2, 0.25];

/// Newton quadratic with `q(1-q)` floored at `floor`; `z` is adjusted so the
/// quadratic keeps the loss gradient at the expansion point.
fn floored_state(scores: ArrayView1<f64>, y: ArrayView1<f64>, rho: f64, floor: f64) -> NewtonState {
    let n = y.len();
    let mut q = Array1::zeros(n);
    let mut z = Array1::zeros(n);
    let mut weights = Array1::zeros(n);
    for i in 0..n {
        let t = (1.0 - y[i] * scores[i]) / rho;
        let qi = sigmoid(t);
        let w = sigmoid_var(t).max(floor);
        q[i] = qi.clamp(Q_CLAMP, 1.0 - Q_CLAMP);
        z[i] = scores[i] + rho * y[i] * qi / w;
        weights[i] = w / (n as f64 * rho);
    }
    NewtonState { q, z, weights, rho }
}

/// The penalized problem over one design. `cols` holds the design's columns
/// as contiguous rows; `quad` the quadratic-penalty matrix (identity when
/// absent), also read by rows since it is symmetric.
struct Problem<'a> {
    cols: CowArray<'a, f64, Ix2>,
    quad: Option<ArrayView2<'a, f64>>,
    y: ArrayView1<'a, f64>,
    cfg: TrainConfig,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn scores(&self, alpha: f64, beta: ArrayView1<f64>) -> Array1<f64> {
        self.cols.t().dot(&beta) + alpha
    }

    fn quad_apply(&self, beta: ArrayView1<f64>) -> Array1<f64> {
        match self.quad {
            Some(m) => m.dot(&beta),
            None => beta.to_owned(),
        }
    }

    fn penalty(&self, beta: ArrayView1<f64>) -> f64 {
        let quad = 0.5 * beta.dot(&self.quad_apply(beta));
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        (1.0 - self.cfg.omega) * quad + self.cfg.omega * l1
    }

    /// Objective in the configured loss scale.
    fn objective(&self, alpha: f64, beta: ArrayView1<f64>) -> f64 {
        let f = self.scores(alpha, beta);
        let loss: f64 = f.iter().zip(self.y).map(|(fi, yi)| self.cfg.loss(yi * fi)).sum::<f64>() / self.n() as f64;
        loss + self.cfg.gamma * self.penalty(beta)
    }

    /// Minimize the penalized quadratic at `state` by cyclic coordinate
    /// descent, starting from `(alpha, beta)`.
    fn inner(&self, state: &NewtonState, mut alpha: f64, mut beta: Array1<f64>) -> Result<(f64, Array1<f64>)> {
        let p = beta.len();
        let gamma = self.cfg.effective_gamma();
        let omega = self.cfg.omega;
        let w = state.weights.as_slice().expect("contiguous weights");
        let z = state.z.as_slice().expect("contiguous responses");
        let wsum: f64 = w.iter().sum();
        if wsum <= 0.0 {
            return Err(Error::DegenerateWeights);
        }
        // weighted columns w_i phi_ij, one contiguous row per coordinate
        let mut wcols = self.cols.to_owned();
        for mut row in wcols.rows_mut() {
            row.iter_mut().zip(w).for_each(|(v, wi)| *v *= wi);
        }
        let curv: Vec<f64> = (0..p).map(|j| dot(self.cols.row(j).as_slice().unwrap(), wcols.row(j).as_slice().unwrap())).collect();
        // residual z - alpha - Phi beta, maintained incrementally; for the
        // kernel expansion it also yields K beta = z - alpha - resid
        let mut resid = (&state.z - &self.scores(alpha, beta.view())).to_vec();
        for _ in 0..self.cfg.max_inner {
            let shift = dot(w, &resid) / wsum;
            alpha += shift;
            resid.iter_mut().for_each(|r| *r -= shift);
            let mut beta_change = 0.0;

            for j in 0..p {
                let c = self.cols.row(j);
                let c = c.as_slice().expect("contiguous column");
                let old = beta[j];
                let t = dot(wcols.row(j).as_slice().unwrap(), &resid) + curv[j] * old;
                let (pen, p_jj) = match self.quad {
                    Some(m) => {
                        let kjj = m[[j, j]];
                        (z[j] - alpha - resid[j] - kjj * old, kjj)
                    }
                    None => (0.0, 1.0),
                };
                let new = coordinate_value(t, pen, curv[j], p_jj, gamma, omega);
                let delta = new - old;
                if delta != 0.0 {
                    beta[j] = new;
                    resid.iter_mut().zip(c).for_each(|(r, ci)| *r -= delta * ci);
                    beta_change += delta * delta;
                }
            }
            if shift.abs() + beta_change.sqrt() < self.cfg.eps_inner {
                break;
            }
        }
        Ok((alpha, beta))
    }

    /// Step from `(alpha, beta)` toward the minimizer of the quadratic at
    /// `state`, halving on objective increase. Returns the accepted point
    /// and its objective, or `None` when no halving descends.
    fn try_step(
        &self,
        state: &NewtonState,
        alpha: f64,
        beta: &Array1<f64>,
        f_cur: f64,
    ) -> Result<Option<(f64, Array1<f64>, f64)>> {
        let (a_new, b_new) = self.inner(state, alpha, beta.clone())?;
        let slack = 1e-13 * f_cur.abs().max(1.0);
        let mut step = 1.0;
        let mut cand = (a_new, b_new.clone());
        let mut f_new = self.objective(cand.0, cand.1.view());
        let mut halvings = 0;
        while !(f_new <= f_cur + slack) && halvings < MAX_HALVINGS {
            step *= 0.5;
            halvings += 1;
            let a = alpha + step * (a_new - alpha);
            let b = beta + &((&b_new - beta) * step);
            f_new = self.objective(a, b.view());
            cand = (a, b);
        }
        Ok((f_new <= f_cur + slack).then_some((cand.0, cand.1, f_new)))
    }

    /// Outer Newton loop with step halving on objective increase.
    fn solve(&self, mut alpha: f64, mut beta: Array1<f64>) -> Result<Fit<(f64, Array1<f64>)>> {
        let mut f_cur = self.objective(alpha, beta.view());
        let mut trace = vec![f_cur];
        let mut converged = false;
        let mut iters = 0;
        for _ in 0..self.cfg.max_outer {
            iters += 1;
            let scores = self.scores(alpha, beta.view());
            let state = NewtonState::from_scores(scores.view(), self.y, self.cfg.rho)?;
            let mut accepted = self.try_step(&state, alpha, &beta, f_cur)?;
            for floor in WEIGHT_FLOORS {
                if accepted.is_some() {
                    break;
                }
                let damped = floored_state(scores.view(), self.y, self.cfg.rho, floor);
                accepted = self.try_step(&damped, alpha, &beta, f_cur)?;
            }
            let Some((a, b, f_new)) = accepted else {
                // even the majorizing step cannot descend: stationary to rounding
                converged = true;
                break;
            };
            let diff = ((a - alpha).powi(2) + (&b - &beta).mapv(|v| v * v).sum()).sqrt();
            alpha = a;
            beta = b;
            f_cur = f_new;
            trace.push(f_cur);
            if diff < self.cfg.eps_outer {
                converged = true;
                break;
            }
        }
        Ok(Fit { model: (alpha, beta), converged, outer_iterations: iters, objective_trace: trace })
    }
}

fn check_training_data(data: &Dataset) -> Result<()> {
    if data.len() < 2 {
        return Err(Error::InvalidInput("training needs at least two samples".into()));
    }
    if !data.has_both_classes() {
        return Err(Error::SingleClass("training data must contain both classes".into()));
    }
    Ok(())
}

/// Kernel-expansion fit from an explicit starting point, with a
/// precomputed training Gram matrix.
pub fn fit_kernel_with_gram(
    data: &Dataset,
    spec: KernelSpec,
    k: ArrayView2<f64>,
    cfg: &TrainConfig,
    init: Option<(f64, ArrayView1<f64>)>,
) -> Result<Fit<KernelModel>> {
    cfg.validate()?;
    check_training_data(data)?;
    let n = data.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: k.nrows() });
    }
    let (alpha0, beta0) = match init {
        Some((a, b)) if b.len() == n => (a, b.to_owned()),
        Some((_, b)) => return Err(Error::DimensionMismatch { expected: n, found: b.len() }),
        None => (0.0, Array1::zeros(n)),
    };
    // K is symmetric, so its rows are its columns
    let problem = Problem { cols: k.as_standard_layout(), quad: Some(k), y: data.y().view(), cfg: *cfg };
    let fit = problem.solve(alpha0, beta0)?;
    let (alpha, beta) = fit.model;
    Ok(Fit {
        model: KernelModel { alpha, beta, spec, support: data.x().clone() },
        converged: fit.converged,
        outer_iterations: fit.outer_iterations,
        objective_trace: fit.objective_trace,
    })
}

/// Kernel-expansion C-learning from a zero start.
pub fn fit_kernel(data: &Dataset, spec: KernelSpec, cfg: &TrainConfig) -> Result<Fit<KernelModel>> {
    check_training_data(data)?;
    let k = gram_square(&spec, data.x().view())?.entries;
    fit_kernel_with_gram(data, spec, k.view(), cfg, None)
}

/// Linear-expansion C-learning with the elastic net on `b`.
pub fn fit_linear(data: &Dataset, cfg: &TrainConfig) -> Result<Fit<LinearModel>> {
    cfg.validate()?;
    check_training_data(data)?;
    let cols = CowArray::from(data.x().t().as_standard_layout().into_owned());
    let problem = Problem { cols, quad: None, y: data.y().view(), cfg: *cfg };
    let fit = problem.solve(0.0, Array1::zeros(data.dim()))?;
    let (a, b) = fit.model;
    Ok(Fit {
        model: LinearModel { a, b },
        converged: fit.converged,
        outer_iterations: fit.outer_iterations,
        objective_trace: fit.objective_trace,
    })
}

/// Temperatures of the smoothed-SVM continuation, warm-started in order.
pub const SVM_RHO_SCHEDULE: [f64; 5] = [1.0, 0.3, 0.1, 0.03, 0.01];

/// Smoothed hinge SVM: the coherence `V`-loss with a pure quadratic penalty,
/// annealed in `rho` down to 0.01. Its hinge objective is within
/// `0.01 log 2` of the SVM optimum.
pub fn fit_svm_smoothed(data: &Dataset, spec: KernelSpec, gamma: f64) -> Result<Fit<KernelModel>> {
    fit_svm_smoothed_with(data, spec, gamma, &TrainConfig::default())
}

/// [`fit_svm_smoothed`] with tolerances and caps taken from `base`.
pub fn fit_svm_smoothed_with(
    data: &Dataset,
    spec: KernelSpec,
    gamma: f64,
    base: &TrainConfig,
) -> Result<Fit<KernelModel>> {
    check_training_data(data)?;
    let k = gram_square(&spec, data.x().view())?.entries;
    let mut current: Option<Fit<KernelModel>> = None;
    let mut trace = Vec::new();
    let mut outer = 0;
    for &rho in &SVM_RHO_SCHEDULE {
        let cfg = TrainConfig { gamma, omega: 0.0, rho, loss_scale: LossScale::VLoss, ..*base };
        let init = current.as_ref().map(|f| (f.model.alpha, f.model.beta.view()));
        let fit = fit_kernel_with_gram(data, spec, k.view(), &cfg, init)?;
        outer += fit.outer_iterations;
        trace.extend_from_slice(&fit.objective_trace);
        current = Some(fit);
    }
    let last = current.expect("non-empty schedule");
    Ok(Fit { objective_trace: trace, outer_iterations: outer, ..last })
}

/// Kernel-expansion objective of `model` on `data`; the penalty uses the
/// model's own support Gram matrix.
pub fn objective_kernel(model: &KernelModel, data: &Dataset, cfg: &TrainConfig) -> Result<f64> {
    let f = model.score_rows(data.x().view())?;
    let k = gram_square(&model.spec, model.support.view())?.entries;
    let loss: f64 = f.iter().zip(data.y()).map(|(fi, yi)| cfg.loss(yi * fi)).sum::<f64>() / data.len() as f64;
    let quad = 0.5 * model.beta.dot(&k.dot(&model.beta));
    let l1: f64 = model.beta.iter().map(|b| b.abs()).sum();
    Ok(loss + cfg.gamma * ((1.0 - cfg.omega) * quad + cfg.omega * l1))
}

/// Linear-expansion objective with the elastic net `J_omega(b)`.
pub fn objective_linear(model: &LinearModel, data: &Dataset, cfg: &TrainConfig) -> Result<f64> {
    let f = model.score_rows(data.x().view())?;
    let loss: f64 = f.iter().zip(data.y()).map(|(fi, yi)| cfg.loss(yi * fi)).sum::<f64>() / data.len() as f64;
    let pen: f64 = model.b.iter().map(|b| 0.5 * (1.0 - cfg.omega) * b * b + cfg.omega * b.abs()).sum();
    Ok(loss + cfg.gamma * pen)
}

/// Hinge-loss SVM objective `(1/n) sum [1 - y f]_+ + gamma/2 beta'K beta`.
pub fn hinge_objective(model: &KernelModel, data: &Dataset, gamma: f64) -> Result<f64> {
    let f = model.score_rows(data.x().view())?;
    let k = gram_square(&model.spec, model.support.view())?.entries;
    let loss: f64 = f.iter().zip(data.y()).map(|(fi, yi)| (1.0 - yi * fi).max(0.0)).sum::<f64>() / data.len() as f64;
    Ok(loss + 0.5 * gamma * model.beta.dot(&k.dot(&model.beta)))
}
