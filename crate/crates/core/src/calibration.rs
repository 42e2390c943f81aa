//! Class probabilities for SVM scores.
//!
//! The coherence-function estimator reads a score through the inverse of the
//! population minimizer with `u = 1` and a temperature `rho` fitted to the
//! training labels by minimizing the empirical cross-entropy (EKL). Platt's
//! sigmoid and Sollich's piecewise link are the baselines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{sigmoid, softplus, LossParams};
use crate::population::{eta_tilde, log_eta_tilde_pair};

pub const DEFAULT_BRACKET: (f64, f64) = (1e-3, 1e2);
const GRID_POINTS: usize = 100;
const PLATT_CAP: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub rho_hat: f64,
    pub ekl_value: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattFit {
    pub a: f64,
    pub b: f64,
    /// Set when `|a|` hit the cap (separable scores).
    pub capped: bool,
}

fn unit(rho: f64) -> Result<LossParams> {
    LossParams::unit_margin(rho)
}

/// `P(Y = +1 | f)` under the coherence link with `u = 1`.
pub fn svm_prob(rho: f64, fhat: f64) -> Result<f64> {
    eta_tilde(unit(rho)?, fhat)
}

/// `(ln P(Y = +1 | f), ln P(Y = -1 | f))` under the coherence link, finite
/// where [`svm_prob`] would round to 0 or 1.
pub fn svm_log_prob(rho: f64, fhat: f64) -> Result<(f64, f64)> {
    let f = crate::error::check_finite("fhat", fhat)?;
    Ok(log_eta_tilde_pair(unit(rho)?, f))
}

fn check_pair(scores: &[f64], labels: &[f64]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), found: labels.len() });
    }
    if scores.is_empty() {
        return Err(Error::InvalidInput("no scores".into()));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite score {s}")));
    }
    if let Some(y) = labels.iter().find(|y| **y != 1.0 && **y != -1.0) {
        return Err(Error::InvalidInput(format!("label {y} is not -1 or 1")));
    }
    Ok(())
}

fn both_labels(labels: &[f64]) -> bool {
    labels.iter().any(|y| *y > 0.0) && labels.iter().any(|y| *y < 0.0)
}

/// Empirical cross-entropy of the labels against `svm_prob(rho, scores)`.
pub fn ekl(rho: f64, scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(scores, labels)?;
    let p = unit(rho)?;
    Ok(ekl_unchecked(p, scores, labels))
}

fn ekl_unchecked(p: LossParams, scores: &[f64], labels: &[f64]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(f, y)| {
            let (lp, lm) = log_eta_tilde_pair(p, *f);
            if *y > 0.0 { -lp } else { -lm }
        })
        .sum();
    total / scores.len() as f64
}

/// Fit `rho` by minimizing EKL over `bracket`: a log-spaced grid scan picks
/// the basin, then Newton steps in `log rho` polish it, falling back to
/// golden section whenever a step leaves the basin or fails to descend.
pub fn fit_rho(scores: &[f64], labels: &[f64], bracket: (f64, f64)) -> Result<CalibrationFit> {
    check_pair(scores, labels)?;
    if !both_labels(labels) {
        return Err(Error::Calibration("labels contain a single class".into()));
    }
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad rho bracket [{lo}, {hi}]")));
    }
    let g = |t: f64| ekl_unchecked(LossParams::unit_margin(t.exp()).expect("positive rho"), scores, labels);

    let (tl, th) = (lo.ln(), hi.ln());
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| tl + (th - tl) * i as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&t| g(t)).collect();
    // flat stretches resolve toward rho = 1
    let mut k = 0;
    for i in 1..grid.len() {
        let better = values[i] < values[k] || (values[i] == values[k] && grid[i].abs() < grid[k].abs());
        if better {
            k = i;
        }
    }
    let mut best = (grid[k], values[k]);
    let mut iterations = 0;

    if k > 0 && k + 1 < grid.len() {
        let (mut a, mut b) = (grid[k - 1], grid[k + 1]);
        let mut t = grid[k];
        let mut gt = values[k];
        let h = 1e-4;
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            iterations += 1;
            if b - a < 1e-10 {
                break;
            }
            let (gp, gm) = (g(t + h), g(t - h));
            let d1 = (gp - gm) / (2.0 * h);
            let d2 = (gp - 2.0 * gt + gm) / (h * h);
            let mut moved = false;
            if d2 > 0.0 {
                let cand = t - d1 / d2;
                if cand > a && cand < b {
                    let gc = g(cand);
                    if gc < gt {
                        if cand > t { a = t } else { b = t }
                        let step = (cand - t).abs();
                        t = cand;
                        gt = gc;
                        moved = true;
                        if step < 1e-10 {
                            break;
                        }
                    }
                }
            }
            if !moved {
                let c = b - phi * (b - a);
                let d = a + phi * (b - a);
                let (gc, gd) = (g(c), g(d));
                if gc < gd { b = d } else { a = c }
                for (x, v) in [(c, gc), (d, gd)] {
                    if v < gt {
                        t = x;
                        gt = v;
                    }
                }
                if !(t > a && t < b) {
                    t = 0.5 * (a + b);
                    gt = g(t);
                }
            }
            if gt < best.1 {
                best = (t, gt);
            }
        }
    }
    let rho_hat = best.0.exp().clamp(lo, hi);
    Ok(CalibrationFit { rho_hat, ekl_value: g(rho_hat.ln()), iterations })
}

/// Sollich's link: `sigmoid(2f)` inside the margin, `sigmoid(f + sign f)`
/// outside.
pub fn sollich_prob(fhat: f64) -> f64 {
    if fhat.abs() <= 1.0 {
        sigmoid(2.0 * fhat)
    } else {
        sigmoid(fhat + fhat.signum())
    }
}

/// Log-probabilities of both classes under Sollich's link.
pub fn sollich_log_prob(fhat: f64) -> (f64, f64) {
    let s = if fhat.abs() <= 1.0 { 2.0 * fhat } else { fhat + fhat.signum() };
    (-softplus(-s), -softplus(s))
}

/// Log-probabilities of both classes under a Platt fit.
pub fn platt_log_prob(fit: &PlattFit, fhat: f64) -> (f64, f64) {
    let s = fit.a * fhat + fit.b;
    (-softplus(s), -softplus(-s))
}

/// `1 / (1 + exp(a f + b))`.
pub fn platt_prob(fit: &PlattFit, fhat: f64) -> f64 {
    sigmoid(-(fit.a * fhat + fit.b))
}

/// Mean cross-entropy of labels under Platt parameters `(a, b)`.
pub fn platt_cross_entropy(a: f64, b: f64, scores: &[f64], labels: &[f64]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(f, y)| {
            let s = a * f + b;
            // -log p = softplus(s), -log(1 - p) = softplus(-s)
            if *y > 0.0 { softplus(s) } else { softplus(-s) }
        })
        .sum();
    total / scores.len() as f64
}

/// Fit Platt's `(a, b)` by damped Newton on the mean cross-entropy with
/// targets `(y + 1)/2`.
pub fn platt_fit(scores: &[f64], labels: &[f64]) -> Result<PlattFit> {
    check_pair(scores, labels)?;
    if !both_labels(labels) {
        return Err(Error::Calibration("labels contain a single class".into()));
    }
    let n_pos = labels.iter().filter(|y| **y > 0.0).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let obj = |a: f64, b: f64| platt_cross_entropy(a, b, scores, labels);

    // separable scores send the slope to infinity; pin it at the cap
    let pos_min = scores.iter().zip(labels).filter(|(_, y)| **y > 0.0).map(|(s, _)| *s).fold(f64::INFINITY, f64::min);
    let pos_max = scores.iter().zip(labels).filter(|(_, y)| **y > 0.0).map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);
    let neg_min = scores.iter().zip(labels).filter(|(_, y)| **y < 0.0).map(|(s, _)| *s).fold(f64::INFINITY, f64::min);
    let neg_max = scores.iter().zip(labels).filter(|(_, y)| **y < 0.0).map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);
    if pos_min > neg_max || pos_max < neg_min {
        let a = if pos_min > neg_max { -PLATT_CAP } else { PLATT_CAP };
        let b = platt_offset(a, 0.0, scores, labels);
        return Ok(PlattFit { a, b, capped: true });
    }

    let mut a = 0.0;
    let mut b = (n_neg / n_pos).ln();
    let mut f = obj(a, b);
    let mut capped = false;
    for _ in 0..200 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (s, y) in scores.iter().zip(labels) {
            let t = if *y > 0.0 { 0.0 } else { 1.0 };
            let z = a * s + b;
            let p = sigmoid(z);
            let r = p - t;
            let w = p * (1.0 - p);
            ga += r * s;
            gb += r;
            haa += w * s * s;
            hab += w * s;
            hbb += w;
        }
        // a small ridge keeps the system solvable on separable data
        let ridge = 1e-12 * (1.0 + haa + hbb);
        let (haa, hbb) = (haa + ridge, hbb + ridge);
        let det = haa * hbb - hab * hab;
        let (da, db) = if det > 0.0 {
            (-(hbb * ga - hab * gb) / det, -(haa * gb - hab * ga) / det)
        } else {
            (-ga, -gb)
        };
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = obj(na, nb);
            if nf < f {
                improved = (step * da).abs() + (step * db).abs() > 1e-12;
                a = na;
                b = nb;
                f = nf;
                break;
            }
            step *= 0.5;
        }
        if a.abs() > PLATT_CAP {
            a = PLATT_CAP.copysign(a);
            capped = true;
            b = platt_offset(a, b, scores, labels);
            break;
        }
        if !improved {
            break;
        }
    }
    Ok(PlattFit { a, b, capped })
}

/// Best `b` for fixed `a`, by safeguarded 1-D Newton.
fn platt_offset(a: f64, mut b: f64, scores: &[f64], labels: &[f64]) -> f64 {
    let obj = |b: f64| platt_cross_entropy(a, b, scores, labels);
    let mut f = obj(b);
    for _ in 0..100 {
        let (mut g, mut h) = (0.0, 0.0);
        for (s, y) in scores.iter().zip(labels) {
            let p = sigmoid(a * s + b);
            g += p - if *y > 0.0 { 0.0 } else { 1.0 };
            h += p * (1.0 - p);
        }
        let d = if h > 1e-300 { -g / h } else { -g };
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let nb = b + step * d;
            let nf = obj(nb);
            if nf < f {
                b = nb;
                f = nf;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved || (step * d).abs() < 1e-12 {
            break;
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn svm_prob_examples() {
        assert_eq!(svm_prob(0.7, 0.0).unwrap(), 0.5);
        assert!((svm_prob(1e-4, 0.5).unwrap() - 0.5).abs() < 1e-12);
        assert_relative_eq!(svm_prob(1.0, 1.0).unwrap(), 0.6378903113, epsilon = 1e-9);
        assert!(svm_prob(0.0, 1.0).is_err());
    }

    #[test]
    fn svm_prob_symmetric_monotone() {
        // below rho ~ 0.02 the gap from 1/2 inside the margin underflows
        for rho in [0.05, 0.3, 1.0, 10.0] {
            let mut prev = 0.0;
            for i in -100..=100 {
                let f = i as f64 * 0.07;
                let p = svm_prob(rho, f).unwrap();
                // tails saturate to 0 or 1 in f64 once |f| - 1 >> rho
                assert!((0.0..=1.0).contains(&p));
                if (f.abs() - 1.0) < 30.0 * rho {
                    assert!(p > 0.0 && p < 1.0);
                }
                assert!(p >= prev);
                prev = p;
                assert_relative_eq!(p + svm_prob(rho, -f).unwrap(), 1.0, epsilon = 1e-14);
                assert_eq!(p > 0.5, f > 0.0, "rho {rho} f {f}");
            }
        }
    }

    #[test]
    fn ekl_examples() {
        let scores = [0.0; 5];
        let labels = [1.0, -1.0, 1.0, 1.0, -1.0];
        assert_relative_eq!(ekl(0.4, &scores, &labels).unwrap(), 2f64.ln(), epsilon = 1e-15);
        let v = ekl(1e-3, &[5.0, -6.0], &[1.0, -1.0]).unwrap();
        assert!(v < 1e-12);
        assert!(ekl(1.0, &[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn ekl_toy_term_by_term() {
        // terms from the closed-form link, evaluated independently
        let link = |rho: f64, f: f64| {
            let e1 = ((f - 1.0) / rho).exp();
            let e2 = (-(1.0 + f) / rho).exp();
            (1.0 + e1) / (2.0 + e2 + e1)
        };
        let scores = [0.8, -0.3, 1.7, -1.2];
        let labels = [1.0, 1.0, -1.0, -1.0];
        let rho = 0.6;
        let want = -((link(rho, 0.8)).ln()
            + (link(rho, -0.3)).ln()
            + (1.0 - link(rho, 1.7)).ln()
            + (1.0 - link(rho, -1.2)).ln())
            / 4.0;
        assert_relative_eq!(ekl(rho, &scores, &labels).unwrap(), want, epsilon = 1e-13);
    }

    fn grid_min(scores: &[f64], labels: &[f64]) -> f64 {
        (0..100)
            .map(|i| {
                let t = (1e-3f64).ln() + ((1e2f64).ln() - (1e-3f64).ln()) * i as f64 / 99.0;
                ekl(t.exp(), scores, labels).unwrap()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn fit_rho_beats_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = 60;
            let labels: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let scale = rng.random_range(0.5..3.0);
            let scores: Vec<f64> = labels
                .iter()
                .map(|y| scale * (0.6 * y + rng.random_range(-1.0..1.0)))
                .collect();
            if !both_labels(&labels) {
                continue;
            }
            let fit = fit_rho(&scores, &labels, DEFAULT_BRACKET).unwrap();
            assert!(fit.rho_hat >= 1e-3 && fit.rho_hat <= 1e2);
            assert_relative_eq!(fit.ekl_value, ekl(fit.rho_hat, &scores, &labels).unwrap(), epsilon = 1e-15);
            assert!(fit.ekl_value <= grid_min(&scores, &labels) + 1e-8);
        }
    }

    #[test]
    fn fit_rho_symmetric_scores_stay_finite() {
        // every score carries both labels: the optimum is eta = 1/2, reached
        // on a flat stretch of small rho
        let scores = [-0.5, -0.5, 0.5, 0.5, -0.3, -0.3, 0.3, 0.3];
        let labels = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let fit = fit_rho(&scores, &labels, DEFAULT_BRACKET).unwrap();
        assert!(fit.rho_hat.is_finite() && fit.rho_hat >= 1e-3 && fit.rho_hat <= 1e2);
        assert!((fit.ekl_value - 2f64.ln()).abs() < 1e-9, "{fit:?}");
        assert!(fit.ekl_value <= grid_min(&scores, &labels) + 1e-8);
    }

    #[test]
    fn fit_rho_single_class() {
        assert!(matches!(fit_rho(&[1.0, 2.0], &[1.0, 1.0], DEFAULT_BRACKET), Err(Error::Calibration(_))));
    }

    #[test]
    fn sollich_examples() {
        assert_eq!(sollich_prob(0.0), 0.5);
        assert_relative_eq!(sollich_prob(1.0), 1.0 / (1.0 + (-2f64).exp()), epsilon = 1e-15);
        assert_relative_eq!(sollich_prob(1.0 + 1e-12), sollich_prob(1.0), epsilon = 1e-11);
        assert_relative_eq!(sollich_prob(2.0), 0.9525741268224334, epsilon = 1e-15);
        assert_relative_eq!(sollich_prob(-2.0), 1.0 - 0.9525741268224334, epsilon = 1e-15);
        let mut prev = 0.0;
        for i in -400..=400 {
            let p = sollich_prob(i as f64 * 0.01);
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn log_probs_match_probabilities() {
        let pf = PlattFit { a: -1.7, b: 0.3, capped: false };
        for i in -40..=40 {
            let f = i as f64 * 0.1;
            let (lp, lq) = svm_log_prob(0.4, f).unwrap();
            let p = svm_prob(0.4, f).unwrap();
            assert_relative_eq!(lp.exp(), p, max_relative = 1e-12);
            assert_relative_eq!(lq.exp(), 1.0 - p, max_relative = 1e-9, epsilon = 1e-15);
            let (lp, lq) = sollich_log_prob(f);
            assert_relative_eq!(lp.exp(), sollich_prob(f), max_relative = 1e-12);
            assert_relative_eq!(lq.exp(), 1.0 - sollich_prob(f), max_relative = 1e-9, epsilon = 1e-15);
            let (lp, lq) = platt_log_prob(&pf, f);
            assert_relative_eq!(lp.exp(), platt_prob(&pf, f), max_relative = 1e-12);
            assert_relative_eq!(lq.exp(), 1.0 - platt_prob(&pf, f), max_relative = 1e-9, epsilon = 1e-15);
        }
        // far tails stay finite
        let (lp, lq) = svm_log_prob(0.05, -60.0).unwrap();
        assert!(lp.is_finite() && lp < -700.0 && lq <= 0.0);
    }

    #[test]
    fn platt_examples() {
        let fit = PlattFit { a: -1.0, b: 0.0, capped: false };
        assert_eq!(platt_prob(&fit, 0.0), 0.5);
        let scores = [-2.0, -1.0, 1.0, 2.0, -2.0, -1.0, 1.0, 2.0];
        let labels = [-1.0, -1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0];
        let fit = platt_fit(&scores, &labels).unwrap();
        assert!(fit.b.abs() < 1e-8, "{fit:?}");
        assert!(fit.a < 0.0);
        assert!(!fit.capped);
    }

    #[test]
    fn platt_beats_grid() {
        let scores = [-1.3, -0.4, 0.2, 0.9, 1.5, -0.1];
        let labels = [-1.0, 1.0, -1.0, 1.0, 1.0, -1.0];
        let fit = platt_fit(&scores, &labels).unwrap();
        let at_fit = platt_cross_entropy(fit.a, fit.b, &scores, &labels);
        let mut best = f64::INFINITY;
        for i in 0..50 {
            for j in 0..50 {
                let a = -10.0 + 20.0 * i as f64 / 49.0;
                let b = -5.0 + 10.0 * j as f64 / 49.0;
                best = best.min(platt_cross_entropy(a, b, &scores, &labels));
            }
        }
        assert!(at_fit <= best + 1e-12);
    }

    #[test]
    fn platt_separable_is_capped() {
        let fit = platt_fit(&[-2.0, -1.0, 1.0, 2.0], &[-1.0, -1.0, 1.0, 1.0]).unwrap();
        assert!(fit.capped);
        assert_eq!(fit.a, -1e3);
        assert!(fit.b.is_finite());
        assert!(platt_prob(&fit, 1.0) > 0.999);
    }
}
