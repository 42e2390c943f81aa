//! Population-level quantities of the coherence loss: the minimizer of the
//! conditional risk, its inverse (the probability link), risk gaps, and
//! exact risks over finitely supported input distributions.

use crate::error::{check_finite, Error, Result};
use crate::loss::{coherence_v, sigmoid, softplus, LossParams};

fn check_open_prob(eta: f64) -> Result<f64> {
    let eta = check_finite("eta", eta)?;
    if eta <= 0.0 || eta >= 1.0 {
        if eta == 0.0 || eta == 1.0 {
            return Err(Error::Boundary(eta));
        }
        return Err(Error::InvalidInput(format!("eta must lie in (0, 1), got {eta}")));
    }
    Ok(eta)
}

fn check_closed_prob(eta: f64) -> Result<f64> {
    let eta = check_finite("eta", eta)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidInput(format!("eta must lie in [0, 1], got {eta}")));
    }
    Ok(eta)
}

/// `log(1 + sqrt(1 + r))` given `log r`, stable for any magnitude of `r`.
fn log1p_sqrt1p(log_r: f64) -> f64 {
    if log_r > 0.0 {
        // sqrt(r) * (r^{-1/2} + sqrt(1 + 1/r))
        let inv = (-log_r).exp();
        0.5 * log_r + ((-0.5 * log_r).exp() + (1.0 + inv).sqrt()).ln()
    } else {
        (1.0 + (1.0 + log_r.exp()).sqrt()).ln()
    }
}

/// Unique minimizer over `f` of `eta V(f) + (1 - eta) V(-f)`.
///
/// Evaluated in the factored form (pull `exp(u/rho)` out of the square root)
/// on the side `eta > 1/2` and mirrored via `f*(1 - eta) = -f*(eta)`, with
/// the smaller of `eta`, `1 - eta` carried exactly.
pub fn f_star(p: LossParams, eta: f64) -> Result<f64> {
    let eta = check_open_prob(eta)?;
    if eta == 0.5 {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if eta > 0.5 { (1.0 - eta, eta, 1.0) } else { (eta, 1.0 - eta, -1.0) };
    let (rho, u) = (p.rho(), p.u());
    // a = |2 eta - 1| computed from the small side
    let a = 1.0 - 2.0 * lo;
    let log_r = (4.0 * lo * hi).ln() - 2.0 * a.ln() - 2.0 * u / rho;
    let value = u + rho * (a.ln() - (2.0 * lo).ln() + log1p_sqrt1p(log_r));
    Ok(sign * value)
}

/// `w1(f) = 1 / (1 + exp((f - u)/rho))`.
pub(crate) fn w1(p: LossParams, f: f64) -> f64 {
    sigmoid((p.u() - f) / p.rho())
}

/// `w2(f) = 1 / (1 + exp(-(f + u)/rho))`.
pub(crate) fn w2(p: LossParams, f: f64) -> f64 {
    sigmoid((p.u() + f) / p.rho())
}

/// Natural logs of `eta_tilde(f)` and `1 - eta_tilde(f)`, computed without
/// forming either probability.
pub fn log_eta_tilde_pair(p: LossParams, f: f64) -> (f64, f64) {
    let (rho, u) = (p.rho(), p.u());
    let l1 = -softplus((f - u) / rho); // log w1
    let l2 = -softplus(-(u + f) / rho); // log w2
    let m = l1.max(l2);
    let lse = m + ((l1 - m).exp() + (l2 - m).exp()).ln();
    (l2 - lse, l1 - lse)
}

/// Inverse of [`f_star`]: the class-probability link
/// `(1 + e^{(f-u)/rho}) / (2 + e^{-(u+f)/rho} + e^{(f-u)/rho})`.
pub fn eta_tilde(p: LossParams, f: f64) -> Result<f64> {
    let f = check_finite("f", f)?;
    let a = w1(p, f);
    let b = w2(p, f);
    Ok(b / (a + b))
}

/// Conditional risk `eta V(f) + (1 - eta) V(-f)`.
pub fn cond_risk(p: LossParams, eta: f64, f: f64) -> Result<f64> {
    let eta = check_closed_prob(eta)?;
    let f = check_finite("f", f)?;
    let pos = if eta > 0.0 { eta * coherence_v(p, f)? } else { 0.0 };
    let neg = if eta < 1.0 { (1.0 - eta) * coherence_v(p, -f)? } else { 0.0 };
    Ok(pos + neg)
}

/// Excess conditional risk of `f` over the minimizer at `eta`.
pub fn risk_gap(p: LossParams, eta: f64, f: f64) -> Result<f64> {
    let eta = check_open_prob(eta)?;
    let best = cond_risk(p, eta, f_star(p, eta)?)?;
    Ok((cond_risk(p, eta, f)? - best).max(0.0))
}

/// Finitely supported marginal over inputs: atom weights and the class-+1
/// probability at each atom.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    atoms: Vec<(f64, f64)>,
}

impl FiniteDistribution {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidInput("distribution needs at least one atom".into()));
        }
        let mut total = 0.0;
        for &(w, eta) in &atoms {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidInput(format!("atom weight {w} is not a probability")));
            }
            check_closed_prob(eta)?;
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("atom weights sum to {total}, not 1")));
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Exact risks of a score assignment over a [`FiniteDistribution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactRisks {
    /// `P(Y f(X) <= 0)`.
    pub zero_one_risk: f64,
    /// Bayes error, the zero-one risk of `2 eta - 1`.
    pub bayes_risk: f64,
    /// Expected excess conditional surrogate risk.
    pub surrogate_gap: f64,
}

fn zero_one(eta: f64, f: f64) -> f64 {
    if f <= 0.0 {
        eta
    } else {
        1.0 - eta
    }
}

/// Weighted sums of zero-one risk, Bayes risk and surrogate excess risk.
///
/// At atoms with `eta` in `{0, 1}` the conditional risk has infimum 0 (the
/// minimizer runs off to infinity), so the excess is the risk itself.
pub fn exact_risks(p: LossParams, dist: &FiniteDistribution, scores: &[f64]) -> Result<ExactRisks> {
    if scores.len() != dist.len() {
        return Err(Error::DimensionMismatch { expected: dist.len(), found: scores.len() });
    }
    let mut out = ExactRisks { zero_one_risk: 0.0, bayes_risk: 0.0, surrogate_gap: 0.0 };
    for (&(w, eta), &f) in dist.atoms().iter().zip(scores) {
        out.zero_one_risk += w * zero_one(eta, f);
        out.bayes_risk += w * zero_one(eta, 2.0 * eta - 1.0);
        let gap = if eta == 0.0 || eta == 1.0 { cond_risk(p, eta, f)? } else { risk_gap(p, eta, f)? };
        out.surrogate_gap += w * gap;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lp(rho: f64, u: f64) -> LossParams {
        LossParams::new(rho, u).unwrap()
    }

    /// Direct transcription of the closed form, for comparison where it is stable.
    fn f_star_naive(p: LossParams, eta: f64) -> f64 {
        let (rho, u) = (p.rho(), p.u());
        let e = (u / rho).exp();
        let num = (2.0 * eta - 1.0) * e
            + ((1.0 - 2.0 * eta).powi(2) * e * e + 4.0 * eta * (1.0 - eta)).sqrt();
        rho * (num / (2.0 * (1.0 - eta))).ln()
    }

    /// Golden-section search on `g`. When the two probe values agree to
    /// rounding, the comparison falls back to the sign of the integral of
    /// `dg` between the probes (5-point Gauss-Legendre), which stays exact
    /// where the values are flat.
    fn golden_min(g: impl Fn(f64) -> f64, dg: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
        const NODES: [f64; 5] = [0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640, 0.9061798459386640];
        const WEIGHTS: [f64; 5] =
            [0.5688888888888889, 0.4786286704993665, 0.4786286704993665, 0.2369268850561891, 0.2369268850561891];
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        while (b - a).abs() > tol {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            let (gc, gd) = (g(c), g(d));
            let c_lower = if (gc - gd).abs() > 1e-9 * gc.abs().max(1.0) {
                gc < gd
            } else {
                let (m, h) = (0.5 * (c + d), 0.5 * (d - c));
                let rise: f64 = NODES.iter().zip(WEIGHTS).map(|(x, w)| w * dg(m + h * x)).sum();
                rise > 0.0
            };
            if c_lower {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn f_star_examples() {
        assert_relative_eq!(f_star(lp(1.0, 0.0), 0.8).unwrap(), 4f64.ln(), epsilon = 1e-14);
        assert_eq!(f_star(lp(1.0, 1.0), 0.5).unwrap(), 0.0);
        assert_relative_eq!(f_star(lp(1.0, 1.0), 0.8).unwrap(), 2.153_962_071_818_679, epsilon = 1e-13);
        assert!(matches!(f_star(lp(1.0, 1.0), 0.0), Err(Error::Boundary(_))));
        assert!(matches!(f_star(lp(1.0, 1.0), 1.0), Err(Error::Boundary(_))));
        assert!(f_star(lp(1.0, 1.0), 1.2).is_err());
    }

    #[test]
    fn f_star_matches_naive_form_where_stable() {
        for &(rho, u) in &[(1.0, 1.0), (0.5, 0.3), (2.0, 2.0), (1.0, 0.0)] {
            for i in 1..20 {
                let eta = i as f64 / 20.0;
                let p = lp(rho, u);
                assert_relative_eq!(f_star(p, eta).unwrap(), f_star_naive(p, eta), epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn f_star_agrees_with_golden_section() {
        for &rho in &[0.3, 1.0, 2.0] {
            for &u in &[0.0, 0.5, 1.0] {
                for i in 1..10 {
                    let eta = i as f64 / 10.0;
                    let p = lp(rho, u);
                    let g = |f: f64| cond_risk(p, eta, f).unwrap();
                    // d/df of eta V(f) + (1 - eta) V(-f)
                    let dg = |f: f64| -eta * sigmoid((u - f) / rho) + (1.0 - eta) * sigmoid((u + f) / rho);
                    let fm = golden_min(g, dg, -20.0, 20.0, 1e-12);
                    assert!((f_star(p, eta).unwrap() - fm).abs() < 1e-8, "rho={rho} u={u} eta={eta}");
                }
            }
        }
    }

    #[test]
    fn f_star_sign_and_small_rho_limit() {
        let p = lp(1e-3, 1.0);
        for i in 1..10 {
            let eta = i as f64 / 10.0;
            if i == 5 {
                continue;
            }
            let f = f_star(p, eta).unwrap();
            assert_eq!(f.signum(), (eta - 0.5).signum());
            assert!((f.abs() - 1.0).abs() < 5e-3, "eta={eta} f={f}");
            // symmetry
            assert_relative_eq!(f_star(p, 1.0 - eta).unwrap(), -f, epsilon = 1e-12);
        }
    }

    #[test]
    fn f_star_extreme_inputs_finite() {
        for &(rho, u) in &[(1e-4, 1.0), (1e-4, 10.0), (1e4, 1.0), (1.0, 50.0)] {
            for &eta in &[1e-15, 1e-6, 0.3, 0.5 - 1e-12, 0.5 + 1e-12, 0.9, 1.0 - 1e-12] {
                let f = f_star(lp(rho, u), eta).unwrap();
                assert!(f.is_finite(), "rho={rho} u={u} eta={eta}");
                assert_eq!(f.signum(), (eta - 0.5).signum());
            }
        }
    }

    #[test]
    fn derivative_lower_bound() {
        let h = 1e-6;
        for &(rho, u) in &[(1.0, 1.0), (0.5, 2.0), (2.0, 0.5), (1.0, 0.0), (0.7, 0.0)] {
            let p = lp(rho, u);
            for i in 1..20 {
                let eta = i as f64 / 20.0;
                let d = (f_star(p, eta + h).unwrap() - f_star(p, eta - h).unwrap()) / (2.0 * h);
                let bound = rho / (eta * (1.0 - eta));
                assert!(d >= bound - 1e-6, "rho={rho} u={u} eta={eta}");
                if u == 0.0 {
                    assert!((d - bound).abs() < 1e-8 * bound.max(1.0) * 10.0);
                }
            }
        }
    }

    #[test]
    fn eta_tilde_examples() {
        assert_eq!(eta_tilde(lp(1.0, 1.0), 0.0).unwrap(), 0.5);
        assert_relative_eq!(eta_tilde(lp(1.0, 1.0), 1.0).unwrap(), 0.637_890_311_346_669_2, epsilon = 1e-14);
        assert_relative_eq!(f_star(lp(1.0, 1.0), 0.637_890_311_346_669_2).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(eta_tilde(lp(0.01, 1.0), 1.0).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn round_trip() {
        for &(rho, u) in &[(1.0, 1.0), (0.1, 1.0), (3.0, 0.0), (0.5, 2.0)] {
            let p = lp(rho, u);
            for i in 1..=99 {
                let eta = i as f64 / 100.0;
                let back = eta_tilde(p, f_star(p, eta).unwrap()).unwrap();
                assert!((back - eta).abs() < 1e-10, "rho={rho} u={u} eta={eta}");
            }
        }
    }

    #[test]
    fn small_and_large_rho_limits() {
        let p = lp(1e-4, 1.0);
        for (f, want) in [(2.0, 1.0), (1.0, 2.0 / 3.0), (0.0, 0.5), (-1.0, 1.0 / 3.0), (-2.0, 0.0)] {
            assert!((eta_tilde(p, f).unwrap() - want).abs() < 1e-3);
        }
        let p = lp(1e4, 1.0);
        for f in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            assert!((eta_tilde(p, f).unwrap() - 0.5).abs() < 1e-3);
        }
    }

    #[test]
    fn weight_identity() {
        for &(rho, u) in &[(1.0, 1.0), (0.3, 2.0), (1.0, 0.0), (2.0, 0.0)] {
            let p = lp(rho, u);
            for k in -10..=10 {
                let f = k as f64 * 0.4;
                let (a, b) = (w1(p, f), w2(p, f));
                if u == 0.0 {
                    assert!((a + b - 1.0).abs() < 1e-14);
                } else {
                    assert!(a + b > 1.0);
                }
                assert_relative_eq!(eta_tilde(p, f).unwrap(), b / (a + b), epsilon = 1e-15);
                let (lp1, lp0) = log_eta_tilde_pair(p, f);
                assert_relative_eq!(lp1.exp(), b / (a + b), epsilon = 1e-14);
                assert_relative_eq!(lp0.exp(), a / (a + b), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn cond_risk_examples() {
        let p = lp(1.0, 1.0);
        assert_relative_eq!(cond_risk(p, 1.0, 0.7).unwrap(), coherence_v(p, 0.7).unwrap());
        assert_relative_eq!(cond_risk(p, 0.5, 0.0).unwrap(), 1.313_261_687_518_222_8, epsilon = 1e-14);
    }

    #[test]
    fn risk_gap_examples() {
        let p = lp(1.0, 1.0);
        assert_eq!(risk_gap(p, 0.8, f_star(p, 0.8).unwrap()).unwrap(), 0.0);
        let g0 = risk_gap(p, 0.8, 0.0).unwrap();
        assert!(g0 >= 0.18);
        assert_relative_eq!(g0, 0.454_806_550_176_786_8, epsilon = 1e-12);
        assert_relative_eq!(risk_gap(p, 0.8, 1.0).unwrap(), 0.121_448_209_315_114_7, epsilon = 1e-12);
        assert!(matches!(risk_gap(p, 0.0, 1.0), Err(Error::Boundary(_))));
    }

    #[test]
    fn risk_gap_quadratic_lower_bound() {
        for &(rho, u) in &[(1.0, 1.0), (0.4, 0.5), (2.0, 0.0)] {
            let p = lp(rho, u);
            for i in 1..20 {
                let eta = i as f64 / 20.0;
                for k in -12..=12 {
                    let f = k as f64 * 0.5;
                    let lhs = risk_gap(p, eta, f).unwrap();
                    let rhs = 2.0 * rho * (eta - eta_tilde(p, f).unwrap()).powi(2);
                    assert!(lhs >= rhs - 1e-12, "rho={rho} u={u} eta={eta} f={f}");
                }
            }
        }
    }

    #[test]
    fn exact_risk_examples() {
        let p = lp(1.0, 1.0);
        let d = FiniteDistribution::new(vec![(1.0, 0.8)]).unwrap();
        let r = exact_risks(p, &d, &[-1.0]).unwrap();
        assert_relative_eq!(r.zero_one_risk, 0.8);
        assert_relative_eq!(r.bayes_risk, 0.2, epsilon = 1e-15);

        let d = FiniteDistribution::new(vec![(0.1, 0.9), (0.2, 0.3), (0.3, 0.6), (0.15, 0.05), (0.25, 0.45)]).unwrap();
        let scores: Vec<f64> = d.atoms().iter().map(|&(_, e)| f_star(p, e).unwrap()).collect();
        let r = exact_risks(p, &d, &scores).unwrap();
        assert_eq!(r.surrogate_gap, 0.0);
        assert_relative_eq!(r.zero_one_risk, r.bayes_risk, epsilon = 1e-15);

        assert!(matches!(exact_risks(p, &d, &[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn distribution_validation() {
        assert!(FiniteDistribution::new(vec![]).is_err());
        assert!(FiniteDistribution::new(vec![(0.5, 0.2), (0.4, 0.3)]).is_err());
        assert!(FiniteDistribution::new(vec![(0.5, 0.2), (0.5, 1.3)]).is_err());
        assert!(FiniteDistribution::new(vec![(1.2, 0.2), (-0.2, 0.3)]).is_err());
        assert!(FiniteDistribution::new(vec![(0.5, 0.0), (0.5, 1.0)]).is_ok());
    }
}
