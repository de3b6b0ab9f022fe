//! Estimators for the symmetric two-component mixture
//! `½N(-μ, σ²) + ½N(μ, σ²)`.
//!
//! Joint maximum likelihood reduces to a one-dimensional problem in the
//! noise-to-signal ratio `α = σ²/μ`: the stationary points are where the
//! tanh-weighted mean `μ_α = (1/n) Σ x_i tanh(x_i/α)` meets the circle
//! `μ² + σ² = (1/n) Σ x_i²`, i.e. where `μ_α = g(α) = sqrt(σ̂²_∞ + α²/4) - α/2`.
//! The approximate estimator replaces `μ_α` by a rational surrogate whose
//! intersection with the circle has a closed form.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Default value of the large-`a` constant in the approximate estimator.
pub const DEFAULT_A: f64 = 50.0;
/// Default relative tolerance on `α` for the joint ML root finder.
pub const DEFAULT_TOL: f64 = 1e-10;

const GRID_POINTS: usize = 200;
const TANGENCY_TOL: f64 = 1e-14;
const EQUAL_MAGNITUDE_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmSampleStats {
    /// `(1/n) Σ |x_i|`
    pub mu0_hat: f64,
    /// `(1/n) Σ x_i²`
    pub sigma2_inf_hat: f64,
    /// Variance of the absolute values, clamped at zero.
    pub sigma2_s: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    FiniteIntersection,
    AlphaInfinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaStar {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmEstimate {
    pub mu_hat: f64,
    pub sigma2_hat: f64,
    pub alpha_star: AlphaStar,
    pub branch: Branch,
    /// Approximate estimator only.
    pub a_used: Option<f64>,
    pub kappa_used: Option<f64>,
    /// Whether `a` fell inside `[2σ̂²_∞/σ_s², A]`, the range on which the
    /// variance sandwich is guaranteed. Approximate estimator only.
    pub a_in_valid_range: Option<bool>,
    pub stats: GmmSampleStats,
}

impl GmmEstimate {
    pub fn sigma_hat(&self) -> f64 {
        self.sigma2_hat.sqrt()
    }
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.len() < 2 {
        return Err(invalid(format!("need at least 2 samples, got {}", samples.len())));
    }
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(invalid(format!("sample {i} is not finite")));
    }
    Ok(())
}

pub fn sample_stats(samples: &[f64]) -> Result<GmmSampleStats> {
    check_samples(samples)?;
    let n = samples.len();
    let nf = n as f64;
    let (abs_sum, sq_sum) = samples.iter().fold((0.0, 0.0), |(a, s), &x| (a + x.abs(), s + x * x));
    let mu0_hat = abs_sum / nf;
    let sigma2_inf_hat = sq_sum / nf;
    let sigma2_s = (sigma2_inf_hat - mu0_hat * mu0_hat).max(0.0);
    Ok(GmmSampleStats { mu0_hat, sigma2_inf_hat, sigma2_s, n })
}

fn mu_alpha_raw(samples: &[f64], alpha: f64) -> f64 {
    let s: f64 = samples.iter().map(|&x| x * (x / alpha).tanh()).sum();
    s / samples.len() as f64
}

/// `(1/n) Σ x_i tanh(x_i/α)`.
pub fn mu_alpha(samples: &[f64], alpha: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("no samples"));
    }
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok(mu_alpha_raw(samples, alpha))
}

/// The `μ` coordinate of the circle point with `σ² = α μ`, written without
/// the cancellation of `sqrt(σ̂²_∞ + α²/4) - α/2` at large `α`.
pub fn circle_mu(sigma2_inf: f64, alpha: f64) -> f64 {
    if sigma2_inf == 0.0 {
        return 0.0;
    }
    sigma2_inf / ((sigma2_inf + 0.25 * alpha * alpha).sqrt() + 0.5 * alpha)
}

/// Rational surrogate for `μ_α` used by the approximate estimator.
pub fn mu_a_alpha(stats: &GmmSampleStats, a: f64, alpha: f64) -> f64 {
    let m0sq = stats.mu0_hat * stats.mu0_hat;
    if m0sq == 0.0 {
        return 0.0;
    }
    let r = a * m0sq / stats.sigma2_inf_hat;
    let c = r + 1.0;
    let root = (a * a * m0sq + c * c * alpha * alpha).sqrt();
    // root - α rewritten so that the α² terms cancel analytically
    let den = (a * a * m0sq + r * (c + 1.0) * alpha * alpha) / (root + alpha);
    a * m0sq / den
}

/// `κ` with `log(1 + κ) = 1/(2n(4n-1))`.
pub fn kappa(n: usize) -> f64 {
    let n = n as f64;
    (1.0 / (2.0 * n * (4.0 * n - 1.0))).exp_m1()
}

/// Exact mixture log-likelihood of the samples at `(μ, σ)`.
pub fn log_likelihood(samples: &[f64], mu: f64, sigma: f64) -> f64 {
    let n = samples.len() as f64;
    if sigma <= 0.0 {
        let degenerate = samples.iter().all(|x| x.abs() == mu);
        return if degenerate { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    let s2 = sigma * sigma;
    let mut ll = -n * (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
    for &x in samples {
        let y = (mu * x / s2).abs();
        let ln_cosh = y + (-2.0 * y).exp().ln_1p() - std::f64::consts::LN_2;
        ll += -(x * x + mu * mu) / (2.0 * s2) + ln_cosh;
    }
    ll
}

fn alpha_infinity(stats: GmmSampleStats) -> GmmEstimate {
    GmmEstimate {
        mu_hat: 0.0,
        sigma2_hat: stats.sigma2_inf_hat,
        alpha_star: AlphaStar::Infinite,
        branch: Branch::AlphaInfinity,
        a_used: None,
        kappa_used: None,
        a_in_valid_range: None,
        stats,
    }
}

fn bisect(samples: &[f64], sigma2_inf: f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let h = |a: f64| mu_alpha_raw(samples, a) - circle_mu(sigma2_inf, a);
    let mut h_lo = h(lo);
    for _ in 0..400 {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let h_mid = h(mid);
        if h_mid == 0.0 {
            return mid;
        }
        if (h_mid < 0.0) == (h_lo < 0.0) {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Joint maximum-likelihood estimate of `(μ, σ²)`.
///
/// Every sign change of `h(α) = μ_α - g(α)` on a geometric grid over
/// `[max(α_l, 1e-12 σ̂_∞), 1e6 σ̂_∞]` is bisected to relative tolerance `tol`;
/// the resulting stationary points and the `α = ∞` point are compared by
/// log-likelihood and the best one is returned.
pub fn joint_ml(samples: &[f64], tol: f64) -> Result<GmmEstimate> {
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let stats = sample_stats(samples)?;
    let s2 = stats.sigma2_inf_hat;
    if s2 == 0.0 || stats.mu0_hat == 0.0 {
        return Ok(alpha_infinity(stats));
    }
    if stats.sigma2_s <= EQUAL_MAGNITUDE_TOL * s2 {
        // All magnitudes equal: the curves meet in the α → 0 limit.
        return Ok(GmmEstimate {
            mu_hat: stats.mu0_hat,
            sigma2_hat: stats.sigma2_s,
            alpha_star: AlphaStar::Finite(0.0),
            branch: Branch::FiniteIntersection,
            a_used: None,
            kappa_used: None,
            a_in_valid_range: None,
            stats,
        });
    }

    let scale = s2.sqrt();
    let alpha_l = stats.sigma2_s / stats.mu0_hat;
    let lo = alpha_l.max(1e-12 * scale);
    let hi = 1e6 * scale;
    if lo >= hi {
        return Ok(alpha_infinity(stats));
    }

    let ratio = (hi / lo).ln() / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> =
        (0..GRID_POINTS).map(|i| if i == GRID_POINTS - 1 { hi } else { lo * (ratio * i as f64).exp() }).collect();
    let h: Vec<f64> = grid.iter().map(|&a| mu_alpha_raw(samples, a) - circle_mu(s2, a)).collect();

    let mut roots = Vec::new();
    // h(α_l) <= 0 exactly, so a non-negative value there is rounding and the
    // intersection sits at the bracket end.
    if lo == alpha_l && h[0] >= 0.0 {
        roots.push(lo);
    }
    for i in 0..GRID_POINTS - 1 {
        if h[i] == 0.0 {
            roots.push(grid[i]);
        } else if (h[i] < 0.0) != (h[i + 1] < 0.0) && h[i + 1] != 0.0 {
            roots.push(bisect(samples, s2, grid[i], grid[i + 1], tol));
        }
    }
    if roots.is_empty() {
        let (argmin, min_abs) =
            h.iter()
                .enumerate()
                .map(|(i, v)| (i, v.abs()))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        if h.iter().all(|v| v.abs() < TANGENCY_TOL * scale) && min_abs.is_finite() {
            roots.push(grid[argmin]);
        }
    }

    let mut best = alpha_infinity(stats);
    let mut best_ll = log_likelihood(samples, 0.0, scale);
    for alpha in roots {
        let mu_hat = mu_alpha_raw(samples, alpha);
        let sigma2_hat = (s2 - mu_hat * mu_hat).clamp(stats.sigma2_s, s2);
        let ll = log_likelihood(samples, mu_hat, sigma2_hat.sqrt());
        if ll > best_ll {
            best_ll = ll;
            best = GmmEstimate {
                mu_hat,
                sigma2_hat,
                alpha_star: AlphaStar::Finite(alpha),
                branch: Branch::FiniteIntersection,
                a_used: None,
                kappa_used: None,
                a_in_valid_range: None,
                stats,
            };
        }
    }
    Ok(best)
}

/// Closed-form approximate joint ML estimate with the default `a = 50`.
pub fn approx_joint_ml(samples: &[f64]) -> Result<GmmEstimate> {
    approx_joint_ml_with(samples, DEFAULT_A)
}

/// Closed-form approximate joint ML estimate; `a_high` is the value of `a`
/// used when `σ̂²_∞ <= (1+κ) μ̂0²`.
pub fn approx_joint_ml_with(samples: &[f64], a_high: f64) -> Result<GmmEstimate> {
    if samples.len() <= 3 {
        return Err(invalid(format!("approximate joint ML needs more than 3 samples, got {}", samples.len())));
    }
    if !(a_high > 2.0) {
        return Err(invalid(format!("a must exceed 2, got {a_high}")));
    }
    let stats = sample_stats(samples)?;
    let s2 = stats.sigma2_inf_hat;
    let m0sq = stats.mu0_hat * stats.mu0_hat;
    let ss = stats.sigma2_s;
    let kappa = kappa(stats.n);
    if s2 == 0.0 {
        return Ok(GmmEstimate { kappa_used: Some(kappa), ..alpha_infinity(stats) });
    }

    let upper_a =
        if s2 <= (1.0 + kappa) * m0sq { f64::INFINITY } else { 2.0 * (1.0 + kappa) * s2 / (s2 - (1.0 + kappa) * m0sq) };
    let a = if upper_a.is_infinite() { a_high } else { upper_a };
    let lower_a = if ss > 0.0 { 2.0 * s2 / ss } else { f64::INFINITY };
    let in_range = a >= lower_a && a <= upper_a;

    let (sigma2_hat, branch) = if s2 <= (2.0 * a / (a - 2.0)) * m0sq {
        let v = a * s2 * ss / (a * m0sq + 2.0 * s2);
        (v.min(s2), Branch::FiniteIntersection)
    } else {
        (s2, Branch::AlphaInfinity)
    };
    let mu_hat = (s2 - sigma2_hat).max(0.0).sqrt();
    let alpha_star = match branch {
        Branch::FiniteIntersection if mu_hat > 0.0 => AlphaStar::Finite(sigma2_hat / mu_hat),
        _ => AlphaStar::Infinite,
    };
    Ok(GmmEstimate {
        mu_hat,
        sigma2_hat,
        alpha_star,
        branch,
        a_used: Some(a),
        kappa_used: Some(kappa),
        a_in_valid_range: Some(in_range),
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stats_examples() {
        let s = sample_stats(&[1.0, -1.0]).unwrap();
        assert_eq!((s.mu0_hat, s.sigma2_inf_hat, s.sigma2_s), (1.0, 1.0, 0.0));
        let s = sample_stats(&[0.0, 2.0]).unwrap();
        assert_eq!((s.mu0_hat, s.sigma2_inf_hat, s.sigma2_s), (1.0, 2.0, 1.0));
        assert!(sample_stats(&[1.0]).is_err());
        assert!(sample_stats(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn mu_alpha_examples() {
        let v = mu_alpha(&[1.0, -1.0], 1.0).unwrap();
        assert!((v - 0.761_594_155_955_764_9).abs() < 1e-15);
        assert_eq!(mu_alpha(&[0.0, 0.0, 0.0], 0.3).unwrap(), 0.0);
        let xs = [0.3, -1.2, 2.5];
        let mu0 = xs.iter().map(|x: &f64| x.abs()).sum::<f64>() / 3.0;
        assert!((mu_alpha(&xs, 1e-9).unwrap() - mu0).abs() < 1e-12);
        assert!(mu_alpha(&xs, 0.0).is_err());
        assert!(mu_alpha(&xs, -1.0).is_err());
    }

    #[test]
    fn mu_alpha_large_alpha_limit() {
        let xs = [0.3, -1.2, 2.5, 0.7];
        let s2 = xs.iter().map(|x| x * x).sum::<f64>() / 4.0;
        let a = 1e6;
        assert!((a * mu_alpha(&xs, a).unwrap() - s2).abs() < 1e-6);
    }

    #[test]
    fn circle_mu_matches_direct_formula() {
        for &(s2, a) in &[(1.0, 0.5), (2.0, 3.0), (0.7, 0.01)] {
            let direct: f64 = (s2 + a * a / 4.0f64).sqrt() - a / 2.0;
            assert!((circle_mu(s2, a) - direct).abs() < 1e-14);
            let mu = circle_mu(s2, a);
            assert!((mu * mu + a * mu - s2).abs() < 1e-14);
        }
    }

    #[test]
    fn surrogate_limits() {
        let stats = sample_stats(&[0.5, -1.5, 2.0, -0.2]).unwrap();
        assert!((mu_a_alpha(&stats, 50.0, 1e-12) - stats.mu0_hat).abs() < 1e-9);
        let big = 1e8;
        assert!((big * mu_a_alpha(&stats, 50.0, big) - stats.sigma2_inf_hat).abs() < 1e-6);
    }

    #[test]
    fn joint_ml_all_zero() {
        let e = joint_ml(&[0.0; 5], DEFAULT_TOL).unwrap();
        assert_eq!((e.mu_hat, e.sigma2_hat), (0.0, 0.0));
        assert_eq!(e.branch, Branch::AlphaInfinity);
    }

    #[test]
    fn joint_ml_equal_magnitudes() {
        let e = joint_ml(&[1.5, -1.5, 1.5, 1.5], DEFAULT_TOL).unwrap();
        assert_eq!(e.mu_hat, 1.5);
        assert_eq!(e.sigma2_hat, 0.0);
        assert_eq!(e.branch, Branch::FiniteIntersection);
    }

    #[test]
    fn joint_ml_rejects_bad_input() {
        assert!(joint_ml(&[1.0, f64::INFINITY], DEFAULT_TOL).is_err());
        assert!(joint_ml(&[1.0], DEFAULT_TOL).is_err());
        assert!(joint_ml(&[1.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn joint_ml_well_separated_components() {
        // magnitudes tightly clustered around 3 => bimodal fit
        let xs = [3.1, -2.9, 3.05, -3.0, 2.95, -3.1, 2.9, 3.0];
        let e = joint_ml(&xs, DEFAULT_TOL).unwrap();
        assert_eq!(e.branch, Branch::FiniteIntersection);
        assert!((e.mu_hat - 3.0).abs() < 0.1);
        assert!(e.sigma2_hat < 0.05);
    }

    #[test]
    fn approx_equal_magnitudes() {
        let e = approx_joint_ml(&[2.0, -2.0, 2.0, -2.0, 2.0]).unwrap();
        assert_eq!(e.sigma2_hat, 0.0);
        assert_eq!(e.mu_hat, 2.0);
    }

    #[test]
    fn approx_all_zero_and_small_n() {
        let e = approx_joint_ml(&[0.0; 6]).unwrap();
        assert_eq!((e.mu_hat, e.sigma2_hat), (0.0, 0.0));
        assert!(approx_joint_ml(&[1.0, 2.0, 3.0]).is_err());
        assert!(approx_joint_ml_with(&[1.0, 2.0, 3.0, 4.0], 2.0).is_err());
    }

    #[test]
    fn approx_records_kappa_and_a() {
        let xs = [0.2, -1.7, 0.9, 2.2, -0.4, 1.1, -1.3, 0.05, 0.8, -2.1];
        let e = approx_joint_ml(&xs).unwrap();
        assert_eq!(e.kappa_used, Some(kappa(10)));
        assert!(e.a_used.unwrap() > 2.0);
        assert!(((1.0 + kappa(10)).ln() - 1.0 / 780.0).abs() < 1e-16);
    }

    #[test]
    fn approx_matches_surrogate_intersection() {
        // In the finite branch the returned point lies on both the circle and
        // the surrogate curve σ² = α μ_{a,α}.
        let xs = [2.1, -1.7, 1.9, 2.4, -2.2, 1.6, -1.8, 2.05, 1.95, -2.3];
        let e = approx_joint_ml(&xs).unwrap();
        assert_eq!(e.branch, Branch::FiniteIntersection);
        let AlphaStar::Finite(alpha) = e.alpha_star else { panic!() };
        let on_curve = mu_a_alpha(&e.stats, e.a_used.unwrap(), alpha);
        assert!((on_curve - e.mu_hat).abs() < 1e-9 * e.mu_hat.max(1.0));
    }

    proptest! {
        #[test]
        fn circle_constraint(xs in prop::collection::vec(-20.0f64..20.0, 4..30)) {
            let s2 = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
            let ml = joint_ml(&xs, DEFAULT_TOL).unwrap();
            // the lower end of the variance range is only guaranteed for exact ML
            prop_assert!(ml.sigma2_hat >= ml.stats.sigma2_s * (1.0 - 1e-12));
            for e in [ml, approx_joint_ml(&xs).unwrap()] {
                let lhs = e.mu_hat * e.mu_hat + e.sigma2_hat;
                prop_assert!((lhs - s2).abs() <= 1e-9 * s2.max(f64::MIN_POSITIVE));
                prop_assert!(e.sigma2_hat <= s2 * (1.0 + 1e-12));
                if e.branch == Branch::AlphaInfinity {
                    prop_assert_eq!(e.mu_hat, 0.0);
                    prop_assert_eq!(e.sigma2_hat, s2);
                }
            }
        }

        #[test]
        fn mu_alpha_non_increasing(xs in prop::collection::vec(-5.0f64..5.0, 2..20)) {
            let mut prev = f64::INFINITY;
            for i in 0..200 {
                let a = 1e-3 * 1.08f64.powi(i);
                let v = mu_alpha(&xs, a).unwrap();
                prop_assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }
}
