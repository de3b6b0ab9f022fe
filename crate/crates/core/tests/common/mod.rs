#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// `E[U^t]` for `U ~ χ²_m/m` by trapezoid integration in `y = ln u`.
///
/// Both the moment integral and the normalising integral are computed the
/// same way, so no Gamma function is involved.
pub fn chi2_moment_by_quadrature(t: f64, m: u64) -> f64 {
    let half = m as f64 / 2.0;
    let log_integrand = |y: f64, s: f64| (s + half) * y - half * y.exp();
    let (lo, hi, h) = (-80.0, 8.0, 0.002);
    let steps = ((hi - lo) / h) as usize;
    let integrate = |s: f64| {
        let peak = (0..=steps).map(|i| log_integrand(lo + i as f64 * h, s)).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for i in 0..=steps {
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            sum += w * (log_integrand(lo + i as f64 * h, s) - peak).exp();
        }
        (sum * h).ln() + peak
    };
    (integrate(t) - integrate(0.0)).exp()
}

/// Mixture log-likelihood of `½N(-μ,σ²) + ½N(μ,σ²)` via log-sum-exp of
/// the two component densities.
pub fn mixture_log_likelihood(xs: &[f64], mu: f64, sigma: f64) -> f64 {
    let c = -0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln() - std::f64::consts::LN_2;
    xs.iter()
        .map(|&x| {
            let a = -(x - mu) * (x - mu) / (2.0 * sigma * sigma);
            let b = -(x + mu) * (x + mu) / (2.0 * sigma * sigma);
            let m = a.max(b);
            c + m + ((a - m).exp() + (b - m).exp()).ln()
        })
        .sum()
}

/// Best log-likelihood over a `(2w+1)²` grid with spacing `step` centred at
/// `(mu, sigma)`, skipping non-positive `σ`.
pub fn local_grid_max(xs: &[f64], mu: f64, sigma: f64, step: f64, w: i32) -> (f64, f64, f64) {
    let mut best = (f64::NEG_INFINITY, mu, sigma);
    for i in -w..=w {
        for j in -w..=w {
            let (m, s) = (mu + i as f64 * step, sigma + j as f64 * step);
            if s <= 0.0 {
                continue;
            }
            let ll = mixture_log_likelihood(xs, m, s);
            if ll > best.0 {
                best = (ll, m, s);
            }
        }
    }
    best
}

/// Best log-likelihood on a coarse grid over `μ ∈ [0, σ̂∞]`, `σ ∈ (0, σ̂∞]`.
pub fn global_grid_max(xs: &[f64], points: usize) -> (f64, f64, f64) {
    let scale = (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt();
    let mut best = (f64::NEG_INFINITY, 0.0, scale);
    for i in 0..=points {
        for j in 1..=points {
            let (m, s) = (scale * i as f64 / points as f64, scale * j as f64 / points as f64);
            let ll = mixture_log_likelihood(xs, m, s);
            if ll > best.0 {
                best = (ll, m, s);
            }
        }
    }
    best
}

/// Pearson chi-square goodness-of-fit p-value. Adjacent cells are pooled
/// until each expected count is at least 5.
pub fn chi_square_p_value(observed: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &p) in observed.iter().zip(probs) {
        o += ob as f64;
        e += p * total as f64;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += o;
        last.1 += e;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}
