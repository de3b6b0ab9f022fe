//! Special functions and sequences shared by every bound.
//!
//! The central object is the sequence `g_k = g∘…∘g(∞)` with `g(x) = 1 - e^{-x}`,
//! which controls every survival probability for the Bernoulli, Poisson and
//! discrete processes. The rest of the module evaluates fractional moments of
//! a scaled chi-squared variable, which drive the Gaussian variance tail bounds.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

/// Largest `K` for which the floating-point iteration has been checked
/// against the `[1/k, 3/k]` sandwich.
pub const GK_VALIDATED_RANGE: usize = 1_000_000;

/// Precomputed `g_1, …, g_K`, indexed from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GkSequence {
    values: Vec<f64>,
}

/// Summary of a sandwich check over a whole sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GkMetadata {
    pub k_max: usize,
    pub sandwich_holds: bool,
    pub max_partial_sum_sq: f64,
}

impl GkSequence {
    pub fn k_max(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `g_k` for `1 <= k <= K`.
    pub fn get(&self, k: usize) -> Option<f64> {
        if k == 0 {
            return None;
        }
        self.values.get(k - 1).copied()
    }

    pub fn at(&self, k: usize) -> Result<f64> {
        self.get(k)
            .ok_or_else(|| invalid(format!("generation k={k} outside the precomputed range 1..={}", self.k_max())))
    }

    /// Checks `1/k <= g_k <= 3/k`, strict decrease, and `Σ_{m<=k} g_m² <= 3`
    /// at every index.
    pub fn metadata(&self) -> GkMetadata {
        let mut holds = true;
        let mut partial = 0.0;
        let mut max_partial: f64 = 0.0;
        let mut prev = f64::INFINITY;
        for (i, &g) in self.values.iter().enumerate() {
            let k = (i + 1) as f64;
            if g < 1.0 / k || g > 3.0 / k || g >= prev {
                holds = false;
            }
            partial += g * g;
            max_partial = max_partial.max(partial);
            if partial > 3.0 {
                holds = false;
            }
            prev = g;
        }
        GkMetadata { k_max: self.k_max(), sandwich_holds: holds, max_partial_sum_sq: max_partial }
    }
}

/// Iterates `g(x) = 1 - e^{-x}` starting from `g_1 = 1`.
pub fn gk_sequence(k_max: usize) -> Result<GkSequence> {
    if k_max == 0 {
        return Err(invalid("g_k sequence length must be at least 1"));
    }
    let mut values = Vec::with_capacity(k_max);
    let mut g = 1.0_f64;
    values.push(g);
    for _ in 1..k_max {
        g = -(-g).exp_m1();
        values.push(g);
    }
    Ok(GkSequence { values })
}

/// `ln E[U^t]` for `U ~ χ²_m / m`.
pub fn ln_chi2_scaled_moment(t: f64, m: u64) -> Result<f64> {
    if m == 0 {
        return Err(invalid("degrees of freedom must be at least 1"));
    }
    let half = m as f64 / 2.0;
    if !t.is_finite() || t <= -half {
        return Err(invalid(format!("moment order t={t} must exceed -m/2={}", -half)));
    }
    Ok(ln_gamma(t + half) - ln_gamma(half) - t * half.ln())
}

/// `E[U^t] = Γ(t + m/2) / ((m/2)^t Γ(m/2))` for `U ~ χ²_m / m`, evaluated
/// through log-Gamma differences.
pub fn chi2_scaled_moment(t: f64, m: u64) -> Result<f64> {
    // The integer moments are exactly 1; skip the rounding of the lgamma path.
    if t == 0.0 || (t == 1.0 && m >= 1) {
        return ln_chi2_scaled_moment(t, m).map(|_| 1.0);
    }
    ln_chi2_scaled_moment(t, m).map(f64::exp)
}

/// Gurland's upper bound on `E[U^{1/2}]` followed by its exponential relaxation:
/// `((1 + 1/(2m))^{-1/2}, exp(-1/(4m+3)))`.
pub fn gurland_half_moment_bound(m: u64) -> Result<(f64, f64)> {
    if m < 2 {
        return Err(invalid(format!("Gurland's bound needs m >= 2, got {m}")));
    }
    let m = m as f64;
    let first = (1.0 + 1.0 / (2.0 * m)).powf(-0.5);
    let second = (-1.0 / (4.0 * m + 3.0)).exp();
    Ok((first, second))
}

const GRID_POINTS: usize = 1001;
const GOLDEN_TOL: f64 = 1e-10;

/// `min_{t ∈ [0,1]} (σ0²/ε²)^t · E[U^t]^k` with `U ~ χ²_{n-1}/(n-1)`.
///
/// The objective is log-convex in `t`, so a dense grid followed by golden
/// section search on the bracketing cells finds the global minimum.
pub fn gaussian_tail_bound_optimized(sigma0: f64, eps: f64, k: u64, n: u64) -> Result<f64> {
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(invalid(format!("sigma0 must be positive, got {sigma0}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    if n < 3 {
        return Err(invalid(format!("n must be at least 3, got {n}")));
    }
    let m = n - 1;
    let log_ratio = 2.0 * (sigma0 / eps).ln();
    let kf = k as f64;
    let objective = |t: f64| -> f64 {
        // t in [0,1] and m >= 2 keep the lgamma argument positive.
        let lm = ln_chi2_scaled_moment(t, m).expect("t within [0,1]");
        t * log_ratio + kf * lm
    };

    let step = 1.0 / (GRID_POINTS - 1) as f64;
    let mut best_i = 0;
    let mut best = objective(0.0);
    for i in 1..GRID_POINTS {
        let v = objective(i as f64 * step);
        if v < best {
            best = v;
            best_i = i;
        }
    }

    let mut lo = (best_i.saturating_sub(1)) as f64 * step;
    let mut hi = ((best_i + 1).min(GRID_POINTS - 1)) as f64 * step;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = objective(c);
    let mut fd = objective(d);
    while hi - lo > GOLDEN_TOL {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = objective(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = objective(d);
        }
    }
    let refined = objective(0.5 * (lo + hi));
    Ok(best.min(fc).min(fd).min(refined).exp())
}
