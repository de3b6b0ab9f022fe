//! Browser bindings: each export takes plain numbers and returns a JSON
//! string, so the page needs no generated TypeScript types.

use collapse_core::bounds::{bernoulli_survival_bounds, gaussian_collapse_bound, gmm_collapse_bound};
use collapse_core::gmm::{approx_joint_ml, joint_ml, Branch, GmmEstimate, DEFAULT_TOL};
use collapse_core::math::{gaussian_tail_bound_optimized, gk_sequence};
use collapse_core::montecarlo::{estimate, EventKind, EventQuery, McConfig};
use collapse_core::processes::{sample_mixture, Estimator, ProcessSpec};
use collapse_core::rng::trajectory_rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Keeps a click from freezing the tab.
const MAX_WORK: u64 = 20_000_000;

fn budget(trials: u32, k_max: u32) -> Result<(), String> {
    if trials == 0 || k_max == 0 {
        return Err("trials and K must be positive".into());
    }
    if u64::from(trials) * u64::from(k_max) > MAX_WORK {
        return Err(format!("trials x K must stay below {MAX_WORK}"));
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SurvivalView {
    ks: Vec<u64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// `null` where the tight bound's precondition fails.
    tight_upper: Vec<Option<f64>>,
    empirical: Vec<f64>,
    half_width: Vec<f64>,
}

/// Survival of the Bernoulli process: bounds and a Monte Carlo estimate of
/// `Pr(P_k != 0)` for `k = 1..=k_max`.
#[wasm_bindgen]
pub fn bernoulli_survival(p0: f64, n: u32, k_max: u32, trials: u32, seed: u32) -> Result<String, String> {
    budget(trials, k_max)?;
    let spec = ProcessSpec::bernoulli(p0, u64::from(n)).map_err(|e| e.to_string())?;
    let gk = gk_sequence(k_max as usize).map_err(|e| e.to_string())?;
    let ks: Vec<u64> = (1..=u64::from(k_max)).collect();
    let mut view = SurvivalView {
        ks: ks.clone(),
        lower: Vec::new(),
        upper: Vec::new(),
        tight_upper: Vec::new(),
        empirical: Vec::new(),
        half_width: Vec::new(),
    };
    for &k in &ks {
        let b = bernoulli_survival_bounds(p0, u64::from(n), k, &gk).map_err(|e| e.to_string())?;
        view.lower.push(b.lower);
        view.upper.push(b.upper);
        view.tight_upper.push(b.tight_upper);
    }
    let query = EventQuery::new(EventKind::SurvivalNotZero, None, ks).map_err(|e| e.to_string())?;
    let summary =
        estimate(&spec, &query, &McConfig::new(u64::from(trials), u64::from(seed))).map_err(|e| e.to_string())?;
    for e in &summary.per_k {
        view.empirical.push(e.value);
        view.half_width.push(e.half_width);
    }
    to_json(&view)
}

#[derive(Serialize)]
struct CollapseView {
    ks: Vec<u64>,
    closed_form: Vec<f64>,
    /// Chernoff-optimised bound; only for the Gaussian family.
    optimized: Option<Vec<f64>>,
    empirical: Vec<f64>,
    half_width: Vec<f64>,
}

fn collapse_view(
    spec: &ProcessSpec,
    sigma0: f64,
    eps: f64,
    k_max: u32,
    trials: u32,
    seed: u32,
) -> Result<String, String> {
    budget(trials, k_max)?;
    let n = spec.n;
    let gaussian = spec.estimator == Estimator::MlUnbiasedVariance;
    let ks: Vec<u64> = (0..=u64::from(k_max)).collect();
    let mut closed = Vec::with_capacity(ks.len());
    let mut optimized = Vec::with_capacity(ks.len());
    for &k in &ks {
        let c =
            if gaussian { gaussian_collapse_bound(sigma0, eps, n, k) } else { gmm_collapse_bound(sigma0, eps, n, k) };
        closed.push(c.map_err(|e| e.to_string())?);
        if gaussian && sigma0 > 0.0 {
            optimized.push(gaussian_tail_bound_optimized(sigma0, eps, k, n).map_err(|e| e.to_string())?);
        }
    }
    let query = EventQuery::new(EventKind::SigmaExceeds, Some(eps), ks.clone()).map_err(|e| e.to_string())?;
    let summary =
        estimate(spec, &query, &McConfig::new(u64::from(trials), u64::from(seed))).map_err(|e| e.to_string())?;
    to_json(&CollapseView {
        ks,
        closed_form: closed,
        optimized: (gaussian && sigma0 > 0.0).then_some(optimized),
        empirical: summary.per_k.iter().map(|e| e.value).collect(),
        half_width: summary.per_k.iter().map(|e| e.half_width).collect(),
    })
}

/// `Pr(Σ_k > ε)` for the Gaussian process with unbiased variance
/// re-estimation, against the closed-form and optimised bounds.
#[wasm_bindgen]
pub fn gaussian_collapse(sigma0: f64, eps: f64, n: u32, k_max: u32, trials: u32, seed: u32) -> Result<String, String> {
    let spec =
        ProcessSpec::gaussian(0.0, sigma0, u64::from(n), Estimator::MlUnbiasedVariance).map_err(|e| e.to_string())?;
    collapse_view(&spec, sigma0, eps, k_max, trials, seed)
}

/// Same for the symmetric two-component mixture under the approximate
/// joint ML estimator.
#[wasm_bindgen]
pub fn mixture_collapse(
    mu0: f64,
    sigma0: f64,
    eps: f64,
    n: u32,
    k_max: u32,
    trials: u32,
    seed: u32,
) -> Result<String, String> {
    let spec = ProcessSpec::gmm(mu0, sigma0, u64::from(n), Estimator::ApproxJointMl).map_err(|e| e.to_string())?;
    collapse_view(&spec, sigma0, eps, k_max, trials, seed)
}

#[derive(Serialize)]
struct FitView {
    mu: f64,
    sigma: f64,
    finite: bool,
}

impl From<&GmmEstimate> for FitView {
    fn from(e: &GmmEstimate) -> Self {
        FitView { mu: e.mu_hat, sigma: e.sigma_hat(), finite: e.branch == Branch::FiniteIntersection }
    }
}

#[derive(Serialize)]
struct MixtureFitView {
    samples: Vec<f64>,
    joint: FitView,
    approx: FitView,
}

/// Draws `n` samples from `½N(-μ,σ²) + ½N(μ,σ²)` and fits both estimators.
#[wasm_bindgen]
pub fn mixture_fit(mu: f64, sigma: f64, n: u32, seed: u32) -> Result<String, String> {
    if !(mu >= 0.0 && mu.is_finite() && sigma >= 0.0 && sigma.is_finite()) {
        return Err(format!("invalid mixture parameters mu={mu}, sigma={sigma}"));
    }
    if !(4..=100_000).contains(&n) {
        return Err("n must lie in 4..=100000".into());
    }
    let mut xs = Vec::new();
    sample_mixture(mu, sigma, n as usize, &mut trajectory_rng(u64::from(seed), 0), &mut xs);
    let joint = joint_ml(&xs, DEFAULT_TOL).map_err(|e| e.to_string())?;
    let approx = approx_joint_ml(&xs).map_err(|e| e.to_string())?;
    to_json(&MixtureFitView { joint: (&joint).into(), approx: (&approx).into(), samples: xs })
}
