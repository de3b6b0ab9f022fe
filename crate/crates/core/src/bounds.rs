//! Closed-form collapse probabilities and bounds, evaluated per generation.
//!
//! Every `g_k`-based function takes a precomputed [`GkSequence`] so that all
//! curves of one experiment share the same sequence.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::math::{gaussian_tail_bound_optimized, GkSequence};
use crate::montecarlo::EventKind;
use crate::processes::{Family, ParamState, ProcessSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// The empirical quantity should not fall below the curve.
    Lower,
    /// The empirical quantity should not exceed the curve.
    Upper,
    /// The empirical quantity should match the curve.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSource {
    BernoulliSurvivalLower,
    BernoulliSurvivalUpper,
    BernoulliSurvivalTightUpper,
    BernoulliNontrivialLower,
    BernoulliNontrivialUpper,
    PoissonSurvivalExact,
    GaussianCollapseUpper,
    GaussianChernoffUpper,
    GmmCollapseUpper,
    UniqLower,
    UniqUpper,
    PoissonUniqExact,
    SeddikLower,
    SeddikUpper,
    /// Limit value of `Pr(absorbed at 0)`; a curve of this source carries a
    /// single point at the simulation horizon.
    AbsorptionExact,
}

impl BoundSource {
    pub const ALL: [BoundSource; 15] = [
        BoundSource::BernoulliSurvivalLower,
        BoundSource::BernoulliSurvivalUpper,
        BoundSource::BernoulliSurvivalTightUpper,
        BoundSource::BernoulliNontrivialLower,
        BoundSource::BernoulliNontrivialUpper,
        BoundSource::PoissonSurvivalExact,
        BoundSource::GaussianCollapseUpper,
        BoundSource::GaussianChernoffUpper,
        BoundSource::GmmCollapseUpper,
        BoundSource::UniqLower,
        BoundSource::UniqUpper,
        BoundSource::PoissonUniqExact,
        BoundSource::SeddikLower,
        BoundSource::SeddikUpper,
        BoundSource::AbsorptionExact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundSource::BernoulliSurvivalLower => "bernoulli_survival_lower",
            BoundSource::BernoulliSurvivalUpper => "bernoulli_survival_upper",
            BoundSource::BernoulliSurvivalTightUpper => "bernoulli_survival_tight_upper",
            BoundSource::BernoulliNontrivialLower => "bernoulli_nontrivial_lower",
            BoundSource::BernoulliNontrivialUpper => "bernoulli_nontrivial_upper",
            BoundSource::PoissonSurvivalExact => "poisson_survival_exact",
            BoundSource::GaussianCollapseUpper => "gaussian_collapse_upper",
            BoundSource::GaussianChernoffUpper => "gaussian_chernoff_upper",
            BoundSource::GmmCollapseUpper => "gmm_collapse_upper",
            BoundSource::UniqLower => "uniq_lower",
            BoundSource::UniqUpper => "uniq_upper",
            BoundSource::PoissonUniqExact => "poisson_uniq_exact",
            BoundSource::SeddikLower => "seddik_lower",
            BoundSource::SeddikUpper => "seddik_upper",
            BoundSource::AbsorptionExact => "absorption_exact",
        }
    }

    pub fn parse(s: &str) -> Result<BoundSource> {
        BoundSource::ALL
            .into_iter()
            .find(|b| b.name() == s.trim())
            .ok_or_else(|| invalid(format!("unknown bound source {s:?}")))
    }

    pub fn relation(self) -> Relation {
        use BoundSource::*;
        match self {
            BernoulliSurvivalLower | BernoulliNontrivialLower | UniqLower | SeddikLower => Relation::Lower,
            BernoulliSurvivalUpper
            | BernoulliSurvivalTightUpper
            | BernoulliNontrivialUpper
            | GaussianCollapseUpper
            | GaussianChernoffUpper
            | GmmCollapseUpper
            | UniqUpper
            | SeddikUpper => Relation::Upper,
            PoissonSurvivalExact | PoissonUniqExact | AbsorptionExact => Relation::Exact,
        }
    }

    /// The empirical event this source makes a statement about.
    pub fn event(self) -> EventKind {
        use BoundSource::*;
        match self {
            BernoulliSurvivalLower | BernoulliSurvivalUpper | BernoulliSurvivalTightUpper | PoissonSurvivalExact => {
                EventKind::SurvivalNotZero
            }
            BernoulliNontrivialLower | BernoulliNontrivialUpper | SeddikLower | SeddikUpper => {
                EventKind::SurvivalNotTrivial
            }
            GaussianCollapseUpper | GaussianChernoffUpper | GmmCollapseUpper => EventKind::SigmaExceeds,
            UniqLower | UniqUpper | PoissonUniqExact => EventKind::UniqCount,
            AbsorptionExact => EventKind::AbsorbedAtZero,
        }
    }

    /// Whether values are probabilities (clamped to `[0,1]`) rather than counts.
    pub fn is_probability(self) -> bool {
        self.event() != EventKind::UniqCount
    }
}

impl fmt::Display for BoundSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters a curve was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    pub family: Family,
    pub initial: ParamState,
    pub n: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

impl CurveParams {
    pub fn from_spec(spec: &ProcessSpec, eps: Option<f64>) -> CurveParams {
        CurveParams { family: spec.family, initial: spec.initial.clone(), n: spec.n, eps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub k: u64,
    pub value: f64,
    /// The raw formula fell outside `[0,1]` and was clamped.
    #[serde(default)]
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub source: BoundSource,
    pub params: CurveParams,
    pub points: Vec<BoundPoint>,
}

impl BoundCurve {
    pub fn value_at(&self, k: u64) -> Option<f64> {
        self.points.iter().find(|p| p.k == k).map(|p| p.value)
    }

    pub fn any_clamped(&self) -> bool {
        self.points.iter().any(|p| p.clamped)
    }
}

fn clamp_unit(raw: f64) -> (f64, bool) {
    let v = raw.clamp(0.0, 1.0);
    (v, v != raw)
}

fn point(k: u64, raw: f64) -> BoundPoint {
    let (value, clamped) = clamp_unit(raw);
    BoundPoint { k, value, clamped }
}

fn check_p(p0: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p0) {
        Ok(())
    } else {
        Err(invalid(format!("p0 must lie in [0,1], got {p0}")))
    }
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        Err(invalid("n must be at least 1"))
    } else {
        Ok(())
    }
}

fn gk_at(gk: &GkSequence, k: u64) -> Result<f64> {
    gk.at(usize::try_from(k).map_err(|_| invalid("k too large"))?)
}

/// `1 - e^{-x g_k}`: survival of a mass `x` under `k` rounds.
fn survival(x: f64, g: f64) -> f64 {
    -(-x * g).exp_m1()
}

/// `max(1 - 3n x² - 3k x, 0)`.
fn upper_factor(x: f64, n: u64, k: u64) -> f64 {
    (1.0 - 3.0 * n as f64 * x * x - 3.0 * k as f64 * x).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalBounds {
    pub lower: f64,
    pub upper: f64,
    /// Present only when `0 < p0 <= min(1/(6k), 1/√(6n))`.
    pub tight_upper: Option<f64>,
}

/// Whether the tight survival upper bound applies at `(p0, n, k)`. A start
/// at 0 is already absorbed and gets only the exact zero curves.
pub fn tight_upper_applies(p0: f64, n: u64, k: u64) -> bool {
    p0 > 0.0 && p0 <= (1.0 / (6.0 * k as f64)).min(1.0 / (6.0 * n as f64).sqrt())
}

/// Bounds on `Pr(P_k != 0)` for the Bernoulli process started at `p0`.
/// Bounds on `Pr(P_k != 1)` follow by passing `1 - p0`.
pub fn bernoulli_survival_bounds(p0: f64, n: u64, k: u64, gk: &GkSequence) -> Result<SurvivalBounds> {
    check_p(p0)?;
    check_n(n)?;
    let g = gk_at(gk, k)?;
    let x = n as f64 * p0;
    let decay = (-x * g).exp();
    let lower = survival(x, g).clamp(0.0, 1.0);
    let upper = (1.0 - upper_factor(p0, n, k) * decay).clamp(0.0, 1.0);
    let tight_upper = tight_upper_applies(p0, n, k).then(|| (1.0 - 0.5 * decay).clamp(0.0, 1.0));
    Ok(SurvivalBounds { lower, upper, tight_upper })
}

fn nontrivial_raw(p0: f64, n: u64, k: u64, gk: &GkSequence) -> Result<(f64, f64)> {
    check_p(p0)?;
    check_n(n)?;
    let g = gk_at(gk, k)?;
    let nf = n as f64;
    let d0 = (-nf * p0 * g).exp();
    let d1 = (-nf * (1.0 - p0) * g).exp();
    let lower = 1.0 - (d0 + d1);
    let upper = 1.0 - (upper_factor(p0, n, k) * d0 + upper_factor(1.0 - p0, n, k) * d1);
    Ok((lower, upper))
}

/// Bounds on `Pr(P_k ∉ {0,1})` from combining the survival bounds at `p0`
/// and `1 - p0`; clamped to `[0,1]`.
pub fn bernoulli_nontrivial_bounds(p0: f64, n: u64, k: u64, gk: &GkSequence) -> Result<(f64, f64)> {
    let (lo, hi) = nontrivial_raw(p0, n, k, gk)?;
    Ok((lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0)))
}

fn seddik_raw(p0: f64, n: u64, k: u64) -> Result<(f64, f64)> {
    check_p(p0)?;
    check_n(n)?;
    let nf = n as f64;
    let base = p0 * (1.0 - p0) * (1.0 - 1.0 / nf).powf(k as f64);
    Ok((4.0 * base, 2.0 * nf * base))
}

/// The earlier `4p0(1-p0)(1-1/n)^k` and `2n p0(1-p0)(1-1/n)^k` bounds on
/// `Pr(P_k ∉ {0,1})`, for comparison.
pub fn seddik_nontrivial_bounds(p0: f64, n: u64, k: u64) -> Result<(f64, f64)> {
    let (lo, hi) = seddik_raw(p0, n, k)?;
    Ok((lo.clamp(0.0, 1.0), hi.min(1.0)))
}

/// `Pr(Λ_k != 0) = 1 - e^{-n λ0 g_k}`.
pub fn poisson_survival_exact(lambda0: f64, n: u64, k: u64, gk: &GkSequence) -> Result<f64> {
    if !(lambda0 >= 0.0 && lambda0.is_finite()) {
        return Err(invalid(format!("lambda0 must be finite and >= 0, got {lambda0}")));
    }
    check_n(n)?;
    let g = gk_at(gk, k)?;
    Ok(survival(n as f64 * lambda0, g))
}

fn check_scale(sigma0: f64, eps: f64) -> Result<()> {
    if !(sigma0 >= 0.0 && sigma0.is_finite()) {
        return Err(invalid(format!("sigma0 must be finite and >= 0, got {sigma0}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

fn gaussian_rate(n: u64) -> Result<f64> {
    if n < 3 {
        return Err(invalid(format!("n must be at least 3, got {n}")));
    }
    Ok(4.0 * n as f64 - 1.0)
}

fn gmm_rate(n: u64) -> Result<f64> {
    if n < 3 {
        return Err(invalid(format!("n must be at least 3, got {n}")));
    }
    Ok(4.0 * n as f64)
}

fn gaussian_raw(sigma0: f64, eps: f64, n: u64, k: u64) -> Result<f64> {
    check_scale(sigma0, eps)?;
    Ok(sigma0 / eps * (-(k as f64) / gaussian_rate(n)?).exp())
}

/// `min(1, (σ0/ε) e^{-k/(4n-1)})`, an upper bound on `Pr(Σ_k > ε)`.
pub fn gaussian_collapse_bound(sigma0: f64, eps: f64, n: u64, k: u64) -> Result<f64> {
    gaussian_raw(sigma0, eps, n, k).map(|v| v.min(1.0))
}

/// Upper bound on `Pr(Σ_k > ε for some k >= m)`, from a union over the tail.
pub fn gaussian_union_tail_bound(sigma0: f64, eps: f64, n: u64, m: u64) -> Result<f64> {
    check_scale(sigma0, eps)?;
    let rate = gaussian_rate(n)?;
    let geometric = -(-1.0 / rate).exp_m1();
    Ok((sigma0 / eps / geometric * (-(m as f64) / rate).exp()).min(1.0))
}

/// Generations after which `Pr(Σ_k > ε) <= δ` is guaranteed:
/// `(4n-1) log(σ0/(εδ))`, floored at 0.
pub fn gaussian_collapse_threshold(sigma0: f64, eps: f64, delta: f64, n: u64) -> Result<f64> {
    threshold(sigma0, eps, delta, gaussian_rate(n)?)
}

fn threshold(sigma0: f64, eps: f64, delta: f64, rate: f64) -> Result<f64> {
    check_scale(sigma0, eps)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0,1), got {delta}")));
    }
    if sigma0 == 0.0 {
        return Ok(0.0);
    }
    Ok((rate * (sigma0 / (eps * delta)).ln()).max(0.0))
}

/// `min(1, (σ0/ε) e^{-k/(4n)})`, an upper bound on `Pr(Σ_k > ε)` for the
/// mixture process under the approximate joint ML estimator.
pub fn gmm_collapse_bound(sigma0: f64, eps: f64, n: u64, k: u64) -> Result<f64> {
    check_scale(sigma0, eps)?;
    Ok((sigma0 / eps * (-(k as f64) / gmm_rate(n)?).exp()).min(1.0))
}

/// `4n log(σ0/(εδ))`, floored at 0.
pub fn gmm_collapse_threshold(sigma0: f64, eps: f64, delta: f64, n: u64) -> Result<f64> {
    threshold(sigma0, eps, delta, gmm_rate(n)?)
}

fn check_theta(theta0: &[f64]) -> Result<()> {
    if theta0.is_empty() {
        return Err(invalid("theta is empty"));
    }
    if theta0.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(invalid("theta entries must be finite and >= 0"));
    }
    Ok(())
}

/// Bounds on `E[uniq_k]`, the expected number of symbols still carrying mass.
pub fn expected_uniq_bounds(theta0: &[f64], n: u64, k: u64, gk: &GkSequence) -> Result<(f64, f64)> {
    check_theta(theta0)?;
    check_n(n)?;
    let g = gk_at(gk, k)?;
    let nf = n as f64;
    let mut lower = 0.0;
    let mut upper = 0.0;
    for &t in theta0 {
        if t == 0.0 {
            continue;
        }
        let decay = (-nf * t * g).exp();
        lower += -(-nf * t * g).exp_m1();
        upper += 1.0 - decay * upper_factor(t, n, k);
    }
    Ok((lower, upper))
}

/// `E[uniq_k] = Σ (1 - e^{-n_i g_k})` under Poisson sampling.
pub fn poisson_uniq_exact(counts0: &[u64], k: u64, gk: &GkSequence) -> Result<f64> {
    let g = gk_at(gk, k)?;
    Ok(counts0.iter().filter(|&&c| c > 0).map(|&c| survival(c as f64, g)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Absorption {
    pub to_zero: f64,
    /// `a_i = Pr(absorb at 0 | P = i/n)` for `i = 0..=n`.
    pub conditional: Vec<f64>,
}

/// Absorption probabilities of the Bernoulli chain.
pub fn bernoulli_absorption(p0: f64, n: u64) -> Result<Absorption> {
    check_p(p0)?;
    check_n(n)?;
    let nf = n as f64;
    Ok(Absorption { to_zero: 1.0 - p0, conditional: (0..=n).map(|i| (n - i) as f64 / nf).collect() })
}

fn curve(source: BoundSource, params: &CurveParams, points: Vec<BoundPoint>) -> BoundCurve {
    BoundCurve { source, params: params.clone(), points }
}

/// All Bernoulli curves at generations `ks`. The tight upper curve only
/// contains the generations where its precondition holds.
pub fn bernoulli_curves(params: &CurveParams, p0: f64, ks: &[u64], gk: &GkSequence) -> Result<Vec<BoundCurve>> {
    let n = params.n;
    let mut lower = Vec::with_capacity(ks.len());
    let mut upper = Vec::with_capacity(ks.len());
    let mut tight = Vec::new();
    let mut nt_lower = Vec::with_capacity(ks.len());
    let mut nt_upper = Vec::with_capacity(ks.len());
    let mut sd_lower = Vec::with_capacity(ks.len());
    let mut sd_upper = Vec::with_capacity(ks.len());
    for &k in ks {
        let g = gk_at(gk, k)?;
        let x = n as f64 * p0;
        let decay = (-x * g).exp();
        check_p(p0)?;
        lower.push(point(k, survival(x, g)));
        upper.push(point(k, 1.0 - upper_factor(p0, n, k) * decay));
        if tight_upper_applies(p0, n, k) {
            tight.push(point(k, 1.0 - 0.5 * decay));
        }
        let (lo, hi) = nontrivial_raw(p0, n, k, gk)?;
        nt_lower.push(point(k, lo));
        nt_upper.push(point(k, hi));
        let (lo, hi) = seddik_raw(p0, n, k)?;
        sd_lower.push(point(k, lo));
        sd_upper.push(point(k, hi));
    }
    let mut out = vec![
        curve(BoundSource::BernoulliSurvivalLower, params, lower),
        curve(BoundSource::BernoulliSurvivalUpper, params, upper),
    ];
    if !tight.is_empty() {
        out.push(curve(BoundSource::BernoulliSurvivalTightUpper, params, tight));
    }
    out.push(curve(BoundSource::BernoulliNontrivialLower, params, nt_lower));
    out.push(curve(BoundSource::BernoulliNontrivialUpper, params, nt_upper));
    out.push(curve(BoundSource::SeddikLower, params, sd_lower));
    out.push(curve(BoundSource::SeddikUpper, params, sd_upper));
    Ok(out)
}

/// Single-point absorption curve at the horizon `k`.
pub fn absorption_curve(params: &CurveParams, p0: f64, k: u64) -> Result<BoundCurve> {
    let a = bernoulli_absorption(p0, params.n)?;
    Ok(curve(BoundSource::AbsorptionExact, params, vec![point(k, a.to_zero)]))
}

pub fn poisson_curves(params: &CurveParams, lambda0: f64, ks: &[u64], gk: &GkSequence) -> Result<Vec<BoundCurve>> {
    let points = ks
        .iter()
        .map(|&k| Ok(point(k, poisson_survival_exact(lambda0, params.n, k, gk)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![curve(BoundSource::PoissonSurvivalExact, params, points)])
}

fn require_eps(params: &CurveParams) -> Result<f64> {
    params.eps.ok_or_else(|| invalid("variance-collapse curves need eps"))
}

/// Closed-form and Chernoff-optimised Gaussian curves. The optimised curve is
/// skipped when `σ0 = 0`, where every probability is trivially 0.
pub fn gaussian_curves(params: &CurveParams, sigma0: f64, ks: &[u64]) -> Result<Vec<BoundCurve>> {
    let eps = require_eps(params)?;
    let n = params.n;
    let closed = ks.iter().map(|&k| Ok(point(k, gaussian_raw(sigma0, eps, n, k)?))).collect::<Result<Vec<_>>>()?;
    let optimized = ks
        .iter()
        .map(|&k| {
            let raw = if sigma0 == 0.0 { 0.0 } else { gaussian_tail_bound_optimized(sigma0, eps, k, n)? };
            Ok(point(k, raw))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![
        curve(BoundSource::GaussianCollapseUpper, params, closed),
        curve(BoundSource::GaussianChernoffUpper, params, optimized),
    ])
}

pub fn gmm_curves(params: &CurveParams, sigma0: f64, ks: &[u64]) -> Result<Vec<BoundCurve>> {
    let eps = require_eps(params)?;
    check_scale(sigma0, eps)?;
    let rate = gmm_rate(params.n)?;
    let points = ks.iter().map(|&k| point(k, sigma0 / eps * (-(k as f64) / rate).exp())).collect();
    Ok(vec![curve(BoundSource::GmmCollapseUpper, params, points)])
}

pub fn uniq_curves(params: &CurveParams, theta0: &[f64], ks: &[u64], gk: &GkSequence) -> Result<Vec<BoundCurve>> {
    let mut lower = Vec::with_capacity(ks.len());
    let mut upper = Vec::with_capacity(ks.len());
    for &k in ks {
        let (lo, hi) = expected_uniq_bounds(theta0, params.n, k, gk)?;
        lower.push(BoundPoint { k, value: lo, clamped: false });
        upper.push(BoundPoint { k, value: hi, clamped: false });
    }
    Ok(vec![curve(BoundSource::UniqLower, params, lower), curve(BoundSource::UniqUpper, params, upper)])
}

pub fn poisson_uniq_curves(
    params: &CurveParams,
    counts0: &[u64],
    ks: &[u64],
    gk: &GkSequence,
) -> Result<Vec<BoundCurve>> {
    let points = ks
        .iter()
        .map(|&k| Ok(BoundPoint { k, value: poisson_uniq_exact(counts0, k, gk)?, clamped: false }))
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![curve(BoundSource::PoissonUniqExact, params, points)])
}

/// Every curve that applies to `spec` at generations `ks`. The Gaussian and
/// mixture families need `eps`.
pub fn curves_for(spec: &ProcessSpec, eps: Option<f64>, ks: &[u64], gk: &GkSequence) -> Result<Vec<BoundCurve>> {
    spec.validate()?;
    let params = CurveParams::from_spec(spec, eps);
    match &spec.initial {
        ParamState::Bernoulli { p } => bernoulli_curves(&params, *p, ks, gk),
        ParamState::Poisson { lambda } => poisson_curves(&params, *lambda, ks, gk),
        ParamState::Gaussian { sigma2, .. } => gaussian_curves(&params, sigma2.sqrt(), ks),
        ParamState::Gmm { sigma2, .. } => gmm_curves(&params, sigma2.sqrt(), ks),
        ParamState::Discrete { theta } => uniq_curves(&params, theta, ks, gk),
        ParamState::DiscretePoisson { counts } => poisson_uniq_curves(&params, counts, ks, gk),
    }
}
