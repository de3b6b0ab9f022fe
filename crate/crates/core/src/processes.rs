//! Recursive-training processes: fit a model to `n` samples, draw `n` fresh
//! samples from the fit, repeat.
//!
//! Each family is simulated through the exact law of its estimator given the
//! previous parameter, so a step never materialises the intermediate sample
//! except for the mixture family, whose estimators need the raw data.

use std::fmt;

use rand::Rng;
use rand_distr::{Binomial, ChiSquared, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gmm;
use crate::rng::trajectory_rng;

const SIMPLEX_TOL: f64 = 1e-9;
const SIMPLEX_EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Bernoulli,
    Poisson,
    Gaussian,
    Gmm,
    Discrete,
    DiscretePoisson,
}

impl Family {
    pub const ALL: [Family; 6] =
        [Family::Bernoulli, Family::Poisson, Family::Gaussian, Family::Gmm, Family::Discrete, Family::DiscretePoisson];

    pub fn name(self) -> &'static str {
        match self {
            Family::Bernoulli => "bernoulli",
            Family::Poisson => "poisson",
            Family::Gaussian => "gaussian",
            Family::Gmm => "gmm",
            Family::Discrete => "discrete",
            Family::DiscretePoisson => "discrete_poisson",
        }
    }

    pub fn parse(s: &str) -> Result<Family> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Family::ALL.into_iter().find(|f| f.name() == norm).ok_or_else(|| invalid(format!("unknown family {s:?}")))
    }

    pub fn default_estimator(self) -> Estimator {
        match self {
            Family::Gaussian => Estimator::MlUnbiasedVariance,
            Family::Gmm => Estimator::ApproxJointMl,
            _ => Estimator::Ml,
        }
    }

    /// Smallest admissible samples-per-round for this family.
    pub fn min_n(self) -> u64 {
        match self {
            Family::Gaussian | Family::Gmm => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Ml,
    MlUnbiasedVariance,
    JointMl,
    ApproxJointMl,
}

impl Estimator {
    pub const ALL: [Estimator; 4] =
        [Estimator::Ml, Estimator::MlUnbiasedVariance, Estimator::JointMl, Estimator::ApproxJointMl];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Ml => "ml",
            Estimator::MlUnbiasedVariance => "ml_unbiased_variance",
            Estimator::JointMl => "joint_ml",
            Estimator::ApproxJointMl => "approx_joint_ml",
        }
    }

    pub fn parse(s: &str) -> Result<Estimator> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Estimator::ALL.into_iter().find(|e| e.name() == norm).ok_or_else(|| invalid(format!("unknown estimator {s:?}")))
    }

    fn valid_for(self, family: Family) -> bool {
        match self {
            Estimator::Ml => family != Family::Gmm,
            Estimator::MlUnbiasedVariance => family == Family::Gaussian,
            Estimator::JointMl | Estimator::ApproxJointMl => family == Family::Gmm,
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Model parameters at one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ParamState {
    Bernoulli { p: f64 },
    Poisson { lambda: f64 },
    Gaussian { mu: f64, sigma2: f64 },
    Gmm { mu: f64, sigma2: f64 },
    Discrete { theta: Vec<f64> },
    DiscretePoisson { counts: Vec<u64> },
}

impl ParamState {
    pub fn family(&self) -> Family {
        match self {
            ParamState::Bernoulli { .. } => Family::Bernoulli,
            ParamState::Poisson { .. } => Family::Poisson,
            ParamState::Gaussian { .. } => Family::Gaussian,
            ParamState::Gmm { .. } => Family::Gmm,
            ParamState::Discrete { .. } => Family::Discrete,
            ParamState::DiscretePoisson { .. } => Family::DiscretePoisson,
        }
    }

    /// True when no further step can change the state.
    pub fn is_absorbed(&self) -> bool {
        match self {
            ParamState::Bernoulli { p } => *p == 0.0 || *p == 1.0,
            ParamState::Poisson { lambda } => *lambda == 0.0,
            ParamState::Gaussian { sigma2, .. } | ParamState::Gmm { sigma2, .. } => *sigma2 == 0.0,
            ParamState::Discrete { theta } => theta.iter().filter(|&&t| t > 0.0).count() <= 1,
            ParamState::DiscretePoisson { counts } => counts.iter().all(|&c| c == 0),
        }
    }

    /// Variance parameter for the continuous families.
    pub fn sigma2(&self) -> Option<f64> {
        match self {
            ParamState::Gaussian { sigma2, .. } | ParamState::Gmm { sigma2, .. } => Some(*sigma2),
            _ => None,
        }
    }

    /// Number of symbols with non-zero mass (discrete families).
    pub fn distinct(&self) -> Option<usize> {
        match self {
            ParamState::Discrete { theta } => Some(theta.iter().filter(|&&t| t > 0.0).count()),
            ParamState::DiscretePoisson { counts } => Some(counts.iter().filter(|&&c| c > 0).count()),
            _ => None,
        }
    }

    /// The functional whose conditional expectation is preserved by one step:
    /// `p`, `λ`, `σ²`, `μ² + σ²`, and `n_i` summed for Poisson sampling.
    /// Discrete families report the mass of symbol 0.
    pub fn martingale_value(&self) -> f64 {
        match self {
            ParamState::Bernoulli { p } => *p,
            ParamState::Poisson { lambda } => *lambda,
            ParamState::Gaussian { sigma2, .. } => *sigma2,
            ParamState::Gmm { mu, sigma2 } => mu * mu + sigma2,
            ParamState::Discrete { theta } => theta.first().copied().unwrap_or(0.0),
            ParamState::DiscretePoisson { counts } => counts.iter().sum::<u64>() as f64,
        }
    }

    /// Initial parameter from the sample statistics of an observed dataset.
    ///
    /// Bernoulli and Poisson use the sample mean, the Gaussian family the
    /// sample mean and unbiased variance, and the mixture family its
    /// approximate joint ML fit.
    pub fn from_samples(family: Family, samples: &[f64]) -> Result<ParamState> {
        if samples.is_empty() {
            return Err(invalid("no samples"));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(invalid("samples must be finite"));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        match family {
            Family::Bernoulli => {
                if samples.iter().any(|&x| x != 0.0 && x != 1.0) {
                    return Err(invalid("Bernoulli samples must be 0 or 1"));
                }
                Ok(ParamState::Bernoulli { p: mean })
            }
            Family::Poisson => {
                if samples.iter().any(|&x| x < 0.0 || x.fract() != 0.0) {
                    return Err(invalid("Poisson samples must be non-negative integers"));
                }
                Ok(ParamState::Poisson { lambda: mean })
            }
            Family::Gaussian => {
                if samples.len() < 2 {
                    return Err(invalid("need at least 2 samples for a variance"));
                }
                let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
                Ok(ParamState::Gaussian { mu: mean, sigma2: ss / (n - 1.0) })
            }
            Family::Gmm => {
                let e = gmm::approx_joint_ml(samples)?;
                Ok(ParamState::Gmm { mu: e.mu_hat, sigma2: e.sigma2_hat })
            }
            Family::Discrete | Family::DiscretePoisson => {
                Err(invalid("discrete families take their initial parameter from a theta/count file"))
            }
        }
    }
}

/// One recursive-training experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub family: Family,
    pub initial: ParamState,
    /// Samples per round.
    pub n: u64,
    pub estimator: Estimator,
    /// Override for the large-`a` constant of the approximate mixture estimator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approx_a: Option<f64>,
}

impl ProcessSpec {
    pub fn new(initial: ParamState, n: u64, estimator: Estimator) -> Result<ProcessSpec> {
        let spec = ProcessSpec { family: initial.family(), initial, n, estimator, approx_a: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn bernoulli(p0: f64, n: u64) -> Result<ProcessSpec> {
        ProcessSpec::new(ParamState::Bernoulli { p: p0 }, n, Estimator::Ml)
    }

    pub fn poisson(lambda0: f64, n: u64) -> Result<ProcessSpec> {
        ProcessSpec::new(ParamState::Poisson { lambda: lambda0 }, n, Estimator::Ml)
    }

    pub fn gaussian(mu0: f64, sigma0: f64, n: u64, estimator: Estimator) -> Result<ProcessSpec> {
        ProcessSpec::new(ParamState::Gaussian { mu: mu0, sigma2: sigma0 * sigma0 }, n, estimator)
    }

    pub fn gmm(mu0: f64, sigma0: f64, n: u64, estimator: Estimator) -> Result<ProcessSpec> {
        ProcessSpec::new(ParamState::Gmm { mu: mu0, sigma2: sigma0 * sigma0 }, n, estimator)
    }

    pub fn discrete(theta0: Vec<f64>, n: u64) -> Result<ProcessSpec> {
        ProcessSpec::new(ParamState::Discrete { theta: theta0 }, n, Estimator::Ml)
    }

    pub fn discrete_poisson(counts0: Vec<u64>) -> Result<ProcessSpec> {
        let n = counts0.iter().sum::<u64>().max(1);
        ProcessSpec::new(ParamState::DiscretePoisson { counts: counts0 }, n, Estimator::Ml)
    }

    pub fn with_approx_a(mut self, a: f64) -> Result<ProcessSpec> {
        self.approx_a = Some(a);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial.family() != self.family {
            return Err(invalid(format!("initial state is {} but family is {}", self.initial.family(), self.family)));
        }
        if self.n < self.family.min_n() {
            return Err(invalid(format!(
                "n={} too small for {} (need n >= {})",
                self.n,
                self.family,
                self.family.min_n()
            )));
        }
        if !self.estimator.valid_for(self.family) {
            return Err(invalid(format!("estimator {} is not defined for family {}", self.estimator, self.family)));
        }
        if self.estimator == Estimator::ApproxJointMl && self.n <= 3 {
            return Err(invalid("approximate joint ML needs n > 3"));
        }
        if let Some(a) = self.approx_a {
            if !(a > 2.0) || self.estimator != Estimator::ApproxJointMl {
                return Err(invalid("approx_a must exceed 2 and needs the approx_joint_ml estimator"));
            }
        }
        validate_state(&self.initial)
    }
}

fn validate_state(state: &ParamState) -> Result<()> {
    match state {
        ParamState::Bernoulli { p } => check_probability(*p),
        ParamState::Poisson { lambda } => check_rate(*lambda),
        ParamState::Gaussian { mu, sigma2 } => {
            if !mu.is_finite() {
                return Err(invalid(format!("mu must be finite, got {mu}")));
            }
            check_variance(*sigma2)
        }
        ParamState::Gmm { mu, sigma2 } => {
            if !(*mu >= 0.0 && mu.is_finite()) {
                return Err(invalid(format!("mixture mu must be finite and >= 0, got {mu}")));
            }
            check_variance(*sigma2)
        }
        ParamState::Discrete { theta } => check_simplex(theta, SIMPLEX_EXACT_TOL).map(|_| ()),
        ParamState::DiscretePoisson { .. } => Ok(()),
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!("probability must lie in [0,1], got {p}")))
    }
}

fn check_rate(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("rate must be finite and >= 0, got {lambda}")))
    }
}

fn check_variance(sigma2: f64) -> Result<()> {
    if sigma2 >= 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("variance must be finite and >= 0, got {sigma2}")))
    }
}

/// Returns the sum of `theta` after checking it lies on the simplex within `tol`.
fn check_simplex(theta: &[f64], tol: f64) -> Result<f64> {
    if theta.is_empty() {
        return Err(invalid("probability vector is empty"));
    }
    if let Some(i) = theta.iter().position(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(invalid(format!("theta[{i}] = {} is not a probability", theta[i])));
    }
    let sum: f64 = theta.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(invalid(format!("probability vector sums to {sum}, not 1")));
    }
    Ok(sum)
}

/// `B/n` with `B ~ Binomial(n, p)`.
pub fn step_bernoulli<R: Rng + ?Sized>(p: f64, n: u64, rng: &mut R) -> Result<f64> {
    check_probability(p)?;
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(p);
    }
    let b = Binomial::new(n, p).map_err(|e| invalid(e.to_string()))?;
    Ok(b.sample(rng) as f64 / n as f64)
}

/// `Y/n` with `Y ~ Poisson(nλ)`.
pub fn step_poisson<R: Rng + ?Sized>(lambda: f64, n: u64, rng: &mut R) -> Result<f64> {
    check_rate(lambda)?;
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    Ok(poisson_draw(lambda * n as f64, rng)? as f64 / n as f64)
}

fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| invalid(e.to_string()))?;
    let y: f64 = d.sample(rng);
    Ok(y as u64)
}

/// One Gaussian round: `μ' ~ N(μ, σ²/n)` and, independently,
/// `σ'² ~ σ² χ²_{n-1}/(n-1)`, scaled by `(n-1)/n` for the plain ML variance.
pub fn step_gaussian<R: Rng + ?Sized>(
    mu: f64,
    sigma2: f64,
    n: u64,
    estimator: Estimator,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(invalid(format!("Gaussian process needs n >= 3, got {n}")));
    }
    check_variance(sigma2)?;
    if !estimator.valid_for(Family::Gaussian) {
        return Err(invalid(format!("estimator {estimator} is not defined for gaussian")));
    }
    if sigma2 == 0.0 {
        return Ok((mu, 0.0));
    }
    let nf = n as f64;
    let z: f64 = StandardNormal.sample(rng);
    let mu_next = mu + (sigma2 / nf).sqrt() * z;
    let chi = ChiSquared::new(nf - 1.0).map_err(|e| invalid(e.to_string()))?;
    let mut sigma2_next = sigma2 * chi.sample(rng) / (nf - 1.0);
    if estimator == Estimator::Ml {
        sigma2_next *= (nf - 1.0) / nf;
    }
    Ok((mu_next, sigma2_next))
}

/// Multinomial resampling: counts `C ~ Multinomial(n, θ)`, returned as `C/n`.
pub fn step_discrete<R: Rng + ?Sized>(theta: &[f64], n: u64, rng: &mut R) -> Result<Vec<f64>> {
    let counts = multinomial_counts(theta, n, rng)?;
    let nf = n as f64;
    Ok(counts.into_iter().map(|c| c as f64 / nf).collect())
}

/// Draws `Multinomial(n, θ)` counts by sequential conditional binomials.
pub fn multinomial_counts<R: Rng + ?Sized>(theta: &[f64], n: u64, rng: &mut R) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let sum = check_simplex(theta, SIMPLEX_TOL)?;
    if (sum - 1.0).abs() > SIMPLEX_EXACT_TOL {
        log::debug!("renormalising probability vector with sum {sum}");
    }
    let mut counts = vec![0u64; theta.len()];
    let Some(last) = theta.iter().rposition(|&t| t > 0.0) else {
        return Err(invalid("probability vector has no mass"));
    };
    let mut remaining = n;
    let mut mass = sum;
    for (i, &t) in theta.iter().enumerate().take(last + 1) {
        if remaining == 0 {
            break;
        }
        if t == 0.0 {
            continue;
        }
        let c = if i == last {
            remaining
        } else {
            let p = (t / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, p).map_err(|e| invalid(e.to_string()))?.sample(rng)
        };
        counts[i] = c;
        remaining -= c;
        mass -= t;
    }
    Ok(counts)
}

/// Poisson sampling of a discrete distribution: every entry is redrawn as
/// `Poisson(entry)` independently.
pub fn step_discrete_poisson<R: Rng + ?Sized>(counts: &[u64], rng: &mut R) -> Result<Vec<u64>> {
    counts.iter().map(|&c| poisson_draw(c as f64, rng)).collect()
}

/// Draws `n` samples from `½N(-μ,σ²) + ½N(μ,σ²)` into `buf`.
pub fn sample_mixture<R: Rng + ?Sized>(mu: f64, sigma: f64, n: usize, rng: &mut R, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend((0..n).map(|_| {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let z: f64 = StandardNormal.sample(rng);
        sign * (mu + sigma * z)
    }));
}

/// One mixture round: sample, then re-estimate with the requested estimator.
pub fn step_gmm<R: Rng + ?Sized>(
    mu: f64,
    sigma2: f64,
    n: u64,
    estimator: Estimator,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let mut buf = Vec::with_capacity(n as usize);
    step_gmm_buffered(mu, sigma2, n, estimator, None, rng, &mut buf)
}

fn step_gmm_buffered<R: Rng + ?Sized>(
    mu: f64,
    sigma2: f64,
    n: u64,
    estimator: Estimator,
    approx_a: Option<f64>,
    rng: &mut R,
    buf: &mut Vec<f64>,
) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(invalid(format!("mixture process needs n >= 3, got {n}")));
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(invalid(format!("mixture mu must be finite and >= 0, got {mu}")));
    }
    check_variance(sigma2)?;
    sample_mixture(mu, sigma2.sqrt(), n as usize, rng, buf);
    let e = match estimator {
        Estimator::ApproxJointMl => gmm::approx_joint_ml_with(buf, approx_a.unwrap_or(gmm::DEFAULT_A))?,
        Estimator::JointMl => gmm::joint_ml(buf, gmm::DEFAULT_TOL)?,
        other => return Err(invalid(format!("estimator {other} is not defined for gmm"))),
    };
    Ok((e.mu_hat, e.sigma2_hat))
}

/// Reusable per-trajectory scratch space.
#[derive(Debug, Default)]
pub struct StepScratch {
    samples: Vec<f64>,
}

/// Advances `state` by one generation of `spec`'s process.
pub fn step<R: Rng + ?Sized>(
    spec: &ProcessSpec,
    state: &ParamState,
    rng: &mut R,
    scratch: &mut StepScratch,
) -> Result<ParamState> {
    let n = spec.n;
    Ok(match state {
        ParamState::Bernoulli { p } => ParamState::Bernoulli { p: step_bernoulli(*p, n, rng)? },
        ParamState::Poisson { lambda } => ParamState::Poisson { lambda: step_poisson(*lambda, n, rng)? },
        ParamState::Gaussian { mu, sigma2 } => {
            let (mu, sigma2) = step_gaussian(*mu, *sigma2, n, spec.estimator, rng)?;
            ParamState::Gaussian { mu, sigma2 }
        }
        ParamState::Gmm { mu, sigma2 } => {
            let (mu, sigma2) =
                step_gmm_buffered(*mu, *sigma2, n, spec.estimator, spec.approx_a, rng, &mut scratch.samples)?;
            ParamState::Gmm { mu, sigma2 }
        }
        ParamState::Discrete { theta } => ParamState::Discrete { theta: step_discrete(theta, n, rng)? },
        ParamState::DiscretePoisson { counts } => {
            ParamState::DiscretePoisson { counts: step_discrete_poisson(counts, rng)? }
        }
    })
}

/// The parameter sequence `Θ_0 … Θ_K` of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub spec: ProcessSpec,
    pub states: Vec<ParamState>,
    pub seed: u64,
}

#[derive(Serialize)]
struct TrajectoryLine<'a> {
    generation: usize,
    #[serde(flatten)]
    state: &'a ParamState,
}

impl Trajectory {
    /// One JSON object per generation.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for (generation, state) in self.states.iter().enumerate() {
            out.push_str(&serde_json::to_string(&TrajectoryLine { generation, state })?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Runs `k_max` generations from `spec.initial` on stream 0 of `seed`.
pub fn simulate_trajectory(spec: &ProcessSpec, k_max: usize, seed: u64) -> Result<Trajectory> {
    simulate_stream(spec, k_max, seed, 0)
}

/// Same as [`simulate_trajectory`] on an explicit stream index, which is the
/// stream trajectory `index` uses inside an ensemble.
pub fn simulate_stream(spec: &ProcessSpec, k_max: usize, seed: u64, index: u64) -> Result<Trajectory> {
    spec.validate()?;
    if k_max == 0 {
        return Err(invalid("number of generations must be at least 1"));
    }
    let mut rng = trajectory_rng(seed, index);
    let mut scratch = StepScratch::default();
    let mut states = Vec::with_capacity(k_max + 1);
    states.push(spec.initial.clone());
    for generation in 1..=k_max {
        let prev = &states[generation - 1];
        let next = if prev.is_absorbed() {
            prev.clone()
        } else {
            step(spec, prev, &mut rng, &mut scratch)
                .map_err(|e| Error::AtGeneration { generation, source: Box::new(e) })?
        };
        states.push(next);
    }
    Ok(Trajectory { spec: spec.clone(), states, seed })
}
