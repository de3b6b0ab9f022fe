//! Deterministic trajectory ensembles and bound verification.
//!
//! Trajectories are grouped into fixed-size chunks; each chunk accumulates
//! sequentially by trajectory index, and chunks are merged in index order, so
//! floating-point sums do not depend on the worker count. Chunks are processed
//! in bounded batches, which keeps memory independent of the trial count.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundCurve, BoundSource, Relation};
use crate::error::{invalid, Error, Result};
use crate::processes::{step, Family, ParamState, ProcessSpec, StepScratch};
use crate::rng::trajectory_rng;

const CHUNK: u64 = 256;
const BATCH_CHUNKS: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// `P_k != 0` (Bernoulli) or `Λ_k != 0` (Poisson).
    SurvivalNotZero,
    /// `P_k ∉ {0,1}`.
    SurvivalNotTrivial,
    /// `P_k = 0` or `Λ_k = 0`.
    AbsorbedAtZero,
    /// `Σ_k > ε`.
    SigmaExceeds,
    /// Number of symbols with non-zero mass; a mean, not a frequency.
    UniqCount,
    /// Mean of the family's martingale functional.
    MartingaleMean,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::SurvivalNotZero,
        EventKind::SurvivalNotTrivial,
        EventKind::AbsorbedAtZero,
        EventKind::SigmaExceeds,
        EventKind::UniqCount,
        EventKind::MartingaleMean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::SurvivalNotZero => "survival_not_zero",
            EventKind::SurvivalNotTrivial => "survival_not_trivial",
            EventKind::AbsorbedAtZero => "absorbed_at_zero",
            EventKind::SigmaExceeds => "sigma_exceeds",
            EventKind::UniqCount => "uniq_count",
            EventKind::MartingaleMean => "martingale_mean",
        }
    }

    pub fn parse(s: &str) -> Result<EventKind> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        EventKind::ALL.into_iter().find(|e| e.name() == norm).ok_or_else(|| invalid(format!("unknown event {s:?}")))
    }

    /// Indicator events report frequencies; the others report means.
    pub fn is_indicator(self) -> bool {
        !matches!(self, EventKind::UniqCount | EventKind::MartingaleMean)
    }

    pub fn applies_to(self, family: Family) -> bool {
        match self {
            EventKind::SurvivalNotZero | EventKind::AbsorbedAtZero => {
                matches!(family, Family::Bernoulli | Family::Poisson)
            }
            EventKind::SurvivalNotTrivial => family == Family::Bernoulli,
            EventKind::SigmaExceeds => matches!(family, Family::Gaussian | Family::Gmm),
            EventKind::UniqCount => matches!(family, Family::Discrete | Family::DiscretePoisson),
            EventKind::MartingaleMean => true,
        }
    }

    /// The event's family default, used when a command is not told which
    /// event to estimate.
    pub fn default_for(family: Family) -> EventKind {
        match family {
            Family::Bernoulli | Family::Poisson => EventKind::SurvivalNotZero,
            Family::Gaussian | Family::Gmm => EventKind::SigmaExceeds,
            Family::Discrete | Family::DiscretePoisson => EventKind::UniqCount,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventQuery {
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Generations to record, sorted and deduplicated on construction.
    pub generations: Vec<u64>,
}

impl EventQuery {
    pub fn new(kind: EventKind, eps: Option<f64>, mut generations: Vec<u64>) -> Result<EventQuery> {
        generations.sort_unstable();
        generations.dedup();
        if generations.is_empty() {
            return Err(invalid("event query needs at least one generation"));
        }
        match (kind, eps) {
            (EventKind::SigmaExceeds, Some(e)) if e > 0.0 && e.is_finite() => {}
            (EventKind::SigmaExceeds, _) => return Err(invalid("sigma_exceeds needs eps > 0")),
            _ => {}
        }
        let eps = if kind == EventKind::SigmaExceeds { eps } else { None };
        Ok(EventQuery { kind, eps, generations })
    }

    pub fn max_generation(&self) -> u64 {
        *self.generations.last().expect("non-empty by construction")
    }

    fn observe(&self, state: &ParamState) -> f64 {
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        match (self.kind, state) {
            (EventKind::SurvivalNotZero, ParamState::Bernoulli { p }) => flag(*p != 0.0),
            (EventKind::SurvivalNotZero, ParamState::Poisson { lambda }) => flag(*lambda != 0.0),
            (EventKind::SurvivalNotTrivial, ParamState::Bernoulli { p }) => flag(*p != 0.0 && *p != 1.0),
            (EventKind::AbsorbedAtZero, ParamState::Bernoulli { p }) => flag(*p == 0.0),
            (EventKind::AbsorbedAtZero, ParamState::Poisson { lambda }) => flag(*lambda == 0.0),
            (EventKind::SigmaExceeds, s) => {
                let eps = self.eps.expect("validated");
                flag(s.sigma2().is_some_and(|v| v.sqrt() > eps))
            }
            (EventKind::UniqCount, s) => s.distinct().unwrap_or(0) as f64,
            (EventKind::MartingaleMean, s) => s.martingale_value(),
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub master_seed: u64,
    /// Worker threads; 0 picks the machine default.
    pub workers: usize,
    /// Half-widths are `z` standard errors.
    pub z: f64,
}

impl McConfig {
    pub const DEFAULT_TRIALS: u64 = 100_000;
    pub const DEFAULT_Z: f64 = 3.0;

    pub fn new(trials: u64, master_seed: u64) -> McConfig {
        McConfig { trials, master_seed, workers: 0, z: McConfig::DEFAULT_Z }
    }

    pub fn with_workers(mut self, workers: usize) -> McConfig {
        self.workers = workers;
        self
    }

    pub fn with_z(mut self, z: f64) -> McConfig {
        self.z = z;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KEstimate {
    pub k: u64,
    /// Event frequency, or mean for non-indicator events.
    pub value: f64,
    pub std_error: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub spec: ProcessSpec,
    pub query: EventQuery,
    pub trials: u64,
    pub master_seed: u64,
    pub z: f64,
    pub per_k: Vec<KEstimate>,
}

impl MonteCarloSummary {
    pub fn at(&self, k: u64) -> Option<&KEstimate> {
        self.per_k.iter().find(|e| e.k == k)
    }
}

#[derive(Debug, Clone)]
struct Accumulator {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Accumulator {
    fn new(len: usize) -> Accumulator {
        Accumulator { sum: vec![0.0; len], sum_sq: vec![0.0; len] }
    }

    fn add(&mut self, i: usize, v: f64) {
        self.sum[i] += v;
        self.sum_sq[i] += v * v;
    }

    fn merge(&mut self, other: &Accumulator) {
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
        }
    }
}

fn run_chunk(spec: &ProcessSpec, query: &EventQuery, seed: u64, start: u64, end: u64) -> Result<Accumulator> {
    let gens = &query.generations;
    let k_max = query.max_generation();
    let mut acc = Accumulator::new(gens.len());
    let mut scratch = StepScratch::default();
    for index in start..end {
        let mut rng = trajectory_rng(seed, index);
        let mut state = spec.initial.clone();
        let mut gi = 0;
        while gi < gens.len() && gens[gi] == 0 {
            acc.add(gi, query.observe(&state));
            gi += 1;
        }
        let mut k = 0;
        while gi < gens.len() {
            if state.is_absorbed() {
                let v = query.observe(&state);
                for slot in gi..gens.len() {
                    acc.add(slot, v);
                }
                break;
            }
            k += 1;
            state = step(spec, &state, &mut rng, &mut scratch)
                .map_err(|e| Error::AtGeneration { generation: k as usize, source: Box::new(e) })?;
            while gi < gens.len() && gens[gi] == k {
                acc.add(gi, query.observe(&state));
                gi += 1;
            }
        }
        debug_assert!(k <= k_max);
    }
    Ok(acc)
}

#[cfg(feature = "parallel")]
fn run_batch(
    spec: &ProcessSpec,
    query: &EventQuery,
    cfg: &McConfig,
    chunks: std::ops::Range<u64>,
    pool: Option<&rayon::ThreadPool>,
) -> Vec<Result<Accumulator>> {
    use rayon::prelude::*;
    let work = || {
        chunks
            .clone()
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = (start + CHUNK).min(cfg.trials);
                run_chunk(spec, query, cfg.master_seed, start, end)
            })
            .collect()
    };
    match pool {
        Some(p) => p.install(work),
        None => work(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_batch(
    spec: &ProcessSpec,
    query: &EventQuery,
    cfg: &McConfig,
    chunks: std::ops::Range<u64>,
    _pool: Option<&()>,
) -> Vec<Result<Accumulator>> {
    chunks
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(cfg.trials);
            run_chunk(spec, query, cfg.master_seed, start, end)
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn make_pool(workers: usize) -> Result<Option<rayon::ThreadPool>> {
    if workers == 0 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map(Some)
        .map_err(|e| invalid(format!("cannot start {workers} workers: {e}")))
}

#[cfg(not(feature = "parallel"))]
fn make_pool(_workers: usize) -> Result<Option<()>> {
    Ok(None)
}

/// Estimates the query's event at each requested generation from
/// `cfg.trials` independent trajectories.
pub fn estimate(spec: &ProcessSpec, query: &EventQuery, cfg: &McConfig) -> Result<MonteCarloSummary> {
    spec.validate()?;
    if cfg.trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    if !(cfg.z > 0.0 && cfg.z.is_finite()) {
        return Err(invalid(format!("z must be positive, got {}", cfg.z)));
    }
    if !query.kind.applies_to(spec.family) {
        return Err(invalid(format!("event {} is not defined for family {}", query.kind, spec.family)));
    }
    let pool = make_pool(cfg.workers)?;
    let n_chunks = cfg.trials.div_ceil(CHUNK);
    let mut total = Accumulator::new(query.generations.len());
    let mut batch_start = 0;
    while batch_start < n_chunks {
        let batch_end = (batch_start + BATCH_CHUNKS).min(n_chunks);
        for part in run_batch(spec, query, cfg, batch_start..batch_end, pool.as_ref()) {
            total.merge(&part?);
        }
        batch_start = batch_end;
    }

    let nf = cfg.trials as f64;
    let per_k = query
        .generations
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let mean = total.sum[i] / nf;
            let std_error = if query.kind.is_indicator() {
                (mean * (1.0 - mean) / nf).max(0.0).sqrt()
            } else if cfg.trials > 1 {
                let var = ((total.sum_sq[i] - total.sum[i] * mean) / (nf - 1.0)).max(0.0);
                (var / nf).sqrt()
            } else {
                0.0
            };
            KEstimate { k, value: mean, std_error, half_width: cfg.z * std_error }
        })
        .collect();
    Ok(MonteCarloSummary {
        spec: spec.clone(),
        query: query.clone(),
        trials: cfg.trials,
        master_seed: cfg.master_seed,
        z: cfg.z,
        per_k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub source: BoundSource,
    pub relation: Relation,
    pub k: u64,
    pub empirical: f64,
    pub bound: f64,
    pub half_width: f64,
    /// Non-negative when the check passes; the distance to failure.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    /// Curve points at generations the summary did not record.
    pub skipped: usize,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn pass_fraction(&self) -> f64 {
        if self.checks.is_empty() {
            return 1.0;
        }
        self.checks.iter().filter(|c| c.pass).count() as f64 / self.checks.len() as f64
    }
}

fn eps_matches(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x == y,
        _ => true,
    }
}

/// Checks every curve point against the summary estimate at the same `k`.
///
/// Each comparison is widened by a half-width. For indicator events this is
/// the larger of the summary's half-width and `z·√(b(1-b)/trials)` at the
/// curve value `b`, so a frequency pinned at 0 or 1 by sampling still
/// carries the resolution of `trials` draws.
pub fn verify_bounds(summary: &MonteCarloSummary, curves: &[BoundCurve]) -> Result<VerificationReport> {
    let mut report = VerificationReport::default();
    let spec = &summary.spec;
    let nf = summary.trials as f64;
    for curve in curves {
        let p = &curve.params;
        if p.family != spec.family || p.n != spec.n || p.initial != spec.initial {
            return Err(Error::ParameterMismatch(format!(
                "curve {} was built for a different process than the summary",
                curve.source
            )));
        }
        if curve.source.event() != summary.query.kind {
            return Err(Error::ParameterMismatch(format!(
                "curve {} describes {} but the summary estimates {}",
                curve.source,
                curve.source.event(),
                summary.query.kind
            )));
        }
        if !eps_matches(p.eps, summary.query.eps) {
            return Err(Error::ParameterMismatch(format!(
                "curve {} uses a different eps than the summary",
                curve.source
            )));
        }
        for pt in &curve.points {
            let Some(est) = summary.at(pt.k) else {
                report.skipped += 1;
                continue;
            };
            let mut half_width = est.half_width;
            if summary.query.kind.is_indicator() {
                let b = pt.value.clamp(0.0, 1.0);
                half_width = half_width.max(summary.z * (b * (1.0 - b) / nf).sqrt());
            }
            let relation = curve.source.relation();
            let margin = match relation {
                Relation::Lower => est.value + half_width - pt.value,
                Relation::Upper => pt.value - (est.value - half_width),
                Relation::Exact => half_width - (est.value - pt.value).abs(),
            };
            report.checks.push(Check {
                source: curve.source,
                relation,
                k: pt.k,
                empirical: est.value,
                bound: pt.value,
                half_width,
                margin,
                pass: margin >= 0.0,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::curves_for;
    use crate::math::gk_sequence;
    use crate::processes::Estimator;

    #[test]
    fn zero_start_never_survives() {
        let spec = ProcessSpec::bernoulli(0.0, 10).unwrap();
        let q = EventQuery::new(EventKind::SurvivalNotZero, None, vec![1, 5, 10]).unwrap();
        let s = estimate(&spec, &q, &McConfig::new(500, 1)).unwrap();
        assert!(s.per_k.iter().all(|e| e.value == 0.0 && e.half_width == 0.0));
    }

    #[test]
    fn rejects_mismatched_event() {
        let spec = ProcessSpec::bernoulli(0.3, 10).unwrap();
        let q = EventQuery::new(EventKind::SigmaExceeds, Some(0.1), vec![1]).unwrap();
        assert!(estimate(&spec, &q, &McConfig::new(10, 1)).is_err());
        assert!(EventQuery::new(EventKind::SigmaExceeds, None, vec![1]).is_err());
        assert!(EventQuery::new(EventKind::SurvivalNotZero, None, vec![]).is_err());
        let q = EventQuery::new(EventKind::SurvivalNotZero, None, vec![1]).unwrap();
        assert!(estimate(&spec, &q, &McConfig::new(0, 1)).is_err());
    }

    #[test]
    fn generations_sorted_and_initial_recorded() {
        let spec = ProcessSpec::poisson(0.5, 10).unwrap();
        let q = EventQuery::new(EventKind::MartingaleMean, None, vec![3, 0, 3, 1]).unwrap();
        assert_eq!(q.generations, vec![0, 1, 3]);
        let s = estimate(&spec, &q, &McConfig::new(100, 1)).unwrap();
        assert_eq!(s.per_k[0].value, 0.5);
        assert_eq!(s.per_k[0].std_error, 0.0);
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let spec = ProcessSpec::gaussian(0.0, 1.0, 10, Estimator::MlUnbiasedVariance).unwrap();
        let q = EventQuery::new(EventKind::MartingaleMean, None, vec![1, 7]).unwrap();
        let a = estimate(&spec, &q, &McConfig::new(3000, 42).with_workers(1)).unwrap();
        let b = estimate(&spec, &q, &McConfig::new(3000, 42).with_workers(3)).unwrap();
        let c = estimate(&spec, &q, &McConfig::new(3000, 42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn trajectory_streams_agree_with_single_simulation() {
        let spec = ProcessSpec::bernoulli(0.3, 8).unwrap();
        let q = EventQuery::new(EventKind::MartingaleMean, None, vec![4]).unwrap();
        let s = estimate(&spec, &q, &McConfig::new(1, 17)).unwrap();
        let t = crate::processes::simulate_trajectory(&spec, 4, 17).unwrap();
        assert_eq!(s.per_k[0].value, t.states[4].martingale_value());
    }

    #[test]
    fn verify_empty_and_mismatch() {
        let spec = ProcessSpec::poisson(1.0, 10).unwrap();
        let q = EventQuery::new(EventKind::SurvivalNotZero, None, vec![1, 2]).unwrap();
        let s = estimate(&spec, &q, &McConfig::new(2000, 3)).unwrap();
        let r = verify_bounds(&s, &[]).unwrap();
        assert!(r.checks.is_empty() && r.passed());

        let gk = gk_sequence(10).unwrap();
        let other = ProcessSpec::poisson(2.0, 10).unwrap();
        let curves = curves_for(&other, None, &[1, 2], &gk).unwrap();
        assert!(matches!(verify_bounds(&s, &curves), Err(Error::ParameterMismatch(_))));

        let q = EventQuery::new(EventKind::MartingaleMean, None, vec![1, 2]).unwrap();
        let s = estimate(&spec, &q, &McConfig::new(100, 3)).unwrap();
        let curves = curves_for(&spec, None, &[1, 2], &gk).unwrap();
        assert!(matches!(verify_bounds(&s, &curves), Err(Error::ParameterMismatch(_))));
    }

    #[test]
    fn verify_skips_unrecorded_generations() {
        let spec = ProcessSpec::poisson(1.0, 10).unwrap();
        let q = EventQuery::new(EventKind::SurvivalNotZero, None, vec![2]).unwrap();
        let s = estimate(&spec, &q, &McConfig::new(2000, 3)).unwrap();
        let gk = gk_sequence(10).unwrap();
        let curves = curves_for(&spec, None, &[1, 2, 3], &gk).unwrap();
        let r = verify_bounds(&s, &curves).unwrap();
        assert_eq!(r.checks.len(), 1);
        assert_eq!(r.skipped, 2);
    }

    #[test]
    fn event_names_round_trip() {
        for e in EventKind::ALL {
            assert_eq!(EventKind::parse(e.name()).unwrap(), e);
        }
    }
}
