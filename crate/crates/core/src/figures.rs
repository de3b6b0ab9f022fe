//! Figure presets: each one runs the simulations behind a plot and returns
//! the data files, empirical and theoretical series side by side.
//!
//! Every series file carries a `plot` entry in its metadata naming the x
//! column, the y columns and the grouping column.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bounds::{curves_for, BoundCurve, BoundSource};
use crate::error::{invalid, Result};
use crate::gmm::{self, Branch};
use crate::io::{curves_to_string, series_to_string, summary_to_string, Format, Table, GMM_COMPARE_SCHEMA};
use crate::math::{gk_sequence, GkSequence};
use crate::montecarlo::{estimate, EventKind, EventQuery, McConfig, MonteCarloSummary};
use crate::ngram::{ingest, recursive_run, synthetic_zipf_corpus, zipf_theta, Tokenizer};
use crate::processes::{sample_mixture, simulate_stream, Estimator, ParamState, ProcessSpec};
use crate::rng::trajectory_rng;

pub const PRESETS: [&str; 13] = [
    "fig2a", "fig2b", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8a", "fig8b", "fig10", "fig11", "gaussian", "seddik",
];

/// Zipf `(a, b)` pairs used by the alphabet-survival figure.
pub const ZIPF_SETTINGS: [(f64, f64); 2] = [(1.0, 0.0), (1.5, 10.0)];

/// Fields a caller may replace; everything else comes from the preset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub k_max: Option<u64>,
    pub n: Option<u64>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FigureOutput {
    pub name: String,
    pub files: Vec<OutputFile>,
}

struct Ctx {
    name: &'static str,
    ov: Overrides,
    format: Format,
    files: Vec<OutputFile>,
}

impl Ctx {
    fn trials(&self, default: u64) -> u64 {
        self.ov.trials.unwrap_or(default)
    }

    fn seed(&self) -> u64 {
        self.ov.seed.unwrap_or(0)
    }

    fn k_max(&self, default: u64) -> u64 {
        self.ov.k_max.unwrap_or(default)
    }

    fn n(&self, default: u64) -> u64 {
        self.ov.n.unwrap_or(default)
    }

    fn ns(&self, defaults: &[u64]) -> Vec<u64> {
        self.ov.n.map_or_else(|| defaults.to_vec(), |n| vec![n])
    }

    /// Explicit generation list, replaced by a ten-point grid when `K` is overridden.
    fn ks(&self, defaults: &[u64]) -> Vec<u64> {
        match self.ov.k_max {
            Some(k) => linear_grid(1, k, 10),
            None => defaults.to_vec(),
        }
    }

    fn config(&self, default_trials: u64) -> McConfig {
        McConfig::new(self.trials(default_trials), self.seed()).with_workers(self.ov.workers.unwrap_or(0))
    }

    fn add(&mut self, stem: &str, contents: String) {
        self.files.push(OutputFile { name: format!("{stem}.{}", self.format.extension()), contents });
    }

    fn series(&mut self, stem: &str, meta: Value, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let mut meta = meta;
        if let Value::Object(m) = &mut meta {
            m.insert("figure".into(), Value::String(self.name.into()));
        }
        let text = series_to_string(meta, header, rows, self.format)?;
        self.add(stem, text);
        Ok(())
    }

    fn summary_and_curves(
        &mut self,
        stem: &str,
        summary: &MonteCarloSummary,
        curves: &[BoundCurve],
        gk: Option<&GkSequence>,
    ) -> Result<()> {
        let s = summary_to_string(summary, self.format)?;
        self.add(&format!("{stem}.summary"), s);
        let c = curves_to_string(curves, gk.map(GkSequence::metadata), self.format)?;
        self.add(&format!("{stem}.bounds"), c);
        Ok(())
    }
}

/// `count + 1` evenly spaced integers from `lo` to `hi`, deduplicated.
pub fn linear_grid(lo: u64, hi: u64, count: u64) -> Vec<u64> {
    if hi <= lo || count == 0 {
        return vec![hi.max(lo)];
    }
    let mut out: Vec<u64> =
        (0..=count).map(|i| lo + ((hi - lo) as f64 * i as f64 / count as f64).round() as u64).collect();
    out.dedup();
    out
}

fn label(x: f64) -> String {
    x.to_string()
}

fn nan_or(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

pub fn run_figure(name: &str, overrides: &Overrides, format: Format) -> Result<FigureOutput> {
    let Some(&name) = PRESETS.iter().find(|p| **p == name) else {
        return Err(invalid(format!("unknown figure {name:?}; available presets: {}", PRESETS.join(", "))));
    };
    let mut ctx = Ctx { name, ov: *overrides, format, files: Vec::new() };
    match name {
        "fig2a" => fig_trajectories_gaussian(&mut ctx)?,
        "fig2b" => fig_trajectories_bernoulli(&mut ctx)?,
        "fig3" => fig_bernoulli(&mut ctx)?,
        "fig4" => fig_poisson(&mut ctx)?,
        "fig5" => fig_ngram(&mut ctx)?,
        "fig6" => fig_zipf(&mut ctx)?,
        "fig7" => fig_gmm_collapse(&mut ctx, 1.0, 10)?,
        "fig8a" => fig_gmm_collapse(&mut ctx, 10.0, 15)?,
        "fig8b" => fig_gmm_collapse(&mut ctx, 0.1, 15)?,
        "fig10" => fig_approx_error(&mut ctx)?,
        "fig11" => fig_gmm_scatter(&mut ctx)?,
        "gaussian" => fig_gaussian(&mut ctx)?,
        "seddik" => fig_seddik(&mut ctx)?,
        _ => unreachable!("preset list and dispatch agree"),
    }
    Ok(FigureOutput { name: name.to_string(), files: ctx.files })
}

fn fig_trajectories_gaussian(ctx: &mut Ctx) -> Result<()> {
    let n = ctx.n(100);
    let k_max = ctx.k_max(500) as usize;
    let spec = ProcessSpec::gaussian(0.0, 1.0, n, Estimator::MlUnbiasedVariance)?;
    let mut rows = Vec::new();
    for t in 0..ctx.trials(25) {
        let traj = simulate_stream(&spec, k_max, ctx.seed(), t)?;
        for (g, s) in traj.states.iter().enumerate() {
            if let ParamState::Gaussian { mu, sigma2 } = s {
                rows.push(vec![t as f64, g as f64, *mu, sigma2.sqrt()]);
            }
        }
    }
    let meta = json!({"mu0": 0.0, "sigma0": 1.0, "n": n, "plot": {"x": "generation", "y": ["mu", "sigma"], "group": "trajectory"}});
    ctx.series("fig2a", meta, &["trajectory", "generation", "mu", "sigma"], &rows)
}

fn fig_trajectories_bernoulli(ctx: &mut Ctx) -> Result<()> {
    let n = ctx.n(100);
    let k_max = ctx.k_max(500) as usize;
    let spec = ProcessSpec::bernoulli(0.2, n)?;
    let mut rows = Vec::new();
    for t in 0..ctx.trials(25) {
        let traj = simulate_stream(&spec, k_max, ctx.seed(), t)?;
        for (g, s) in traj.states.iter().enumerate() {
            rows.push(vec![t as f64, g as f64, s.martingale_value()]);
        }
    }
    let meta = json!({"p0": 0.2, "n": n, "plot": {"x": "generation", "y": ["p"], "group": "trajectory"}});
    ctx.series("fig2b", meta, &["trajectory", "generation", "p"], &rows)
}

const BERNOULLI_P0: [f64; 6] = [0.001, 0.003, 0.01, 0.03, 0.1, 0.3];

fn fig_bernoulli(ctx: &mut Ctx) -> Result<()> {
    let ks = ctx.ks(&[1, 10, 100]);
    let gk = gk_sequence(*ks.iter().max().unwrap() as usize)?;
    let cfg = ctx.config(100_000);
    let mut rows = Vec::new();
    for n in ctx.ns(&[10, 100]) {
        for p0 in BERNOULLI_P0 {
            let spec = ProcessSpec::bernoulli(p0, n)?;
            let q = EventQuery::new(EventKind::SurvivalNotZero, None, ks.clone())?;
            let s = estimate(&spec, &q, &cfg)?;
            let curves = curves_for(&spec, None, &ks, &gk)?;
            let curves: Vec<BoundCurve> =
                curves.into_iter().filter(|c| c.source.event() == EventKind::SurvivalNotZero).collect();
            let get = |src: BoundSource, k: u64| curves.iter().find(|c| c.source == src).and_then(|c| c.value_at(k));
            for e in &s.per_k {
                rows.push(vec![
                    p0,
                    n as f64,
                    e.k as f64,
                    e.value,
                    e.half_width,
                    nan_or(get(BoundSource::BernoulliSurvivalLower, e.k)),
                    nan_or(get(BoundSource::BernoulliSurvivalUpper, e.k)),
                    nan_or(get(BoundSource::BernoulliSurvivalTightUpper, e.k)),
                ]);
            }
            ctx.summary_and_curves(&format!("fig3_p0-{}_n-{n}", label(p0)), &s, &curves, Some(&gk))?;
        }
    }
    let meta = json!({"trials": cfg.trials, "seed": cfg.master_seed, "plot": {"x": "p0", "y": ["empirical", "lower", "upper", "tight_upper"], "group": ["n", "k"]}});
    ctx.series("fig3", meta, &["p0", "n", "k", "empirical", "half_width", "lower", "upper", "tight_upper"], &rows)
}

fn fig_seddik(ctx: &mut Ctx) -> Result<()> {
    let ks = ctx.ks(&[1, 10, 100]);
    let gk = gk_sequence(*ks.iter().max().unwrap() as usize)?;
    let cfg = ctx.config(100_000);
    let mut rows = Vec::new();
    for n in ctx.ns(&[10, 100]) {
        for p0 in BERNOULLI_P0 {
            let spec = ProcessSpec::bernoulli(p0, n)?;
            let q = EventQuery::new(EventKind::SurvivalNotTrivial, None, ks.clone())?;
            let s = estimate(&spec, &q, &cfg)?;
            let curves: Vec<BoundCurve> = curves_for(&spec, None, &ks, &gk)?
                .into_iter()
                .filter(|c| c.source.event() == EventKind::SurvivalNotTrivial)
                .collect();
            let get = |src: BoundSource, k: u64| curves.iter().find(|c| c.source == src).and_then(|c| c.value_at(k));
            for e in &s.per_k {
                rows.push(vec![
                    p0,
                    n as f64,
                    e.k as f64,
                    e.value,
                    e.half_width,
                    nan_or(get(BoundSource::BernoulliNontrivialLower, e.k)),
                    nan_or(get(BoundSource::BernoulliNontrivialUpper, e.k)),
                    nan_or(get(BoundSource::SeddikLower, e.k)),
                    nan_or(get(BoundSource::SeddikUpper, e.k)),
                ]);
            }
            ctx.summary_and_curves(&format!("seddik_p0-{}_n-{n}", label(p0)), &s, &curves, Some(&gk))?;
        }
    }
    let meta = json!({"trials": cfg.trials, "seed": cfg.master_seed, "plot": {"x": "p0", "y": ["empirical", "lower", "upper", "seddik_lower", "seddik_upper"], "group": ["n", "k"]}});
    ctx.series(
        "seddik",
        meta,
        &["p0", "n", "k", "empirical", "half_width", "lower", "upper", "seddik_lower", "seddik_upper"],
        &rows,
    )
}

fn fig_poisson(ctx: &mut Ctx) -> Result<()> {
    let n = ctx.n(10);
    let ks = ctx.ks(&[1, 2, 5, 10, 20, 50, 100]);
    let gk = gk_sequence(*ks.iter().max().unwrap() as usize)?;
    let cfg = ctx.config(100_000);
    let mut rows = Vec::new();
    for lambda0 in [0.1, 0.2, 0.5, 1.0, 2.0] {
        let spec = ProcessSpec::poisson(lambda0, n)?;
        let q = EventQuery::new(EventKind::SurvivalNotZero, None, ks.clone())?;
        let s = estimate(&spec, &q, &cfg)?;
        let curves = curves_for(&spec, None, &ks, &gk)?;
        for e in &s.per_k {
            rows.push(vec![lambda0, e.k as f64, e.value, e.half_width, nan_or(curves[0].value_at(e.k))]);
        }
        ctx.summary_and_curves(&format!("fig4_lambda0-{}", label(lambda0)), &s, &curves, Some(&gk))?;
    }
    let meta = json!({"n": n, "trials": cfg.trials, "seed": cfg.master_seed, "plot": {"x": "lambda0", "y": ["empirical", "exact"], "group": "k"}});
    ctx.series("fig4", meta, &["lambda0", "k", "empirical", "half_width", "exact"], &rows)
}

fn fig_gaussian(ctx: &mut Ctx) -> Result<()> {
    let n = ctx.n(10);
    let k_max = ctx.k_max(500);
    let ks = linear_grid(0, k_max, 50);
    let eps = 0.1;
    let spec = ProcessSpec::gaussian(0.0, 1.0, n, Estimator::MlUnbiasedVariance)?;
    let cfg = ctx.config(100_000);
    let q = EventQuery::new(EventKind::SigmaExceeds, Some(eps), ks.clone())?;
    let s = estimate(&spec, &q, &cfg)?;
    let curves = curves_for(&spec, Some(eps), &ks, &gk_sequence(1)?)?;
    let rows: Vec<Vec<f64>> = s
        .per_k
        .iter()
        .map(|e| {
            vec![e.k as f64, e.value, e.half_width, nan_or(curves[0].value_at(e.k)), nan_or(curves[1].value_at(e.k))]
        })
        .collect();
    ctx.summary_and_curves("gaussian", &s, &curves, None)?;
    let meta = json!({"sigma0": 1.0, "eps": eps, "n": n, "trials": cfg.trials, "seed": cfg.master_seed, "plot": {"x": "k", "y": ["empirical", "closed_form", "chernoff"]}});
    ctx.series("gaussian_series", meta, &["k", "empirical", "half_width", "closed_form", "chernoff"], &rows)
}

fn fig_gmm_collapse(ctx: &mut Ctx, mu0: f64, default_n: u64) -> Result<()> {
    let n = ctx.n(default_n);
    let k_max = ctx.k_max(400);
    let ks = linear_grid(0, k_max, 40);
    let eps = 0.1;
    let approx = ProcessSpec::gmm(mu0, 1.0, n, Estimator::ApproxJointMl)?;
    let joint = ProcessSpec::gmm(mu0, 1.0, n, Estimator::JointMl)?;
    let q = EventQuery::new(EventKind::SigmaExceeds, Some(eps), ks.clone())?;
    let sa = estimate(&approx, &q, &ctx.config(10_000))?;
    // joint ML costs two orders of magnitude more per step
    let sj = estimate(&joint, &q, &ctx.config(1_000))?;
    let curves = curves_for(&approx, Some(eps), &ks, &gk_sequence(1)?)?;
    let rows: Vec<Vec<f64>> = sa
        .per_k
        .iter()
        .zip(&sj.per_k)
        .map(|(a, j)| vec![a.k as f64, a.value, a.half_width, j.value, j.half_width, nan_or(curves[0].value_at(a.k))])
        .collect();
    let stem = ctx.name;
    let s = summary_to_string(&sa, ctx.format)?;
    ctx.add(&format!("{stem}_approx.summary"), s);
    let s = summary_to_string(&sj, ctx.format)?;
    ctx.add(&format!("{stem}_joint.summary"), s);
    let c = curves_to_string(&curves, None, ctx.format)?;
    ctx.add(&format!("{stem}.bounds"), c);
    let meta = json!({"mu0": mu0, "sigma0": 1.0, "eps": eps, "n": n, "trials_approx": sa.trials, "trials_joint": sj.trials, "seed": sa.master_seed, "plot": {"x": "k", "y": ["approx", "joint", "bound"]}});
    ctx.series(
        &format!("{stem}_series"),
        meta,
        &["k", "approx", "approx_half_width", "joint", "joint_half_width", "bound"],
        &rows,
    )
}

fn fig_zipf(ctx: &mut Ctx) -> Result<()> {
    let m = 1000;
    let n = ctx.n(1000);
    let k_max = ctx.k_max(100);
    let ks: Vec<u64> = (0..=k_max).collect();
    let cfg = ctx.config(50);
    let gk = gk_sequence(k_max.max(1) as usize)?;
    let mut rows = Vec::new();
    for (a, b) in ZIPF_SETTINGS {
        let theta = zipf_theta(m, a, b)?;
        let spec = ProcessSpec::discrete(theta, n)?;
        let q = EventQuery::new(EventKind::UniqCount, None, ks.clone())?;
        let s = estimate(&spec, &q, &cfg)?;
        let positive: Vec<u64> = ks.iter().copied().filter(|&k| k > 0).collect();
        let curves = curves_for(&spec, None, &positive, &gk)?;
        let mf = m as f64;
        for e in &s.per_k {
            let sd = e.std_error * (s.trials as f64).sqrt();
            let (lo, hi) = if e.k == 0 {
                (1.0, 1.0)
            } else {
                (nan_or(curves[0].value_at(e.k)) / mf, nan_or(curves[1].value_at(e.k)) / mf)
            };
            rows.push(vec![a, b, e.k as f64, e.value / mf, sd / mf, lo, hi]);
        }
        ctx.summary_and_curves(&format!("fig6_a-{}_b-{}", label(a), label(b)), &s, &curves, Some(&gk))?;
    }
    let meta = json!({"m": m, "n": n, "trials": cfg.trials, "seed": cfg.master_seed, "plot": {"x": "k", "y": ["mean_fraction", "lower_fraction", "upper_fraction"], "error": "sd_fraction", "group": ["a", "b"]}});
    ctx.series(
        "fig6",
        meta,
        &["a", "b", "k", "mean_fraction", "sd_fraction", "lower_fraction", "upper_fraction"],
        &rows,
    )
}

fn fig_ngram(ctx: &mut Ctx) -> Result<()> {
    let (m, len) = (1000, 20_000);
    let text = synthetic_zipf_corpus(m, 1.0, 0.0, len, 12_345)?;
    let corpus = ingest(&text, &Tokenizer::Whitespace)?;
    let n_out = ctx.n(corpus.tokens.len() as u64) as usize;
    let generations = ctx.k_max(50) as usize;
    let seeds = ctx.trials(5);
    let vocab = corpus.vocabulary.len();
    let mut theta = vec![0.0; vocab];
    for &t in &corpus.tokens {
        theta[t as usize] += 1.0 / corpus.tokens.len() as f64;
    }
    let gk = gk_sequence(generations.max(1))?;
    let mut rows = Vec::new();
    for order in 1..=3usize {
        let runs = (0..seeds)
            .map(|s| recursive_run(&corpus, order, n_out, generations, ctx.seed().wrapping_add(s)))
            .collect::<Result<Vec<_>>>()?;
        for g in 0..=generations {
            let vals: Vec<f64> = runs.iter().map(|r| r[g].fraction).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let sd = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            let (lo, hi) = if g == 0 {
                (1.0, 1.0)
            } else {
                let (lo, hi) = crate::bounds::expected_uniq_bounds(&theta, n_out as u64, g as u64, &gk)?;
                (lo / vocab as f64, hi / vocab as f64)
            };
            rows.push(vec![order as f64, g as f64, mean, sd, lo, hi]);
        }
    }
    let meta = json!({"corpus": {"kind": "synthetic_zipf", "alphabet": m, "a": 1.0, "b": 0.0, "tokens": len, "vocabulary": vocab}, "n_out": n_out, "seeds": seeds, "plot": {"x": "generation", "y": ["mean_fraction", "lower_fraction", "upper_fraction"], "error": "sd_fraction", "group": "order"}});
    ctx.series(
        "fig5",
        meta,
        &["order", "generation", "mean_fraction", "sd_fraction", "lower_fraction", "upper_fraction"],
        &rows,
    )
}

fn fig_approx_error(ctx: &mut Ctx) -> Result<()> {
    let n = ctx.n(16) as usize;
    let trials = ctx.trials(10);
    let a = gmm::DEFAULT_A;
    let mut rows = Vec::new();
    let mut max_err = Vec::new();
    for (si, sigma) in [1.0, 0.25].into_iter().enumerate() {
        let mut worst: f64 = 0.0;
        let mut buf = Vec::new();
        for t in 0..trials {
            let mut rng = trajectory_rng(ctx.seed().wrapping_add(si as u64), t);
            sample_mixture(1.0, sigma, n, &mut rng, &mut buf);
            let stats = gmm::sample_stats(&buf)?;
            for i in 0..=100 {
                let alpha = 10f64.powf(-2.0 + 4.0 * i as f64 / 100.0);
                let exact = gmm::mu_alpha(&buf, alpha)?;
                let approx = gmm::mu_a_alpha(&stats, a, alpha);
                let err = (approx - exact).abs();
                worst = worst.max(err);
                rows.push(vec![sigma, t as f64, alpha, exact, approx, err]);
            }
        }
        max_err.push(json!({"sigma": sigma, "max_abs_error": worst}));
    }
    let meta = json!({"mu": 1.0, "n": n, "a": a, "trials": trials, "max_error": max_err, "plot": {"x": "alpha", "y": ["mu_alpha", "mu_a_alpha"], "group": ["sigma", "trial"], "x_scale": "log"}});
    ctx.series("fig10", meta, &["sigma", "trial", "alpha", "mu_alpha", "mu_a_alpha", "abs_error"], &rows)
}

fn fig_gmm_scatter(ctx: &mut Ctx) -> Result<()> {
    let n = ctx.n(10) as usize;
    let trials = ctx.trials(100);
    for mu in [1.0, 0.1, 10.0] {
        let rows = gmm_compare(mu, 1.0, n, trials, ctx.seed(), gmm::DEFAULT_A)?;
        let text = compare_to_string(
            &rows,
            json!({"figure": "fig11", "mu": mu, "sigma": 1.0, "n": n, "a": gmm::DEFAULT_A, "seed": ctx.seed()}),
            ctx.format,
        )?;
        ctx.add(&format!("fig11_mu-{}", label(mu)), text);
    }
    Ok(())
}

/// One draw compared under both mixture estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub trial: u64,
    pub mu_ml: f64,
    pub sigma_ml: f64,
    pub mu_approx: f64,
    pub sigma_approx: f64,
    pub ml_finite: bool,
    pub approx_finite: bool,
    /// Whether the approximate estimator's `a` fell in the range that
    /// guarantees its variance sandwich; absent when `σ_s² = 0`.
    pub a_in_valid_range: Option<bool>,
}

/// Joint ML against approximate joint ML on `trials` independent sample sets
/// of size `n` from `½N(-μ,σ²) + ½N(μ,σ²)`. Trial `t` uses stream `t` of `seed`.
pub fn gmm_compare(mu: f64, sigma: f64, n: usize, trials: u64, seed: u64, a: f64) -> Result<Vec<CompareRow>> {
    if !(mu >= 0.0 && mu.is_finite() && sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("invalid mixture parameters mu={mu}, sigma={sigma}")));
    }
    let mut buf = Vec::with_capacity(n);
    (0..trials)
        .map(|trial| {
            sample_mixture(mu, sigma, n, &mut trajectory_rng(seed, trial), &mut buf);
            let ml = gmm::joint_ml(&buf, gmm::DEFAULT_TOL)?;
            let ap = gmm::approx_joint_ml_with(&buf, a)?;
            Ok(CompareRow {
                trial,
                mu_ml: ml.mu_hat,
                sigma_ml: ml.sigma_hat(),
                mu_approx: ap.mu_hat,
                sigma_approx: ap.sigma_hat(),
                ml_finite: ml.branch == Branch::FiniteIntersection,
                approx_finite: ap.branch == Branch::FiniteIntersection,
                a_in_valid_range: ap.a_in_valid_range,
            })
        })
        .collect()
}

pub fn compare_to_string(rows: &[CompareRow], meta: Value, format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut s =
                serde_json::to_string_pretty(&json!({"schema": GMM_COMPARE_SCHEMA, "meta": meta, "rows": rows}))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut t = Table::new(
                GMM_COMPARE_SCHEMA,
                meta,
                &[
                    "trial",
                    "mu_ml",
                    "sigma_ml",
                    "mu_approx",
                    "sigma_approx",
                    "ml_finite",
                    "approx_finite",
                    "a_in_valid_range",
                ],
            );
            for r in rows {
                t.push(vec![
                    r.trial.to_string(),
                    r.mu_ml.to_string(),
                    r.sigma_ml.to_string(),
                    r.mu_approx.to_string(),
                    r.sigma_approx.to_string(),
                    r.ml_finite.to_string(),
                    r.approx_finite.to_string(),
                    r.a_in_valid_range.map_or_else(String::new, |b| b.to_string()),
                ]);
            }
            Ok(t.to_csv())
        }
    }
}
