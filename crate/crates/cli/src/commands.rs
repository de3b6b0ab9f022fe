use anyhow::{anyhow, bail, Context, Result};
use collapse_core::bounds::curves_for;
use collapse_core::figures::{compare_to_string, gmm_compare as run_compare, run_figure, Overrides};
use collapse_core::io::{
    curves_from_str, curves_to_string, ngram_to_string, report_table, report_to_string, summary_from_str,
    summary_to_string, Format,
};
use collapse_core::math::gk_sequence;
use collapse_core::montecarlo::{estimate, verify_bounds, EventKind, EventQuery, McConfig, VerificationReport};
use collapse_core::ngram::{ingest, recursive_run, Tokenizer};
use collapse_core::processes::{simulate_trajectory, Estimator, Family, ParamState, ProcessSpec};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::{
    BoundsArgs, FigureArgs, GmmCompareArgs, NgramArgs, OutputArgs, ProcessArgs, SimulateArgs, Status, TrajectoryArgs,
    VerifyArgs, OUT_DIR_ENV,
};

fn format_of(o: &OutputArgs) -> Result<Format> {
    o.format.parse::<Format>().map_err(|e| anyhow!("--format: {e}"))
}

fn default_dir() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// `--out`, else `$COLLAPSE_OUT_DIR/<default_name>`, else stdout.
fn target(out: &Option<PathBuf>, default_name: &str) -> Option<PathBuf> {
    out.clone().or_else(|| default_dir().map(|d| d.join(default_name)))
}

fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::write(p, contents).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn require<T: Copy>(v: Option<T>, flag: &str, family: Family) -> Result<T> {
    v.ok_or_else(|| anyhow!("--{flag}: required for family {family}"))
}

fn read_numbers(path: &Path) -> Result<Vec<String>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("--theta-file: cannot read {}", path.display()))?;
    Ok(text.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).map(str::to_string).collect())
}

pub fn build_spec(p: &ProcessArgs) -> Result<ProcessSpec> {
    let family = Family::parse(p.family.as_deref().ok_or_else(|| anyhow!("--family: required"))?)
        .map_err(|e| anyhow!("--family: {e}"))?;
    let estimator = match &p.estimator {
        Some(s) => Estimator::parse(s).map_err(|e| anyhow!("--estimator: {e}"))?,
        None => family.default_estimator(),
    };
    let n = || require(p.n, "n", family);
    let initial = match family {
        Family::Bernoulli => ParamState::Bernoulli { p: require(p.p0, "p0", family)? },
        Family::Poisson => ParamState::Poisson { lambda: require(p.lambda0, "lambda0", family)? },
        Family::Gaussian | Family::Gmm => {
            let mu = p.mu0.unwrap_or(0.0);
            let sigma = require(p.sigma0, "sigma0", family)?;
            if !(sigma >= 0.0 && sigma.is_finite()) {
                bail!("--sigma0: must be finite and >= 0, got {sigma}");
            }
            let sigma2 = sigma * sigma;
            if family == Family::Gaussian {
                ParamState::Gaussian { mu, sigma2 }
            } else {
                ParamState::Gmm { mu, sigma2 }
            }
        }
        Family::Discrete => {
            let path = p.theta_file.as_ref().ok_or_else(|| anyhow!("--theta-file: required for family discrete"))?;
            let theta = read_numbers(path)?
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| anyhow!("--theta-file: `{s}` is not a number")))
                .collect::<Result<Vec<_>>>()?;
            ParamState::Discrete { theta }
        }
        Family::DiscretePoisson => {
            let path =
                p.theta_file.as_ref().ok_or_else(|| anyhow!("--theta-file: required for family discrete_poisson"))?;
            let counts = read_numbers(path)?
                .iter()
                .map(|s| s.parse::<u64>().map_err(|_| anyhow!("--theta-file: `{s}` is not a non-negative count")))
                .collect::<Result<Vec<_>>>()?;
            let n = counts.iter().sum::<u64>().max(1);
            let spec = ProcessSpec::new(ParamState::DiscretePoisson { counts }, n, estimator)?;
            return Ok(spec);
        }
    };
    let mut spec = ProcessSpec::new(initial, n()?, estimator)?;
    if let Some(a) = p.approx_a {
        spec = spec.with_approx_a(a).map_err(|e| anyhow!("--approx-a: {e}"))?;
    }
    Ok(spec)
}

fn generations(ks: &Option<String>, k_max: u64) -> Result<Vec<u64>> {
    match ks {
        Some(list) => {
            let v = list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<u64>().map_err(|_| anyhow!("--ks: `{s}` is not a generation")))
                .collect::<Result<Vec<_>>>()?;
            if v.is_empty() {
                bail!("--ks: no generations given");
            }
            Ok(v)
        }
        None if k_max == 0 => bail!("--K: must be at least 1"),
        None => Ok((1..=k_max).collect()),
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<Status> {
    let spec = build_spec(&a.process)?;
    let format = format_of(&a.output)?;
    let kind = match &a.event {
        Some(s) => EventKind::parse(s).map_err(|e| anyhow!("--event: {e}"))?,
        None => EventKind::default_for(spec.family),
    };
    let ks = generations(&a.ks, a.k_max)?;
    let query = EventQuery::new(kind, a.eps, ks).map_err(|e| anyhow!("--eps: {e}"))?;
    if a.trials == 0 {
        bail!("--trials: must be at least 1");
    }
    let cfg = McConfig::new(a.trials, a.seed).with_workers(a.workers).with_z(a.z);
    let start = Instant::now();
    let summary = estimate(&spec, &query, &cfg)?;
    let wall = start.elapsed().as_secs_f64();
    let path = target(&a.output.out, &format!("summary.{}", format.extension()));
    emit(path.as_deref(), &summary_to_string(&summary, format)?)?;
    eprintln!(
        "simulate: family={} event={} trials={} generations={} wall={wall:.3}s{}",
        spec.family,
        query.kind,
        a.trials,
        query.generations.len(),
        path.map(|p| format!(" -> {}", p.display())).unwrap_or_default()
    );
    Ok(Status::Ok)
}

pub fn bounds(a: &BoundsArgs) -> Result<Status> {
    let spec = build_spec(&a.process)?;
    let format = format_of(&a.output)?;
    let ks = generations(&a.ks, a.k_max)?;
    let k_top = ks.iter().copied().max().unwrap_or(1).max(1);
    let gk = gk_sequence(usize::try_from(k_top).context("--K: too large")?)?;
    let curves = curves_for(&spec, a.eps, &ks, &gk).map_err(|e| match spec.family {
        Family::Gaussian | Family::Gmm if a.eps.is_none() => anyhow!("--eps: {e}"),
        _ => e.into(),
    })?;
    let path = target(&a.output.out, &format!("bounds.{}", format.extension()));
    emit(path.as_deref(), &curves_to_string(&curves, Some(gk.metadata()), format)?)?;
    eprintln!("bounds: family={} curves={} K={}", spec.family, curves.len(), k_top);
    Ok(Status::Ok)
}

pub fn figure(a: &FigureArgs) -> Result<Status> {
    let format = format_of(&a.output)?;
    let overrides = Overrides { trials: a.trials, seed: a.seed, k_max: a.k_max, n: a.n, workers: a.workers };
    let start = Instant::now();
    let out = run_figure(&a.name, &overrides, format)?;
    let dir = a.output.out.clone().or_else(default_dir).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for f in &out.files {
        emit(Some(&dir.join(&f.name)), &f.contents)?;
    }
    eprintln!(
        "figure: {} files={} dir={} wall={:.3}s",
        out.name,
        out.files.len(),
        dir.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(Status::Ok)
}

fn read(path: &Path, what: &str) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("{what}: cannot read {}", path.display()))
}

pub fn verify(a: &VerifyArgs) -> Result<Status> {
    let format = format_of(&a.output)?;
    let summary_text = read(&a.summary, "summary")?;
    let curves_text = read(&a.curves, "curves")?;
    let curves =
        if curves_text.trim().is_empty() { Vec::new() } else { curves_from_str(&curves_text).context("curves")?.0 };
    let report = if curves.is_empty() {
        VerificationReport::default()
    } else {
        if summary_text.trim().is_empty() {
            bail!("summary: empty file but {} curves to check", curves.len());
        }
        let summary = summary_from_str(&summary_text).context("summary")?;
        let (matching, other): (Vec<_>, Vec<_>) =
            curves.into_iter().partition(|c| c.source.event() == summary.query.kind);
        if !other.is_empty() {
            eprintln!("verify: ignoring {} curves for events other than {}", other.len(), summary.query.kind);
        }
        verify_bounds(&summary, &matching)?
    };
    print!("{}", report_table(&report));
    if let Some(path) = target(&a.output.out, &format!("verify.{}", format.extension())) {
        emit(Some(&path), &report_to_string(&report, format)?)?;
    }
    Ok(if report.passed() { Status::Ok } else { Status::VerificationFailed })
}

pub fn gmm_compare(a: &GmmCompareArgs) -> Result<Status> {
    let format = format_of(&a.output)?;
    let n = usize::try_from(a.n).context("--n: too large")?;
    if n <= 3 {
        bail!("--n: the approximate estimator needs n > 3, got {n}");
    }
    let rows = run_compare(a.mu0, a.sigma0, n, a.trials, a.seed, a.approx_a)?;
    let meta = json!({"mu": a.mu0, "sigma": a.sigma0, "n": a.n, "trials": a.trials, "seed": a.seed, "a": a.approx_a});
    let path = target(&a.output.out, &format!("gmm_compare.{}", format.extension()));
    emit(path.as_deref(), &compare_to_string(&rows, meta, format)?)?;
    Ok(Status::Ok)
}

pub fn ngram(a: &NgramArgs) -> Result<Status> {
    let format = format_of(&a.output)?;
    let text = read(&a.corpus, "--corpus")?;
    let tokenizer = match &a.vocabulary {
        Some(p) => Tokenizer::from_vocabulary_file(&read(p, "--vocabulary")?)?,
        None => Tokenizer::Whitespace,
    };
    let corpus = ingest(&text, &tokenizer).context("--corpus")?;
    let n_out = match a.n {
        Some(n) => usize::try_from(n).context("--n: too large")?,
        None => corpus.tokens.len(),
    };
    let generations = usize::try_from(a.k_max).context("--K: too large")?;
    let records = recursive_run(&corpus, a.order, n_out, generations, a.seed)?;
    let meta = json!({
        "order": a.order,
        "n_out": n_out,
        "vocabulary": corpus.vocabulary.len(),
        "corpus_tokens": corpus.tokens.len(),
    });
    let path = target(&a.output.out, &format!("ngram.{}", format.extension()));
    emit(path.as_deref(), &ngram_to_string(&records, meta, format)?)?;
    if let Some(last) = records.last() {
        eprintln!(
            "ngram: order={} generations={} distinct {} -> {}",
            a.order, generations, records[0].distinct_count, last.distinct_count
        );
    }
    Ok(Status::Ok)
}

pub fn trajectory(a: &TrajectoryArgs) -> Result<Status> {
    let spec = build_spec(&a.process)?;
    let k = usize::try_from(a.k_max).context("--K: too large")?;
    let t = simulate_trajectory(&spec, k, a.seed)?;
    let path = target(&a.out, "trajectory.jsonl");
    emit(path.as_deref(), &t.to_jsonl()?)?;
    Ok(Status::Ok)
}
