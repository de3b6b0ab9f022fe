mod common;

use collapse_core::montecarlo::{estimate, EventKind, EventQuery, McConfig};
use collapse_core::ngram::{fit, ingest, recursive_run, Tokenizer};
use collapse_core::processes::{simulate_stream, Estimator, ParamState, ProcessSpec};
use collapse_core::rng::trajectory_rng;
use common::chi_square_p_value;
use statrs::distribution::{Binomial, Discrete};

const TRIALS: u64 = 100_000;

fn assert_martingale(spec: &ProcessSpec, trials: u64, seed: u64) {
    let start = spec.initial.martingale_value();
    let query = EventQuery::new(EventKind::MartingaleMean, None, vec![1, 5, 10]).unwrap();
    let summary = estimate(spec, &query, &McConfig::new(trials, seed)).unwrap();
    for e in &summary.per_k {
        assert!(
            (e.value - start).abs() <= 5.0 * e.std_error,
            "{} k={}: mean {} vs {start} (se {})",
            spec.family,
            e.k,
            e.value,
            e.std_error
        );
    }
}

#[test]
fn bernoulli_mean_is_preserved() {
    assert_martingale(&ProcessSpec::bernoulli(0.3, 20).unwrap(), TRIALS, 1);
}

#[test]
fn poisson_mean_is_preserved() {
    assert_martingale(&ProcessSpec::poisson(0.7, 10).unwrap(), TRIALS, 2);
}

#[test]
fn unbiased_gaussian_variance_is_preserved() {
    let spec = ProcessSpec::gaussian(0.0, 1.0, 20, Estimator::MlUnbiasedVariance).unwrap();
    assert_martingale(&spec, TRIALS, 3);
}

#[test]
fn mixture_second_moment_is_preserved() {
    let spec = ProcessSpec::gmm(1.0, 1.0, 10, Estimator::ApproxJointMl).unwrap();
    assert_martingale(&spec, TRIALS, 4);
    let spec = ProcessSpec::gmm(1.0, 1.0, 10, Estimator::JointMl).unwrap();
    assert_martingale(&spec, 10_000, 5);
}

#[test]
fn discrete_masses_are_preserved() {
    assert_martingale(&ProcessSpec::discrete(vec![0.2, 0.5, 0.3], 15).unwrap(), TRIALS, 6);
    assert_martingale(&ProcessSpec::discrete_poisson(vec![3, 0, 7, 1]).unwrap(), TRIALS, 7);
}

#[test]
fn bernoulli_absorbs_at_zero_with_probability_one_minus_p0() {
    let (p0, n) = (0.3, 5);
    let spec = ProcessSpec::bernoulli(p0, n).unwrap();
    let query = EventQuery::new(EventKind::AbsorbedAtZero, None, vec![2_000]).unwrap();
    let summary = estimate(&spec, &query, &McConfig::new(20_000, 8)).unwrap();
    let e = summary.at(2_000).unwrap();
    assert!((e.value - (1.0 - p0)).abs() <= 5.0 * e.std_error.max(1e-3), "{}", e.value);
}

#[test]
fn two_symbol_discrete_process_is_the_bernoulli_process() {
    let (p0, n, k) = (0.35, 12u64, 6usize);
    let trials = 50_000u64;
    let bern = ProcessSpec::bernoulli(p0, n).unwrap();
    let disc = ProcessSpec::discrete(vec![p0, 1.0 - p0], n).unwrap();
    let mut hb = vec![0u64; n as usize + 1];
    let mut hd = vec![0u64; n as usize + 1];
    for i in 0..trials {
        let b = simulate_stream(&bern, k, 9, i).unwrap();
        let d = simulate_stream(&disc, k, 10, i).unwrap();
        let ParamState::Bernoulli { p } = b.states[k] else { unreachable!() };
        let ParamState::Discrete { theta } = &d.states[k] else { unreachable!() };
        hb[(p * n as f64).round() as usize] += 1;
        hd[(theta[0] * n as f64).round() as usize] += 1;
    }
    // compare the discrete histogram against the Bernoulli one as a reference law
    let total = trials as f64;
    let probs: Vec<f64> = hb.iter().map(|&c| (c as f64 + 0.5) / (total + 0.5 * hb.len() as f64)).collect();
    let pv = chi_square_p_value(&hd, &probs);
    assert!(pv > 1e-4, "p-value {pv}");
}

#[test]
fn unigram_resampling_is_multinomial_resampling() {
    let corpus = ingest("a a a b c c a b a d a c", &Tokenizer::Whitespace).unwrap();
    let model = fit(&corpus.tokens, corpus.vocabulary.len(), 1).unwrap();
    let theta = model.unigram_theta().unwrap();
    let n = corpus.tokens.len();
    assert!((theta[0] - 6.0 / 12.0).abs() < 1e-15);
    let draws = 50_000;
    let mut rng = trajectory_rng(11, 0);
    let mut hist = vec![0u64; n + 1];
    for _ in 0..draws {
        let out = model.generate(n, &mut rng).unwrap();
        hist[out.iter().filter(|&&t| t == 0).count()] += 1;
    }
    let pmf = Binomial::new(theta[0], n as u64).unwrap();
    let probs: Vec<f64> = (0..=n as u64).map(|c| pmf.pmf(c)).collect();
    assert!(chi_square_p_value(&hist, &probs) > 1e-3);
}

#[test]
fn lost_symbols_never_return() {
    let spec = ProcessSpec::discrete(vec![0.05; 20], 30).unwrap();
    for seed in 0..50 {
        let t = simulate_stream(&spec, 40, seed, 0).unwrap();
        for w in t.states.windows(2) {
            let (ParamState::Discrete { theta: a }, ParamState::Discrete { theta: b }) = (&w[0], &w[1]) else {
                unreachable!()
            };
            for (x, y) in a.iter().zip(b) {
                assert!(*x > 0.0 || *y == 0.0);
            }
        }
    }
}

#[test]
fn ngram_vocabulary_only_shrinks() {
    let corpus = ingest("the cat sat on the mat and the dog sat on the cat", &Tokenizer::Whitespace).unwrap();
    for order in 1..=3 {
        let run = recursive_run(&corpus, order, corpus.tokens.len(), 30, 4).unwrap();
        for w in run.windows(2) {
            assert!(w[1].distinct_count <= w[0].distinct_count, "order {order}");
        }
    }
}
