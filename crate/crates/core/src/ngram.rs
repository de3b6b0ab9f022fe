//! Maximum-likelihood n-gram models trained on their own output.
//!
//! No smoothing and no backoff: a token that disappears from the corpus can
//! never come back, which is exactly the collapse mechanism under study.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::trajectory_rng;

#[derive(Debug, Clone, PartialEq)]
pub enum Tokenizer {
    /// Split on Unicode whitespace; the vocabulary is built in first-occurrence order.
    Whitespace,
    /// Split on whitespace and map onto a fixed vocabulary; unknown tokens are errors.
    Vocabulary(Vec<String>),
}

impl Tokenizer {
    /// One token per non-empty line.
    pub fn from_vocabulary_file(text: &str) -> Result<Tokenizer> {
        let mut seen = HashMap::new();
        let mut vocab = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if seen.insert(line.to_string(), ()).is_none() {
                vocab.push(line.to_string());
            }
        }
        if vocab.is_empty() {
            return Err(invalid("vocabulary file is empty"));
        }
        Ok(Tokenizer::Vocabulary(vocab))
    }
}

/// A token-id sequence with its vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub vocabulary: Vec<String>,
    pub tokens: Vec<u32>,
}

impl Corpus {
    pub fn distinct(&self) -> usize {
        distinct_count(&self.tokens, self.vocabulary.len())
    }
}

pub fn distinct_count(tokens: &[u32], vocab_size: usize) -> usize {
    let mut seen = vec![false; vocab_size];
    let mut count = 0;
    for &t in tokens {
        let slot = &mut seen[t as usize];
        if !*slot {
            *slot = true;
            count += 1;
        }
    }
    count
}

pub fn ingest(text: &str, tokenizer: &Tokenizer) -> Result<Corpus> {
    let words = text.split_whitespace();
    let corpus = match tokenizer {
        Tokenizer::Whitespace => {
            let mut index: HashMap<&str, u32> = HashMap::new();
            let mut vocabulary = Vec::new();
            let mut tokens = Vec::new();
            for w in words {
                let id = *index.entry(w).or_insert_with(|| {
                    vocabulary.push(w.to_string());
                    (vocabulary.len() - 1) as u32
                });
                tokens.push(id);
            }
            Corpus { vocabulary, tokens }
        }
        Tokenizer::Vocabulary(vocab) => {
            let index: HashMap<&str, u32> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();
            let tokens = words
                .enumerate()
                .map(|(position, w)| {
                    index.get(w).copied().ok_or_else(|| Error::UnknownToken { token: w.to_string(), position })
                })
                .collect::<Result<Vec<_>>>()?;
            Corpus { vocabulary: vocab.clone(), tokens }
        }
    };
    if corpus.tokens.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(corpus)
}

/// Next-token counts for one context, stored as a cumulative table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextCounts {
    pub next: Vec<u32>,
    pub cumulative: Vec<u64>,
}

impl ContextCounts {
    pub fn total(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    pub fn count_of(&self, token: u32) -> u64 {
        match self.next.iter().position(|&t| t == token) {
            Some(0) => self.cumulative[0],
            Some(i) => self.cumulative[i] - self.cumulative[i - 1],
            None => 0,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.next[pick(&self.cumulative, rng)]
    }
}

fn pick<R: Rng + ?Sized>(cumulative: &[u64], rng: &mut R) -> usize {
    let total = *cumulative.last().expect("non-empty table");
    let u = rng.random_range(0..total);
    cumulative.partition_point(|&c| c <= u)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramModel {
    pub order: usize,
    pub vocab_size: usize,
    /// Context (the preceding `order - 1` tokens) to next-token counts.
    pub contexts: BTreeMap<Vec<u32>, ContextCounts>,
    /// Number of tokens the model was fitted on.
    pub n_tokens: usize,
    keys: Vec<Vec<u32>>,
    context_cumulative: Vec<u64>,
}

pub fn fit(tokens: &[u32], vocab_size: usize, order: usize) -> Result<NGramModel> {
    if order == 0 {
        return Err(invalid("n-gram order must be at least 1"));
    }
    if order > tokens.len() {
        return Err(invalid(format!("order {order} exceeds corpus length {}", tokens.len())));
    }
    if let Some(&t) = tokens.iter().find(|&&t| t as usize >= vocab_size) {
        return Err(invalid(format!("token id {t} outside vocabulary of size {vocab_size}")));
    }
    let mut raw: BTreeMap<Vec<u32>, BTreeMap<u32, u64>> = BTreeMap::new();
    for w in tokens.windows(order) {
        let (ctx, next) = w.split_at(order - 1);
        *raw.entry(ctx.to_vec()).or_default().entry(next[0]).or_insert(0) += 1;
    }
    let mut contexts = BTreeMap::new();
    let mut keys = Vec::with_capacity(raw.len());
    let mut context_cumulative = Vec::with_capacity(raw.len());
    let mut running = 0;
    for (ctx, counts) in raw {
        let mut acc = 0;
        let (next, cumulative) = counts
            .into_iter()
            .map(|(t, c)| {
                acc += c;
                (t, acc)
            })
            .unzip();
        running += acc;
        context_cumulative.push(running);
        keys.push(ctx.clone());
        contexts.insert(ctx, ContextCounts { next, cumulative });
    }
    Ok(NGramModel { order, vocab_size, contexts, n_tokens: tokens.len(), keys, context_cumulative })
}

impl NGramModel {
    /// ML probabilities of the unigram model, indexed by token id.
    pub fn unigram_theta(&self) -> Option<Vec<f64>> {
        if self.order != 1 {
            return None;
        }
        let counts = self.contexts.get(&Vec::new())?;
        let total = counts.total() as f64;
        let mut theta = vec![0.0; self.vocab_size];
        for &t in &counts.next {
            theta[t as usize] = counts.count_of(t) as f64 / total;
        }
        Some(theta)
    }

    /// Samples `n_out` tokens.
    ///
    /// For order above 1 the first context is drawn from the empirical
    /// context distribution; when the running context was never observed, a
    /// fresh context is drawn the same way and generation continues from it.
    pub fn generate<R: Rng + ?Sized>(&self, n_out: usize, rng: &mut R) -> Result<Vec<u32>> {
        if self.contexts.is_empty() || self.vocab_size == 0 {
            return Err(invalid("model has no observed tokens"));
        }
        let mut out = Vec::with_capacity(n_out);
        if self.order == 1 {
            let counts = &self.contexts[&Vec::new()];
            out.extend((0..n_out).map(|_| counts.sample(rng)));
            return Ok(out);
        }
        let width = self.order - 1;
        while out.len() < n_out {
            let start = &self.keys[pick(&self.context_cumulative, rng)];
            out.extend(start.iter().take(n_out - out.len()));
            while out.len() < n_out {
                let ctx = &out[out.len() - width..];
                match self.contexts.get(ctx) {
                    Some(counts) => {
                        let t = counts.sample(rng);
                        out.push(t);
                    }
                    None => break,
                }
            }
        }
        Ok(out)
    }
}

/// Convenience wrapper: generation on stream 0 of `seed`.
pub fn generate(model: &NGramModel, n_out: usize, seed: u64) -> Result<Vec<u32>> {
    model.generate(n_out, &mut trajectory_rng(seed, 0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NgramRecord {
    pub generation: usize,
    pub distinct_count: usize,
    /// `distinct_count / m`, with `m` the vocabulary size of the input corpus.
    pub fraction: f64,
    pub seed: u64,
}

/// Iterates fit then generate, replacing the corpus each generation.
/// Generation `g` samples from stream `g` of `seed`.
pub fn recursive_run(
    corpus: &Corpus,
    order: usize,
    n_out: usize,
    generations: usize,
    seed: u64,
) -> Result<Vec<NgramRecord>> {
    if order == 0 {
        return Err(invalid("n-gram order must be at least 1"));
    }
    if n_out < order {
        return Err(invalid(format!("n_out={n_out} must be at least the order {order}")));
    }
    let m = corpus.vocabulary.len();
    let record = |generation: usize, tokens: &[u32]| {
        let distinct_count = distinct_count(tokens, m);
        NgramRecord { generation, distinct_count, fraction: distinct_count as f64 / m as f64, seed }
    };
    let mut out = vec![record(0, &corpus.tokens)];
    let mut tokens = corpus.tokens.clone();
    for generation in 1..=generations {
        let model = fit(&tokens, m, order).map_err(|e| Error::AtGeneration { generation, source: Box::new(e) })?;
        let mut rng = trajectory_rng(seed, generation as u64);
        tokens = model.generate(n_out, &mut rng)?;
        out.push(record(generation, &tokens));
    }
    Ok(out)
}

/// `θ_i ∝ 1/(i+b)^a` for `i = 1..=m`.
pub fn zipf_theta(m: usize, a: f64, b: f64) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(invalid("alphabet size must be at least 1"));
    }
    if !(a >= 0.0 && a.is_finite()) || !(b > -1.0 && b.is_finite()) {
        return Err(invalid(format!("invalid Zipf parameters a={a}, b={b}")));
    }
    let weights: Vec<f64> = (1..=m).map(|i| (i as f64 + b).powf(-a)).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// A synthetic whitespace corpus of `len` tokens `w0 … w{m-1}` drawn from
/// the Zipf law, for desk-scale runs without an external dataset.
pub fn synthetic_zipf_corpus(m: usize, a: f64, b: f64, len: usize, seed: u64) -> Result<String> {
    let theta = zipf_theta(m, a, b)?;
    let counts = crate::processes::multinomial_counts(&theta, len as u64, &mut trajectory_rng(seed, 0))?;
    let mut ids: Vec<usize> =
        counts.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize)).collect();
    let mut rng = trajectory_rng(seed, 1);
    for i in (1..ids.len()).rev() {
        let j = rng.random_range(0..=i);
        ids.swap(i, j);
    }
    let mut text = String::new();
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            text.push(if i % 20 == 0 { '\n' } else { ' ' });
        }
        text.push('w');
        text.push_str(&id.to_string());
    }
    Ok(text)
}
