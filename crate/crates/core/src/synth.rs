//! Synthetic corpora with known positional ground truth.
//!
//! Every article sentence is built from tokens unique to its
//! (article, sentence) pair, and every summary sentence copies one article
//! sentence. Mapping is then unambiguous and the recovered segment counts are
//! exactly the allocated ones. Optional shared vocabulary and token dropout
//! make the mapping noisy for robustness checks.
//!
//! Spec file format, one `key = value` per line, `#` starts a comment:
//!
//! ```text
//! num_articles = 1000
//! sentences_per_article = 20
//! k = 10
//! summary_sentences_per_article = 1
//! gold_target = 0,0,0,0,0,0,0,0,0,1
//! model:lead = 1,0,0,0,0,0,0,0,0,0
//! allocation = deterministic_largest_remainder
//! seed = 7
//! ```
//!
//! Optional keys: `unique_tokens_per_sentence` (default 6),
//! `shared_vocabulary` and `shared_tokens_per_sentence` (default 0), and
//! `token_dropout` (probability in [0, 1), default 0).

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::CorpusRecord;
use crate::posmap::{segment_article, SegmentationPlan};

const TARGET_SUM_TOLERANCE: f64 = 1e-12;

// Separate ChaCha streams per purpose keep gold and model draws independent.
const STREAM_ALLOCATION: u64 = 1 << 40;
const STREAM_ARTICLE: u64 = 2 << 40;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("field {field}: {message}")]
    Field { field: String, message: String },
    #[error("infeasible spec: {0}")]
    Infeasible(String),
}

fn field_err(field: &str, message: impl Into<String>) -> SynthError {
    SynthError::Field {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocation {
    /// Corpus-wide segment counts are the largest-remainder apportionment of
    /// `total summary sentences x target`.
    DeterministicLargestRemainder,
    /// Each summary sentence draws its segment i.i.d. from the target.
    SeededRandom,
}

impl FromStr for Allocation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "deterministic_largest_remainder" | "deterministic" => Ok(Allocation::DeterministicLargestRemainder),
            "seeded_random" | "random" => Ok(Allocation::SeededRandom),
            other => Err(format!("unknown allocation {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSpec {
    pub num_articles: usize,
    pub sentences_per_article: usize,
    pub k: usize,
    pub gold_target: Vec<f64>,
    pub model_targets: BTreeMap<String, Vec<f64>>,
    pub summary_sentences_per_article: usize,
    pub allocation: Allocation,
    pub seed: u64,
    pub unique_tokens_per_sentence: usize,
    pub shared_vocabulary: usize,
    pub shared_tokens_per_sentence: usize,
    pub token_dropout: f64,
}

impl SynthSpec {
    pub fn new(num_articles: usize, sentences_per_article: usize, k: usize, gold_target: Vec<f64>) -> Self {
        Self {
            num_articles,
            sentences_per_article,
            k,
            gold_target,
            model_targets: BTreeMap::new(),
            summary_sentences_per_article: 1,
            allocation: Allocation::DeterministicLargestRemainder,
            seed: 0,
            unique_tokens_per_sentence: 6,
            shared_vocabulary: 0,
            shared_tokens_per_sentence: 0,
            token_dropout: 0.0,
        }
    }

    pub fn with_model(mut self, name: impl Into<String>, target: Vec<f64>) -> Self {
        self.model_targets.insert(name.into(), target);
        self
    }

    pub fn total_summary_sentences(&self) -> usize {
        self.num_articles * self.summary_sentences_per_article
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.num_articles == 0 {
            return Err(field_err("num_articles", "must be at least 1"));
        }
        if self.k == 0 {
            return Err(field_err("k", "must be at least 1"));
        }
        if self.k > self.sentences_per_article {
            return Err(field_err("k", format!(
                "segment count {} exceeds sentences_per_article {}",
                self.k, self.sentences_per_article
            )));
        }
        if self.summary_sentences_per_article == 0 {
            return Err(field_err("summary_sentences_per_article", "must be at least 1"));
        }
        if self.unique_tokens_per_sentence == 0 {
            return Err(field_err("unique_tokens_per_sentence", "must be at least 1"));
        }
        if self.shared_tokens_per_sentence > 0 && self.shared_vocabulary == 0 {
            return Err(field_err("shared_vocabulary", "must be positive when shared tokens are requested"));
        }
        if !(0.0..1.0).contains(&self.token_dropout) {
            return Err(field_err("token_dropout", "must lie in [0, 1)"));
        }
        check_target("gold_target", &self.gold_target, self.k)?;
        for (name, target) in &self.model_targets {
            if name.is_empty() {
                return Err(field_err("model:", "model name is empty"));
            }
            check_target(&format!("model:{name}"), target, self.k)?;
        }
        Ok(())
    }

    /// Parses the key-value spec format described in the module docs.
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let mut fields: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut models = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| SynthError::Syntax {
                    line: i + 1,
                    message: format!("expected `key = value`, got {line:?}"),
                })?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(name) = key.strip_prefix("model:").or_else(|| key.strip_prefix("model.")) {
                let field = format!("model:{}", name.trim());
                models.insert(name.trim().to_string(), parse_vector(&field, value)?);
            } else if fields.insert(key.to_string(), (i + 1, value.to_string())).is_some() {
                return Err(SynthError::Syntax {
                    line: i + 1,
                    message: format!("duplicate key {key:?}"),
                });
            }
        }

        let mut take = |key: &str| fields.remove(key).map(|(_, v)| v);
        fn num<T: FromStr>(key: &str, v: Option<String>, default: Option<T>) -> Result<T, SynthError> {
            match (v, default) {
                (Some(v), _) => v.parse().map_err(|_| field_err(key, format!("cannot parse {v:?}"))),
                (None, Some(d)) => Ok(d),
                (None, None) => Err(field_err(key, "missing")),
            }
        }

        let gold = take("gold_target").ok_or_else(|| field_err("gold_target", "missing"))?;
        let spec = SynthSpec {
            num_articles: num("num_articles", take("num_articles"), None)?,
            sentences_per_article: num("sentences_per_article", take("sentences_per_article"), None)?,
            k: num("k", take("k"), None)?,
            gold_target: parse_vector("gold_target", &gold)?,
            model_targets: models,
            summary_sentences_per_article: num(
                "summary_sentences_per_article",
                take("summary_sentences_per_article"),
                Some(1),
            )?,
            allocation: match take("allocation") {
                Some(v) => v.parse().map_err(|m: String| field_err("allocation", m))?,
                None => Allocation::DeterministicLargestRemainder,
            },
            seed: num("seed", take("seed"), Some(0))?,
            unique_tokens_per_sentence: num("unique_tokens_per_sentence", take("unique_tokens_per_sentence"), Some(6))?,
            shared_vocabulary: num("shared_vocabulary", take("shared_vocabulary"), Some(0))?,
            shared_tokens_per_sentence: num("shared_tokens_per_sentence", take("shared_tokens_per_sentence"), Some(0))?,
            token_dropout: num("token_dropout", take("token_dropout"), Some(0.0))?,
        };
        if let Some((key, (line, _))) = fields.into_iter().next() {
            return Err(SynthError::Syntax {
                line,
                message: format!("unknown key {key:?}"),
            });
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_vector(field: &str, value: &str) -> Result<Vec<f64>, SynthError> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| field_err(field, format!("cannot parse {:?} as a number", v.trim())))
        })
        .collect()
}

fn check_target(field: &str, target: &[f64], k: usize) -> Result<(), SynthError> {
    if target.len() != k {
        return Err(field_err(field, format!("has {} entries, expected k = {k}", target.len())));
    }
    if target.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(field_err(field, "entries must be finite and non-negative"));
    }
    let sum: f64 = target.iter().sum();
    if (sum - 1.0).abs() > TARGET_SUM_TOLERANCE {
        return Err(field_err(field, format!("sums to {sum}, expected 1")));
    }
    Ok(())
}

/// Integer counts summing to `total`, proportional to `weights`: floors
/// first, then remaining units to the largest fractional parts (ties to the
/// lower index).
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &j in order.iter().take(total.saturating_sub(assigned)) {
        counts[j] += 1;
    }
    counts
}

/// Segment labels (1-based) for every summary sentence slot, in slot order.
fn allocate(spec: &SynthSpec, target: &[f64], stream: u64) -> Vec<usize> {
    let total = spec.total_summary_sentences();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(STREAM_ALLOCATION + stream);
    match spec.allocation {
        Allocation::DeterministicLargestRemainder => {
            let counts = largest_remainder(total, target);
            let mut labels: Vec<usize> = counts
                .iter()
                .enumerate()
                .flat_map(|(j, &c)| std::iter::repeat_n(j + 1, c))
                .collect();
            labels.shuffle(&mut rng);
            labels
        }
        Allocation::SeededRandom => {
            let dist = WeightedIndex::new(target).expect("validated target");
            (0..total).map(|_| dist.sample(&mut rng) + 1).collect()
        }
    }
}

fn sentence_text(words: &[String]) -> String {
    let mut text = words.join(" ");
    if let Some(first) = text.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    text.push('.');
    text
}

fn article_words(spec: &SynthSpec, article: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    (0..spec.sentences_per_article)
        .map(|s| {
            let mut words: Vec<String> = (0..spec.unique_tokens_per_sentence)
                .map(|t| format!("a{article}s{s}t{t}"))
                .collect();
            for _ in 0..spec.shared_tokens_per_sentence {
                words.push(format!("w{}", rng.random_range(0..spec.shared_vocabulary)));
            }
            words
        })
        .collect()
}

fn copy_with_dropout(words: &[String], dropout: f64, rng: &mut ChaCha8Rng) -> Vec<String> {
    if dropout == 0.0 {
        return words.to_vec();
    }
    let kept: Vec<String> = words.iter().filter(|_| !rng.random_bool(dropout)).cloned().collect();
    if kept.is_empty() {
        vec![words[rng.random_range(0..words.len())].clone()]
    } else {
        kept
    }
}

fn summary_text(
    labels: &[usize],
    plan: &SegmentationPlan,
    words: &[Vec<String>],
    dropout: f64,
    rng: &mut ChaCha8Rng,
) -> String {
    labels
        .iter()
        .map(|&seg| {
            let (lo, hi) = plan.intervals()[seg - 1];
            let source = rng.random_range(lo..=hi);
            sentence_text(&copy_with_dropout(&words[source], dropout, rng))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<Vec<CorpusRecord>, SynthError> {
    spec.validate()?;
    let plan = segment_article(spec.sentences_per_article, spec.k)
        .map_err(|e| SynthError::Infeasible(e.to_string()))?;
    let per = spec.summary_sentences_per_article;
    let gold_labels = allocate(spec, &spec.gold_target, 0);
    let model_labels: Vec<(&String, Vec<usize>)> = spec
        .model_targets
        .iter()
        .enumerate()
        .map(|(i, (name, target))| (name, allocate(spec, target, i as u64 + 1)))
        .collect();

    let records = (0..spec.num_articles)
        .map(|a| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(STREAM_ARTICLE + a as u64);
            let words = article_words(spec, a, &mut rng);
            let article = words.iter().map(|w| sentence_text(w)).collect::<Vec<_>>().join(" ");
            let slots = a * per..(a + 1) * per;
            let gold = summary_text(&gold_labels[slots.clone()], &plan, &words, spec.token_dropout, &mut rng);
            let mut record = CorpusRecord::new(format!("synth-{a:06}"), article, gold);
            for (name, labels) in &model_labels {
                let text = summary_text(&labels[slots.clone()], &plan, &words, spec.token_dropout, &mut rng);
                record.model_summaries.insert((*name).clone(), text);
            }
            record
        })
        .collect();
    Ok(records)
}

/// Ground truth written next to a generated corpus.
#[derive(Debug, Clone, Serialize)]
pub struct SynthTruth {
    pub k: usize,
    pub allocation: Allocation,
    pub total_summary_sentences: usize,
    pub gold_target: Vec<f64>,
    pub model_targets: BTreeMap<String, Vec<f64>>,
    /// Exact segment counts under deterministic allocation.
    pub expected_gold_counts: Option<Vec<usize>>,
    pub expected_model_counts: Option<BTreeMap<String, Vec<usize>>>,
}

impl SynthTruth {
    pub fn of(spec: &SynthSpec) -> Self {
        let deterministic = spec.allocation == Allocation::DeterministicLargestRemainder;
        let total = spec.total_summary_sentences();
        Self {
            k: spec.k,
            allocation: spec.allocation,
            total_summary_sentences: total,
            gold_target: spec.gold_target.clone(),
            model_targets: spec.model_targets.clone(),
            expected_gold_counts: deterministic.then(|| largest_remainder(total, &spec.gold_target)),
            expected_model_counts: deterministic.then(|| {
                spec.model_targets
                    .iter()
                    .map(|(n, t)| (n.clone(), largest_remainder(total, t)))
                    .collect()
            }),
        }
    }
}
