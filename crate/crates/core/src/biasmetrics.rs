//! Wasserstein-1 distance between positional distributions, lead-bias
//! fraction, and Spearman rank correlation with one-sided p-values.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::posmap::{PositionalDistribution, SentenceMapping};
use crate::simmetrics::RougeScores;

/// Largest sample size for which p-values come from full enumeration.
pub const EXACT_PERMUTATION_MAX_N: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("distributions have different supports")]
    MismatchedSupport,
    #[error("no mapped summary sentence; lead-bias fraction is undefined")]
    AllUnmapped,
    #[error("k' must be at least 1")]
    ZeroCutoff,
    #[error("sample lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 samples for a rank correlation, got {0}")]
    TooFewSamples(usize),
    #[error("input has zero rank variance")]
    ConstantInput,
}

/// `W1 = sum_j |F_p(j) - F_q(j)| * (x_{j+1} - x_j)` over the shared support.
pub fn wasserstein1(p: &PositionalDistribution, q: &PositionalDistribution) -> Result<f64, MetricsError> {
    if p.k() != q.k() || p.support_positions() != q.support_positions() {
        return Err(MetricsError::MismatchedSupport);
    }
    let x = p.support_positions();
    let (mut cdf_p, mut cdf_q, mut total) = (0.0, 0.0, 0.0);
    for j in 0..p.k().saturating_sub(1) {
        cdf_p += p.mass()[j];
        cdf_q += q.mass()[j];
        total += (cdf_p - cdf_q).abs() * (x[j + 1] - x[j]);
    }
    Ok(total)
}

/// Share of mapped contributions whose article index is below `k_prime`.
pub fn lead_bias_fraction<'a, I>(mappings: I, k_prime: usize) -> Result<f64, MetricsError>
where
    I: IntoIterator<Item = &'a SentenceMapping>,
{
    if k_prime == 0 {
        return Err(MetricsError::ZeroCutoff);
    }
    let (mut lead, mut total) = (0u64, 0u64);
    for mapping in mappings {
        for idx in mapping.contributions() {
            total += 1;
            if idx < k_prime {
                lead += 1;
            }
        }
    }
    if total == 0 {
        return Err(MetricsError::AllUnmapped);
    }
    Ok(lead as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    ExactPermutation,
    TApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stars {
    None,
    /// p <= 0.1
    One,
    /// p <= 0.05
    Two,
}

impl Stars {
    pub fn from_p(p: f64) -> Self {
        if p <= 0.05 {
            Stars::Two
        } else if p <= 0.1 {
            Stars::One
        } else {
            Stars::None
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Stars::None => "",
            Stars::One => "*",
            Stars::Two => "**",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub rho: f64,
    /// One-sided, in the direction of the observed sign.
    pub p_value: f64,
    pub n: usize,
    pub method: PValueMethod,
    pub stars: Stars,
}

/// Average ranks (1-based), doubled so that tied ranks stay integral.
fn doubled_ranks(xs: &[f64]) -> Vec<i64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0i64; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // positions i..=j share rank (i+1 + j+1)/2
        let doubled = (i + j + 2) as i64;
        for &o in &order[i..=j] {
            ranks[o] = doubled;
        }
        i = j + 1;
    }
    ranks
}

fn has_ties(ranks: &[i64]) -> bool {
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).any(|w| w[0] == w[1])
}

fn rank_rho(rx: &[i64], ry: &[i64], tied: bool) -> f64 {
    let n = rx.len() as f64;
    if !tied {
        // doubled ranks: d = (rx - ry) / 2
        let d2: i64 = rx.iter().zip(ry).map(|(a, b)| (a - b) * (a - b)).sum();
        let sum_d2 = d2 as f64 / 4.0;
        return 1.0 - 6.0 * sum_d2 / (n * (n * n - 1.0));
    }
    let mean = |r: &[i64]| r.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mx, my) = (mean(rx), mean(ry));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in rx.iter().zip(ry) {
        let (da, db) = (a as f64 - mx, b as f64 - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Visits every permutation of `items` (Heap's algorithm).
fn for_each_permutation(items: &mut [i64], mut visit: impl FnMut(&[i64])) {
    let n = items.len();
    let mut c = vec![0usize; n];
    visit(items);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            visit(items);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Exact one-sided p-value by enumerating all permutations of the y ranks.
///
/// Rank means and variances do not change under permutation, so ordering by
/// rho equals ordering by the integer statistic `sum(rx * ry)`.
fn exact_p_value(rx: &[i64], ry: &[i64], positive: bool) -> f64 {
    let statistic = |perm: &[i64]| -> i64 { rx.iter().zip(perm).map(|(a, b)| a * b).sum() };
    let observed = statistic(ry);
    let mut perm = ry.to_vec();
    let (mut extreme, mut total) = (0u64, 0u64);
    for_each_permutation(&mut perm, |p| {
        total += 1;
        let t = statistic(p);
        if (positive && t >= observed) || (!positive && t <= observed) {
            extreme += 1;
        }
    });
    extreme as f64 / total as f64
}

fn t_p_value(rho: f64, n: usize) -> f64 {
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho.abs() * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    (1.0 - dist.cdf(t)).clamp(0.0, 1.0)
}

/// Spearman's rho with average ranks for ties.
///
/// The p-value is one-sided toward the observed sign: exact enumeration of
/// all `n!` rank permutations for `n <= 8`, Student's t approximation above.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult, MetricsError> {
    if xs.len() != ys.len() {
        return Err(MetricsError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(MetricsError::TooFewSamples(n));
    }
    let (rx, ry) = (doubled_ranks(xs), doubled_ranks(ys));
    if rx.iter().all(|&r| r == rx[0]) || ry.iter().all(|&r| r == ry[0]) {
        return Err(MetricsError::ConstantInput);
    }
    let tied = has_ties(&rx) || has_ties(&ry);
    let rho = rank_rho(&rx, &ry, tied);
    let (p_value, method) = if n <= EXACT_PERMUTATION_MAX_N {
        (exact_p_value(&rx, &ry, rho >= 0.0), PValueMethod::ExactPermutation)
    } else {
        (t_p_value(rho, n), PValueMethod::TApproximation)
    };
    Ok(CorrelationResult {
        rho,
        p_value,
        n,
        method,
        stars: Stars::from_p(p_value),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum RougeMetric {
    R1,
    R2,
    Rl,
}

impl RougeMetric {
    pub const ALL: [RougeMetric; 3] = [RougeMetric::R1, RougeMetric::R2, RougeMetric::Rl];

    pub fn pick(&self, scores: &RougeScores) -> f64 {
        match self {
            RougeMetric::R1 => scores.r1,
            RougeMetric::R2 => scores.r2,
            RougeMetric::Rl => scores.rl,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            RougeMetric::R1 => "r1",
            RougeMetric::R2 => "r2",
            RougeMetric::Rl => "rl",
        }
    }
}

/// Bias and quality summary of one model on one corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub model_name: String,
    pub wasserstein: f64,
    pub rouge: RougeScores,
    pub lead_bias_fraction: f64,
    pub unmapped_fraction: f64,
    pub skipped_short_articles: usize,
    /// Records whose summary for this model is empty.
    pub refusals: usize,
    /// Articles that contributed summary sentences.
    pub articles_evaluated: usize,
    pub gold_distribution: PositionalDistribution,
    pub model_distribution: PositionalDistribution,
}

/// Spearman correlation between distance and one ROUGE metric across models.
pub fn correlate_models(reports: &[BiasReport], metric: RougeMetric) -> Result<CorrelationResult, MetricsError> {
    if reports.len() < 3 {
        return Err(MetricsError::TooFewSamples(reports.len()));
    }
    let w: Vec<f64> = reports.iter().map(|r| r.wasserstein).collect();
    let m: Vec<f64> = reports.iter().map(|r| metric.pick(&r.rouge)).collect();
    spearman(&w, &m)
}
