//! Article segmentation, summary-to-article sentence mapping, and positional
//! distributions.
//!
//! An article of `N` sentences is cut into `K` contiguous segments whose
//! lengths differ by at most one, longer segments first. Each summary
//! sentence is mapped to its most similar article sentence(s), and the
//! segments of those sentences are counted into a length-`K` histogram.

use serde::Serialize;
use thiserror::Error;

use crate::simmetrics::{build_tfidf_space, rouge_n, SparseVector, TfidfSpace};
use crate::textproc::{tokenize, SentenceList, TokenList};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PosmapError {
    #[error("segment count must be at least 1")]
    ZeroSegments,
    #[error("segment count {k} exceeds article length of {n} sentences")]
    TooManySegments { n: usize, k: usize },
    #[error("article has no sentences")]
    EmptyArticle,
    #[error("top-n must be at least 1")]
    ZeroTopN,
    #[error("segmentation plan has {plan} segments, expected {expected}")]
    SegmentCountMismatch { plan: usize, expected: usize },
    #[error("no summary sentence could be mapped; a distribution cannot be formed")]
    AllUnmapped,
}

/// The `K` index intervals of one article.
///
/// Segment `j` (1-based) covers the inclusive 0-based sentence range
/// `[(j-1)c + min(j-1, d), jc + min(j, d) - 1]` with `c = N div K` and
/// `d = N mod K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationPlan {
    k: usize,
    n: usize,
    base_len: usize,
    remainder: usize,
    intervals: Vec<(usize, usize)>,
}

impl SegmentationPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base_len(&self) -> usize {
        self.base_len
    }

    pub fn remainder(&self) -> usize {
        self.remainder
    }

    /// Inclusive 0-based `(first, last)` sentence indices, one per segment.
    pub fn intervals(&self) -> &[(usize, usize)] {
        &self.intervals
    }

    pub fn interval_len(&self, segment: usize) -> usize {
        let (lo, hi) = self.intervals[segment - 1];
        hi - lo + 1
    }

    /// 1-based segment containing a 0-based sentence index.
    pub fn segment_of(&self, index: usize) -> usize {
        assert!(index < self.n, "sentence index {index} out of range for {} sentences", self.n);
        let long = self.base_len + 1;
        let long_span = self.remainder * long;
        if index < long_span {
            index / long + 1
        } else {
            self.remainder + (index - long_span) / self.base_len + 1
        }
    }
}

pub fn segment_article(n: usize, k: usize) -> Result<SegmentationPlan, PosmapError> {
    if k == 0 {
        return Err(PosmapError::ZeroSegments);
    }
    if k > n {
        return Err(PosmapError::TooManySegments { n, k });
    }
    let c = n / k;
    let d = n % k;
    let intervals = (1..=k)
        .map(|j| ((j - 1) * c + (j - 1).min(d), j * c + j.min(d) - 1))
        .collect();
    Ok(SegmentationPlan {
        k,
        n,
        base_len: c,
        remainder: d,
        intervals,
    })
}

/// Similarity used to map a summary sentence back to the article.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phi {
    #[serde(rename = "tfidf")]
    TfidfCosine,
    Rouge1,
}

impl Phi {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phi::TfidfCosine => "tfidf",
            Phi::Rouge1 => "rouge1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MappingConfig {
    pub phi: Phi,
    pub top_n: usize,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            phi: Phi::TfidfCosine,
            top_n: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    /// 0-based article sentence index.
    pub article_index: usize,
    pub score: f64,
}

/// Matches of one summary sentence, best first. Empty means unmapped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MappedSentence {
    pub matches: Vec<Match>,
}

impl MappedSentence {
    pub fn is_unmapped(&self) -> bool {
        self.matches.is_empty()
    }

    /// 1-based segments of the matched article sentences.
    pub fn segments<'a>(&'a self, plan: &'a SegmentationPlan) -> impl Iterator<Item = usize> + 'a {
        self.matches.iter().map(|m| plan.segment_of(m.article_index))
    }
}

/// Per summary sentence mapping for one (article, summary) pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SentenceMapping {
    pub sentences: Vec<MappedSentence>,
}

impl SentenceMapping {
    pub fn total_sentences(&self) -> usize {
        self.sentences.len()
    }

    pub fn unmapped_sentences(&self) -> usize {
        self.sentences.iter().filter(|s| s.is_unmapped()).count()
    }

    /// Every matched article index, each top-n match counted once.
    pub fn contributions(&self) -> impl Iterator<Item = usize> + '_ {
        self.sentences
            .iter()
            .flat_map(|s| s.matches.iter().map(|m| m.article_index))
    }
}

enum Scorer {
    Tfidf {
        space: TfidfSpace,
        vectors: Vec<SparseVector>,
    },
    Rouge1,
}

/// Pre-tokenized article, reusable for mapping several summaries.
///
/// For TF-IDF the idf statistics come from this article's sentences only.
pub struct ArticleIndex {
    tokens: Vec<TokenList>,
    scorer: Scorer,
}

impl ArticleIndex {
    pub fn new(article: &SentenceList, phi: Phi) -> Result<Self, PosmapError> {
        if article.is_empty() {
            return Err(PosmapError::EmptyArticle);
        }
        let tokens: Vec<TokenList> = article.iter().map(|s| tokenize(s)).collect();
        let scorer = match phi {
            Phi::TfidfCosine => {
                let space = build_tfidf_space(&tokens).map_err(|_| PosmapError::EmptyArticle)?;
                let vectors = tokens.iter().map(|t| space.embed(t)).collect();
                Scorer::Tfidf { space, vectors }
            }
            Phi::Rouge1 => Scorer::Rouge1,
        };
        Ok(Self { tokens, scorer })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Similarity of one summary sentence to every article sentence.
    pub fn scores(&self, summary_sentence: &str) -> Vec<f64> {
        let query = tokenize(summary_sentence);
        match &self.scorer {
            Scorer::Tfidf { space, vectors } => {
                let q = space.embed(&query);
                vectors.iter().map(|v| q.cosine(v)).collect()
            }
            Scorer::Rouge1 => self.tokens.iter().map(|t| rouge_n(&query, t, 1)).collect(),
        }
    }

    pub fn map(&self, summary: &SentenceList, top_n: usize) -> Result<SentenceMapping, PosmapError> {
        if top_n == 0 {
            return Err(PosmapError::ZeroTopN);
        }
        let sentences = summary
            .iter()
            .map(|s| select_top(&self.scores(s), top_n))
            .collect();
        Ok(SentenceMapping { sentences })
    }
}

/// Highest positive scores first, ties to the lower index.
fn select_top(scores: &[f64], top_n: usize) -> MappedSentence {
    let mut ranked: Vec<Match> = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 0.0)
        .map(|(article_index, &score)| Match { article_index, score })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.article_index.cmp(&b.article_index))
    });
    ranked.truncate(top_n);
    MappedSentence { matches: ranked }
}

pub fn map_summary(
    summary_sentences: &SentenceList,
    article_sentences: &SentenceList,
    config: &MappingConfig,
) -> Result<SentenceMapping, PosmapError> {
    ArticleIndex::new(article_sentences, config.phi)?.map(summary_sentences, config.top_n)
}

/// Support of a positional distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BinPositions {
    /// Segment `j` sits at `j / K`.
    #[default]
    Normalized,
    /// Segment `j` sits at `j`.
    Index,
}

impl BinPositions {
    pub fn positions(&self, k: usize) -> Vec<f64> {
        (1..=k)
            .map(|j| match self {
                BinPositions::Normalized => j as f64 / k as f64,
                BinPositions::Index => j as f64,
            })
            .collect()
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BinPositions::Normalized => "normalized",
            BinPositions::Index => "index",
        }
    }
}

/// A probability vector over the `K` segments.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionalDistribution {
    mass: Vec<f64>,
    support_positions: Vec<f64>,
}

impl PositionalDistribution {
    /// Normalizes non-negative weights. Returns `None` when they sum to zero.
    pub fn from_weights(weights: &[f64], bins: BinPositions) -> Option<Self> {
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return None;
        }
        Some(Self {
            mass: weights.iter().map(|w| w / total).collect(),
            support_positions: bins.positions(weights.len()),
        })
    }

    pub fn from_counts(counts: &[u64], bins: BinPositions) -> Option<Self> {
        let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        Self::from_weights(&weights, bins)
    }

    pub fn k(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn support_positions(&self) -> &[f64] {
        &self.support_positions
    }
}

/// How per-article histograms combine into one corpus distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Sum raw segment counts over all articles, normalize once.
    #[default]
    Pooled,
    /// Normalize each article, then average over articles with a mapped sentence.
    PerArticle,
}

impl Aggregation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Aggregation::Pooled => "pooled",
            Aggregation::PerArticle => "per_article",
        }
    }
}

/// Segment hit counts for one article or a merged set of articles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentCounts {
    pub counts: Vec<u64>,
    pub total_sentences: u64,
    pub unmapped_sentences: u64,
}

impl SegmentCounts {
    pub fn new(k: usize) -> Self {
        Self {
            counts: vec![0; k],
            total_sentences: 0,
            unmapped_sentences: 0,
        }
    }

    pub fn of_article(mapping: &SentenceMapping, plan: &SegmentationPlan) -> Self {
        let mut counts = Self::new(plan.k());
        for sentence in &mapping.sentences {
            counts.total_sentences += 1;
            if sentence.is_unmapped() {
                counts.unmapped_sentences += 1;
            }
            for seg in sentence.segments(plan) {
                counts.counts[seg - 1] += 1;
            }
        }
        counts
    }

    pub fn merge(&mut self, other: &SegmentCounts) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_sentences += other.total_sentences;
        self.unmapped_sentences += other.unmapped_sentences;
    }

    pub fn contributions(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn unmapped_fraction(&self) -> f64 {
        if self.total_sentences == 0 {
            0.0
        } else {
            self.unmapped_sentences as f64 / self.total_sentences as f64
        }
    }
}

/// Streaming reducer over articles, for either aggregation mode.
#[derive(Debug, Clone)]
pub struct DistributionAccumulator {
    aggregation: Aggregation,
    pooled: SegmentCounts,
    article_mass_sum: Vec<f64>,
    articles_with_mass: u64,
}

impl DistributionAccumulator {
    pub fn new(k: usize, aggregation: Aggregation) -> Self {
        Self {
            aggregation,
            pooled: SegmentCounts::new(k),
            article_mass_sum: vec![0.0; k],
            articles_with_mass: 0,
        }
    }

    pub fn add(&mut self, article: &SegmentCounts) {
        self.pooled.merge(article);
        let hits = article.contributions();
        if hits > 0 {
            for (acc, &c) in self.article_mass_sum.iter_mut().zip(&article.counts) {
                *acc += c as f64 / hits as f64;
            }
            self.articles_with_mass += 1;
        }
    }

    pub fn counts(&self) -> &SegmentCounts {
        &self.pooled
    }

    pub fn finish(&self, bins: BinPositions) -> Result<(PositionalDistribution, f64), PosmapError> {
        let dist = match self.aggregation {
            Aggregation::Pooled => PositionalDistribution::from_counts(&self.pooled.counts, bins),
            Aggregation::PerArticle => {
                PositionalDistribution::from_weights(&self.article_mass_sum, bins)
            }
        }
        .ok_or(PosmapError::AllUnmapped)?;
        Ok((dist, self.pooled.unmapped_fraction()))
    }
}

/// Pooled distribution over normalized positions plus the unmapped fraction.
pub fn accumulate_distribution(
    mappings: &[(SentenceMapping, SegmentationPlan)],
    k: usize,
) -> Result<(PositionalDistribution, f64), PosmapError> {
    let mut acc = DistributionAccumulator::new(k, Aggregation::Pooled);
    for (mapping, plan) in mappings {
        if plan.k() != k {
            return Err(PosmapError::SegmentCountMismatch {
                plan: plan.k(),
                expected: k,
            });
        }
        acc.add(&SegmentCounts::of_article(mapping, plan));
    }
    acc.finish(BinPositions::Normalized)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sl(s: &[&str]) -> SentenceList {
        SentenceList::new(s.iter().copied())
    }

    fn mapping_of(indices: &[&[usize]]) -> SentenceMapping {
        SentenceMapping {
            sentences: indices
                .iter()
                .map(|ix| MappedSentence {
                    matches: ix
                        .iter()
                        .map(|&article_index| Match { article_index, score: 1.0 })
                        .collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn segmentation_examples() {
        let p = segment_article(10, 3).unwrap();
        assert_eq!(p.intervals(), [(0, 3), (4, 6), (7, 9)]);
        assert_eq!((p.base_len(), p.remainder()), (3, 1));

        let p = segment_article(7, 3).unwrap();
        assert_eq!(p.intervals(), [(0, 2), (3, 4), (5, 6)]);

        let p = segment_article(5, 5).unwrap();
        assert!(p.intervals().iter().enumerate().all(|(j, &iv)| iv == (j, j)));

        assert_eq!(
            segment_article(3, 4).unwrap_err(),
            PosmapError::TooManySegments { n: 3, k: 4 }
        );
        assert_eq!(segment_article(3, 0).unwrap_err(), PosmapError::ZeroSegments);
    }

    #[test]
    fn segment_of_agrees_with_intervals() {
        for n in 1..60 {
            for k in 1..=n {
                let p = segment_article(n, k).unwrap();
                for (j, &(lo, hi)) in p.intervals().iter().enumerate() {
                    for i in lo..=hi {
                        assert_eq!(p.segment_of(i), j + 1, "n={n} k={k} i={i}");
                    }
                }
            }
        }
    }

    #[test]
    fn identity_match() {
        let article = sl(&["Cats purr loudly.", "Dogs bark at night.", "Birds sing songs."]);
        for phi in [Phi::TfidfCosine, Phi::Rouge1] {
            let m = map_summary(&sl(&["Dogs bark at night."]), &article, &MappingConfig { phi, top_n: 1 })
                .unwrap();
            let best = m.sentences[0].matches[0];
            assert_eq!(best.article_index, 1);
            assert!((best.score - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_go_to_the_earlier_sentence() {
        // "alpha beta" scores identically against both article sentences.
        let article = sl(&["Alpha gamma.", "Beta delta.", "Alpha gamma."]);
        for phi in [Phi::TfidfCosine, Phi::Rouge1] {
            let m = map_summary(&sl(&["Alpha gamma."]), &article, &MappingConfig { phi, top_n: 1 })
                .unwrap();
            assert_eq!(m.sentences[0].matches[0].article_index, 0);

            let m = map_summary(&sl(&["Alpha delta."]), &sl(&["Beta delta.", "Alpha beta."]),
                &MappingConfig { phi, top_n: 2 }).unwrap();
            let idx: Vec<usize> = m.sentences[0].matches.iter().map(|x| x.article_index).collect();
            assert_eq!(idx, vec![0, 1]);
            assert_eq!(m.sentences[0].matches[0].score, m.sentences[0].matches[1].score);
        }
    }

    #[test]
    fn zero_score_is_unmapped_and_top_n_is_partial() {
        let article = sl(&["One two.", "Three four.", "Five six."]);
        let cfg = MappingConfig { phi: Phi::TfidfCosine, top_n: 3 };
        let m = map_summary(&sl(&["Seven eight.", "One three."]), &article, &cfg).unwrap();
        assert!(m.sentences[0].is_unmapped());
        assert_eq!(m.sentences[1].matches.len(), 2);
        assert_eq!(m.unmapped_sentences(), 1);
        assert_eq!(
            map_summary(&article, &SentenceList::default(), &cfg).unwrap_err(),
            PosmapError::EmptyArticle
        );
        assert_eq!(
            map_summary(&article, &article, &MappingConfig { top_n: 0, ..cfg }).unwrap_err(),
            PosmapError::ZeroTopN
        );
    }

    #[test]
    fn accumulate_examples() {
        let plan = segment_article(10, 10).unwrap();
        let (d, u) = accumulate_distribution(&[(mapping_of(&[&[0], &[0]]), plan.clone())], 10).unwrap();
        assert_eq!(d.mass()[0], 1.0);
        assert!(d.mass()[1..].iter().all(|&m| m == 0.0));
        assert_eq!(u, 0.0);

        let plan2 = segment_article(4, 2).unwrap();
        let items = vec![
            (mapping_of(&[&[0], &[1]]), plan2.clone()),
            (mapping_of(&[&[3], &[]]), plan2.clone()),
        ];
        let (d, u) = accumulate_distribution(&items, 2).unwrap();
        assert!((d.mass()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.mass()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(u, 0.25);
        assert_eq!(d.support_positions(), [0.5, 1.0]);

        assert_eq!(
            accumulate_distribution(&[(mapping_of(&[&[]]), plan2.clone())], 2).unwrap_err(),
            PosmapError::AllUnmapped
        );
        assert_eq!(
            accumulate_distribution(&[(mapping_of(&[&[0]]), plan2)], 3).unwrap_err(),
            PosmapError::SegmentCountMismatch { plan: 2, expected: 3 }
        );
    }

    #[test]
    fn per_article_aggregation_averages_articles() {
        let plan = segment_article(2, 2).unwrap();
        let mut acc = DistributionAccumulator::new(2, Aggregation::PerArticle);
        acc.add(&SegmentCounts::of_article(&mapping_of(&[&[0], &[0], &[0]]), &plan));
        acc.add(&SegmentCounts::of_article(&mapping_of(&[&[1]]), &plan));
        let (d, _) = acc.finish(BinPositions::Index).unwrap();
        assert_eq!(d.mass(), [0.5, 0.5]);
        assert_eq!(d.support_positions(), [1.0, 2.0]);
    }

    proptest! {
        #[test]
        fn verbatim_article_recovers_interval_lengths(n in 1usize..40, kseed in 0usize..40) {
            let k = kseed % n + 1;
            let sentences: Vec<String> =
                (0..n).map(|i| format!("Word{i} token{i} extra{i}.")).collect();
            let article = SentenceList::new(&sentences);
            let plan = segment_article(n, k).unwrap();
            for phi in [Phi::TfidfCosine, Phi::Rouge1] {
                let m = map_summary(&article, &article, &MappingConfig { phi, top_n: 1 }).unwrap();
                let (d, u) = accumulate_distribution(&[(m, plan.clone())], k).unwrap();
                prop_assert_eq!(u, 0.0);
                for j in 1..=k {
                    let expected = plan.interval_len(j) as f64 / n as f64;
                    prop_assert!((d.mass()[j - 1] - expected).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn accumulation_is_order_independent(
            hits in proptest::collection::vec(proptest::collection::vec(0usize..12, 0..5), 1..8),
            seed in any::<u64>()
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let plan = segment_article(12, 4).unwrap();
            let mut items: Vec<(SentenceMapping, SegmentationPlan)> = hits
                .iter()
                .map(|h| {
                    let per: Vec<&[usize]> = h.iter().map(std::slice::from_ref).collect();
                    (mapping_of(&per), plan.clone())
                })
                .collect();
            let total: usize = hits.iter().map(Vec::len).sum();
            prop_assume!(total > 0);
            let a = accumulate_distribution(&items, 4).unwrap();
            items.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = accumulate_distribution(&items, 4).unwrap();
            prop_assert_eq!(&a, &b);
            let sum: f64 = b.0.mass().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn top_n_contribution_count(words in proptest::collection::vec("[a-f]{1,2}( [a-f]{1,2}){0,3}", 2..8), top_n in 1usize..4) {
            let article = SentenceList::new(words.iter().map(|w| format!("{w}.")));
            prop_assume!(!article.is_empty());
            let summary = SentenceList::new(["a b c.", "d e.", "zz."]);
            let idx = ArticleIndex::new(&article, Phi::Rouge1).unwrap();
            let m = idx.map(&summary, top_n).unwrap();
            for (s, text) in m.sentences.iter().zip(summary.iter()) {
                let positive = idx.scores(text).iter().filter(|&&x| x > 0.0).count();
                prop_assert_eq!(s.matches.len(), positive.min(top_n));
            }
        }
    }
}
