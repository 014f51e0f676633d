//! End-to-end analysis of a loaded corpus: split, map gold and model
//! summaries, accumulate segment distributions, and compute distance,
//! ROUGE, lead bias and cross-model correlations.
//!
//! Articles are processed independently on a worker pool; the reduction
//! runs afterwards in record order, so results do not depend on the worker
//! count.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::biasmetrics::{correlate_models, lead_bias_fraction, wasserstein1, BiasReport, MetricsError, RougeMetric};
use crate::corpus::CorpusRecord;
use crate::posmap::{
    segment_article, Aggregation, ArticleIndex, BinPositions, DistributionAccumulator, Phi, PosmapError,
    SegmentCounts, SentenceMapping,
};
use crate::report::{AnalysisBundle, ConfigEcho, GoldSeries, ShortArticlePolicy};
use crate::simmetrics::RougeScores;
use crate::textproc::{tokenize, SentenceSplitter};

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model {0:?} does not appear in the corpus")]
    UnknownModel(String),
    #[error("article {id:?} has {n} sentences, fewer than K = {k}")]
    ShortArticle { id: String, n: usize, k: usize },
    #[error("all articles skipped: every article has fewer than K = {k} sentences")]
    AllSkipped { k: usize },
    #[error("{series}: no summary sentence could be mapped to its article")]
    AllUnmapped { series: String },
    #[error("{series}: {source}")]
    Metrics {
        series: String,
        #[source]
        source: MetricsError,
    },
    #[error("record {id:?}: {source}")]
    Record {
        id: String,
        #[source]
        source: PosmapError,
    },
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub k: usize,
    pub phi: Phi,
    pub top_n: usize,
    pub k_prime: usize,
    pub short_article_policy: ShortArticlePolicy,
    pub bin_positions: BinPositions,
    pub aggregation: Aggregation,
    /// `None` analyzes every model found in the corpus; an empty list is gold-only.
    pub models: Option<Vec<String>>,
    pub correlation_metrics: Vec<RougeMetric>,
    pub workers: usize,
    pub seed: u64,
    pub splitter: SentenceSplitter,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            k: 10,
            phi: Phi::TfidfCosine,
            top_n: 1,
            k_prime: 3,
            short_article_policy: ShortArticlePolicy::Skip,
            bin_positions: BinPositions::Normalized,
            aggregation: Aggregation::Pooled,
            models: None,
            correlation_metrics: RougeMetric::ALL.to_vec(),
            workers: 1,
            seed: 0,
            splitter: SentenceSplitter::default(),
        }
    }
}

impl AnalyzeOptions {
    pub fn validate(&self) -> Result<(), AnalyzeError> {
        if self.k == 0 {
            return Err(AnalyzeError::Config("k must be at least 1".into()));
        }
        if !(1..=3).contains(&self.top_n) {
            return Err(AnalyzeError::Config(format!("top_n must be 1, 2 or 3, got {}", self.top_n)));
        }
        if self.k_prime == 0 {
            return Err(AnalyzeError::Config("k_prime must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(AnalyzeError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }
}

struct Mapped {
    mapping: SentenceMapping,
    counts: SegmentCounts,
}

enum ModelOutcome {
    Absent,
    Refused,
    Summary { mapped: Option<Mapped>, rouge: RougeScores },
}

struct ArticleOutcome {
    short: Option<usize>,
    gold: Option<Mapped>,
    models: Vec<ModelOutcome>,
}

fn process_article(record: &CorpusRecord, models: &[String], opts: &AnalyzeOptions) -> Result<ArticleOutcome, PosmapError> {
    let article = opts.splitter.split(&record.article);
    let gold_tokens = tokenize(&record.gold_summary);
    let plan = if article.len() >= opts.k {
        Some(segment_article(article.len(), opts.k)?)
    } else {
        None
    };
    let index = match plan {
        Some(_) => Some(ArticleIndex::new(&article, opts.phi)?),
        None => None,
    };
    let map = |text: &str| -> Result<Option<Mapped>, PosmapError> {
        let (Some(index), Some(plan)) = (&index, &plan) else {
            return Ok(None);
        };
        let mapping = index.map(&opts.splitter.split(text), opts.top_n)?;
        let counts = SegmentCounts::of_article(&mapping, plan);
        Ok(Some(Mapped { mapping, counts }))
    };

    let gold = map(&record.gold_summary)?;
    let mut outcomes = Vec::with_capacity(models.len());
    for model in models {
        let outcome = match record.model_summaries.get(model) {
            None => ModelOutcome::Absent,
            Some(text) if text.trim().is_empty() => ModelOutcome::Refused,
            Some(text) => ModelOutcome::Summary {
                mapped: map(text)?,
                rouge: RougeScores::of_pair(&tokenize(text), &gold_tokens),
            },
        };
        outcomes.push(outcome);
    }
    Ok(ArticleOutcome {
        short: plan.is_none().then_some(article.len()),
        gold,
        models: outcomes,
    })
}

fn selected_models(records: &[CorpusRecord], wanted: &Option<Vec<String>>) -> Result<Vec<String>, AnalyzeError> {
    let present: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.model_summaries.keys().map(String::as_str))
        .collect();
    match wanted {
        None => Ok(present.into_iter().map(str::to_string).collect()),
        Some(list) => {
            let mut chosen = BTreeSet::new();
            for name in list {
                if !present.contains(name.as_str()) {
                    return Err(AnalyzeError::UnknownModel(name.clone()));
                }
                chosen.insert(name.clone());
            }
            Ok(chosen.into_iter().collect())
        }
    }
}

struct SeriesAcc {
    dist: DistributionAccumulator,
    mappings: Vec<SentenceMapping>,
    articles: usize,
}

impl SeriesAcc {
    fn new(opts: &AnalyzeOptions) -> Self {
        Self {
            dist: DistributionAccumulator::new(opts.k, opts.aggregation),
            mappings: Vec::new(),
            articles: 0,
        }
    }

    fn add(&mut self, mapped: Mapped) {
        self.dist.add(&mapped.counts);
        self.mappings.push(mapped.mapping);
        self.articles += 1;
    }

    fn finish(&self, series: &str, opts: &AnalyzeOptions) -> Result<(crate::posmap::PositionalDistribution, f64, f64), AnalyzeError> {
        let (dist, unmapped) = self.dist.finish(opts.bin_positions).map_err(|_| AnalyzeError::AllUnmapped {
            series: series.to_string(),
        })?;
        let lead = lead_bias_fraction(&self.mappings, opts.k_prime).map_err(|source| AnalyzeError::Metrics {
            series: series.to_string(),
            source,
        })?;
        Ok((dist, unmapped, lead))
    }
}

/// Runs the full analysis. Models are reported in name order.
pub fn analyze(records: &[CorpusRecord], corpus_name: &str, opts: &AnalyzeOptions) -> Result<AnalysisBundle, AnalyzeError> {
    opts.validate()?;
    let models = selected_models(records, &opts.models)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| AnalyzeError::Pool(e.to_string()))?;
    let outcomes: Vec<Result<ArticleOutcome, PosmapError>> =
        pool.install(|| records.par_iter().map(|r| process_article(r, &models, opts)).collect());

    let mut gold = SeriesAcc::new(opts);
    let mut per_model: Vec<SeriesAcc> = models.iter().map(|_| SeriesAcc::new(opts)).collect();
    let mut rouge: Vec<Vec<RougeScores>> = vec![Vec::new(); models.len()];
    let mut refusals = vec![0usize; models.len()];
    let mut absent = vec![0usize; models.len()];
    let mut skipped = 0usize;

    for (record, outcome) in records.iter().zip(outcomes) {
        let outcome = outcome.map_err(|source| AnalyzeError::Record {
            id: record.id.clone(),
            source,
        })?;
        if let Some(n) = outcome.short {
            if opts.short_article_policy == ShortArticlePolicy::Error {
                return Err(AnalyzeError::ShortArticle {
                    id: record.id.clone(),
                    n,
                    k: opts.k,
                });
            }
            skipped += 1;
        }
        if let Some(mapped) = outcome.gold {
            gold.add(mapped);
        }
        for (m, model_outcome) in outcome.models.into_iter().enumerate() {
            match model_outcome {
                ModelOutcome::Absent => absent[m] += 1,
                ModelOutcome::Refused => refusals[m] += 1,
                ModelOutcome::Summary { mapped, rouge: scores } => {
                    rouge[m].push(scores);
                    if let Some(mapped) = mapped {
                        per_model[m].add(mapped);
                    }
                }
            }
        }
    }
    if skipped == records.len() {
        return Err(AnalyzeError::AllSkipped { k: opts.k });
    }

    let (gold_dist, gold_unmapped, gold_lead) = gold.finish("gold", opts)?;
    let mut warnings = Vec::new();
    let mut reports = Vec::with_capacity(models.len());
    for (m, name) in models.iter().enumerate() {
        let (model_dist, unmapped_fraction, lead) = per_model[m].finish(name, opts)?;
        let wasserstein = wasserstein1(&gold_dist, &model_dist).map_err(|source| AnalyzeError::Metrics {
            series: name.clone(),
            source,
        })?;
        let rouge_mean = RougeScores::mean(&rouge[m]).map_err(|_| AnalyzeError::AllUnmapped { series: name.clone() })?;
        if absent[m] > 0 {
            warnings.push(format!("model {name}: no summary for {} records", absent[m]));
        }
        reports.push(BiasReport {
            model_name: name.clone(),
            wasserstein,
            rouge: rouge_mean,
            lead_bias_fraction: lead,
            unmapped_fraction,
            skipped_short_articles: skipped,
            refusals: refusals[m],
            articles_evaluated: per_model[m].articles,
            gold_distribution: gold_dist.clone(),
            model_distribution: model_dist,
        });
    }

    let mut correlations = Vec::new();
    if reports.len() >= 3 {
        for &metric in &opts.correlation_metrics {
            match correlate_models(&reports, metric) {
                Ok(c) => correlations.push((metric, c)),
                Err(e) => warnings.push(format!("correlation with {} omitted: {e}", metric.as_str())),
            }
        }
    }

    Ok(AnalysisBundle {
        corpus_name: corpus_name.to_string(),
        k: opts.k,
        config: ConfigEcho {
            phi: opts.phi,
            top_n: opts.top_n,
            k_prime: opts.k_prime,
            bin_positions: opts.bin_positions,
            aggregation: opts.aggregation,
            short_article_policy: opts.short_article_policy,
            seed: opts.seed,
        },
        articles_analyzed: records.len() - skipped,
        skipped_short_articles: skipped,
        gold: GoldSeries {
            distribution: gold_dist,
            lead_bias_fraction: gold_lead,
            unmapped_fraction: gold_unmapped,
        },
        reports,
        correlations,
        warnings,
    })
}
