//! Analysis results and their on-disk forms: one JSON document, three CSV
//! tables, and two SVG charts (segment distributions and per-model
//! ROUGE-1 / distance bars).
//!
//! Every output is a pure function of the bundle: reals are printed with a
//! fixed number of decimals and models keep the bundle's order (sorted by
//! name when produced by the analysis pipeline).

mod svg;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::biasmetrics::{BiasReport, CorrelationResult, RougeMetric};
use crate::posmap::{Aggregation, BinPositions, Phi, PositionalDistribution};

pub use svg::{render_bias_bars, render_distribution_chart};

pub const JSON_FILE: &str = "analysis.json";
pub const DISTRIBUTIONS_CSV: &str = "distributions.csv";
pub const METRICS_CSV: &str = "metrics.csv";
pub const CORRELATIONS_CSV: &str = "correlations.csv";
pub const DISTRIBUTION_SVG: &str = "distributions.svg";
pub const BIAS_BARS_SVG: &str = "bias_bars.svg";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("nothing to plot: {0}")]
    Empty(&'static str),
}

pub(crate) fn write_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Write {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShortArticlePolicy {
    #[default]
    Skip,
    Error,
}

/// Settings that produced a bundle, echoed into the outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub phi: Phi,
    pub top_n: usize,
    pub k_prime: usize,
    pub bin_positions: BinPositions,
    pub aggregation: Aggregation,
    pub short_article_policy: ShortArticlePolicy,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldSeries {
    pub distribution: PositionalDistribution,
    pub lead_bias_fraction: f64,
    pub unmapped_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisBundle {
    pub corpus_name: String,
    pub k: usize,
    pub config: ConfigEcho,
    pub articles_analyzed: usize,
    pub skipped_short_articles: usize,
    pub gold: GoldSeries,
    /// Sorted by model name.
    pub reports: Vec<BiasReport>,
    pub correlations: Vec<(RougeMetric, CorrelationResult)>,
    pub warnings: Vec<String>,
}

impl AnalysisBundle {
    /// Series names and masses in plotting order: gold first, then models.
    pub fn series(&self) -> Vec<(&str, &[f64])> {
        std::iter::once(("gold", self.gold.distribution.mass()))
            .chain(
                self.reports
                    .iter()
                    .map(|r| (r.model_name.as_str(), r.model_distribution.mass())),
            )
            .collect()
    }
}

/// Six-decimal rendering of every real number.
pub fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

struct Fixed6(f64);

impl Serialize for Fixed6 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(fmt6(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

fn fixed_vec(xs: &[f64]) -> Vec<Fixed6> {
    xs.iter().map(|&x| Fixed6(x)).collect()
}

#[derive(Serialize)]
struct JsonDistribution {
    mass: Vec<Fixed6>,
    support_positions: Vec<Fixed6>,
}

impl From<&PositionalDistribution> for JsonDistribution {
    fn from(d: &PositionalDistribution) -> Self {
        Self {
            mass: fixed_vec(d.mass()),
            support_positions: fixed_vec(d.support_positions()),
        }
    }
}

#[derive(Serialize)]
struct JsonRouge {
    r1: Fixed6,
    r2: Fixed6,
    rl: Fixed6,
}

#[derive(Serialize)]
struct JsonModel<'a> {
    model_name: &'a str,
    wasserstein: Fixed6,
    rouge: JsonRouge,
    lead_bias_fraction: Fixed6,
    unmapped_fraction: Fixed6,
    skipped_short_articles: usize,
    refusals: usize,
    articles_evaluated: usize,
    model_distribution: JsonDistribution,
}

#[derive(Serialize)]
struct JsonCorrelation {
    metric: RougeMetric,
    rho: Fixed6,
    p_value: Fixed6,
    n: usize,
    method: crate::biasmetrics::PValueMethod,
    stars: &'static str,
}

#[derive(Serialize)]
struct JsonBundle<'a> {
    corpus_name: &'a str,
    k: usize,
    config: &'a ConfigEcho,
    articles_analyzed: usize,
    skipped_short_articles: usize,
    gold_distribution: JsonDistribution,
    gold_lead_bias_fraction: Fixed6,
    gold_unmapped_fraction: Fixed6,
    models: Vec<JsonModel<'a>>,
    correlations: Vec<JsonCorrelation>,
    warnings: &'a [String],
}

impl<'a> From<&'a AnalysisBundle> for JsonBundle<'a> {
    fn from(b: &'a AnalysisBundle) -> Self {
        Self {
            corpus_name: &b.corpus_name,
            k: b.k,
            config: &b.config,
            articles_analyzed: b.articles_analyzed,
            skipped_short_articles: b.skipped_short_articles,
            gold_distribution: (&b.gold.distribution).into(),
            gold_lead_bias_fraction: Fixed6(b.gold.lead_bias_fraction),
            gold_unmapped_fraction: Fixed6(b.gold.unmapped_fraction),
            models: b
                .reports
                .iter()
                .map(|r| JsonModel {
                    model_name: &r.model_name,
                    wasserstein: Fixed6(r.wasserstein),
                    rouge: JsonRouge {
                        r1: Fixed6(r.rouge.r1),
                        r2: Fixed6(r.rouge.r2),
                        rl: Fixed6(r.rouge.rl),
                    },
                    lead_bias_fraction: Fixed6(r.lead_bias_fraction),
                    unmapped_fraction: Fixed6(r.unmapped_fraction),
                    skipped_short_articles: r.skipped_short_articles,
                    refusals: r.refusals,
                    articles_evaluated: r.articles_evaluated,
                    model_distribution: (&r.model_distribution).into(),
                })
                .collect(),
            correlations: b
                .correlations
                .iter()
                .map(|(metric, c)| JsonCorrelation {
                    metric: *metric,
                    rho: Fixed6(c.rho),
                    p_value: Fixed6(c.p_value),
                    n: c.n,
                    method: c.method,
                    stars: c.stars.as_str(),
                })
                .collect(),
            warnings: &b.warnings,
        }
    }
}

pub fn bundle_to_json(bundle: &AnalysisBundle) -> String {
    let mut text = serde_json::to_string_pretty(&JsonBundle::from(bundle)).expect("bundle serializes");
    text.push('\n');
    text
}

pub fn emit_json(bundle: &AnalysisBundle, path: &Path) -> Result<(), ReportError> {
    fs::write(path, bundle_to_json(bundle)).map_err(write_err(path))
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), ReportError> {
    let file = File::create(path).map_err(write_err(path))?;
    let mut wtr = csv::Writer::from_writer(BufWriter::new(file));
    let to_io = |e: csv::Error| write_err(path)(e.into());
    wtr.write_record(header).map_err(to_io)?;
    for row in rows {
        wtr.write_record(row).map_err(to_io)?;
    }
    wtr.flush().map_err(write_err(path))
}

/// Writes distributions.csv, metrics.csv and correlations.csv into `dir`.
pub fn emit_csv(bundle: &AnalysisBundle, dir: &Path) -> Result<(), ReportError> {
    fs::create_dir_all(dir).map_err(write_err(dir))?;

    let mut header = vec!["series".to_string()];
    header.extend((1..=bundle.k).map(|j| format!("segment_{j}")));
    let rows: Vec<Vec<String>> = bundle
        .series()
        .into_iter()
        .map(|(name, mass)| {
            std::iter::once(name.to_string())
                .chain(mass.iter().map(|&m| fmt6(m)))
                .collect()
        })
        .collect();
    write_csv(&dir.join(DISTRIBUTIONS_CSV), &header, &rows)?;

    let header: Vec<String> = ["model", "wasserstein", "r1", "r2", "rl", "lead_bias_fraction", "unmapped_fraction"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = bundle
        .reports
        .iter()
        .map(|r| {
            vec![
                r.model_name.clone(),
                fmt6(r.wasserstein),
                fmt6(r.rouge.r1),
                fmt6(r.rouge.r2),
                fmt6(r.rouge.rl),
                fmt6(r.lead_bias_fraction),
                fmt6(r.unmapped_fraction),
            ]
        })
        .collect();
    write_csv(&dir.join(METRICS_CSV), &header, &rows)?;

    let header: Vec<String> = ["metric", "rho", "p_value", "stars"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = bundle
        .correlations
        .iter()
        .map(|(m, c)| vec![m.as_str().to_string(), fmt6(c.rho), fmt6(c.p_value), c.stars.as_str().to_string()])
        .collect();
    write_csv(&dir.join(CORRELATIONS_CSV), &header, &rows)
}

/// All outputs into `dir`. The bar chart is left out when there are no models.
pub fn emit_all(bundle: &AnalysisBundle, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir).map_err(write_err(dir))?;
    let mut written = vec![dir.join(JSON_FILE)];
    emit_json(bundle, &written[0])?;
    emit_csv(bundle, dir)?;
    written.extend([DISTRIBUTIONS_CSV, METRICS_CSV, CORRELATIONS_CSV].map(|f| dir.join(f)));
    let chart = dir.join(DISTRIBUTION_SVG);
    render_distribution_chart(bundle, &chart)?;
    written.push(chart);
    if !bundle.reports.is_empty() {
        let bars = dir.join(BIAS_BARS_SVG);
        render_bias_bars(bundle, &bars)?;
        written.push(bars);
    }
    Ok(written)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    let mut f = File::create(path).map_err(write_err(path))?;
    f.write_all(text.as_bytes()).map_err(write_err(path))
}
