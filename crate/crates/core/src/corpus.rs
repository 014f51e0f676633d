//! Corpus records, jsonl/csv storage and sentence statistics.
//!
//! jsonl: one object per line with keys `id`, `article`, `gold_summary`,
//! `model_summaries` (object, model name to summary text).
//!
//! csv: header `id,article,gold_summary,model:<name>...` with model columns
//! in lexicographic order. An empty model cell loads as an empty summary,
//! i.e. a refusal.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textproc::SentenceSplitter;

const MODEL_COLUMN_PREFIX: &str = "model:";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("{path}: corpus contains no records")]
    Empty { path: PathBuf },
    #[error("record {id:?}: {message}")]
    InvalidRecord { id: String, message: String },
    #[error("model {model:?} missing for records: {}", ids.join(", "))]
    MissingModel { model: String, ids: Vec<String> },
    #[error("unknown corpus format {0:?} (expected jsonl or csv)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// `.csv` means csv, anything else jsonl.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub id: String,
    pub article: String,
    pub gold_summary: String,
    #[serde(default)]
    pub model_summaries: BTreeMap<String, String>,
}

impl CorpusRecord {
    pub fn new(id: impl Into<String>, article: impl Into<String>, gold_summary: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            article: article.into(),
            gold_summary: gold_summary.into(),
            model_summaries: BTreeMap::new(),
        }
    }

    pub fn with_model(mut self, model: impl Into<String>, summary: impl Into<String>) -> Self {
        self.model_summaries.insert(model.into(), summary.into());
        self
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let invalid = |message: &str| CorpusError::InvalidRecord {
            id: self.id.clone(),
            message: message.to_string(),
        };
        if self.id.is_empty() {
            return Err(invalid("id is empty"));
        }
        if self.article.trim().is_empty() {
            return Err(invalid("article is empty"));
        }
        if self.gold_summary.trim().is_empty() {
            return Err(invalid("gold_summary is empty"));
        }
        Ok(())
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn check_unique(records: &[CorpusRecord]) -> Result<(), CorpusError> {
    let mut seen = HashSet::with_capacity(records.len());
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(CorpusError::DuplicateId(r.id.clone()));
        }
    }
    Ok(())
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<CorpusRecord>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let records = match format {
        CorpusFormat::Jsonl => read_jsonl(BufReader::new(file), path)?,
        CorpusFormat::Csv => read_csv(file, path)?,
    };
    if records.is_empty() {
        return Err(CorpusError::Empty {
            path: path.to_path_buf(),
        });
    }
    check_unique(&records)?;
    Ok(records)
}

fn read_jsonl<R: BufRead>(reader: R, path: &Path) -> Result<Vec<CorpusRecord>, CorpusError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| CorpusError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let record: CorpusRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        record.validate().map_err(|e| parse_err(e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

fn read_csv<R: io::Read>(reader: R, path: &Path) -> Result<Vec<CorpusRecord>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let parse_err = |line: usize, message: String| CorpusError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let fixed = ["id", "article", "gold_summary"];
    if headers.len() < 3 || headers.iter().take(3).ne(fixed.iter().copied()) {
        return Err(parse_err(1, "header must start with id,article,gold_summary".into()));
    }
    let mut models = Vec::new();
    for h in headers.iter().skip(3) {
        match h.strip_prefix(MODEL_COLUMN_PREFIX) {
            Some(name) if !name.is_empty() => models.push(name.to_string()),
            _ => return Err(parse_err(1, format!("unexpected column {h:?}"))),
        }
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let mut record = CorpusRecord::new(&row[0], &row[1], &row[2]);
        for (name, value) in models.iter().zip(row.iter().skip(3)) {
            record.model_summaries.insert(name.clone(), value.to_string());
        }
        record.validate().map_err(|e| parse_err(line, e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

pub fn save_corpus(records: &[CorpusRecord], path: &Path, format: CorpusFormat) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    match format {
        CorpusFormat::Jsonl => {
            for r in records {
                serde_json::to_writer(&mut out, r).map_err(|e| io_err(path)(e.into()))?;
                out.write_all(b"\n").map_err(io_err(path))?;
            }
        }
        CorpusFormat::Csv => {
            let models: BTreeSet<&str> = records
                .iter()
                .flat_map(|r| r.model_summaries.keys().map(String::as_str))
                .collect();
            let mut wtr = csv::Writer::from_writer(&mut out);
            let csv_err = |e: csv::Error| io_err(path)(e.into());
            let mut header = vec!["id".to_string(), "article".into(), "gold_summary".into()];
            header.extend(models.iter().map(|m| format!("{MODEL_COLUMN_PREFIX}{m}")));
            wtr.write_record(&header).map_err(csv_err)?;
            for r in records {
                let mut row = vec![r.id.as_str(), r.article.as_str(), r.gold_summary.as_str()];
                row.extend(
                    models
                        .iter()
                        .map(|m| r.model_summaries.get(*m).map_or("", String::as_str)),
                );
                wtr.write_record(&row).map_err(csv_err)?;
            }
            wtr.flush().map_err(io_err(path))?;
        }
    }
    out.flush().map_err(io_err(path))
}

/// Which summary of each record to count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SummarySource {
    Gold,
    Model(String),
}

impl FromStr for SummarySource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "gold" {
            Ok(SummarySource::Gold)
        } else if let Some(name) = s.strip_prefix(MODEL_COLUMN_PREFIX).filter(|n| !n.is_empty()) {
            Ok(SummarySource::Model(name.to_string()))
        } else {
            Err(format!("expected `gold` or `model:<name>`, got {s:?}"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorpusStats {
    pub num_articles: usize,
    pub avg_sentences_per_article: f64,
    pub total_summary_sentences: usize,
    pub avg_sentences_per_summary: f64,
}

pub fn corpus_stats(
    records: &[CorpusRecord],
    splitter: &SentenceSplitter,
    summary_source: &SummarySource,
) -> Result<CorpusStats, CorpusError> {
    let summaries: Vec<&str> = match summary_source {
        SummarySource::Gold => records.iter().map(|r| r.gold_summary.as_str()).collect(),
        SummarySource::Model(model) => {
            let missing: Vec<String> = records
                .iter()
                .filter(|r| !r.model_summaries.contains_key(model))
                .map(|r| r.id.clone())
                .collect();
            if !missing.is_empty() {
                return Err(CorpusError::MissingModel {
                    model: model.clone(),
                    ids: missing,
                });
            }
            records.iter().map(|r| r.model_summaries[model].as_str()).collect()
        }
    };
    let num_articles = records.len();
    let article_sentences: usize = records.iter().map(|r| splitter.split(&r.article).len()).sum();
    let total_summary_sentences: usize = summaries.iter().map(|s| splitter.split(s).len()).sum();
    let avg = |total: usize| {
        if num_articles == 0 {
            0.0
        } else {
            total as f64 / num_articles as f64
        }
    };
    Ok(CorpusStats {
        num_articles,
        avg_sentences_per_article: avg(article_sentences),
        total_summary_sentences,
        avg_sentences_per_summary: avg(total_summary_sentences),
    })
}
