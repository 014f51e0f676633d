//! Optional summary generation against an HTTP chat-completion endpoint.
//!
//! Responses are parsed according to the template's list style, trimmed to
//! the required sentence count by seeded uniform subsampling, and every
//! request is accounted for in [`GenerationStats`].

mod http;
mod parse;
mod templates;

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::CorpusRecord;
use crate::textproc::split_sentences;

pub use http::{request_summary, ChatClient, Completion, HttpReply, Reply, RetryPolicy, Transport, UreqTransport};
pub use parse::{parse_listed_sentences, subsample_sentences, subsample_with_stream};
pub use templates::{builtin_template, builtin_template_names, render_prompt, ListStyle, PromptTemplate, ARTICLE_PLACEHOLDER};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("template {name}: {message}")]
    Template { name: String, message: String },
    #[error("endpoint rejected credentials (HTTP {status})")]
    Authentication { status: u16 },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
}

/// Request accounting. `refusals + parsed = total_requests` and
/// `exact_compliance + subsampled + under_length = parsed`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GenerationStats {
    pub total_requests: u64,
    pub refusals: u64,
    pub exact_compliance: u64,
    pub subsampled: u64,
    pub under_length: u64,
    pub retries: u64,
}

impl GenerationStats {
    pub fn parsed(&self) -> u64 {
        self.total_requests - self.refusals
    }

    /// Exact compliance as a percentage of parsed (non-refused) responses.
    pub fn compliance_pct(&self) -> f64 {
        pct(self.exact_compliance, self.parsed())
    }

    /// Refusals as a percentage of all requests.
    pub fn refusal_pct(&self) -> f64 {
        pct(self.refusals, self.total_requests)
    }

    /// Records one response with `parsed` sentences against `required`.
    pub fn record_parsed(&mut self, parsed: usize, required: usize) {
        self.total_requests += 1;
        match parsed.cmp(&required) {
            std::cmp::Ordering::Equal => self.exact_compliance += 1,
            std::cmp::Ordering::Greater => self.subsampled += 1,
            std::cmp::Ordering::Less => self.under_length += 1,
        }
    }

    pub fn record_refusal(&mut self) {
        self.total_requests += 1;
        self.refusals += 1;
    }

    pub fn merge(&mut self, other: &GenerationStats) {
        self.total_requests += other.total_requests;
        self.refusals += other.refusals;
        self.exact_compliance += other.exact_compliance;
        self.subsampled += other.subsampled;
        self.under_length += other.under_length;
        self.retries += other.retries;
    }

    pub fn summary_line(&self) -> String {
        format!(
            "exact compliance: {:.1}%, refusals: {:.1}%",
            self.compliance_pct(),
            self.refusal_pct()
        )
    }
}

fn pct(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

#[derive(Debug, Clone)]
pub struct GenerationConfig {
    pub model_name: String,
    pub template: PromptTemplate,
    pub seed: u64,
    pub max_in_flight: usize,
}

/// Stats gathered before a request failed permanently.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct GenerationFailure {
    pub stats: GenerationStats,
    pub error: LlmError,
}

fn with_terminal_punctuation(sentence: &str) -> String {
    let s = sentence.trim();
    if s.ends_with(['.', '!', '?', '"', '\'', ')']) {
        s.to_string()
    } else {
        format!("{s}.")
    }
}

/// Turns a raw response into the stored summary text and its parsed sentence count.
pub fn finalize_response(text: &str, style: ListStyle, required: usize, seed: u64, stream: u64) -> (String, usize) {
    let mut sentences = parse_listed_sentences(text, style);
    if sentences.is_empty() && style != ListStyle::Plain {
        sentences = split_sentences(text).into_vec();
    }
    let parsed = sentences.len();
    let kept = subsample_with_stream(&sentences, required, seed, stream);
    let summary = kept
        .iter()
        .map(|s| with_terminal_punctuation(s))
        .collect::<Vec<_>>()
        .join(" ");
    (summary, parsed)
}

/// Fills `model_summaries[config.model_name]` for every record lacking it.
///
/// Up to `max_in_flight` requests run concurrently. Results are applied in
/// record order and subsampling uses a per-record stream, so the output does
/// not depend on scheduling. A refused request stores an empty summary. On a
/// permanent error no new requests are issued; completed ones are still
/// applied.
pub fn generate_summaries<T: Transport>(
    records: &mut [CorpusRecord],
    client: &ChatClient<T>,
    config: &GenerationConfig,
) -> Result<GenerationStats, GenerationFailure> {
    let pending: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.model_summaries.contains_key(&config.model_name))
        .map(|(i, _)| i)
        .collect();
    let prompts: Vec<String> = pending
        .iter()
        .map(|&i| render_prompt(&config.template, &records[i].article))
        .collect();

    let results: Mutex<Vec<Option<Result<Completion, LlmError>>>> = Mutex::new(vec![None; pending.len()]);
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = config.max_in_flight.max(1).min(pending.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let slot = next.fetch_add(1, Ordering::SeqCst);
                if slot >= prompts.len() {
                    break;
                }
                let outcome = client.request_summary(&prompts[slot]);
                if outcome.is_err() {
                    stop.store(true, Ordering::SeqCst);
                }
                results.lock().expect("results lock")[slot] = Some(outcome);
            });
        }
    });

    let mut stats = GenerationStats::default();
    let mut first_error = None;
    let required = config.template.required_sentences();
    for (slot, outcome) in results.into_inner().expect("results lock").into_iter().enumerate() {
        let index = pending[slot];
        match outcome {
            None => {}
            Some(Err(e)) => {
                first_error.get_or_insert(e);
            }
            Some(Ok(done)) => {
                stats.retries += u64::from(done.retries());
                let summary = match done.reply {
                    Reply::Refusal => {
                        stats.record_refusal();
                        String::new()
                    }
                    Reply::Text(text) => {
                        let (summary, parsed) =
                            finalize_response(&text, config.template.list_style(), required, config.seed, index as u64);
                        stats.record_parsed(parsed, required);
                        summary
                    }
                };
                records[index]
                    .model_summaries
                    .insert(config.model_name.clone(), summary);
            }
        }
    }
    match first_error {
        Some(error) => Err(GenerationFailure { stats, error }),
        None => Ok(stats),
    }
}
