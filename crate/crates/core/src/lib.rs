//! Position-bias measurement for summarization corpora.
//!
//! Summary sentences are mapped back to the article sentences they draw on,
//! articles are cut into `K` near-equal segments, and the resulting
//! segment distributions of gold and model summaries are compared with the
//! Wasserstein-1 distance. ROUGE, lead-bias fractions and Spearman
//! correlations across models complete the picture.

pub mod biasmetrics;
pub mod cli;
pub mod corpus;
pub mod llmclient;
pub mod pipeline;
pub mod posmap;
pub mod report;
pub mod simmetrics;
pub mod synth;
pub mod textproc;
