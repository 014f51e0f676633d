//! Prompt templates with a single `{Article}` placeholder.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::LlmError;

pub const ARTICLE_PLACEHOLDER: &str = "{Article}";

/// How a model is asked to lay out its summary sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ListStyle {
    DashBulleted,
    Numbered,
    Plain,
}

impl FromStr for ListStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dash" | "dash_bulleted" => Ok(ListStyle::DashBulleted),
            "numbered" => Ok(ListStyle::Numbered),
            "plain" => Ok(ListStyle::Plain),
            other => Err(format!("unknown list style {other:?} (dash, numbered, plain)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    name: String,
    body: String,
    required_sentences: usize,
    list_style: ListStyle,
}

impl PromptTemplate {
    pub fn new(
        name: impl Into<String>,
        body: impl Into<String>,
        required_sentences: usize,
        list_style: ListStyle,
    ) -> Result<Self, LlmError> {
        let name = name.into();
        let body = body.into();
        let placeholders = body.matches(ARTICLE_PLACEHOLDER).count();
        if placeholders != 1 {
            return Err(LlmError::Template {
                name,
                message: format!("expected exactly one {ARTICLE_PLACEHOLDER} placeholder, found {placeholders}"),
            });
        }
        if required_sentences == 0 {
            return Err(LlmError::Template {
                name,
                message: "required sentence count must be at least 1".into(),
            });
        }
        Ok(Self {
            name,
            body,
            required_sentences,
            list_style,
        })
    }

    /// Reads a custom template body; the trailing newline is dropped.
    pub fn from_file(path: &Path, required_sentences: usize, list_style: ListStyle) -> Result<Self, LlmError> {
        let body = fs::read_to_string(path).map_err(|e| LlmError::Template {
            name: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::new(path.display().to_string(), body.trim_end_matches(['\n', '\r']), required_sentences, list_style)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn required_sentences(&self) -> usize {
        self.required_sentences
    }

    pub fn list_style(&self) -> ListStyle {
        self.list_style
    }

    pub fn with_required_sentences(mut self, required: usize) -> Result<Self, LlmError> {
        if required == 0 {
            return Err(LlmError::Template {
                name: self.name,
                message: "required sentence count must be at least 1".into(),
            });
        }
        self.required_sentences = required;
        Ok(self)
    }
}

pub fn render_prompt(template: &PromptTemplate, article: &str) -> String {
    template.body.replacen(ARTICLE_PLACEHOLDER, article, 1)
}

const GPT_ONE: &str = "For the following article: {Article}. Return a summary comprising of 1 sentence. Write the sentence in a dash bulleted format.";
const GPT_THREE: &str = "For the following article: {Article}. Return a summary comprising of 3 sentences. Write each sentence in a dash bulleted format.";
const LLAMA_ONE: &str = "For the following article: {Article}. Return a summary comprising of 1 sentence. Write the sentence in a numbered list format.\nFor example:\n1. First sentence";
const LLAMA_THREE: &str = "For the following article: {Article}. Return a summary comprising of 3 sentence. Write the sentence in a numbered list format.\nFor example:\n1. First sentence\n2. Second sentence\n3. Third sentence";
const DOLLY_ONE: &str = "Generate a 1 sentence summary for the given article. Article: {Article}.";
const DOLLY_THREE: &str = "Generate a 3 sentence summary for the given article. Article: {Article}.";

const DATASETS: [&str; 4] = ["xsum", "cnndm", "reddit", "news"];
const FAMILIES: [&str; 3] = ["gpt35t", "llama2", "dolly"];

/// Names accepted by [`builtin_template`]: `<family>/<dataset>` plus bare
/// dataset names, which select the `gpt35t` family.
pub fn builtin_template_names() -> Vec<String> {
    let mut names: Vec<String> = DATASETS.iter().map(|d| d.to_string()).collect();
    for f in FAMILIES {
        names.extend(DATASETS.iter().map(|d| format!("{f}/{d}")));
    }
    names
}

pub fn builtin_template(name: &str) -> Option<PromptTemplate> {
    let (family, dataset) = name.split_once('/').unwrap_or(("gpt35t", name));
    if !DATASETS.contains(&dataset) {
        return None;
    }
    let three = dataset == "cnndm";
    let (body, style) = match family {
        "gpt35t" => (if three { GPT_THREE } else { GPT_ONE }, ListStyle::DashBulleted),
        "llama2" => (if three { LLAMA_THREE } else { LLAMA_ONE }, ListStyle::Numbered),
        "dolly" => (if three { DOLLY_THREE } else { DOLLY_ONE }, ListStyle::Plain),
        _ => return None,
    };
    let required = if three { 3 } else { 1 };
    PromptTemplate::new(name, body, required, style).ok()
}
