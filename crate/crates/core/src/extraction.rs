//! Atomic item extraction from thought streams and structured outputs.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use thoughtlens_gateway::{Gateway, GatewayError, TemplateRef};

use crate::contentfulness::{filter_meta_sentences, MetaPatternSet};
use crate::judge::{strip_code_fence, JudgeSettings, PromptTemplate};
use crate::model::StructuredOutput;
use crate::tagger::{Tagger, WordClass};
use crate::text::{normalize_item, split_sentences, words};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemSource {
    Thought,
    Output,
}

impl ItemSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ItemSource::Thought => "thought",
            ItemSource::Output => "output",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtractionBackend {
    Judge { template: TemplateRef },
    Deterministic,
}

/// Normalized, deduplicated items in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicItemSet {
    pub source: ItemSource,
    pub items: Vec<String>,
    pub backend: ExtractionBackend,
}

impl AtomicItemSet {
    pub fn new<I, S>(source: ItemSource, backend: ExtractionBackend, raw: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let items = raw
            .into_iter()
            .map(|s| normalize_item(s.as_ref()))
            .filter(|s| !s.is_empty() && seen.insert(s.clone()))
            .collect();
        AtomicItemSet {
            source,
            items,
            backend,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractionError {
    #[error("nothing to extract from: text is empty")]
    EmptyText,
    #[error("judge unavailable: {0}")]
    JudgeUnavailable(#[from] GatewayError),
    #[error("judge reply is not a JSON array of strings: {0}")]
    MalformedJudgeReply(String),
}

/// Flattens every label of the output (named lists, shot type, extra fields).
pub fn extract_items_deterministic_output(out: &StructuredOutput) -> AtomicItemSet {
    AtomicItemSet::new(
        ItemSource::Output,
        ExtractionBackend::Deterministic,
        out.labels(),
    )
}

/// Noun and verb words of the non-meta sentences, plus adjacent noun-noun
/// and adjective-noun bigrams.
pub fn extract_items_deterministic_thought(
    text: &str,
    patterns: &MetaPatternSet,
) -> AtomicItemSet {
    let sentences = split_sentences(text);
    let (kept, _) = filter_meta_sentences(&sentences, patterns);
    let mut raw = Vec::new();
    for sentence in kept {
        let tokens: Vec<&str> = words(sentence).collect();
        let tagged = Tagger::bundled().tag_words(&tokens);
        for (i, t) in tagged.iter().enumerate() {
            if t.class.is_content() {
                raw.push(t.token.clone());
            }
            if let Some(next) = tagged.get(i + 1) {
                let modifier = matches!(t.class, WordClass::Noun | WordClass::Adjective);
                if modifier && next.class == WordClass::Noun {
                    raw.push(format!("{} {}", t.token, next.token));
                }
            }
        }
    }
    AtomicItemSet::new(ItemSource::Thought, ExtractionBackend::Deterministic, raw)
}

/// Judge-backed extraction under the versioned `extract-items` template.
pub fn extract_items_judge(
    text: &str,
    source: ItemSource,
    gateway: &Gateway,
    settings: &JudgeSettings,
) -> Result<AtomicItemSet, ExtractionError> {
    if text.trim().is_empty() {
        return Err(ExtractionError::EmptyText);
    }
    let template = PromptTemplate::extract_items();
    let reply = template.call(
        gateway,
        settings,
        &[("source_kind", source.as_str()), ("text", text)],
    )?;
    let items = parse_item_reply(&reply)?;
    Ok(AtomicItemSet::new(
        source,
        ExtractionBackend::Judge {
            template: template.reference,
        },
        items,
    ))
}

pub(crate) fn parse_item_reply(reply: &str) -> Result<Vec<String>, ExtractionError> {
    let body = strip_code_fence(reply);
    serde_json::from_str::<Vec<String>>(body).map_err(|e| {
        let preview: String = body.chars().take(120).collect();
        ExtractionError::MalformedJudgeReply(format!("{e}: {preview}"))
    })
}
