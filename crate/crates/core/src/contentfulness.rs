//! Contentfulness: the share of a thought stream made of scene content.
//!
//! Sentences matching any meta-commentary pattern are removed whole. The
//! remaining sentences are tagged and their noun- and verb-class tokens are
//! the content words. The score divides content words by the word count of
//! the *full* trace, removed sentences included.

use std::fs;
use std::path::Path;

use regex::{Regex, RegexSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{count_ratio, Scalar};
use crate::tagger::{Tagger, WordClass};
use crate::text::{split_sentences, word_count, words};

const DEFAULT_VERSION: &str = "v1";
const DEFAULT_PATTERNS: &[&str] = &[
    "i will",
    "i'll",
    "let me",
    "let's",
    "i need to",
    "i should",
    "step by step",
    "json",
    "the user",
    "analyze this",
    "my task",
    "i am going to",
];

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("pattern set must not be empty")]
    Empty,
    #[error("bad pattern {pattern:?}: {source}")]
    Regex {
        pattern: String,
        source: regex::Error,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("pattern config: {0}")]
    Json(#[from] serde_json::Error),
}

/// One meta-commentary pattern. Literals match case-insensitively as whole
/// phrases; regexes are used as given, with case folding enabled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetaPattern {
    Literal(String),
    Regex { regex: String },
}

impl MetaPattern {
    fn to_regex(&self) -> String {
        match self {
            MetaPattern::Literal(lit) => {
                let lit = lit.trim().to_lowercase();
                let word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
                let lead = if word(lit.chars().next()) { r"\b" } else { "" };
                let trail = if word(lit.chars().last()) { r"\b" } else { "" };
                format!("(?i){lead}{}{trail}", regex::escape(&lit))
            }
            MetaPattern::Regex { regex } => format!("(?i){regex}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PatternFile {
    version: String,
    patterns: Vec<MetaPattern>,
}

/// Versioned, ordered set of meta-commentary patterns.
#[derive(Debug, Clone)]
pub struct MetaPatternSet {
    version: String,
    patterns: Vec<MetaPattern>,
    compiled: RegexSet,
}

impl MetaPatternSet {
    pub fn new(
        version: impl Into<String>,
        patterns: Vec<MetaPattern>,
    ) -> Result<Self, PatternError> {
        if patterns.is_empty() {
            return Err(PatternError::Empty);
        }
        let sources: Vec<String> = patterns.iter().map(MetaPattern::to_regex).collect();
        for (src, p) in sources.iter().zip(&patterns) {
            Regex::new(src).map_err(|source| PatternError::Regex {
                pattern: format!("{p:?}"),
                source,
            })?;
        }
        let compiled = RegexSet::new(&sources).expect("patterns validated individually");
        Ok(MetaPatternSet {
            version: version.into(),
            patterns,
            compiled,
        })
    }

    /// The shipped `v1` set.
    pub fn default_v1() -> Self {
        let patterns = DEFAULT_PATTERNS
            .iter()
            .map(|p| MetaPattern::Literal(p.to_string()))
            .collect();
        MetaPatternSet::new(DEFAULT_VERSION, patterns).expect("default patterns compile")
    }

    /// Parses `{"version": ..., "patterns": [...]}`.
    pub fn from_json(raw: &str) -> Result<Self, PatternError> {
        let file: PatternFile = serde_json::from_str(raw)?;
        MetaPatternSet::new(file.version, file.patterns)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PatternError> {
        MetaPatternSet::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PatternFile {
            version: self.version.clone(),
            patterns: self.patterns.clone(),
        })
        .expect("pattern set encodes as JSON")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn patterns(&self) -> &[MetaPattern] {
        &self.patterns
    }

    pub fn is_meta(&self, sentence: &str) -> bool {
        self.compiled.is_match(&sentence.replace('’', "'"))
    }
}

impl Default for MetaPatternSet {
    fn default() -> Self {
        MetaPatternSet::default_v1()
    }
}

/// Partitions sentences into (kept, removed), preserving order in each.
pub fn filter_meta_sentences<'a>(
    sentences: &[&'a str],
    patterns: &MetaPatternSet,
) -> (Vec<&'a str>, Vec<&'a str>) {
    sentences.iter().partition(|s| !patterns.is_meta(s))
}

/// Coarse class reported for each token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ContentClass {
    Noun,
    Verb,
    Other,
}

impl From<WordClass> for ContentClass {
    fn from(c: WordClass) -> Self {
        match c {
            WordClass::Noun => ContentClass::Noun,
            WordClass::Verb => ContentClass::Verb,
            WordClass::Adjective | WordClass::Other => ContentClass::Other,
        }
    }
}

/// Tags every word of `sentence`; NOUN and VERB tokens are content words.
pub fn tag_content_words(sentence: &str) -> Vec<(String, ContentClass)> {
    let tokens: Vec<&str> = words(sentence).collect();
    Tagger::bundled()
        .tag_words(&tokens)
        .into_iter()
        .map(|t| (t.token, t.class.into()))
        .collect()
}

/// Content words of `text` after meta-sentence removal, in order.
pub fn content_words(text: &str, patterns: &MetaPatternSet) -> Vec<String> {
    let sentences = split_sentences(text);
    let (kept, _) = filter_meta_sentences(&sentences, patterns);
    kept.iter()
        .flat_map(|s| tag_content_words(s))
        .filter(|(_, c)| *c != ContentClass::Other)
        .map(|(w, _)| w)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ContentfulnessResult<F> {
    pub total_words: usize,
    pub content_words: usize,
    pub removed_sentences: usize,
    pub score: F,
    /// Set when the trace has no words; the score is then 0.
    pub degenerate: bool,
}

pub fn contentfulness<F: Scalar>(
    trace: &str,
    patterns: &MetaPatternSet,
) -> ContentfulnessResult<F> {
    let sentences = split_sentences(trace);
    let total_words: usize = sentences.iter().map(|s| word_count(s)).sum();
    let (kept, removed) = filter_meta_sentences(&sentences, patterns);
    let content = kept
        .iter()
        .map(|s| {
            tag_content_words(s)
                .iter()
                .filter(|(_, c)| *c != ContentClass::Other)
                .count()
        })
        .sum();
    ContentfulnessResult {
        total_words,
        content_words: content,
        removed_sentences: removed.len(),
        score: count_ratio(content, total_words),
        degenerate: total_words == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "Let me analyze this scene carefully. A young woman sits at a \
                           wooden desk, typing on a silver laptop in a bright office.";

    #[test]
    fn worked_example_filtering() {
        let sentences = split_sentences(EXAMPLE);
        let (kept, removed) = filter_meta_sentences(&sentences, &MetaPatternSet::default());
        assert_eq!(removed, vec!["Let me analyze this scene carefully."]);
        assert_eq!(kept.len(), 1);
        assert!(kept[0].starts_with("A young woman"));
    }

    #[test]
    fn no_pattern_hit_keeps_everything() {
        let (kept, removed) = filter_meta_sentences(&["A cat sleeps."], &MetaPatternSet::default());
        assert_eq!(kept, vec!["A cat sleeps."]);
        assert!(removed.is_empty());
    }

    #[test]
    fn json_mention_is_meta() {
        let set = MetaPatternSet::default();
        assert!(set.is_meta("I will output json now."));
        assert!(set.is_meta("I’ll describe it."));
        assert!(set.is_meta("LET ME see."));
        assert!(!set.is_meta("A jsonl file sits on the desk."));
        assert!(!set.is_meta("An outlet on the wall."));
    }

    #[test]
    fn worked_example_content_words() {
        let sentences = split_sentences(EXAMPLE);
        let content: Vec<String> = tag_content_words(sentences[1])
            .into_iter()
            .filter(|(_, c)| *c != ContentClass::Other)
            .map(|(w, _)| w)
            .collect();
        assert_eq!(content, ["woman", "sits", "desk", "typing", "laptop", "office"]);
    }

    #[test]
    fn dogs_chase_cars() {
        use ContentClass::*;
        let tags = tag_content_words("dogs chase cars");
        let classes: Vec<ContentClass> = tags.iter().map(|(_, c)| *c).collect();
        assert_eq!(classes, [Noun, Verb, Noun]);
    }

    #[test]
    fn worked_example_full_trace_counts() {
        // The quoted two-sentence trace has 6 + 17 = 23 words.
        let r = contentfulness::<f64>(EXAMPLE, &MetaPatternSet::default());
        assert_eq!(r.total_words, 23);
        assert_eq!(r.content_words, 6);
        assert_eq!(r.removed_sentences, 1);
        assert_eq!(r.score, 6.0 / 23.0);
    }

    #[test]
    fn twenty_word_trace_scores_point_three() {
        // 3-word meta sentence + 17-word scene sentence = 20 words, 6 content.
        let trace = "Let me see. A young woman sits at a wooden desk, typing on \
                     a silver laptop in a bright office.";
        let r = contentfulness::<f64>(trace, &MetaPatternSet::default());
        assert_eq!((r.total_words, r.content_words), (20, 6));
        assert_eq!(r.score, 0.30);
    }

    #[test]
    fn meta_only_and_empty_traces() {
        let r = contentfulness::<f64>("Let me think. I will output json.", &MetaPatternSet::default());
        assert_eq!(r.score, 0.0);
        assert!(!r.degenerate);
        let e = contentfulness::<f32>("", &MetaPatternSet::default());
        assert_eq!(e.score, 0.0);
        assert!(e.degenerate);
    }

    #[test]
    fn all_content_trace() {
        let r = contentfulness::<f64>("woman sits desk", &MetaPatternSet::default());
        assert_eq!(r.score, 1.0);
    }

    #[test]
    fn pattern_config_round_trip() {
        let raw = r#"{"version":"custom-2","patterns":["hmm", {"regex":"^okay\\b"}]}"#;
        let set = MetaPatternSet::from_json(raw).unwrap();
        assert_eq!(set.version(), "custom-2");
        assert!(set.is_meta("Okay, so the frame shows a cat."));
        assert!(!set.is_meta("The cat is okay."));
        assert!(set.is_meta("Hmm."));
        let again = MetaPatternSet::from_json(&set.to_json()).unwrap();
        assert_eq!(again.patterns(), set.patterns());
        assert!(matches!(
            MetaPatternSet::from_json(r#"{"version":"x","patterns":[]}"#),
            Err(PatternError::Empty)
        ));
        assert!(MetaPatternSet::from_json(r#"{"version":"x","patterns":[{"regex":"("}]}"#).is_err());
    }
}
