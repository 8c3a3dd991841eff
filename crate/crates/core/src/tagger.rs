//! Deterministic part-of-speech tagger.
//!
//! Tagging runs in two passes. Each word first receives its most frequent
//! Penn Treebank tag from a bundled lexicon (or a suffix-rule guess when the
//! word is unknown). Contextual transition rules then rewrite tags based on
//! neighbouring tags and words, in file order. Only the coarse [`WordClass`]
//! is consumed by the metrics.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

const LEXICON: &str = include_str!("../data/lexicon.txt");
const CONTEXT_RULES: &str = include_str!("../data/context_rules.txt");

/// Boundary marker used for positions outside the sentence.
const BOUNDARY: &str = "STAART";

/// Tag assigned to unknown words no suffix rule recognises.
pub const UNKNOWN_TAG: &str = "UNK";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum WordClass {
    Noun,
    Verb,
    Adjective,
    Other,
}

impl WordClass {
    pub fn from_tag(tag: &str) -> Self {
        match tag {
            "NN" | "NNS" | "NNP" | "NNPS" => WordClass::Noun,
            "VB" | "VBD" | "VBG" | "VBN" | "VBP" | "VBZ" => WordClass::Verb,
            "JJ" | "JJR" | "JJS" => WordClass::Adjective,
            _ => WordClass::Other,
        }
    }

    pub fn is_content(self) -> bool {
        matches!(self, WordClass::Noun | WordClass::Verb)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tagged {
    pub token: String,
    pub tag: &'static str,
    pub class: WordClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Template {
    PrevTag,
    NextTag,
    Prev1Or2Tag,
    Prev1Or2Or3Tag,
    Next1Or2Tag,
    Next1Or2Or3Tag,
    Prev2Tag,
    Next2Tag,
    SurroundTag,
    PrevBigram,
    NextBigram,
    PrevWd,
    NextWd,
    Prev1Or2Wd,
    Next1Or2Wd,
    Prev2Wd,
    Next2Wd,
    CurWd,
    WdPrevTag,
    WdNextTag,
    WdAnd2Aft,
    WdAnd2Bfr,
    WdAnd2TagAft,
    WdAnd2TagBfr,
    LBigram,
    RBigram,
}

impl Template {
    fn parse(s: &str) -> Option<(Self, usize)> {
        use Template::*;
        Some(match s {
            "PREVTAG" => (PrevTag, 1),
            "NEXTTAG" => (NextTag, 1),
            "PREV1OR2TAG" => (Prev1Or2Tag, 1),
            "PREV1OR2OR3TAG" => (Prev1Or2Or3Tag, 1),
            "NEXT1OR2TAG" => (Next1Or2Tag, 1),
            "NEXT1OR2OR3TAG" => (Next1Or2Or3Tag, 1),
            "PREV2TAG" => (Prev2Tag, 1),
            "NEXT2TAG" => (Next2Tag, 1),
            "SURROUNDTAG" => (SurroundTag, 2),
            "PREVBIGRAM" => (PrevBigram, 2),
            "NEXTBIGRAM" => (NextBigram, 2),
            "PREVWD" => (PrevWd, 1),
            "NEXTWD" => (NextWd, 1),
            "PREV1OR2WD" => (Prev1Or2Wd, 1),
            "NEXT1OR2WD" => (Next1Or2Wd, 1),
            "PREV2WD" => (Prev2Wd, 1),
            "NEXT2WD" => (Next2Wd, 1),
            "CURWD" => (CurWd, 1),
            "WDPREVTAG" => (WdPrevTag, 2),
            "WDNEXTTAG" => (WdNextTag, 2),
            "WDAND2AFT" => (WdAnd2Aft, 2),
            "WDAND2BFR" => (WdAnd2Bfr, 2),
            "WDAND2TAGAFT" => (WdAnd2TagAft, 2),
            "WDAND2TAGBFR" => (WdAnd2TagBfr, 2),
            "LBIGRAM" => (LBigram, 2),
            "RBIGRAM" => (RBigram, 2),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
struct ContextRule {
    from: &'static str,
    to: &'static str,
    template: Template,
    x: &'static str,
    y: &'static str,
}

struct Sentence<'a> {
    words: &'a [String],
    tags: &'a [&'static str],
}

impl Sentence<'_> {
    fn tag(&self, i: usize, offset: isize) -> &str {
        let j = i as isize + offset;
        if j < 0 || j as usize >= self.tags.len() {
            BOUNDARY
        } else {
            self.tags[j as usize]
        }
    }

    fn word(&self, i: usize, offset: isize) -> &str {
        let j = i as isize + offset;
        if j < 0 || j as usize >= self.words.len() {
            BOUNDARY
        } else {
            &self.words[j as usize]
        }
    }
}

impl ContextRule {
    fn fires(&self, s: &Sentence<'_>, i: usize) -> bool {
        use Template::*;
        let (x, y) = (self.x, self.y);
        match self.template {
            PrevTag => s.tag(i, -1) == x,
            NextTag => s.tag(i, 1) == x,
            Prev1Or2Tag => s.tag(i, -1) == x || s.tag(i, -2) == x,
            Prev1Or2Or3Tag => (1..=3).any(|k| s.tag(i, -k) == x),
            Next1Or2Tag => s.tag(i, 1) == x || s.tag(i, 2) == x,
            Next1Or2Or3Tag => (1..=3).any(|k| s.tag(i, k) == x),
            Prev2Tag => s.tag(i, -2) == x,
            Next2Tag => s.tag(i, 2) == x,
            SurroundTag => s.tag(i, -1) == x && s.tag(i, 1) == y,
            PrevBigram => s.tag(i, -2) == x && s.tag(i, -1) == y,
            NextBigram => s.tag(i, 1) == x && s.tag(i, 2) == y,
            PrevWd => s.word(i, -1) == x,
            NextWd => s.word(i, 1) == x,
            Prev1Or2Wd => s.word(i, -1) == x || s.word(i, -2) == x,
            Next1Or2Wd => s.word(i, 1) == x || s.word(i, 2) == x,
            Prev2Wd => s.word(i, -2) == x,
            Next2Wd => s.word(i, 2) == x,
            CurWd => s.word(i, 0) == x,
            WdPrevTag => s.tag(i, -1) == x && s.word(i, 0) == y,
            WdNextTag => s.word(i, 0) == x && s.tag(i, 1) == y,
            WdAnd2Aft => s.word(i, 0) == x && s.word(i, 2) == y,
            WdAnd2Bfr => s.word(i, -2) == x && s.word(i, 0) == y,
            WdAnd2TagAft => s.word(i, 0) == x && s.tag(i, 2) == y,
            WdAnd2TagBfr => s.tag(i, -2) == x && s.word(i, 0) == y,
            LBigram => s.word(i, -1) == x && s.word(i, 0) == y,
            RBigram => s.word(i, 0) == x && s.word(i, 1) == y,
        }
    }
}

/// Lexicon plus contextual rules. Use [`Tagger::bundled`] for the shipped
/// data; construction from custom data is available for tests and tooling.
pub struct Tagger {
    lexicon: HashMap<&'static str, &'static str>,
    rules: Vec<ContextRule>,
}

impl Tagger {
    pub fn bundled() -> &'static Tagger {
        static TAGGER: OnceLock<Tagger> = OnceLock::new();
        TAGGER.get_or_init(|| Tagger::from_data(LEXICON, CONTEXT_RULES))
    }

    /// Parses `word TAG` lexicon lines and `FROM TO TEMPLATE X [Y]` rule
    /// lines; `#` starts a comment line. Malformed lines are skipped.
    pub fn from_data(lexicon: &'static str, rules: &'static str) -> Self {
        let lexicon = data_lines(lexicon)
            .filter_map(|line| {
                let mut it = line.split_whitespace();
                Some((it.next()?, it.next()?))
            })
            .collect();
        let rules = data_lines(rules)
            .filter_map(|line| {
                let f: Vec<&'static str> = line.split_whitespace().collect();
                let (template, arity) = Template::parse(f.get(2)?)?;
                if f.len() != 3 + arity {
                    return None;
                }
                Some(ContextRule {
                    from: f[0],
                    to: f[1],
                    template,
                    x: f[3],
                    y: f.get(4).copied().unwrap_or(""),
                })
            })
            .collect();
        Tagger { lexicon, rules }
    }

    pub fn lexicon_len(&self) -> usize {
        self.lexicon.len()
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    /// Tags a sentence given as already-stripped word tokens.
    pub fn tag_words<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<Tagged> {
        let words: Vec<String> = tokens
            .iter()
            .map(|t| t.as_ref().replace('’', "'").to_lowercase())
            .collect();
        let mut tags: Vec<&'static str> = tokens
            .iter()
            .zip(&words)
            .enumerate()
            .map(|(i, (raw, lower))| self.initial_tag(raw.as_ref(), lower, i == 0))
            .collect();

        for rule in &self.rules {
            let hits: Vec<usize> = {
                let s = Sentence {
                    words: &words,
                    tags: &tags,
                };
                (0..tags.len())
                    .filter(|&i| tags[i] == rule.from && rule.fires(&s, i))
                    .collect()
            };
            for i in hits {
                tags[i] = rule.to;
            }
        }

        tokens
            .iter()
            .zip(tags)
            .map(|(t, tag)| Tagged {
                token: t.as_ref().to_string(),
                tag,
                class: WordClass::from_tag(tag),
            })
            .collect()
    }

    fn lookup(&self, word: &str) -> Option<&'static str> {
        self.lexicon.get(word).copied()
    }

    fn initial_tag(&self, raw: &str, lower: &str, sentence_initial: bool) -> &'static str {
        if lower.chars().any(|c| c.is_ascii_digit())
            && lower
                .chars()
                .all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '-' | ':' | '/' | '%'))
        {
            return "CD";
        }
        if let Some(tag) = self.lookup(lower) {
            return tag;
        }
        if let Some(stem) = lower.strip_suffix("'s") {
            if let Some(tag) = self.lookup(stem) {
                return tag;
            }
        }
        if let Some((_, last)) = lower.rsplit_once('-') {
            if let Some(tag) = self.lookup(last) {
                return tag;
            }
        }
        if !sentence_initial && raw.chars().next().is_some_and(char::is_uppercase) {
            return "NNP";
        }
        suffix_tag(lower)
    }
}

fn data_lines(data: &'static str) -> impl Iterator<Item = &'static str> {
    data.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// Suffix heuristics for words missing from the lexicon.
fn suffix_tag(word: &str) -> &'static str {
    const NOUN: &[&str] = &[
        "tion", "sion", "ness", "ment", "ity", "ance", "ence", "ism", "ist", "ship", "hood",
        "dom",
    ];
    const ADJ: &[&str] = &[
        "ous", "ful", "able", "ible", "ive", "less", "ish", "ical", "ic", "al", "y",
    ];
    if word.chars().count() < 3 {
        return UNKNOWN_TAG;
    }
    if word.ends_with("ing") {
        "VBG"
    } else if word.ends_with("ed") {
        "VBD"
    } else if NOUN.iter().any(|s| word.ends_with(s)) {
        "NN"
    } else if word.ends_with("ly") {
        "RB"
    } else if ADJ.iter().any(|s| word.ends_with(s)) {
        "JJ"
    } else if word.ends_with('s') && !word.ends_with("ss") {
        "NNS"
    } else {
        UNKNOWN_TAG
    }
}
