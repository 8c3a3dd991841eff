//! Tokenization, sentence segmentation and item normalization.

/// Abbreviations whose trailing period never ends a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "e.g", "i.e", "approx",
    "fig", "no", "inc", "ltd", "co", "mt", "ave", "dept", "est", "min", "max", "sec",
];

/// Characters that may trail a terminator and still belong to the sentence.
fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '}' | '”' | '’' | '*' | '_')
}

/// Trims non-alphanumeric characters from both ends of a token.
pub fn strip_punct(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

/// Whitespace tokens with edge punctuation removed; tokens that are pure
/// punctuation are dropped. Intra-word hyphens and apostrophes survive.
pub fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
        .map(strip_punct)
        .filter(|w| !w.is_empty())
}

pub fn word_count(text: &str) -> usize {
    words(text).count()
}

/// Canonical item form: lowercase, whitespace collapsed, enclosing
/// punctuation removed.
pub fn normalize_item(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    strip_punct(&collapsed).to_string()
}

/// Splits `text` into sentences.
///
/// A boundary follows a run of `.`, `!` or `?` (plus any closing quotes or
/// brackets) when whitespace or end of text comes next, unless the run is a
/// single period closing a known abbreviation. Blank lines also separate
/// sentences. Returned slices are trimmed and non-empty; no token is ever
/// split across two sentences.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let run_start = i;
            let mut j = i;
            while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?') {
                j += 1;
            }
            let single_period = j - run_start == 1 && c == '.';
            while j < chars.len() && is_closer(chars[j].1) {
                j += 1;
            }
            let at_gap = j == chars.len() || chars[j].1.is_whitespace();
            if at_gap && !(single_period && ends_with_abbreviation(&text[start..pos])) {
                let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
                push_trimmed(&mut out, &text[start..end]);
                start = end;
            }
            i = j.max(i + 1);
            continue;
        }
        if c == '\n' {
            // Paragraph break: newline, optional spaces, newline.
            let mut j = i + 1;
            while j < chars.len() && chars[j].1 != '\n' && chars[j].1.is_whitespace() {
                j += 1;
            }
            if j < chars.len() && chars[j].1 == '\n' {
                push_trimmed(&mut out, &text[start..pos]);
                start = pos;
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed<'a>(out: &mut Vec<&'a str>, s: &'a str) {
    let t = s.trim();
    if !t.is_empty() {
        out.push(t);
    }
}

fn ends_with_abbreviation(before_period: &str) -> bool {
    let Some(last) = before_period.split_whitespace().last() else {
        return false;
    };
    let last = last
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    ABBREVIATIONS.contains(&last.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_simple_sentences() {
        assert_eq!(
            split_sentences("A man runs. A dog barks."),
            vec!["A man runs.", "A dog barks."]
        );
    }

    #[test]
    fn worked_example_splits_in_two() {
        let s = split_sentences(
            "Let me analyze this scene carefully. A young woman sits at a wooden desk, \
             typing on a silver laptop in a bright office.",
        );
        assert_eq!(s.len(), 2);
        assert_eq!(s[0], "Let me analyze this scene carefully.");
    }

    #[test]
    fn empty_and_blank_text() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   \n\n ").is_empty());
    }

    #[test]
    fn abbreviations_and_decimals_do_not_split() {
        assert_eq!(split_sentences("Dr. Smith waves. He smiles.").len(), 2);
        assert_eq!(split_sentences("It costs 3.50 dollars.").len(), 1);
        assert_eq!(split_sentences("Pens, cups, etc. are on the desk.").len(), 1);
    }

    #[test]
    fn closing_quotes_stay_with_their_sentence() {
        assert_eq!(
            split_sentences("She says \"hello!\" He waves?! Then leaves"),
            vec!["She says \"hello!\"", "He waves?!", "Then leaves"]
        );
    }

    #[test]
    fn paragraph_breaks_separate_headings() {
        assert_eq!(
            split_sentences("**Scanning the frames**\n\nA cat sleeps on a sofa."),
            vec!["**Scanning the frames**", "A cat sleeps on a sofa."]
        );
        assert_eq!(split_sentences("line one\nline two").len(), 1);
    }

    #[test]
    fn word_tokenization_strips_edges_only() {
        let w: Vec<_> = words("\"Hello,\" said the well-lit man's — dog. 42!").collect();
        assert_eq!(w, vec!["Hello", "said", "the", "well-lit", "man's", "dog", "42"]);
    }

    #[test]
    fn item_normalization() {
        assert_eq!(normalize_item("  Silver   Laptop. "), "silver laptop");
        assert_eq!(normalize_item("(desk)"), "desk");
        assert_eq!(normalize_item("desk, wooden"), "desk, wooden");
        assert_eq!(normalize_item("!!"), "");
    }

    proptest! {
        #[test]
        fn sentences_cover_the_input(text in "[a-zA-Z .!?\"\n]{0,80}") {
            let joined: String = split_sentences(&text).concat();
            let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
            prop_assert_eq!(strip(&joined), strip(&text));
        }

        #[test]
        fn sentence_word_counts_add_up(text in "[a-z .!?,'\n-]{0,120}") {
            let per_sentence: usize = split_sentences(&text).iter().map(|s| word_count(s)).sum();
            prop_assert_eq!(per_sentence, word_count(&text));
        }

        #[test]
        fn normalization_is_idempotent(raw in "\\PC{0,30}") {
            let once = normalize_item(&raw);
            prop_assert_eq!(normalize_item(&once), once);
        }
    }
}
