//! Indel-based string similarity ratios.
//!
//! All scores are on a 0 to 100 scale and operate on Unicode scalar values.
//! The base measure is the normalized indel distance (insertions and
//! deletions only), computed from the longest common subsequence with a
//! bit-parallel algorithm.

use std::collections::HashMap;

use crate::num::Scalar;
use crate::text::strip_punct;

/// Per-character match masks for a pattern, in 64-bit blocks.
struct PatternMasks {
    len: usize,
    blocks: usize,
    masks: HashMap<char, Vec<u64>>,
}

impl PatternMasks {
    fn new(pattern: &[char]) -> Self {
        let blocks = pattern.len().div_ceil(64).max(1);
        let mut masks: HashMap<char, Vec<u64>> = HashMap::new();
        for (i, &c) in pattern.iter().enumerate() {
            masks.entry(c).or_insert_with(|| vec![0; blocks])[i / 64] |= 1u64 << (i % 64);
        }
        PatternMasks {
            len: pattern.len(),
            blocks,
            masks,
        }
    }

    /// Length of the longest common subsequence of the pattern and `text`.
    fn lcs(&self, text: &[char]) -> usize {
        if self.len == 0 || text.is_empty() {
            return 0;
        }
        let mut v = vec![u64::MAX; self.blocks];
        for c in text {
            let Some(pm) = self.masks.get(c) else {
                continue;
            };
            let mut carry = false;
            for (vw, &m) in v.iter_mut().zip(pm) {
                let u = *vw & m;
                let (sum, c1) = vw.overflowing_add(u);
                let (sum, c2) = sum.overflowing_add(carry as u64);
                carry = c1 || c2;
                *vw = sum | (*vw & !m);
            }
        }
        let mut zeros = 0;
        for (b, w) in v.iter().enumerate() {
            let live = (self.len - b * 64).min(64);
            let mask = if live == 64 { u64::MAX } else { (1u64 << live) - 1 };
            zeros += (!w & mask).count_ones() as usize;
        }
        zeros
    }
}

/// Minimum number of single-character insertions and deletions turning `a`
/// into `b`.
pub fn indel_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    a.len() + b.len() - 2 * PatternMasks::new(&a).lcs(&b)
}

fn ratio_from_lcs<F: Scalar>(lcs: usize, len_sum: usize) -> F {
    if len_sum == 0 {
        F::hundred()
    } else {
        F::hundred() * F::from_count(2 * lcs) / F::from_count(len_sum)
    }
}

/// `100 · (1 − indel(a, b) / (|a| + |b|))`; two empty strings score 100.
pub fn similarity_ratio<F: Scalar>(a: &str, b: &str) -> F {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    ratio_from_lcs(PatternMasks::new(&a).lcs(&b), a.len() + b.len())
}

/// Canonical token-sorted form: whitespace tokens with edge punctuation
/// removed, sorted lexicographically, joined by single spaces.
pub fn sorted_tokens(s: &str) -> String {
    let mut tokens: Vec<&str> = s
        .split_whitespace()
        .map(strip_punct)
        .filter(|t| !t.is_empty())
        .collect();
    tokens.sort_unstable();
    tokens.join(" ")
}

/// Similarity of the token-sorted forms of `a` and `b`.
pub fn token_sort_ratio<F: Scalar>(a: &str, b: &str) -> F {
    similarity_ratio(&sorted_tokens(a), &sorted_tokens(b))
}

/// Best similarity of the shorter string against the windows of the longer.
///
/// Candidate windows are every contiguous slice of the longer string whose
/// length equals the shorter one, plus the prefixes and suffixes shorter than
/// that, so a short string overhanging either end can still score. Strings of
/// equal length are scored in both orientations. An empty shorter string
/// scores 0 unless both are empty.
pub fn partial_ratio<F: Scalar>(a: &str, b: &str) -> F {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() && b.is_empty() {
        return F::hundred();
    }
    if a.is_empty() || b.is_empty() {
        return F::zero();
    }
    let best = if a.len() < b.len() {
        best_window_lcs(&a, &b)
    } else if b.len() < a.len() {
        best_window_lcs(&b, &a)
    } else {
        let (x, y) = (best_window_lcs(&a, &b), best_window_lcs(&b, &a));
        if better(x, y) {
            y
        } else {
            x
        }
    };
    ratio_from_lcs(best.0, best.1)
}

fn better(cur: (usize, usize), cand: (usize, usize)) -> bool {
    // cand.lcs / cand.sum > cur.lcs / cur.sum
    (cand.0 as u128) * (cur.1 as u128) > (cur.0 as u128) * (cand.1 as u128)
}

/// Returns (lcs, |short| + |window|) for the best-scoring window.
fn best_window_lcs(short: &[char], long: &[char]) -> (usize, usize) {
    let masks = PatternMasks::new(short);
    let n = short.len();
    let mut best = (0usize, 2 * n);
    let mut consider = |window: &[char]| {
        let cand = (masks.lcs(window), n + window.len());
        if better(best, cand) {
            best = cand;
        }
        cand.0 == n && window.len() == n
    };
    for k in 1..n {
        if consider(&long[..k]) {
            return best;
        }
    }
    for start in 0..=long.len() - n {
        if consider(&long[start..start + n]) {
            return best;
        }
    }
    for k in (1..n).rev() {
        consider(&long[long.len() - k..]);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook O(nm) indel DP, independent of the bit-parallel path.
    fn indel_oracle(a: &[char], b: &[char]) -> usize {
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            d[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                d[i][j] = if a[i - 1] == b[j - 1] {
                    d[i - 1][j - 1]
                } else {
                    1 + d[i - 1][j].min(d[i][j - 1])
                };
            }
        }
        d[a.len()][b.len()]
    }

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn identity_and_empty() {
        assert_eq!(similarity_ratio::<f64>("desk", "desk"), 100.0);
        assert_eq!(similarity_ratio::<f64>("", ""), 100.0);
        assert_eq!(similarity_ratio::<f64>("abc", ""), 0.0);
    }

    #[test]
    fn desk_dusk_is_seventy_five() {
        assert_eq!(indel_oracle(&chars("desk"), &chars("dusk")), 2);
        assert_eq!(indel_distance("desk", "dusk"), 2);
        assert_eq!(similarity_ratio::<f64>("desk", "dusk"), 75.0);
        assert_eq!(similarity_ratio::<f32>("desk", "dusk"), 75.0);
    }

    #[test]
    fn long_strings_cross_block_boundaries() {
        let a = "the quick brown fox jumps over the lazy dog ".repeat(4);
        let b = "a quick brown cat leaps over one lazy dog! ".repeat(4);
        assert!(a.chars().count() > 128);
        assert_eq!(indel_distance(&a, &b), indel_oracle(&chars(&a), &chars(&b)));
    }

    #[test]
    fn token_sort_cases() {
        assert_eq!(token_sort_ratio::<f64>("wooden desk", "desk, wooden"), 100.0);
        assert_eq!(token_sort_ratio::<f64>("a b", "b a"), 100.0);
        // "car red" vs "blue car": oracle indel distance 9 over 15 chars.
        assert_eq!(indel_oracle(&chars("car red"), &chars("blue car")), 9);
        let expected = 100.0 * (1.0 - 9.0 / 15.0);
        assert!((token_sort_ratio::<f64>("red car", "blue car") - expected).abs() < 1e-12);
    }

    #[test]
    fn laptop_token_sort_below_threshold() {
        // sorted forms "laptop" / "laptop silver": indel 7 over 19 chars.
        assert_eq!(indel_oracle(&chars("laptop"), &chars("laptop silver")), 7);
        let r: f64 = token_sort_ratio("laptop", "silver laptop");
        assert!((r - 100.0 * 12.0 / 19.0).abs() < 1e-12);
        assert!(r < 75.0);
    }

    #[test]
    fn partial_cases() {
        assert_eq!(partial_ratio::<f64>("laptop", "silver laptop"), 100.0);
        assert_eq!(partial_ratio::<f64>("silver laptop", "laptop"), 100.0);
        assert_eq!(partial_ratio::<f64>("x", "x"), 100.0);
        assert_eq!(partial_ratio::<f64>("", ""), 100.0);
        assert_eq!(partial_ratio::<f64>("", "abc"), 0.0);
        // Best window of "zzabczz" against "abcd" is "zabc" or "abcz": lcs 3.
        assert_eq!(partial_ratio::<f64>("abcd", "zzabczz"), 75.0);
        // Overhang at the end: the suffix window "cd" beats every full window.
        let r: f64 = partial_ratio("cdxy", "zzzzcd");
        assert!((r - 100.0 * 4.0 / 6.0).abs() < 1e-12);
    }
}
