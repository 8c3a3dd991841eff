//! The fast ratio implementations checked against slow, obviously-correct
//! reference computations.

use proptest::prelude::*;
use thoughtlens::fuzzy::{indel_distance, partial_ratio, similarity_ratio, token_sort_ratio};

fn lcs_dp(a: &[char], b: &[char]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            d[i][j] = if a[i - 1] == b[j - 1] {
                d[i - 1][j - 1] + 1
            } else {
                d[i - 1][j].max(d[i][j - 1])
            };
        }
    }
    d[a.len()][b.len()]
}

fn ratio_oracle(a: &[char], b: &[char]) -> f64 {
    let total = a.len() + b.len();
    if total == 0 {
        return 100.0;
    }
    let indel = total - 2 * lcs_dp(a, b);
    100.0 * (1.0 - indel as f64 / total as f64)
}

/// Every admissible window: full-length slides plus shorter prefixes and
/// suffixes of the longer string, scored in both orientations for equal
/// lengths.
fn partial_oracle(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 100.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let one_way = |s: &[char], l: &[char]| {
        let n = s.len();
        let mut windows: Vec<&[char]> = (0..=l.len() - n).map(|i| &l[i..i + n]).collect();
        for k in 1..n {
            windows.push(&l[..k]);
            windows.push(&l[l.len() - k..]);
        }
        windows
            .into_iter()
            .map(|w| ratio_oracle(s, w))
            .fold(0.0, f64::max)
    };
    match a.len().cmp(&b.len()) {
        std::cmp::Ordering::Less => one_way(&a, &b),
        std::cmp::Ordering::Greater => one_way(&b, &a),
        std::cmp::Ordering::Equal => one_way(&a, &b).max(one_way(&b, &a)),
    }
}

fn short_string() -> impl Strategy<Value = String> {
    proptest::collection::vec(prop::sample::select(vec!['a', 'b', 'c', 'd', ' ', 'é']), 0..=12)
        .prop_map(|v| v.into_iter().collect())
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-9
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn similarity_matches_dp(a in short_string(), b in short_string()) {
        let (ca, cb): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
        prop_assert!(close(similarity_ratio::<f64>(&a, &b), ratio_oracle(&ca, &cb)));
        prop_assert_eq!(indel_distance(&a, &b), ca.len() + cb.len() - 2 * lcs_dp(&ca, &cb));
    }

    #[test]
    fn partial_matches_window_scan(a in short_string(), b in short_string()) {
        prop_assert!(close(partial_ratio::<f64>(&a, &b), partial_oracle(&a, &b)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn similarity_is_symmetric_and_exact_at_100(a in short_string(), b in short_string()) {
        let x = similarity_ratio::<f64>(&a, &b);
        prop_assert_eq!(x, similarity_ratio::<f64>(&b, &a));
        prop_assert_eq!(x == 100.0, a == b);
    }

    #[test]
    fn substrings_score_100(s in short_string(), start in any::<prop::sample::Index>(), len in any::<prop::sample::Index>()) {
        let chars: Vec<char> = s.chars().collect();
        prop_assume!(!chars.is_empty());
        let lo = start.index(chars.len());
        let hi = lo + 1 + len.index(chars.len() - lo);
        let sub: String = chars[lo..hi].iter().collect();
        prop_assert_eq!(partial_ratio::<f64>(&sub, &s), 100.0);
    }

    #[test]
    fn token_order_is_irrelevant(words in proptest::collection::vec("[a-d]{1,4}", 1..5), seed in any::<u64>()) {
        let mut shuffled = words.clone();
        // Deterministic rotation-based permutation driven by the seed.
        let k = (seed % shuffled.len() as u64) as usize;
        shuffled.rotate_left(k);
        shuffled.reverse();
        prop_assert_eq!(token_sort_ratio::<f64>(&words.join(" "), &shuffled.join(" ")), 100.0);
    }

    #[test]
    fn f32_and_f64_agree(a in short_string(), b in short_string()) {
        let x = similarity_ratio::<f32>(&a, &b) as f64;
        prop_assert!((x - similarity_ratio::<f64>(&a, &b)).abs() < 1e-3);
    }
}
