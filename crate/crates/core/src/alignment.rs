//! Thought/output alignment through the cascaded fuzzy matcher.
//!
//! A thought item is covered when it matches *any* output item, and an output
//! item is grounded when it matches any thought item. Matching is
//! many-to-many; there is no one-to-one assignment step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::{AtomicItemSet, ExtractionBackend};
use crate::fuzzy::{partial_ratio, token_sort_ratio};
use crate::num::{count_ratio, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchTier {
    Exact,
    TokenSort,
    Partial,
}

#[derive(Debug, Error, PartialEq)]
#[error("{name} threshold {value} is outside [0, 100]")]
pub struct ThresholdError {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct CascadeConfig<F> {
    pub token_sort_threshold: F,
    pub partial_threshold: F,
}

impl<F: Scalar> Default for CascadeConfig<F> {
    fn default() -> Self {
        CascadeConfig {
            token_sort_threshold: F::lit(75.0),
            partial_threshold: F::lit(75.0),
        }
    }
}

impl<F: Scalar> CascadeConfig<F> {
    pub fn new(token_sort_threshold: F, partial_threshold: F) -> Result<Self, ThresholdError> {
        let cfg = CascadeConfig {
            token_sort_threshold,
            partial_threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ThresholdError> {
        let check = |name, v: F| {
            if v >= F::zero() && v <= F::hundred() {
                Ok(())
            } else {
                Err(ThresholdError {
                    name,
                    value: v.to_f64().unwrap_or(f64::NAN),
                })
            }
        };
        check("token_sort", self.token_sort_threshold)?;
        check("partial", self.partial_threshold)
    }
}

/// First cascade tier that fires for the pair, if any. Thresholds are
/// inclusive.
pub fn cascade_match<F: Scalar>(a: &str, b: &str, cfg: &CascadeConfig<F>) -> Option<MatchTier> {
    if a == b {
        Some(MatchTier::Exact)
    } else if token_sort_ratio::<F>(a, b) >= cfg.token_sort_threshold {
        Some(MatchTier::TokenSort)
    } else if partial_ratio::<F>(a, b) >= cfg.partial_threshold {
        Some(MatchTier::Partial)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub thought: String,
    pub output: String,
    pub tier: MatchTier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct AlignmentResult<F> {
    /// Every matching (thought, output) pair, sorted.
    pub pairs: Vec<MatchedPair>,
    pub thought_items: usize,
    pub output_items: usize,
    pub matched_thought: usize,
    pub matched_output: usize,
    pub thought_coverage: F,
    pub output_grounding: F,
    pub f1: F,
    /// Set when either item set is empty.
    pub degenerate: bool,
    /// Output items with no match in the thought stream.
    pub ungrounded_output: Vec<String>,
    /// Thought items with no match in the output.
    pub dropped_thought: Vec<String>,
    pub thought_backend: ExtractionBackend,
    pub output_backend: ExtractionBackend,
}

/// Harmonic mean of two ratios; zero when both are zero.
pub fn f1<F: Scalar>(tc: F, og: F) -> F {
    let sum = tc + og;
    if sum == F::zero() {
        F::zero()
    } else {
        F::lit(2.0) * tc * og / sum
    }
}

pub fn align<F: Scalar>(
    thought: &AtomicItemSet,
    output: &AtomicItemSet,
    cfg: &CascadeConfig<F>,
) -> AlignmentResult<F> {
    let mut thought_hit = vec![false; thought.items.len()];
    let mut output_hit = vec![false; output.items.len()];
    let mut pairs = Vec::new();
    for (i, t) in thought.items.iter().enumerate() {
        for (j, o) in output.items.iter().enumerate() {
            if let Some(tier) = cascade_match(t, o, cfg) {
                thought_hit[i] = true;
                output_hit[j] = true;
                pairs.push(MatchedPair {
                    thought: t.clone(),
                    output: o.clone(),
                    tier,
                });
            }
        }
    }
    pairs.sort_by(|a, b| (&a.thought, &a.output).cmp(&(&b.thought, &b.output)));

    let unmatched = |items: &[String], hits: &[bool]| {
        let mut v: Vec<String> = items
            .iter()
            .zip(hits)
            .filter(|(_, &h)| !h)
            .map(|(s, _)| s.clone())
            .collect();
        v.sort();
        v
    };
    let matched_thought = thought_hit.iter().filter(|&&h| h).count();
    let matched_output = output_hit.iter().filter(|&&h| h).count();
    let tc = count_ratio(matched_thought, thought.items.len());
    let og = count_ratio(matched_output, output.items.len());
    AlignmentResult {
        thought_items: thought.items.len(),
        output_items: output.items.len(),
        matched_thought,
        matched_output,
        thought_coverage: tc,
        output_grounding: og,
        f1: f1(tc, og),
        degenerate: thought.is_empty() || output.is_empty(),
        ungrounded_output: unmatched(&output.items, &output_hit),
        dropped_thought: unmatched(&thought.items, &thought_hit),
        thought_backend: thought.backend.clone(),
        output_backend: output.backend.clone(),
        pairs,
    }
}
