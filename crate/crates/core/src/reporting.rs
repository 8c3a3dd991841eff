//! Per-scene metric rows and per-variant aggregate reports.
//!
//! Aggregates cover error-free scenes only; `err_pct` is computed over every
//! scene. Standard deviations use the population divisor N. All reductions
//! are order-independent, so a report never depends on record order.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::AlignmentResult;
use crate::contentfulness::ContentfulnessResult;
use crate::entities::EntityProfile;
use crate::model::{ErrorInfo, TokenUsage};
use crate::num::{percentage, Scalar};
use crate::stats::{coefficient_of_variation, mean, population_std};

/// F1 at or above `1 - PERFECT_TOLERANCE` counts as perfect.
pub const PERFECT_TOLERANCE: f64 = 1e-9;
/// F1 strictly below this counts as low.
pub const LOW_F1: f64 = 0.5;
/// Allowed gap between the total mean and the sum of component means.
pub const TOKEN_TOLERANCE: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no scenes to aggregate")]
    EmptyInput,
    #[error("scene {scene_id} belongs to {found}, expected {expected}")]
    MixedVariants {
        scene_id: String,
        expected: String,
        found: String,
    },
    #[error("scaling table needs at least two reports, got {0}")]
    TooFewReports(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

/// Every metric computed for one scene. Error records carry `error` and no
/// metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SceneMetrics<F> {
    pub scene_id: String,
    pub variant_id: String,
    pub tokens: TokenUsage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contentfulness: Option<ContentfulnessResult<F>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<AlignmentResult<F>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<EntityProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_error: Option<String>,
}

impl<F> SceneMetrics<F> {
    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }
}

pub fn write_scene_metrics<F: Scalar, W: Write>(
    mut sink: W,
    rows: &[SceneMetrics<F>],
) -> io::Result<()> {
    for r in rows {
        serde_json::to_writer(&mut sink, r)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}

pub fn read_scene_metrics<F: Scalar, R: BufRead>(
    source: R,
) -> Result<Vec<SceneMetrics<F>>, ReportError> {
    let mut rows = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| ReportError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct TokenMeans<F> {
    pub thought: F,
    pub input: F,
    pub output: F,
    pub total: F,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct TokenBreakdown<F> {
    pub means: TokenMeans<F>,
    /// `total - (thought + input + output)` on the unrounded means.
    pub gap: F,
    /// Same gap on means rounded to whole tokens, as tables report them.
    pub rounded_gap: F,
    pub consistent: bool,
}

/// True when a reported total is within one token of its components.
pub fn token_row_consistent<F: Scalar>(thought: F, input: F, output: F, total: F) -> bool {
    (total - (thought + input + output)).abs() <= F::lit(TOKEN_TOLERANCE)
}

pub fn token_breakdown<F: Scalar>(tokens: &[TokenUsage]) -> Result<TokenBreakdown<F>, ReportError> {
    let column = |get: fn(&TokenUsage) -> u64| {
        let v: Vec<F> = tokens
            .iter()
            .map(|t| F::from_u64(get(t)).expect("token count fits scalar"))
            .collect();
        mean(&v).ok_or(ReportError::EmptyInput)
    };
    let means = TokenMeans {
        thought: column(|t| t.thought)?,
        input: column(|t| t.input)?,
        output: column(|t| t.output)?,
        total: column(|t| t.total)?,
    };
    let gap = means.total - (means.thought + means.input + means.output);
    let rounded_gap =
        means.total.round() - (means.thought.round() + means.input.round() + means.output.round());
    let tol = F::lit(TOKEN_TOLERANCE);
    Ok(TokenBreakdown {
        means,
        gap,
        rounded_gap,
        consistent: gap.abs() <= tol && rounded_gap.abs() <= tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct VariantReport<F> {
    pub variant_id: String,
    /// All scenes, error records included.
    pub scene_count: usize,
    /// Error-free scenes the metrics are averaged over.
    pub evaluated: usize,
    pub contentfulness_mean: F,
    pub tc_mean: F,
    pub og_mean: F,
    pub f1_mean: F,
    pub f1_std: F,
    pub cv: F,
    pub perfect_pct: F,
    pub low_pct: F,
    pub err_pct: F,
    pub token_means: TokenMeans<F>,
    pub tokens_consistent: bool,
    /// Mean of `1 - OG`: the share of output items absent from the trace.
    pub hallucination_rate: F,
    /// Percentage of profiled scenes whose dominant subject is generic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generic_subject_pct: Option<F>,
}

pub fn variant_report<F: Scalar>(scenes: &[SceneMetrics<F>]) -> Result<VariantReport<F>, ReportError> {
    let first = scenes.first().ok_or(ReportError::EmptyInput)?;
    if let Some(other) = scenes.iter().find(|s| s.variant_id != first.variant_id) {
        return Err(ReportError::MixedVariants {
            scene_id: other.scene_id.clone(),
            expected: first.variant_id.clone(),
            found: other.variant_id.clone(),
        });
    }
    let ok: Vec<&SceneMetrics<F>> = scenes.iter().filter(|s| !s.is_error()).collect();
    let errors = scenes.len() - ok.len();
    let collect = |f: &dyn Fn(&SceneMetrics<F>) -> Option<F>| -> Vec<F> {
        ok.iter().filter_map(|s| f(s)).collect()
    };
    let mean0 = |v: &[F]| mean(v).unwrap_or_else(F::zero);

    let content = collect(&|s| s.contentfulness.as_ref().map(|c| c.score));
    let tc = collect(&|s| s.alignment.as_ref().map(|a| a.thought_coverage));
    let og = collect(&|s| s.alignment.as_ref().map(|a| a.output_grounding));
    let f1 = collect(&|s| s.alignment.as_ref().map(|a| a.f1));
    let ungrounded = collect(&|s| s.alignment.as_ref().map(|a| F::one() - a.output_grounding));

    let f1_mean = mean0(&f1);
    let f1_std = population_std(&f1).unwrap_or_else(F::zero);
    let perfect = f1
        .iter()
        .filter(|&&v| v >= F::one() - F::lit(PERFECT_TOLERANCE))
        .count();
    let low = f1.iter().filter(|&&v| v < F::lit(LOW_F1)).count();

    let tokens: Vec<TokenUsage> = ok.iter().map(|s| s.tokens).collect();
    let (token_means, tokens_consistent) = match token_breakdown(&tokens) {
        Ok(b) => (b.means, b.consistent),
        Err(_) => (
            TokenMeans {
                thought: F::zero(),
                input: F::zero(),
                output: F::zero(),
                total: F::zero(),
            },
            true,
        ),
    };
    let profiles: Vec<&EntityProfile> = ok.iter().filter_map(|s| s.entity.as_ref()).collect();
    let generic_subject_pct = (!profiles.is_empty()).then(|| {
        percentage(
            profiles.iter().filter(|p| p.subject_is_generic).count(),
            profiles.len(),
        )
    });

    Ok(VariantReport {
        variant_id: first.variant_id.clone(),
        scene_count: scenes.len(),
        evaluated: ok.len(),
        contentfulness_mean: mean0(&content),
        tc_mean: mean0(&tc),
        og_mean: mean0(&og),
        f1_mean,
        f1_std,
        cv: coefficient_of_variation(f1_mean, f1_std),
        perfect_pct: percentage(perfect, f1.len()),
        low_pct: percentage(low, f1.len()),
        err_pct: percentage(errors, scenes.len()),
        token_means,
        tokens_consistent,
        hallucination_rate: mean0(&ungrounded),
        generic_subject_pct,
    })
}

/// Column order of [`write_reports_csv`].
pub const REPORT_COLUMNS: [&str; 20] = [
    "variant_id",
    "scene_count",
    "evaluated",
    "contentfulness_mean",
    "tc_mean",
    "og_mean",
    "f1_mean",
    "f1_std",
    "cv",
    "perfect_pct",
    "low_pct",
    "err_pct",
    "thought_tokens_mean",
    "input_tokens_mean",
    "output_tokens_mean",
    "total_tokens_mean",
    "tokens_consistent",
    "hallucination_rate",
    "generic_subject_pct",
    "digest",
];

/// One row per report. `digest` identifies the run configuration and is
/// repeated on each row so the file stands alone.
pub fn write_reports_csv<F: Scalar, W: Write>(
    sink: W,
    reports: &[VariantReport<F>],
    digest: &str,
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(REPORT_COLUMNS)?;
    for r in reports {
        let t = &r.token_means;
        w.write_record([
            r.variant_id.clone(),
            r.scene_count.to_string(),
            r.evaluated.to_string(),
            r.contentfulness_mean.to_string(),
            r.tc_mean.to_string(),
            r.og_mean.to_string(),
            r.f1_mean.to_string(),
            r.f1_std.to_string(),
            r.cv.to_string(),
            r.perfect_pct.to_string(),
            r.low_pct.to_string(),
            r.err_pct.to_string(),
            t.thought.to_string(),
            t.input.to_string(),
            t.output.to_string(),
            t.total.to_string(),
            r.tokens_consistent.to_string(),
            r.hallucination_rate.to_string(),
            r.generic_subject_pct.map(|v| v.to_string()).unwrap_or_default(),
            digest.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ScalingRow<F> {
    pub variant_id: String,
    pub thought_mean: F,
    pub contentfulness_mean: F,
    pub f1_mean: F,
}

/// Rows ordered by mean thought tokens, ties broken by variant id.
pub fn scaling_table<F: Scalar>(reports: &[VariantReport<F>]) -> Result<Vec<ScalingRow<F>>, ReportError> {
    if reports.len() < 2 {
        return Err(ReportError::TooFewReports(reports.len()));
    }
    let mut rows: Vec<ScalingRow<F>> = reports
        .iter()
        .map(|r| ScalingRow {
            variant_id: r.variant_id.clone(),
            thought_mean: r.token_means.thought,
            contentfulness_mean: r.contentfulness_mean,
            f1_mean: r.f1_mean,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.thought_mean
            .partial_cmp(&b.thought_mean)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.variant_id.cmp(&b.variant_id))
    });
    Ok(rows)
}

pub fn write_scaling_csv<F: Scalar, W: Write>(
    sink: W,
    rows: &[ScalingRow<F>],
    digest: &str,
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["variant_id", "thought_mean", "contentfulness_mean", "f1_mean", "digest"])?;
    for r in rows {
        w.write_record([
            r.variant_id.clone(),
            r.thought_mean.to_string(),
            r.contentfulness_mean.to_string(),
            r.f1_mean.to_string(),
            digest.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
