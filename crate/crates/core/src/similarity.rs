//! Scene-by-scene thought-stream similarity between runs.
//!
//! Two backends share one interface. `Lexical` is the cosine of content-word
//! frequency vectors and runs offline; `Judge` asks the judge model for a
//! 0 to 1 score under the versioned similarity template.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use thoughtlens_gateway::{Gateway, GatewayError, TemplateRef};

use crate::contentfulness::{content_words, MetaPatternSet};
use crate::judge::{strip_code_fence, JudgeSettings, PromptTemplate};
use crate::model::{SceneRecord, VariantConfig};
use crate::num::Scalar;
use crate::stats::{mean, population_std};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimilarityError {
    #[error("scene ids differ: {a} vs {b}")]
    MismatchedScene { a: String, b: String },
    #[error("judge unavailable: {0}")]
    JudgeUnavailable(#[from] GatewayError),
    #[error("judge reply has no score in [0, 1]: {0}")]
    MalformedJudgeReply(String),
    #[error("{a} and {b} share no scenes")]
    EmptyIntersection { a: String, b: String },
    #[error("need at least two variants, got {0}")]
    TooFewVariants(usize),
    #[error("determinism check needs one variant, got {a} and {b}")]
    VariantMismatch { a: String, b: String },
}

/// How a score is computed.
#[derive(Clone, Copy)]
pub enum SimilarityMethod<'a> {
    Lexical {
        patterns: &'a MetaPatternSet,
    },
    Judge {
        gateway: &'a Gateway,
        settings: &'a JudgeSettings,
    },
}

impl SimilarityMethod<'_> {
    pub fn backend(&self) -> SimilarityBackend {
        match self {
            SimilarityMethod::Lexical { patterns } => SimilarityBackend::Lexical {
                patterns: patterns.version().to_string(),
            },
            SimilarityMethod::Judge { settings, .. } => SimilarityBackend::Judge {
                template: PromptTemplate::similarity().reference,
                model_id: settings.model_id.clone(),
                temperature: settings.params.temperature,
            },
        }
    }
}

/// Backend label recorded with every score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimilarityBackend {
    Lexical {
        patterns: String,
    },
    Judge {
        template: TemplateRef,
        model_id: String,
        temperature: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SimilarityScore<F> {
    pub scene_id: String,
    pub variant_a: String,
    pub variant_b: String,
    pub score: F,
    /// Set when a lexical comparison had no content words on either side.
    pub degenerate: bool,
}

fn frequencies(words: Vec<String>) -> HashMap<String, usize> {
    let mut freq = HashMap::new();
    for w in words {
        *freq.entry(w.to_lowercase()).or_insert(0) += 1;
    }
    freq
}

/// Cosine similarity of content-word counts; `(score, degenerate)`.
pub fn lexical_similarity<F: Scalar>(a: &str, b: &str, patterns: &MetaPatternSet) -> (F, bool) {
    let fa = frequencies(content_words(a, patterns));
    let fb = frequencies(content_words(b, patterns));
    if fa.is_empty() || fb.is_empty() {
        return (F::zero(), true);
    }
    // Integer dot products keep the result exact up to the final division.
    let dot: u128 = fa
        .iter()
        .filter_map(|(w, &ca)| fb.get(w).map(|&cb| (ca * cb) as u128))
        .sum();
    let norm = |f: &HashMap<String, usize>| f.values().map(|&c| (c * c) as u128).sum::<u128>();
    let (na, nb) = (norm(&fa), norm(&fb));
    let score = if dot * dot == na * nb {
        F::one()
    } else {
        let num = F::from_u128(dot).expect("count fits scalar");
        let den = (F::from_u128(na).expect("count fits scalar")
            * F::from_u128(nb).expect("count fits scalar"))
        .sqrt();
        (num / den).min(F::one())
    };
    (score, false)
}

fn judge_similarity<F: Scalar>(
    a: &str,
    b: &str,
    gateway: &Gateway,
    settings: &JudgeSettings,
) -> Result<F, SimilarityError> {
    #[derive(Deserialize)]
    struct Reply {
        score: f64,
    }
    let reply = PromptTemplate::similarity().call(
        gateway,
        settings,
        &[("trace_a", a), ("trace_b", b)],
    )?;
    let body = strip_code_fence(&reply);
    match serde_json::from_str::<Reply>(body) {
        Ok(Reply { score }) if (0.0..=1.0).contains(&score) => Ok(F::lit(score)),
        _ => Err(SimilarityError::MalformedJudgeReply(
            body.chars().take(120).collect(),
        )),
    }
}

/// Scores one scene's traces from two runs.
pub fn pairwise_similarity<F: Scalar>(
    a: &SceneRecord,
    b: &SceneRecord,
    method: SimilarityMethod<'_>,
) -> Result<SimilarityScore<F>, SimilarityError> {
    if a.scene_id != b.scene_id {
        return Err(SimilarityError::MismatchedScene {
            a: a.scene_id.clone(),
            b: b.scene_id.clone(),
        });
    }
    let (score, degenerate) = match method {
        SimilarityMethod::Lexical { patterns } => {
            lexical_similarity(&a.thought_stream, &b.thought_stream, patterns)
        }
        SimilarityMethod::Judge { gateway, settings } => (
            judge_similarity(&a.thought_stream, &b.thought_stream, gateway, settings)?,
            false,
        ),
    };
    Ok(SimilarityScore {
        scene_id: a.scene_id.clone(),
        variant_a: a.variant_id.clone(),
        variant_b: b.variant_id.clone(),
        score,
        degenerate,
    })
}

/// Grouping of a variant pair, following how runs relate to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairGroup {
    CrossTier,
    WithinTier,
    Rerun,
}

impl PairGroup {
    pub fn classify(a: &str, b: &str) -> Self {
        let (ca, cb) = (VariantConfig::infer(a), VariantConfig::infer(b));
        if ca.tier != cb.tier {
            PairGroup::CrossTier
        } else if ca.budget == cb.budget {
            PairGroup::Rerun
        } else {
            PairGroup::WithinTier
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PairGroup::CrossTier => "cross-tier",
            PairGroup::WithinTier => "within-tier",
            PairGroup::Rerun => "rerun",
        }
    }
}

/// Error-free records present in both runs, paired and sorted by scene id.
/// Also returns how many usable scenes were left unpaired.
fn shared_scenes<'r>(
    a: &'r [SceneRecord],
    b: &'r [SceneRecord],
) -> (Vec<(&'r SceneRecord, &'r SceneRecord)>, usize) {
    let index: HashMap<&str, &SceneRecord> = b
        .iter()
        .filter(|r| !r.is_error())
        .map(|r| (r.scene_id.as_str(), r))
        .collect();
    let usable_a = a.iter().filter(|r| !r.is_error()).count();
    let mut pairs: Vec<_> = a
        .iter()
        .filter(|r| !r.is_error())
        .filter_map(|ra| index.get(ra.scene_id.as_str()).map(|rb| (ra, *rb)))
        .collect();
    pairs.sort_by(|x, y| x.0.scene_id.cmp(&y.0.scene_id));
    let unshared = usable_a + index.len() - 2 * pairs.len();
    (pairs, unshared)
}

fn score_all<F: Scalar>(
    pairs: &[(&SceneRecord, &SceneRecord)],
    method: SimilarityMethod<'_>,
) -> Result<Vec<SimilarityScore<F>>, SimilarityError> {
    pairs
        .par_iter()
        .map(|(a, b)| pairwise_similarity(a, b, method))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct MatrixRow<F> {
    pub variant_a: String,
    pub variant_b: String,
    pub group: PairGroup,
    pub shared_scenes: usize,
    pub unshared_scenes: usize,
    /// `None` when the pair could not be scored; see `error`.
    pub mean: Option<F>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SimilarityMatrix<F> {
    pub backend: SimilarityBackend,
    /// Rows grouped cross-tier, within-tier, rerun, then by variant ids.
    pub rows: Vec<MatrixRow<F>>,
}

impl<F: Scalar> SimilarityMatrix<F> {
    /// CSV with header `group,variant_a,variant_b,shared_scenes,unshared_scenes,mean`.
    /// Unscored pairs leave `mean` empty.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([
            "group",
            "variant_a",
            "variant_b",
            "shared_scenes",
            "unshared_scenes",
            "mean",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.group.as_str().to_string(),
                r.variant_a.clone(),
                r.variant_b.clone(),
                r.shared_scenes.to_string(),
                r.unshared_scenes.to_string(),
                r.mean.map(|m| m.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean similarity for every unordered pair of variants. A pair without
/// shared scenes is reported in its row instead of failing the matrix;
/// judge failures are fatal.
pub fn variant_similarity_matrix<F: Scalar>(
    runs: &BTreeMap<String, Vec<SceneRecord>>,
    method: SimilarityMethod<'_>,
) -> Result<SimilarityMatrix<F>, SimilarityError> {
    if runs.len() < 2 {
        return Err(SimilarityError::TooFewVariants(runs.len()));
    }
    let ids: Vec<&String> = runs.keys().collect();
    let mut rows = Vec::new();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            let (pairs, unshared) = shared_scenes(&runs[*a], &runs[*b]);
            let mut row = MatrixRow {
                variant_a: a.to_string(),
                variant_b: b.to_string(),
                group: PairGroup::classify(a, b),
                shared_scenes: pairs.len(),
                unshared_scenes: unshared,
                mean: None,
                error: None,
            };
            if pairs.is_empty() {
                row.error = Some(
                    SimilarityError::EmptyIntersection {
                        a: a.to_string(),
                        b: b.to_string(),
                    }
                    .to_string(),
                );
            } else {
                let scores: Vec<F> = score_all(&pairs, method)?
                    .into_iter()
                    .map(|s| s.score)
                    .collect();
                row.mean = mean(&scores);
            }
            rows.push(row);
        }
    }
    rows.sort_by(|x, y| {
        (x.group, &x.variant_a, &x.variant_b).cmp(&(y.group, &y.variant_a, &y.variant_b))
    });
    Ok(SimilarityMatrix {
        backend: method.backend(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct DeterminismReport<F> {
    pub variant_id: String,
    pub backend: SimilarityBackend,
    pub threshold: F,
    pub shared_scenes: usize,
    pub unshared_scenes: usize,
    pub mean: F,
    pub std: F,
    /// Scenes scoring strictly below the threshold, by scene id.
    pub flagged: Vec<String>,
    pub scores: Vec<SimilarityScore<F>>,
}

/// Compares two runs of the same variant scene by scene.
pub fn determinism_report<F: Scalar>(
    run_1: &[SceneRecord],
    run_2: &[SceneRecord],
    method: SimilarityMethod<'_>,
    threshold: F,
) -> Result<DeterminismReport<F>, SimilarityError> {
    let variant = |run: &[SceneRecord]| run.first().map(|r| r.variant_id.clone()).unwrap_or_default();
    let (va, vb) = (variant(run_1), variant(run_2));
    if let Some(other) = run_1.iter().chain(run_2).find(|r| r.variant_id != va) {
        return Err(SimilarityError::VariantMismatch {
            a: va,
            b: other.variant_id.clone(),
        });
    }
    let (pairs, unshared) = shared_scenes(run_1, run_2);
    if pairs.is_empty() {
        return Err(SimilarityError::EmptyIntersection { a: va, b: vb });
    }
    let scores = score_all::<F>(&pairs, method)?;
    let values: Vec<F> = scores.iter().map(|s| s.score).collect();
    Ok(DeterminismReport {
        variant_id: va,
        backend: method.backend(),
        threshold,
        shared_scenes: pairs.len(),
        unshared_scenes: unshared,
        mean: mean(&values).expect("non-empty"),
        std: population_std(&values).expect("non-empty"),
        flagged: scores
            .iter()
            .filter(|s| s.score < threshold)
            .map(|s| s.scene_id.clone())
            .collect(),
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{StructuredOutput, TokenUsage};
    use std::sync::Arc;
    use thoughtlens_gateway::mock::MockProvider;
    use thoughtlens_gateway::GatewayConfig;

    fn rec(id: &str, variant: &str, trace: &str) -> SceneRecord {
        SceneRecord {
            scene_id: id.into(),
            video_id: "v".into(),
            variant_id: variant.into(),
            frame_count: 2,
            thought_stream: trace.into(),
            final_output: StructuredOutput::default(),
            tokens: TokenUsage::new(1, 1, 1),
            error: None,
        }
    }

    fn lexical(p: &MetaPatternSet) -> SimilarityMethod<'_> {
        SimilarityMethod::Lexical { patterns: p }
    }

    #[test]
    fn lexical_identity_and_orthogonality() {
        let p = MetaPatternSet::default();
        let t = "A woman sits at a desk typing on a laptop.";
        assert_eq!(lexical_similarity::<f64>(t, t, &p), (1.0, false));
        assert_eq!(
            lexical_similarity::<f64>("dogs chase cars", "woman sits desk", &p),
            (0.0, false)
        );
        assert_eq!(lexical_similarity::<f64>("Let me think.", t, &p), (0.0, true));
    }

    #[test]
    fn lexical_is_symmetric() {
        let p = MetaPatternSet::default();
        let a = "A dog chases a ball in the park.";
        let b = "The dog sleeps in the park near a ball and a bench.";
        let (x, _) = lexical_similarity::<f64>(a, b, &p);
        let (y, _) = lexical_similarity::<f64>(b, a, &p);
        assert_eq!(x, y);
        assert!(x > 0.0 && x < 1.0);
    }

    #[test]
    fn mismatched_scene() {
        let p = MetaPatternSet::default();
        assert!(matches!(
            pairwise_similarity::<f64>(&rec("1", "x", "a"), &rec("2", "x", "a"), lexical(&p)),
            Err(SimilarityError::MismatchedScene { .. })
        ));
    }

    #[test]
    fn judge_backend_parses_score() {
        let gw = Gateway::new(
            Arc::new(MockProvider::fixed(r#"{"score": 0.75}"#)),
            GatewayConfig::default(),
        )
        .unwrap();
        let s = JudgeSettings::default();
        let m = SimilarityMethod::Judge { gateway: &gw, settings: &s };
        let r = pairwise_similarity::<f64>(&rec("1", "a", "x"), &rec("1", "b", "y"), m).unwrap();
        assert_eq!(r.score, 0.75);
        assert!(matches!(m.backend(), SimilarityBackend::Judge { .. }));

        let bad = Gateway::new(
            Arc::new(MockProvider::fixed(r#"{"score": 3}"#)),
            GatewayConfig::default(),
        )
        .unwrap();
        let m = SimilarityMethod::Judge { gateway: &bad, settings: &s };
        assert!(matches!(
            pairwise_similarity::<f64>(&rec("1", "a", "x"), &rec("1", "b", "y"), m),
            Err(SimilarityError::MalformedJudgeReply(_))
        ));
    }

    #[test]
    fn matrix_counts_and_groups() {
        let p = MetaPatternSet::default();
        let t = "A cat sleeps on a sofa.";
        let mut runs = BTreeMap::new();
        for v in ["flash-128", "flash-dynamic", "lite-512"] {
            runs.insert(
                v.to_string(),
                vec![rec("s1", v, t), rec("s2", v, t), rec(&format!("only-{v}"), v, t)],
            );
        }
        let m = variant_similarity_matrix::<f64>(&runs, lexical(&p)).unwrap();
        assert_eq!(m.rows.len(), 3);
        assert!(m.rows.iter().all(|r| r.shared_scenes == 2 && r.mean == Some(1.0)));
        assert_eq!(m.rows[0].group, PairGroup::CrossTier);
        assert_eq!(m.rows[2].group, PairGroup::WithinTier);
        assert_eq!(m.rows[0].unshared_scenes, 2);
    }

    #[test]
    fn empty_intersection_is_reported_per_pair() {
        let p = MetaPatternSet::default();
        let mut runs = BTreeMap::new();
        runs.insert("flash-128".to_string(), vec![rec("a", "flash-128", "cat")]);
        runs.insert("lite-128".to_string(), vec![rec("b", "lite-128", "cat")]);
        let m = variant_similarity_matrix::<f64>(&runs, lexical(&p)).unwrap();
        assert_eq!(m.rows[0].mean, None);
        assert!(m.rows[0].error.is_some());
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with("cross-tier,flash-128,lite-128,0,2,\n"));
    }

    #[test]
    fn determinism_identical_and_one_divergent() {
        let p = MetaPatternSet::default();
        let v = "flash-dynamic";
        let run: Vec<_> = (0..10)
            .map(|i| rec(&format!("s{i:02}"), v, "A dog chases a ball."))
            .collect();
        let r = determinism_report::<f64>(&run, &run, lexical(&p), 0.5).unwrap();
        assert_eq!((r.mean, r.std), (1.0, 0.0));
        assert!(r.flagged.is_empty());

        let mut other = run.clone();
        other[3].thought_stream = "Woman sits desk.".into();
        let r = determinism_report::<f64>(&run, &other, lexical(&p), 0.5).unwrap();
        assert_eq!(r.mean, 0.9);
        assert_eq!(r.flagged, ["s03"]);
        assert!(matches!(
            determinism_report::<f64>(&run, &[rec("s00", "x", "t")], lexical(&p), 0.5),
            Err(SimilarityError::VariantMismatch { .. })
        ));
    }

    #[test]
    fn pair_group_classification() {
        assert_eq!(PairGroup::classify("lite-1024", "flash-dynamic"), PairGroup::CrossTier);
        assert_eq!(PairGroup::classify("flash-128", "flash-dynamic"), PairGroup::WithinTier);
        assert_eq!(PairGroup::classify("flash-dynamic", "flash-dynamic-rerun"), PairGroup::Rerun);
    }
}
