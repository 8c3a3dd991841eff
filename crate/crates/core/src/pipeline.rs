//! Per-scene evaluation: contentfulness, alignment and dominant entities.

use log::warn;
use thoughtlens_gateway::Gateway;

use crate::alignment::{align, CascadeConfig};
use crate::contentfulness::{contentfulness, MetaPatternSet};
use crate::entities::{dominant_entities, GenericLexicon};
use crate::extraction::{
    extract_items_deterministic_output, extract_items_deterministic_thought, extract_items_judge,
    AtomicItemSet, ExtractionError, ItemSource,
};
use crate::judge::JudgeSettings;
use crate::model::SceneRecord;
use crate::num::Scalar;
use crate::reporting::SceneMetrics;

#[derive(Clone, Copy)]
pub enum ExtractionMode<'a> {
    Deterministic,
    /// Judge-backed extraction. With `fallback`, a judge that stays
    /// unavailable after retries is replaced by the deterministic backend
    /// for that scene; the result records which backend was used.
    Judge {
        gateway: &'a Gateway,
        settings: &'a JudgeSettings,
        fallback: bool,
    },
}

pub struct Evaluator<'a, F> {
    pub patterns: &'a MetaPatternSet,
    pub lexicon: &'a GenericLexicon,
    pub cascade: CascadeConfig<F>,
    pub extraction: ExtractionMode<'a>,
}

impl<F: Scalar> Evaluator<'_, F> {
    fn thought_items(&self, record: &SceneRecord) -> Result<AtomicItemSet, ExtractionError> {
        let deterministic =
            || extract_items_deterministic_thought(&record.thought_stream, self.patterns);
        match self.extraction {
            ExtractionMode::Deterministic => Ok(deterministic()),
            ExtractionMode::Judge { .. } if record.thought_stream.trim().is_empty() => {
                Ok(deterministic())
            }
            ExtractionMode::Judge {
                gateway,
                settings,
                fallback,
            } => match extract_items_judge(&record.thought_stream, ItemSource::Thought, gateway, settings) {
                Err(ExtractionError::JudgeUnavailable(e)) if fallback => {
                    warn!("scene {}: judge unavailable ({e}); using deterministic thought items", record.scene_id);
                    Ok(deterministic())
                }
                other => other,
            },
        }
    }

    fn output_items(&self, record: &SceneRecord) -> Result<AtomicItemSet, ExtractionError> {
        let deterministic = || extract_items_deterministic_output(&record.final_output);
        match self.extraction {
            ExtractionMode::Deterministic => Ok(deterministic()),
            ExtractionMode::Judge { .. } if record.final_output.is_empty() => Ok(deterministic()),
            ExtractionMode::Judge {
                gateway,
                settings,
                fallback,
            } => {
                let text = serde_json::to_string(&record.final_output)
                    .expect("structured output encodes as JSON");
                match extract_items_judge(&text, ItemSource::Output, gateway, settings) {
                    Err(ExtractionError::JudgeUnavailable(e)) if fallback => {
                        warn!("scene {}: judge unavailable ({e}); using deterministic output items", record.scene_id);
                        Ok(deterministic())
                    }
                    other => other,
                }
            }
        }
    }

    /// Metrics for one record. Error records yield a row with no metrics.
    pub fn evaluate_scene(&self, record: &SceneRecord) -> Result<SceneMetrics<F>, ExtractionError> {
        let mut row = SceneMetrics {
            scene_id: record.scene_id.clone(),
            variant_id: record.variant_id.clone(),
            tokens: record.tokens,
            error: record.error.clone(),
            contentfulness: None,
            alignment: None,
            entity: None,
            entity_error: None,
        };
        if record.is_error() {
            return Ok(row);
        }
        row.contentfulness = Some(contentfulness(&record.thought_stream, self.patterns));
        let thought = self.thought_items(record)?;
        let output = self.output_items(record)?;
        row.alignment = Some(align(&thought, &output, &self.cascade));
        match dominant_entities(record, self.lexicon) {
            Ok(p) => row.entity = Some(p),
            Err(e) => row.entity_error = Some(e.to_string()),
        }
        Ok(row)
    }
}
