//! Dominant entity analysis: the primary subject, action and setting of each
//! scene, how often the subject is generic, and how dominant subjects shift
//! between two runs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::SceneRecord;
use crate::num::{count_ratio, percentage, Scalar};
use crate::text::normalize_item;

#[derive(Debug, Error)]
pub enum EntityError {
    #[error("scene {scene_id}: output has no {field}")]
    MissingField { scene_id: String, field: &'static str },
    #[error("scene {0} carries an upstream error")]
    ErrorRecord(String),
    #[error("no profiles given")]
    EmptyInput,
    #[error("the two runs share no scenes")]
    EmptyIntersection,
    #[error("lexicon must contain \"person\"")]
    LexiconMissingPerson,
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("lexicon: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityProfile {
    pub scene_id: String,
    pub dominant_subject: String,
    pub dominant_action: String,
    pub dominant_setting: String,
    pub subject_is_generic: bool,
}

/// Subject labels that name a person or group without being specific.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenericLexicon {
    pub version: String,
    pub labels: BTreeSet<String>,
}

impl GenericLexicon {
    pub fn new<I, S>(version: impl Into<String>, labels: I) -> Result<Self, EntityError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let labels: BTreeSet<String> = labels
            .into_iter()
            .map(|l| normalize_item(l.as_ref()))
            .filter(|l| !l.is_empty())
            .collect();
        if !labels.contains("person") {
            return Err(EntityError::LexiconMissingPerson);
        }
        Ok(GenericLexicon {
            version: version.into(),
            labels,
        })
    }

    pub fn default_v1() -> Self {
        GenericLexicon::new(
            "v1",
            ["person", "people", "man", "woman", "individual", "group", "figure"],
        )
        .expect("default lexicon contains person")
    }

    pub fn from_json(raw: &str) -> Result<Self, EntityError> {
        let parsed: GenericLexicon = serde_json::from_str(raw)?;
        GenericLexicon::new(parsed.version, parsed.labels)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EntityError> {
        GenericLexicon::from_json(&fs::read_to_string(path)?)
    }

    pub fn is_generic(&self, label: &str) -> bool {
        self.labels.contains(&normalize_item(label))
    }
}

impl Default for GenericLexicon {
    fn default() -> Self {
        GenericLexicon::default_v1()
    }
}

/// Picks the first-listed label of each field as the dominant one.
pub fn dominant_entities(
    record: &SceneRecord,
    lexicon: &GenericLexicon,
) -> Result<EntityProfile, EntityError> {
    if record.is_error() {
        return Err(EntityError::ErrorRecord(record.scene_id.clone()));
    }
    let first = |labels: &[String], field| {
        labels
            .iter()
            .map(|l| normalize_item(l))
            .find(|l| !l.is_empty())
            .ok_or_else(|| EntityError::MissingField {
                scene_id: record.scene_id.clone(),
                field,
            })
    };
    let out = &record.final_output;
    let subject = first(&out.subjects, "subjects")?;
    Ok(EntityProfile {
        scene_id: record.scene_id.clone(),
        subject_is_generic: lexicon.is_generic(&subject),
        dominant_subject: subject,
        dominant_action: first(&out.actions, "actions")?,
        dominant_setting: first(&out.settings, "settings")?,
    })
}

/// Percentage of profiles whose dominant subject is generic.
pub fn specificity_rate<F: Scalar>(profiles: &[EntityProfile]) -> Result<F, EntityError> {
    if profiles.is_empty() {
        return Err(EntityError::EmptyInput);
    }
    let generic = profiles.iter().filter(|p| p.subject_is_generic).count();
    Ok(percentage(generic, profiles.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ShiftRow<F> {
    pub label: String,
    pub freq_a: F,
    pub freq_b: F,
    /// `freq_a - freq_b`.
    pub delta: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct EntityShift<F> {
    pub shared_scenes: usize,
    pub only_a: usize,
    pub only_b: usize,
    /// Fraction of shared scenes with the same dominant subject.
    pub agreement: F,
    /// One row per label seen in either run, sorted by label.
    pub rows: Vec<ShiftRow<F>>,
}

impl<F: Scalar> EntityShift<F> {
    /// CSV with header `label,freq_a,freq_b,delta`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["label", "freq_a", "freq_b", "delta"])?;
        for r in &self.rows {
            w.write_record([
                r.label.clone(),
                r.freq_a.to_string(),
                r.freq_b.to_string(),
                r.delta.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Compares dominant-subject distributions over the scenes both runs share.
pub fn entity_shift<F: Scalar>(
    profiles_a: &[EntityProfile],
    profiles_b: &[EntityProfile],
) -> Result<EntityShift<F>, EntityError> {
    let by_id = |ps: &[EntityProfile]| -> HashMap<String, String> {
        ps.iter()
            .map(|p| (p.scene_id.clone(), p.dominant_subject.clone()))
            .collect()
    };
    let a = by_id(profiles_a);
    let b = by_id(profiles_b);
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut shared = 0;
    let mut agree = 0;
    for (id, sa) in &a {
        let Some(sb) = b.get(id) else { continue };
        shared += 1;
        agree += usize::from(sa == sb);
        counts.entry(sa).or_default().0 += 1;
        counts.entry(sb).or_default().1 += 1;
    }
    if shared == 0 {
        return Err(EntityError::EmptyIntersection);
    }
    let rows = counts
        .into_iter()
        .map(|(label, (ca, cb))| {
            let freq_a: F = count_ratio(ca, shared);
            let freq_b: F = count_ratio(cb, shared);
            ShiftRow {
                label: label.to_string(),
                freq_a,
                freq_b,
                delta: freq_a - freq_b,
            }
        })
        .collect();
    Ok(EntityShift {
        shared_scenes: shared,
        only_a: a.len() - shared,
        only_b: b.len() - shared,
        agreement: count_ratio(agree, shared),
        rows,
    })
}
