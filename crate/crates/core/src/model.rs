//! Scene records, variant configuration and record validation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;
use thoughtlens_gateway::ThinkingBudget;

/// Frames are sampled at 1 FPS with at most this many per scene.
pub const MAX_FRAMES: u32 = 10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StructuredOutput {
    #[serde(default)]
    pub subjects: Vec<String>,
    #[serde(default)]
    pub actions: Vec<String>,
    #[serde(default)]
    pub settings: Vec<String>,
    #[serde(default)]
    pub emotions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shot_type: Option<String>,
    /// Schema fields beyond the named ones, kept verbatim.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl StructuredOutput {
    /// Every text label in field order: the named lists, the shot type, then
    /// string leaves of `extra` in key order.
    pub fn labels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .subjects
            .iter()
            .chain(&self.actions)
            .chain(&self.settings)
            .chain(&self.emotions)
            .map(String::as_str)
            .collect();
        out.extend(self.shot_type.as_deref());
        for v in self.extra.values() {
            collect_strings(v, &mut out);
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.labels().is_empty()
    }
}

fn collect_strings<'a>(v: &'a Value, out: &mut Vec<&'a str>) {
    match v {
        Value::String(s) => out.push(s),
        Value::Array(items) => items.iter().for_each(|i| collect_strings(i, out)),
        Value::Object(map) => map.values().for_each(|i| collect_strings(i, out)),
        _ => {}
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub thought: u64,
    pub input: u64,
    pub output: u64,
    pub total: u64,
}

impl TokenUsage {
    pub fn new(thought: u64, input: u64, output: u64) -> Self {
        TokenUsage {
            thought,
            input,
            output,
            total: thought + input + output,
        }
    }

    pub fn component_sum(&self) -> u64 {
        self.thought + self.input + self.output
    }

    pub fn is_consistent(&self) -> bool {
        self.total == self.component_sum()
    }
}

impl From<thoughtlens_gateway::Usage> for TokenUsage {
    fn from(u: thoughtlens_gateway::Usage) -> Self {
        TokenUsage {
            thought: u.thought,
            input: u.input,
            output: u.output,
            total: u.total,
        }
    }
}

/// Upstream processing failure recorded with a scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub scene_id: String,
    pub video_id: String,
    pub variant_id: String,
    pub frame_count: u32,
    #[serde(default)]
    pub thought_stream: String,
    #[serde(default)]
    pub final_output: StructuredOutput,
    #[serde(default)]
    pub tokens: TokenUsage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
}

impl SceneRecord {
    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid {field}: {rule}")]
pub struct ValidationError {
    pub field: String,
    pub rule: String,
}

impl ValidationError {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        ValidationError {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

/// Returns the record unchanged when every invariant holds, otherwise the
/// first violation.
pub fn validate_record(record: SceneRecord) -> Result<SceneRecord, ValidationError> {
    for (field, value) in [
        ("scene_id", &record.scene_id),
        ("video_id", &record.video_id),
        ("variant_id", &record.variant_id),
    ] {
        if value.trim().is_empty() {
            return Err(ValidationError::new(field, "must be non-empty"));
        }
    }
    if record.error.is_none() && !(1..=MAX_FRAMES).contains(&record.frame_count) {
        return Err(ValidationError::new(
            "frame_count",
            format!("{} outside [1, {MAX_FRAMES}]", record.frame_count),
        ));
    }
    let out = &record.final_output;
    for (name, list) in [
        ("subjects", &out.subjects),
        ("actions", &out.actions),
        ("settings", &out.settings),
        ("emotions", &out.emotions),
    ] {
        if let Some(i) = list.iter().position(|l| l.trim().is_empty()) {
            return Err(ValidationError::new(
                format!("final_output.{name}[{i}]"),
                "label is blank",
            ));
        }
    }
    if out.shot_type.as_deref().is_some_and(|s| s.trim().is_empty()) {
        return Err(ValidationError::new("final_output.shot_type", "label is blank"));
    }
    for (key, v) in &out.extra {
        let mut leaves = Vec::new();
        collect_strings(v, &mut leaves);
        if leaves.iter().any(|l| l.trim().is_empty()) {
            return Err(ValidationError::new(
                format!("final_output.{key}"),
                "label is blank",
            ));
        }
    }
    if !record.tokens.is_consistent() {
        let t = record.tokens;
        return Err(ValidationError::new(
            "tokens.total",
            format!(
                "{} != thought {} + input {} + output {}",
                t.total, t.thought, t.input, t.output
            ),
        ));
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tier {
    Flash,
    FlashLite,
    Other(String),
}

impl Tier {
    pub fn as_str(&self) -> &str {
        match self {
            Tier::Flash => "flash",
            Tier::FlashLite => "flash-lite",
            Tier::Other(s) => s,
        }
    }
}

impl From<&str> for Tier {
    fn from(s: &str) -> Self {
        match s.trim().to_ascii_lowercase().replace(['_', ' '], "-").as_str() {
            "flash" => Tier::Flash,
            "flash-lite" | "lite" => Tier::FlashLite,
            _ => Tier::Other(s.trim().to_string()),
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Tier {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Tier {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Tier::from(String::deserialize(d)?.as_str()))
    }
}

/// Thinking budget: a fixed token allowance or the provider's dynamic mode.
/// Serialized as a positive integer or the string `"dynamic"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Budget {
    Fixed(u32),
    Dynamic,
}

impl Serialize for Budget {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Budget::Fixed(n) => s.serialize_u32(*n),
            Budget::Dynamic => s.serialize_str("dynamic"),
        }
    }
}

impl<'de> Deserialize<'de> for Budget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Tokens(u32),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Tokens(0) => Err(serde::de::Error::custom("fixed budget must be positive")),
            Raw::Tokens(n) => Ok(Budget::Fixed(n)),
            Raw::Word(w) if w.eq_ignore_ascii_case("dynamic") => Ok(Budget::Dynamic),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "unknown budget {w:?}; expected a token count or \"dynamic\""
            ))),
        }
    }
}

impl From<Budget> for ThinkingBudget {
    fn from(b: Budget) -> Self {
        match b {
            Budget::Fixed(n) => ThinkingBudget::Fixed(n),
            Budget::Dynamic => ThinkingBudget::Dynamic,
        }
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Fixed(n) => write!(f, "{n}"),
            Budget::Dynamic => f.write_str("dynamic"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariantConfig {
    pub variant_id: String,
    pub tier: Tier,
    pub budget: Budget,
}

impl VariantConfig {
    pub fn new(
        variant_id: impl Into<String>,
        tier: Tier,
        budget: Budget,
    ) -> Result<Self, ValidationError> {
        let variant_id = variant_id.into();
        if variant_id.trim().is_empty() {
            return Err(ValidationError::new("variant_id", "must be non-empty"));
        }
        if budget == Budget::Fixed(0) {
            return Err(ValidationError::new("budget", "fixed budget must be positive"));
        }
        Ok(VariantConfig {
            variant_id,
            tier,
            budget,
        })
    }

    /// Best-effort configuration from an identifier such as `lite-512` or
    /// `flash-dynamic`: `lite` selects Flash Lite, otherwise `flash` selects
    /// Flash; a run of digits is a fixed budget, anything else is dynamic.
    pub fn infer(variant_id: &str) -> Self {
        let lower = variant_id.to_ascii_lowercase();
        let tier = if lower.contains("lite") {
            Tier::FlashLite
        } else if lower.contains("flash") {
            Tier::Flash
        } else {
            Tier::Other(variant_id.to_string())
        };
        let digits: String = lower
            .chars()
            .skip_while(|c| !c.is_ascii_digit())
            .take_while(char::is_ascii_digit)
            .collect();
        let budget = match digits.parse::<u32>() {
            Ok(n) if n > 0 && !lower.contains("dynamic") => Budget::Fixed(n),
            _ => Budget::Dynamic,
        };
        VariantConfig {
            variant_id: variant_id.to_string(),
            tier,
            budget,
        }
    }
}
