use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::GatewayError;

/// Upper bound on frames per collection request (1 FPS, capped at 10).
pub const MAX_FRAMES: usize = 10;

/// Identifies a versioned prompt template.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemplateRef {
    pub id: String,
    pub version: String,
}

impl TemplateRef {
    pub fn new(id: impl Into<String>, version: impl Into<String>) -> Self {
        TemplateRef {
            id: id.into(),
            version: version.into(),
        }
    }
}

impl fmt::Display for TemplateRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.id, self.version)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams {
            temperature: 0.0,
            max_output_tokens: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub template: TemplateRef,
    pub prompt: String,
    pub model_id: String,
    #[serde(default)]
    pub params: DecodeParams,
}

/// Token allowance for the reasoning trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "tokens", rename_all = "snake_case")]
pub enum ThinkingBudget {
    Fixed(u32),
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectRequest {
    /// Opaque image references, in presentation order.
    pub frames: Vec<String>,
    pub prompt: String,
    pub budget: ThinkingBudget,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "service", rename_all = "snake_case")]
pub enum Request {
    Judge(JudgeRequest),
    Collect(CollectRequest),
}

impl Request {
    pub fn model_id(&self) -> &str {
        match self {
            Request::Judge(r) => &r.model_id,
            Request::Collect(r) => &r.model_id,
        }
    }

    /// Template version participating in the cache key. Collection prompts
    /// are hashed verbatim and carry no template reference.
    pub fn template_version(&self) -> Option<&str> {
        match self {
            Request::Judge(r) => Some(&r.template.version),
            Request::Collect(_) => None,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.model_id().trim().is_empty() {
            return Err(GatewayError::InvalidRequest("model_id is empty".into()));
        }
        match self {
            Request::Judge(r) => {
                if r.template.version.trim().is_empty() {
                    return Err(GatewayError::InvalidRequest(
                        "template version is missing".into(),
                    ));
                }
                if !(r.params.temperature.is_finite() && r.params.temperature >= 0.0) {
                    return Err(GatewayError::InvalidRequest(
                        "temperature must be finite and non-negative".into(),
                    ));
                }
            }
            Request::Collect(r) => {
                if r.frames.is_empty() || r.frames.len() > MAX_FRAMES {
                    return Err(GatewayError::InvalidRequest(format!(
                        "frame count {} outside [1, {MAX_FRAMES}]",
                        r.frames.len()
                    )));
                }
                if let ThinkingBudget::Fixed(0) = r.budget {
                    return Err(GatewayError::InvalidRequest(
                        "fixed thinking budget must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

impl From<JudgeRequest> for Request {
    fn from(r: JudgeRequest) -> Self {
        Request::Judge(r)
    }
}

impl From<CollectRequest> for Request {
    fn from(r: CollectRequest) -> Self {
        Request::Collect(r)
    }
}

/// Hex-encoded SHA-256 digest identifying a request in the cache.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    model_id: &'a str,
    template_version: Option<&'a str>,
    body: &'a Request,
}

/// Digest over (model id, template version, canonical request body).
///
/// The canonical body is the request's JSON encoding with struct field order,
/// so identical requests collide and any field change (including frame order)
/// produces a different key.
pub fn cache_key(req: &Request) -> CacheKey {
    let material = KeyMaterial {
        model_id: req.model_id(),
        template_version: req.template_version(),
        body: req,
    };
    let bytes = serde_json::to_vec(&material).expect("request encodes as JSON");
    CacheKey(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn judge(version: &str) -> Request {
        Request::Judge(JudgeRequest {
            template: TemplateRef::new("extract-items", version),
            prompt: "list the items".into(),
            model_id: "judge-1".into(),
            params: DecodeParams::default(),
        })
    }

    fn collect(frames: &[&str]) -> Request {
        Request::Collect(CollectRequest {
            frames: frames.iter().map(|s| s.to_string()).collect(),
            prompt: "describe".into(),
            budget: ThinkingBudget::Fixed(128),
            model_id: "vlm".into(),
        })
    }

    #[test]
    fn same_request_same_key() {
        assert_eq!(cache_key(&judge("v1")), cache_key(&judge("v1")));
        assert_eq!(cache_key(&judge("v1")).as_str().len(), 64);
    }

    #[test]
    fn template_bump_changes_key() {
        assert_ne!(cache_key(&judge("v1")), cache_key(&judge("v2")));
    }

    #[test]
    fn frame_order_changes_key() {
        assert_ne!(
            cache_key(&collect(&["f0.jpg", "f1.jpg"])),
            cache_key(&collect(&["f1.jpg", "f0.jpg"]))
        );
    }

    #[test]
    fn decode_param_change_changes_key() {
        let mut r = judge("v1");
        if let Request::Judge(j) = &mut r {
            j.params.temperature = 0.7;
        }
        assert_ne!(cache_key(&r), cache_key(&judge("v1")));
    }

    #[test]
    fn validation_rules() {
        assert!(judge("v1").validate().is_ok());
        assert!(judge("").validate().is_err());
        assert!(collect(&[]).validate().is_err());
        let eleven: Vec<String> = (0..11).map(|i| format!("f{i}")).collect();
        let refs: Vec<&str> = eleven.iter().map(String::as_str).collect();
        assert!(collect(&refs).validate().is_err());
        assert!(collect(&refs[..10]).validate().is_ok());
        let zero = Request::Collect(CollectRequest {
            frames: vec!["a".into()],
            prompt: String::new(),
            budget: ThinkingBudget::Fixed(0),
            model_id: "vlm".into(),
        });
        assert!(zero.validate().is_err());
    }
}
