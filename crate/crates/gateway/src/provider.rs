use serde::{Deserialize, Serialize};

use crate::error::ProviderError;
use crate::request::Request;

/// Token usage reported by the provider for one call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub thought: u64,
    pub input: u64,
    pub output: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderReply {
    pub body: String,
    pub usage: Option<Usage>,
}

impl ProviderReply {
    pub fn text(body: impl Into<String>) -> Self {
        ProviderReply {
            body: body.into(),
            usage: None,
        }
    }
}

/// One upstream service adapter. Implementations translate a [`Request`]
/// into the provider's wire format and back; they perform exactly one
/// attempt per call and leave retries to the gateway.
pub trait Provider: Send + Sync {
    fn send(&self, req: &Request) -> Result<ProviderReply, ProviderError>;
}
