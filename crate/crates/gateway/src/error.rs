use std::time::Duration;

use thiserror::Error;

/// Failure reported by a provider adapter for a single upstream attempt.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("rate limited by provider")]
    RateLimited { retry_after: Option<Duration> },
    #[error("provider returned status {status}: {message}")]
    Status { status: u16, message: String },
    #[error("transport failure: {0}")]
    Transport(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Auth(_) => false,
            ProviderError::RateLimited { .. } | ProviderError::Transport(_) => true,
            ProviderError::Status { status, .. } => *status == 408 || *status >= 500,
        }
    }
}

/// Errors surfaced to gateway callers. Cloneable so that a single upstream
/// failure can be handed to every caller waiting on the same cache key.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited and retries are disabled")]
    RateLimited,
    #[error("gave up after {attempts} attempts: {last}")]
    ExhaustedRetries { attempts: u32, last: String },
    #[error("provider error (status {status}): {message}")]
    Provider { status: u16, message: String },
    #[error("cache i/o: {0}")]
    Cache(String),
    #[error("configuration: {0}")]
    Config(String),
}
