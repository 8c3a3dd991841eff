//! Client for the external model services used by the evaluation harness.
//!
//! Every judge and collection call goes through a [`Gateway`], which layers a
//! content-addressed response cache, single-flight deduplication, bounded
//! upstream concurrency and retry with exponential backoff over a pluggable
//! [`Provider`]. The [`mock`] module supplies an offline provider so whole
//! pipelines can run without network access.

mod cache;
mod error;
mod gateway;
mod http;
pub mod mock;
mod provider;
mod request;
mod retry;

pub use cache::{CacheEnvelope, ResponseCache};
pub use error::{GatewayError, ProviderError};
pub use gateway::{Gateway, GatewayConfig, GatewayResponse, GatewayStats};
pub use http::{HttpProvider, Service};
pub use provider::{Provider, ProviderReply, Usage};
pub use request::{
    cache_key, CacheKey, CollectRequest, DecodeParams, JudgeRequest, Request, TemplateRef,
    ThinkingBudget, MAX_FRAMES,
};
pub use retry::RetryPolicy;
