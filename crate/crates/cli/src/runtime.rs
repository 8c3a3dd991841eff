use std::sync::Arc;

use anyhow::{Context, Result};
use rayon::{ThreadPool, ThreadPoolBuilder};
use thoughtlens::contentfulness::MetaPatternSet;
use thoughtlens::entities::GenericLexicon;
use thoughtlens_gateway::{Gateway, GatewayConfig, HttpProvider, Provider, RetryPolicy, Service};

use crate::config::{Provenance, RunConfig};
use crate::mock;

/// Resources shared by every command, built once from the resolved config.
pub struct Runtime {
    pub patterns: MetaPatternSet,
    pub lexicon: GenericLexicon,
    pub provenance: Provenance,
    pub pool: ThreadPool,
}

impl Runtime {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let patterns = cfg.patterns()?;
        let lexicon = cfg.lexicon()?;
        let provenance = Provenance::new(cfg, &patterns, &lexicon);
        let pool = ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .context("cannot start worker pool")?;
        Ok(Runtime {
            patterns,
            lexicon,
            provenance,
            pool,
        })
    }
}

/// Gateway for one upstream service: the mock provider in mock mode,
/// otherwise the HTTP adapter configured from the environment.
pub fn gateway(cfg: &RunConfig, service: Service) -> Result<Gateway> {
    let provider: Arc<dyn Provider> = if cfg.mock {
        Arc::new(mock::provider())
    } else {
        Arc::new(HttpProvider::from_env(service)?)
    };
    let cache_dir = cfg.cache_dir.as_ref().map(|d| {
        d.join(match service {
            Service::Judge => "judge",
            Service::Collect => "collect",
        })
    });
    let config = GatewayConfig {
        max_in_flight: cfg.max_in_flight,
        retry: RetryPolicy {
            max_attempts: cfg.max_attempts,
            ..RetryPolicy::default()
        },
        cache_dir,
    };
    Ok(Gateway::new(provider, config)?)
}
