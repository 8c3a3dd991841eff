use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use log::{debug, warn};

use crate::cache::{now_secs, CacheEnvelope, ResponseCache};
use crate::error::{GatewayError, ProviderError};
use crate::provider::{Provider, Usage};
use crate::request::{cache_key, CacheKey, Request};
use crate::retry::RetryPolicy;

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    /// Maximum upstream requests in flight at once.
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    /// Directory for the persistent cache; `None` keeps the cache in memory.
    pub cache_dir: Option<PathBuf>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            max_in_flight: 8,
            retry: RetryPolicy::default(),
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatewayResponse {
    pub body: String,
    pub usage: Option<Usage>,
    pub cache_hit: bool,
    /// Upstream attempts made for this call; 0 when served from cache.
    pub attempts: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GatewayStats {
    pub upstream_calls: u64,
    pub cache_hits: u64,
}

type Shared = Result<CacheEnvelope, GatewayError>;

#[derive(Default)]
struct Flight {
    outcome: Mutex<Option<Shared>>,
    done: Condvar,
}

impl Flight {
    fn wait(&self) -> Shared {
        let mut guard = self.outcome.lock().unwrap();
        while guard.is_none() {
            guard = self.done.wait(guard).unwrap();
        }
        guard.clone().unwrap()
    }

    fn publish(&self, outcome: Shared) {
        *self.outcome.lock().unwrap() = Some(outcome);
        self.done.notify_all();
    }
}

struct Permits {
    limit: usize,
    in_use: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_use.lock().unwrap();
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_use.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

/// Thread-safe front door for upstream model calls.
///
/// Identical concurrent requests share one upstream call (single flight);
/// successful responses are cached write-once under [`cache_key`]; at most
/// `max_in_flight` provider calls run at any moment.
pub struct Gateway {
    provider: Arc<dyn Provider>,
    retry: RetryPolicy,
    cache: ResponseCache,
    flights: Mutex<HashMap<CacheKey, Arc<Flight>>>,
    permits: Permits,
    sleeper: Sleeper,
    upstream_calls: AtomicU64,
    cache_hits: AtomicU64,
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>, config: GatewayConfig) -> Result<Self, GatewayError> {
        if config.max_in_flight == 0 {
            return Err(GatewayError::Config("max_in_flight must be at least 1".into()));
        }
        if config.retry.max_attempts == 0 {
            return Err(GatewayError::Config("max_attempts must be at least 1".into()));
        }
        let cache = match &config.cache_dir {
            Some(dir) => ResponseCache::on_disk(dir)?,
            None => ResponseCache::in_memory(),
        };
        Ok(Gateway {
            provider,
            retry: config.retry,
            cache,
            flights: Mutex::default(),
            permits: Permits {
                limit: config.max_in_flight,
                in_use: Mutex::new(0),
                freed: Condvar::new(),
            },
            sleeper: Arc::new(thread::sleep),
            upstream_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        })
    }

    /// Replaces the backoff sleep, e.g. to record delays in tests.
    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleeper = Arc::new(sleeper);
        self
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            upstream_calls: self.upstream_calls.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
        }
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    pub fn complete(&self, req: &Request) -> Result<GatewayResponse, GatewayError> {
        req.validate()?;
        let key = cache_key(req);
        if let Some(hit) = self.cache.get(&key)? {
            return Ok(self.hit(hit));
        }

        let (flight, leader) = {
            let mut flights = self.flights.lock().unwrap();
            match flights.get(&key) {
                Some(f) => (f.clone(), false),
                None => {
                    let f = Arc::new(Flight::default());
                    flights.insert(key.clone(), f.clone());
                    (f, true)
                }
            }
        };

        if !leader {
            debug!("joining in-flight request {key}");
            return flight.wait().map(|env| self.hit(env));
        }

        // A previous leader may have finished between our cache probe and
        // registering this flight.
        let outcome = match self.cache.get(&key) {
            Ok(Some(env)) => Ok((env, 0)),
            Ok(None) => self.fetch(req, &key),
            Err(e) => Err(e),
        };
        flight.publish(outcome.clone().map(|(env, _)| env));
        self.flights.lock().unwrap().remove(&key);

        outcome.map(|(env, attempts)| {
            if attempts == 0 {
                self.hit(env)
            } else {
                GatewayResponse {
                    body: env.body,
                    usage: env.tokens,
                    cache_hit: false,
                    attempts,
                }
            }
        })
    }

    fn hit(&self, env: CacheEnvelope) -> GatewayResponse {
        self.cache_hits.fetch_add(1, Ordering::SeqCst);
        GatewayResponse {
            body: env.body,
            usage: env.tokens,
            cache_hit: true,
            attempts: 0,
        }
    }

    fn fetch(&self, req: &Request, key: &CacheKey) -> Result<(CacheEnvelope, u32), GatewayError> {
        let mut rng = rand::thread_rng();
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = {
                let _permit = self.permits.acquire();
                self.upstream_calls.fetch_add(1, Ordering::SeqCst);
                self.provider.send(req)
            };
            let err = match result {
                Ok(reply) => {
                    let stored = self.cache.put(CacheEnvelope {
                        request_digest: key.clone(),
                        stored_at: now_secs(),
                        body: reply.body,
                        tokens: reply.usage,
                    })?;
                    return Ok((stored, attempt));
                }
                Err(e) => e,
            };
            if !err.is_retryable() {
                return Err(terminal(err));
            }
            if attempt >= self.retry.max_attempts {
                if self.retry.max_attempts == 1 {
                    if let ProviderError::RateLimited { .. } = err {
                        return Err(GatewayError::RateLimited);
                    }
                }
                return Err(GatewayError::ExhaustedRetries {
                    attempts: attempt,
                    last: err.to_string(),
                });
            }
            let hint = match &err {
                ProviderError::RateLimited { retry_after } => *retry_after,
                _ => None,
            };
            let delay = self.retry.delay(attempt, hint, &mut rng);
            warn!("attempt {attempt} failed ({err}); retrying in {delay:?}");
            (self.sleeper)(delay);
        }
    }
}

fn terminal(err: ProviderError) -> GatewayError {
    match err {
        ProviderError::Auth(msg) => GatewayError::Auth(msg),
        ProviderError::Status { status, message } => GatewayError::Provider { status, message },
        ProviderError::RateLimited { .. } => GatewayError::RateLimited,
        ProviderError::Transport(msg) => GatewayError::Provider {
            status: 0,
            message: msg,
        },
    }
}
