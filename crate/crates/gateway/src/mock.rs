//! Offline provider for tests and `--mock` runs.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use crate::error::ProviderError;
use crate::provider::{Provider, ProviderReply};
use crate::request::Request;

type Responder = Box<dyn Fn(&Request) -> Result<ProviderReply, ProviderError> + Send + Sync>;

/// A provider answering from a closure or a fixed script, instrumented with
/// call and concurrency counters.
pub struct MockProvider {
    responder: Responder,
    script: Mutex<Option<VecDeque<Result<ProviderReply, ProviderError>>>>,
    latency: Duration,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
}

impl MockProvider {
    pub fn new(
        responder: impl Fn(&Request) -> Result<ProviderReply, ProviderError> + Send + Sync + 'static,
    ) -> Self {
        MockProvider {
            responder: Box::new(responder),
            script: Mutex::new(None),
            latency: Duration::ZERO,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
        }
    }

    /// Replies with a constant body.
    pub fn fixed(body: impl Into<String>) -> Self {
        let body = body.into();
        MockProvider::new(move |_| Ok(ProviderReply::text(body.clone())))
    }

    /// Plays back `outcomes` in order; once exhausted every call fails with
    /// a 500 status.
    pub fn scripted(outcomes: Vec<Result<ProviderReply, ProviderError>>) -> Self {
        let mock = MockProvider::new(|_| {
            Err(ProviderError::Status {
                status: 500,
                message: "mock script exhausted".into(),
            })
        });
        *mock.script.lock().unwrap() = Some(outcomes.into());
        mock
    }

    /// Holds every call for `latency` so concurrent callers overlap.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }
}

impl Provider for MockProvider {
    fn send(&self, req: &Request) -> Result<ProviderReply, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        if !self.latency.is_zero() {
            thread::sleep(self.latency);
        }
        let scripted = self
            .script
            .lock()
            .unwrap()
            .as_mut()
            .map(|s| s.pop_front());
        let out = match scripted {
            Some(Some(outcome)) => outcome,
            _ => (self.responder)(req),
        };
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        out
    }
}
