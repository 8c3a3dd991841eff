use std::time::Duration;

use rand::Rng;

/// Exponential backoff with jitter.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts including the first; 1 disables retries.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    /// When set, each delay is scaled by a uniform factor in [0.5, 1.0].
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
            jitter: true,
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
            jitter: false,
        }
    }

    /// Delay before retry number `retry` (1-based), never above `max_delay`
    /// unless the provider asked for a longer wait.
    pub fn delay<R: Rng + ?Sized>(
        &self,
        retry: u32,
        retry_after: Option<Duration>,
        rng: &mut R,
    ) -> Duration {
        let exp = retry.saturating_sub(1).min(31);
        let raw = self.base_delay.saturating_mul(1u32 << exp).min(self.max_delay);
        let scaled = if self.jitter && !raw.is_zero() {
            raw.mul_f64(rng.gen_range(0.5..=1.0))
        } else {
            raw
        };
        match retry_after {
            Some(hint) => scaled.max(hint),
            None => scaled,
        }
    }
}
