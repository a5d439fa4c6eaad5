//! Clock-free request pacing and retry policy.
//!
//! Time is passed in as a `Duration` since an arbitrary origin, so the same
//! state machine runs against a wall clock or a virtual one.

use alloc::collections::VecDeque;
use core::time::Duration;

use crate::model::FailureKind;

pub const WINDOW: Duration = Duration::from_secs(60);

/// Sliding-window limiter: at most `limit` grants in any window of length
/// `window`.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    limit: usize,
    window: Duration,
    grants: VecDeque<Duration>,
}

impl SlidingWindow {
    pub fn per_minute(limit: u32) -> Self {
        Self::new(limit.max(1) as usize, WINDOW)
    }

    pub fn new(limit: usize, window: Duration) -> Self {
        SlidingWindow { limit: limit.max(1), window, grants: VecDeque::new() }
    }

    /// Records a grant at `now`, or returns the earliest instant at which one
    /// would be allowed.
    pub fn try_acquire(&mut self, now: Duration) -> Result<(), Duration> {
        while self.grants.front().is_some_and(|&t| t + self.window <= now) {
            self.grants.pop_front();
        }
        if self.grants.len() < self.limit {
            self.grants.push_back(now);
            Ok(())
        } else {
            Err(self.grants[0] + self.window)
        }
    }
}

/// Exponential backoff: `base · 2^(retry-1)`, capped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Backoff {
    pub base: Duration,
    pub max: Duration,
}

impl Backoff {
    pub fn new(base: Duration) -> Self {
        Backoff { base, max: Duration::from_secs(60) }
    }

    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base.saturating_mul(factor).min(self.max)
    }
}

/// How a failed request should be handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Timeouts, rate limiting, server errors.
    Retryable,
    /// Authentication and invalid requests.
    Fatal(FailureKind),
}

/// Classifies an HTTP status, with the response body used to spot
/// context-length overruns.
pub fn classify_status(status: u16, body: &str) -> ErrorClass {
    let lower = body.to_ascii_lowercase();
    let over_limit =
        ["context_length", "context length", "maximum context", "too many tokens", "max_tokens", "token limit"]
            .iter()
            .any(|p| lower.contains(p));
    match status {
        413 => ErrorClass::Fatal(FailureKind::OverLimit),
        400 | 422 if over_limit => ErrorClass::Fatal(FailureKind::OverLimit),
        408 | 425 | 429 | 500..=599 => ErrorClass::Retryable,
        _ => ErrorClass::Fatal(FailureKind::Transport),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: u64) -> Duration {
        Duration::from_secs(x)
    }

    #[test]
    fn window_blocks_until_oldest_expires() {
        let mut w = SlidingWindow::new(2, s(60));
        assert!(w.try_acquire(s(0)).is_ok());
        assert!(w.try_acquire(s(10)).is_ok());
        assert_eq!(w.try_acquire(s(20)), Err(s(60)));
        assert!(w.try_acquire(s(60)).is_ok());
        assert_eq!(w.try_acquire(s(61)), Err(s(70)));
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let b = Backoff::new(Duration::from_millis(1000));
        assert_eq!(b.delay(1), s(1));
        assert_eq!(b.delay(2), s(2));
        assert_eq!(b.delay(3), s(4));
        assert_eq!(b.delay(40), s(60));
    }

    #[test]
    fn status_classes() {
        assert_eq!(classify_status(429, ""), ErrorClass::Retryable);
        assert_eq!(classify_status(503, ""), ErrorClass::Retryable);
        assert_eq!(classify_status(401, ""), ErrorClass::Fatal(FailureKind::Transport));
        assert_eq!(classify_status(400, "bad json"), ErrorClass::Fatal(FailureKind::Transport));
        assert_eq!(
            classify_status(400, "This model's maximum context length is 8192 tokens"),
            ErrorClass::Fatal(FailureKind::OverLimit)
        );
        assert_eq!(classify_status(413, ""), ErrorClass::Fatal(FailureKind::OverLimit));
    }
}
