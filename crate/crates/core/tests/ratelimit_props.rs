use std::time::Duration;

use maintbench_core::ratelimit::{classify_status, Backoff, ErrorClass, SlidingWindow};
use proptest::prelude::*;

proptest! {
    #[test]
    fn no_window_exceeds_the_limit(limit in 1usize..8, gaps in prop::collection::vec(0u64..30_000, 1..80)) {
        let window = Duration::from_secs(60);
        let mut w = SlidingWindow::new(limit, window);
        let mut now = Duration::ZERO;
        let mut grants = Vec::new();
        for g in gaps {
            now += Duration::from_millis(g);
            loop {
                match w.try_acquire(now) {
                    Ok(()) => break,
                    Err(at) => {
                        prop_assert!(at > now);
                        now = at;
                    }
                }
            }
            grants.push(now);
        }
        for (i, &start) in grants.iter().enumerate() {
            let inside = grants[i..].iter().take_while(|&&t| t < start + window).count();
            prop_assert!(inside <= limit);
        }
    }

    #[test]
    fn backoff_doubles_until_capped(base_ms in 1u64..5_000, retry in 1u32..40) {
        let b = Backoff::new(Duration::from_millis(base_ms));
        let d = b.delay(retry);
        prop_assert!(d <= b.max);
        prop_assert!(b.delay(retry + 1) >= d);
        if retry < 10 {
            let want = Duration::from_millis(base_ms << (retry - 1));
            prop_assert_eq!(d, want.min(b.max));
        }
    }

    #[test]
    fn server_errors_retry(status in 500u16..600) {
        prop_assert_eq!(classify_status(status, ""), ErrorClass::Retryable);
    }
}
