use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

/// Caps concurrent in-flight requests and, optionally, the request rate.
#[derive(Debug)]
pub struct Limiter {
    max_in_flight: usize,
    in_flight: Mutex<usize>,
    released: Condvar,
    bucket: Option<Mutex<TokenBucket>>,
}

#[derive(Debug)]
struct TokenBucket {
    rate_per_s: f64,
    capacity: f64,
    tokens: f64,
    last: Instant,
}

impl TokenBucket {
    /// Time to wait before a token is available; consumes it when zero.
    fn try_take(&mut self) -> Duration {
        let now = Instant::now();
        let elapsed = now.duration_since(self.last).as_secs_f64();
        self.tokens = (self.tokens + elapsed * self.rate_per_s).min(self.capacity);
        self.last = now;
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            Duration::ZERO
        } else {
            Duration::from_secs_f64((1.0 - self.tokens) / self.rate_per_s)
        }
    }
}

pub struct Permit<'a> {
    limiter: &'a Limiter,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self
            .limiter
            .in_flight
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.limiter.released.notify_one();
    }
}

impl Limiter {
    pub fn new(max_in_flight: usize) -> Self {
        Self {
            max_in_flight: max_in_flight.max(1),
            in_flight: Mutex::new(0),
            released: Condvar::new(),
            bucket: None,
        }
    }

    /// Token bucket with burst equal to one second of requests.
    pub fn with_rate(mut self, requests_per_s: f64) -> Self {
        if requests_per_s > 0.0 && requests_per_s.is_finite() {
            let capacity = requests_per_s.max(1.0);
            self.bucket = Some(Mutex::new(TokenBucket {
                rate_per_s: requests_per_s,
                capacity,
                tokens: capacity,
                last: Instant::now(),
            }));
        }
        self
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }

    pub fn acquire(&self) -> Permit<'_> {
        if let Some(bucket) = &self.bucket {
            loop {
                let wait = bucket.lock().unwrap_or_else(|e| e.into_inner()).try_take();
                if wait.is_zero() {
                    break;
                }
                std::thread::sleep(wait);
            }
        }
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.max_in_flight {
            n = self.released.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit { limiter: self }
    }
}

impl Default for Limiter {
    fn default() -> Self {
        Self::new(8)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn never_exceeds_cap() {
        let limiter = Arc::new(Limiter::new(3));
        let current = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..12)
            .map(|_| {
                let (limiter, current, peak) = (limiter.clone(), current.clone(), peak.clone());
                std::thread::spawn(move || {
                    let _permit = limiter.acquire();
                    let now = current.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    current.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 3);
        assert!(peak.load(Ordering::SeqCst) >= 1);
    }

    #[test]
    fn rate_limit_spaces_requests() {
        let limiter = Limiter::new(4).with_rate(50.0);
        let start = Instant::now();
        // 50 burst tokens, then 10 more at 50/s => at least ~0.2 s
        for _ in 0..60 {
            drop(limiter.acquire());
        }
        assert!(start.elapsed() >= Duration::from_millis(150));
    }
}
