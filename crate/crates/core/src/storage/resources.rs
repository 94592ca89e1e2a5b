//! Runtime state of shared resources.
//!
//! `SharedPool` is a fluid processor-sharing model used for links (fair
//! bandwidth sharing) and controllers (cores shared among jobs). Every job in
//! the pool progresses at the same per-job rate; the caller recomputes that
//! rate whenever membership or health changes and re-arms the single pending
//! completion event. `BlockServer` serves one block at a time in FIFO order,
//! which interleaves concurrent requests at block granularity.

use std::collections::VecDeque;

use crate::sim::EventId;

/// Work below this is treated as finished; absorbs rounding in `advance`.
const DONE_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) struct SharedPool<K> {
    jobs: Vec<(K, f64)>,
    last: f64,
    pub pending: Option<EventId>,
}

impl<K: Copy + PartialEq> SharedPool<K> {
    pub fn new() -> Self {
        SharedPool {
            jobs: Vec::new(),
            last: 0.0,
            pending: None,
        }
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    /// Progresses every job by `rate * (now - last)`; returns the elapsed time.
    pub fn advance(&mut self, now: f64, rate: f64) -> f64 {
        let dt = (now - self.last).max(0.0);
        if dt > 0.0 && rate > 0.0 {
            for job in &mut self.jobs {
                job.1 = (job.1 - rate * dt).max(0.0);
            }
        }
        self.last = now;
        dt
    }

    pub fn insert(&mut self, key: K, work: f64) {
        self.jobs.push((key, work.max(0.0)));
    }

    pub fn remove(&mut self, key: K) -> Option<f64> {
        let pos = self.jobs.iter().position(|j| j.0 == key)?;
        Some(self.jobs.remove(pos).1)
    }

    /// Time until the first job finishes at the given per-job rate.
    pub fn next_completion(&self, rate: f64) -> Option<f64> {
        if rate <= 0.0 {
            return None;
        }
        self.jobs
            .iter()
            .map(|j| j.1)
            .min_by(f64::total_cmp)
            .map(|w| w / rate)
    }

    /// Removes and returns jobs with no work left, in insertion order.
    pub fn take_finished(&mut self, scale: f64) -> Vec<K> {
        let tol = DONE_EPS * scale.max(1.0);
        let mut done = Vec::new();
        self.jobs.retain(|j| {
            if j.1 <= tol {
                done.push(j.0);
                false
            } else {
                true
            }
        });
        done
    }

    /// Removes the job with the least remaining work (first on ties).
    pub fn take_min(&mut self) -> Option<K> {
        let pos = self
            .jobs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(i, _)| i)?;
        Some(self.jobs.remove(pos).0)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ActiveBlock<K> {
    pub key: K,
    pub remaining: f64,
    pub size: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct BlockServer<K> {
    queue: VecDeque<K>,
    pub current: Option<ActiveBlock<K>>,
    last: f64,
    pub pending: Option<EventId>,
}

impl<K: Copy + PartialEq> BlockServer<K> {
    pub fn new() -> Self {
        BlockServer {
            queue: VecDeque::new(),
            current: None,
            last: 0.0,
            pending: None,
        }
    }

    /// Progresses the active block; returns megabytes moved.
    pub fn advance(&mut self, now: f64, rate: f64) -> f64 {
        let dt = (now - self.last).max(0.0);
        self.last = now;
        match self.current.as_mut() {
            Some(b) if dt > 0.0 && rate > 0.0 => {
                let moved = (rate * dt).min(b.remaining);
                b.remaining -= moved;
                moved
            }
            _ => 0.0,
        }
    }

    pub fn enqueue(&mut self, key: K) {
        self.queue.push_back(key);
    }

    pub fn is_idle(&self) -> bool {
        self.current.is_none()
    }

    pub fn pop_waiting(&mut self) -> Option<K> {
        self.queue.pop_front()
    }

    pub fn start(&mut self, key: K, size: f64) {
        debug_assert!(self.current.is_none());
        self.current = Some(ActiveBlock {
            key,
            remaining: size,
            size,
        });
    }

    pub fn finish_current(&mut self) -> Option<ActiveBlock<K>> {
        self.current.take()
    }

    /// Drops `key` from the server. Returns true if its block was active.
    pub fn remove(&mut self, key: K) -> bool {
        self.queue.retain(|&k| k != key);
        if self.current.is_some_and(|b| b.key == key) {
            self.current = None;
            true
        } else {
            false
        }
    }

    #[cfg(test)]
    fn len(&self) -> usize {
        self.queue.len() + usize::from(self.current.is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fair_share_two_equal_jobs() {
        // Two 100 MB transfers on a 100 MB/s link each see 50 MB/s.
        let mut pool = SharedPool::new();
        pool.insert(1u32, 100.0);
        pool.insert(2u32, 100.0);
        let rate = 100.0 / pool.len() as f64;
        let dt = pool.next_completion(rate).unwrap();
        assert_eq!(dt, 2.0);
        pool.advance(dt, rate);
        assert_eq!(pool.take_finished(100.0), vec![1, 2]);
    }

    #[test]
    fn staggered_jobs_reshare() {
        let mut pool = SharedPool::new();
        pool.insert('a', 100.0);
        pool.advance(0.5, 100.0);
        pool.insert('b', 100.0);
        // a has 50 left, shared rate 50 -> a finishes 1.0 s later.
        assert_eq!(pool.next_completion(50.0), Some(1.0));
        pool.advance(1.5, 50.0);
        assert_eq!(pool.take_finished(100.0), vec!['a']);
        assert_eq!(pool.next_completion(100.0), Some(0.5));
    }

    #[test]
    fn block_server_fifo() {
        let mut s = BlockServer::new();
        s.enqueue(1u8);
        s.enqueue(2u8);
        let k = s.pop_waiting().unwrap();
        s.start(k, 30.0);
        assert_eq!(s.advance(0.2, 50.0), 10.0);
        assert_eq!(s.advance(1.0, 50.0), 20.0);
        assert_eq!(s.finish_current().unwrap().key, 1);
        assert!(!s.remove(2) && s.len() == 0);
    }
}
