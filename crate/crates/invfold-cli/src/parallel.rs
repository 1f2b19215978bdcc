//! Thread-pool playout execution and stop signals.
//!
//! Leaf parallelism fans one search's playout batch across a rayon pool;
//! because every playout draws from an RNG stream derived from its ticket
//! alone, the merged batch is bit-identical whatever the worker count or
//! scheduling. Root parallelism (in [`crate::driver`]) instead races whole
//! independent searches and uses [`StopWhen`] to cancel the losers.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use invfold_core::{
    playout, rng_for_ticket, BatchExecutor, EvalContext, PlayoutJob, PlayoutResult, Policy,
    StopSignal,
};
use rayon::prelude::*;

/// A [`BatchExecutor`] that runs batches on a private rayon pool.
pub struct PoolExecutor {
    pool: rayon::ThreadPool,
}

impl PoolExecutor {
    /// A pool of exactly `workers` threads.
    pub fn new(workers: usize) -> Self {
        assert!(workers >= 1, "worker count must be at least 1");
        PoolExecutor {
            pool: rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .expect("thread pool construction only fails on resource exhaustion"),
        }
    }
}

impl BatchExecutor for PoolExecutor {
    fn run_batch(
        &self,
        ctx: &EvalContext<'_>,
        policies: &[&Policy],
        jobs: &[PlayoutJob],
    ) -> Vec<PlayoutResult> {
        // par_iter keeps result order aligned with job order, so the merge
        // downstream sees exactly the sequential ordering
        self.pool.install(|| {
            jobs.par_iter()
                .map(|job| {
                    let mut rng = rng_for_ticket(ctx.seed, job.ticket);
                    playout(ctx, policies[job.policy], &mut rng)
                })
                .collect()
        })
    }
}

/// Stops at a wall-clock deadline, on a shared cancellation flag, or both.
/// With neither set it never stops.
#[derive(Clone, Default)]
pub struct StopWhen {
    /// Absolute deadline.
    pub deadline: Option<Instant>,
    /// Cancellation flag shared between racing searches.
    pub cancel: Option<Arc<AtomicBool>>,
}

impl StopWhen {
    /// Stops at `deadline` only.
    pub fn at(deadline: Instant) -> Self {
        StopWhen {
            deadline: Some(deadline),
            cancel: None,
        }
    }
}

impl StopSignal for StopWhen {
    fn should_stop(&self) -> bool {
        if let Some(flag) = &self.cancel {
            if flag.load(Ordering::Relaxed) {
                return true;
            }
        }
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    #[test]
    fn stop_when_honors_flag_and_deadline() {
        let never = StopWhen::default();
        assert!(!never.should_stop());

        let past = StopWhen::at(Instant::now() - Duration::from_millis(1));
        assert!(past.should_stop());

        let flag = Arc::new(AtomicBool::new(false));
        let stop = StopWhen {
            deadline: Some(Instant::now() + Duration::from_secs(3600)),
            cancel: Some(flag.clone()),
        };
        assert!(!stop.should_stop());
        flag.store(true, Ordering::Relaxed);
        assert!(stop.should_stop());
    }
}
