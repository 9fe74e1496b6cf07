//! Fixed-size work pool over scoped threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use dnp_core::cascade::solve;
use dnp_core::{CascadeParams, ProblemSpec, Result, StageResult};

/// Applies `job` to every item on up to `jobs` threads; results keep input order.
pub fn map<T: Sync, R: Send>(items: &[T], jobs: usize, job: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = jobs.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&job).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(k) else { break };
                let r = job(item);
                slots.lock().expect("no worker panicked")[k] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

pub fn solve_all(
    specs: &[ProblemSpec],
    params: &CascadeParams,
    jobs: usize,
) -> Vec<Result<StageResult>> {
    map(specs, jobs, |s| solve(s, params))
}

pub fn default_jobs() -> usize {
    thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_order() {
        let items: Vec<u64> = (0..50).collect();
        for jobs in [1, 3, 8] {
            assert_eq!(
                map(&items, jobs, |x| x * x),
                items.iter().map(|x| x * x).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn empty_input() {
        let items: Vec<u8> = Vec::new();
        assert!(map(&items, 4, |x| *x).is_empty());
    }
}
