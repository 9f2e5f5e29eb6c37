//! Bounded pool of scoped worker threads for independent jobs.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Worker count from `HINIMP_THREADS`, defaulting to the available
/// parallelism.
pub fn threads_from_env() -> usize {
    std::env::var("HINIMP_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `job(i)` for `i in 0..n` on up to `threads` workers and returns the
/// results in index order, so output never depends on scheduling.
pub fn run_indexed<T, F>(n: usize, threads: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 || cfg!(target_arch = "wasm32") {
        return (0..n).map(job).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = job(i);
                slots.lock().expect("no worker panicked")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|o| o.expect("every index ran"))
        .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn order_is_stable() {
        for t in [1, 2, 5] {
            assert_eq!(super::run_indexed(7, t, |i| i * i), vec![0, 1, 4, 9, 16, 25, 36]);
        }
    }
}
