//! Fixed-width worker pool over scoped threads.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Pool width: `KFL_THREADS` if set and positive, else the available parallelism.
pub fn width() -> usize {
    let hw = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var("KFL_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(k) if k > 0 => k,
        _ => hw,
    }
}

/// Runs `f` on every job with at most `width` workers. Results keep the job
/// order. A panicking job yields `Err` with the panic message and leaves the
/// other jobs untouched.
pub fn map<T, R, F>(jobs: Vec<T>, width: usize, f: F) -> Vec<Result<R, String>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let total = jobs.len();
    let queue: Mutex<Vec<Option<T>>> = Mutex::new(jobs.into_iter().map(Some).collect());
    let slots: Mutex<Vec<Option<Result<R, String>>>> = Mutex::new((0..total).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = width.max(1).min(total.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= total {
                    break;
                }
                let job = queue.lock().unwrap()[i].take().expect("job taken twice");
                let out = catch_unwind(AssertUnwindSafe(|| f(job))).map_err(|e| {
                    e.downcast_ref::<String>()
                        .cloned()
                        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "worker panicked".into())
                });
                slots.lock().unwrap()[i] = Some(out);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("job not run")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_order_at_any_width() {
        let jobs: Vec<u64> = (0..37).collect();
        let one: Vec<u64> = map(jobs.clone(), 1, |x| x * x).into_iter().map(Result::unwrap).collect();
        let four: Vec<u64> = map(jobs, 4, |x| x * x).into_iter().map(Result::unwrap).collect();
        assert_eq!(one, four);
        assert_eq!(one[6], 36);
    }

    #[test]
    fn a_panicking_job_is_isolated() {
        let out = map(vec![1, 2, 3], 2, |x| {
            if x == 2 {
                panic!("boom");
            }
            x
        });
        assert_eq!(out[0], Ok(1));
        assert_eq!(out[1], Err("boom".to_string()));
        assert_eq!(out[2], Ok(3));
    }

    #[test]
    fn empty_job_list() {
        let out: Vec<Result<u8, String>> = map(Vec::<u8>::new(), 3, |x| x);
        assert!(out.is_empty());
    }
}
