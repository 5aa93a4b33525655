//! Order-preserving parallel map over independent work items.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Environment fallback for the thread count.
pub const THREADS_ENV: &str = "ODEFLOW_THREADS";

/// `explicit`, else `ODEFLOW_THREADS`, else 1. Zero is rejected.
pub fn resolve_threads(explicit: Option<usize>) -> Result<usize, String> {
    let n = match explicit {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .map_err(|_| format!("{THREADS_ENV} must be a positive integer, got `{v}`"))?,
            Err(_) => 1,
        },
    };
    if n == 0 {
        return Err("thread count must be at least 1".to_string());
    }
    Ok(n)
}

/// `items.map(f)` with results in input order. Items are claimed from a
/// shared counter, so the output never depends on scheduling.
pub fn map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = threads.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every item processed"))
        .collect()
}
