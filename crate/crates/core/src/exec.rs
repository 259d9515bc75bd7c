//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the batch helpers fan work out over rayon;
//! without it (or when [`Execution::Sequential`] is selected) they run in
//! order on the calling thread. Every helper produces results in input order
//! and never splits a floating-point reduction across threads, so both modes
//! return bit-identical values.

use std::sync::atomic::{AtomicU8, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

static DEFAULT_EXECUTION: AtomicU8 = AtomicU8::new(0);

/// Sets the process-wide execution mode used by the implicit helpers.
pub fn set_default_execution(exec: Execution) {
    let tag = match exec {
        Execution::Parallel => 0,
        Execution::Sequential => 1,
    };
    DEFAULT_EXECUTION.store(tag, Ordering::Relaxed);
}

pub fn default_execution() -> Execution {
    match DEFAULT_EXECUTION.load(Ordering::Relaxed) {
        0 => Execution::Parallel,
        _ => Execution::Sequential,
    }
}

/// True when parallel execution is both compiled in and selected.
pub fn is_parallel(exec: Execution) -> bool {
    cfg!(feature = "parallel") && exec == Execution::Parallel
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_with(default_execution(), items, f)
}

pub fn map_with<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    map_range_with(default_execution(), n, f)
}

pub fn map_range_with<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Fills `out` chunk by chunk; `f(start, chunk)` writes nodes `start..start + chunk.len()`.
pub fn fill_chunks<F>(exec: Execution, out: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(c, slice)| f(c * chunk, slice));
        return;
    }
    let _ = exec;
    for (c, slice) in out.chunks_mut(chunk).enumerate() {
        f(c * chunk, slice);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_preserve_order() {
        let xs: Vec<f64> = (0..257).map(|i| i as f64 * 0.37).collect();
        let a = map_with(Execution::Parallel, &xs, |x| x.sin() * x);
        let b = map_with(Execution::Sequential, &xs, |x| x.sin() * x);
        assert_eq!(a, b);

        let mut p = vec![0.0; 1000];
        let mut s = vec![0.0; 1000];
        fill_chunks(Execution::Parallel, &mut p, 64, |start, c| {
            for (k, v) in c.iter_mut().enumerate() {
                *v = ((start + k) as f64).sqrt();
            }
        });
        fill_chunks(Execution::Sequential, &mut s, 64, |start, c| {
            for (k, v) in c.iter_mut().enumerate() {
                *v = ((start + k) as f64).sqrt();
            }
        });
        assert_eq!(p, s);
    }
}
