//! Thin indirection over rayon so the whole crate builds with or without
//! the `parallel` feature. Results are collected in input order either way,
//! so outputs do not depend on thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn map_slice<I, O, F>(items: &[I], f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<I, O, F>(items: &[I], f: F) -> Vec<O>
where
    F: Fn(&I) -> O,
{
    items.iter().map(f).collect()
}

/// Maps `f` over an index range, in parallel when available.
#[cfg(feature = "parallel")]
pub fn map_range<O, F>(n: usize, f: F) -> Vec<O>
where
    O: Send,
    F: Fn(usize) -> O + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<O, F>(n: usize, f: F) -> Vec<O>
where
    F: Fn(usize) -> O,
{
    (0..n).map(f).collect()
}

/// Runs `f` inside a thread pool of the given size. `jobs = 0` means "use
/// all cores". Without the `parallel` feature this just calls `f`.
#[cfg(feature = "parallel")]
pub fn with_jobs<O: Send>(jobs: usize, f: impl FnOnce() -> O + Send) -> O {
    if jobs == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool construction")
        .install(f)
}

#[cfg(not(feature = "parallel"))]
pub fn with_jobs<O>(_jobs: usize, f: impl FnOnce() -> O) -> O {
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_slice_preserves_input_order() {
        let items: Vec<usize> = (0..1000).collect();
        let out = map_slice(&items, |&x| x * 2);
        assert_eq!(out, (0..1000).map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn map_range_matches_sequential() {
        assert_eq!(map_range(5, |i| i + 1), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn with_jobs_runs_the_closure() {
        assert_eq!(with_jobs(1, || 7), 7);
        assert_eq!(with_jobs(0, || 7), 7);
    }
}
