//! Data-parallel helpers with a sequential fallback.
//!
//! With the `rayon` feature enabled (the default), [`Execution::Parallel`]
//! dispatches onto the rayon pool. Without it, every call runs sequentially.
//! Each work item is computed independently and results are collected in
//! index order, so outputs never depend on the thread count.

#[cfg(feature = "rayon")]
use rayon::prelude::*;

/// How batch work is scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// `true` when this mode will actually use worker threads in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "rayon") && self == Execution::Parallel
    }
}

/// Evaluate `f(0..n)` and collect results in index order.
pub fn map_range<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "rayon")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Run `f(row_index, row)` over consecutive `row_len`-sized chunks of `data`.
pub fn for_each_row_mut<F>(data: &mut [f64], row_len: usize, exec: Execution, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if row_len == 0 {
        return;
    }
    #[cfg(feature = "rayon")]
    if exec.is_parallel() {
        data.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    let _ = exec;
    data.chunks_mut(row_len)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

/// Number of worker threads parallel calls will use.
pub fn current_threads() -> usize {
    #[cfg(feature = "rayon")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "rayon"))]
    {
        1
    }
}

/// Install a global pool capped at `threads`. Returns `false` if a pool
/// was already initialised or the build has no parallel backend.
pub fn init_global_threads(threads: usize) -> bool {
    #[cfg(feature = "rayon")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "rayon"))]
    {
        let _ = threads;
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_preserves_order() {
        for exec in [Execution::Parallel, Execution::Sequential] {
            let got = map_range(100, exec, |i| i * i);
            assert_eq!(got, (0..100).map(|i| i * i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn rows_visited_once() {
        let mut data = vec![0.0; 12];
        for_each_row_mut(&mut data, 3, Execution::Parallel, |i, row| {
            for v in row.iter_mut() {
                *v += i as f64;
            }
        });
        assert_eq!(data, vec![0., 0., 0., 1., 1., 1., 2., 2., 2., 3., 3., 3.]);
    }
}
