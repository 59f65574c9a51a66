//! Execution policy for the data-parallel loops.
//!
//! Batch evaluations (per-level integrations, probe sweeps, property suites)
//! go through [`map_indexed`]. With the `parallel` feature enabled,
//! [`Execution::Parallel`] fans the work out over rayon's global pool;
//! without it every policy runs sequentially. Results are always returned in
//! index order, so the choice of policy never changes the output.

/// How a batch of independent tasks is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this policy actually runs on multiple threads in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_indexed<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Fallible variant of [`map_indexed`]; returns the error of the lowest
/// failing index.
pub fn try_map_indexed<R, E, F>(exec: Execution, n: usize, f: F) -> Result<Vec<R>, E>
where
    R: Send,
    E: Send,
    F: Fn(usize) -> Result<R, E> + Send + Sync,
{
    map_indexed(exec, n, f).into_iter().collect()
}

/// Fills `out[i] = f(i)`, splitting into chunks of at least `min_len` when
/// running in parallel.
pub fn fill_indexed<F>(exec: Execution, out: &mut [f64], min_len: usize, f: F)
where
    F: Fn(usize) -> f64 + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && out.len() >= 2 * min_len.max(1) {
        use rayon::prelude::*;
        out.par_iter_mut()
            .with_min_len(min_len.max(1))
            .enumerate()
            .for_each(|(i, slot)| *slot = f(i));
        return;
    }
    let _ = (exec, min_len);
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}
