//! Data-parallel maps with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs on
//! the rayon global pool; without it every call runs sequentially. Maps always
//! return results in index order and reductions are done sequentially by the
//! caller, so both paths produce bitwise-identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_indices<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Map over fixed-size chunks of a flat slice (e.g. rows of a row-major matrix).
pub fn map_chunks<T, F>(data: &[f64], chunk: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => data.par_chunks_exact(chunk).map(f).collect(),
        _ => data.chunks_exact(chunk).map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_agree_in_order() {
        let seq = map_indices(1000, Execution::Sequential, |i| (i as f64).sqrt());
        let par = map_indices(1000, Execution::Parallel, |i| (i as f64).sqrt());
        assert_eq!(seq, par);
        let data: Vec<f64> = (0..30).map(|v| v as f64).collect();
        let s = map_chunks(&data, 3, Execution::Sequential, |c| c.iter().sum::<f64>());
        let p = map_chunks(&data, 3, Execution::Parallel, |c| c.iter().sum::<f64>());
        assert_eq!(s, p);
        assert_eq!(s[0], 3.0);
    }
}
