//! Worker pool used by the per-neighborhood computations.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Maps `f` over `0..n` on the current pool, keeping index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Runs `op` on a pool of `workers` threads (`0` means one per core).
pub fn with_workers<R: Send>(workers: usize, op: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(op))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_kept() {
        let v = with_workers(3, || map_indexed(100, |i| Ok(i * i))).unwrap().unwrap();
        assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn first_error_is_reported() {
        let r: Result<Vec<usize>> = map_indexed(10, |i| if i == 4 { Err(Error::Singular { indices: vec![i] }) } else { Ok(i) });
        assert!(r.is_err());
    }
}
