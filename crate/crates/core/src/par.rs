//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) [`Mode::Parallel`] runs on the
//! rayon global pool. Without it, every mode runs sequentially and results
//! are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Parallel,
}

impl Default for Mode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Mode::Parallel
        } else {
            Mode::Sequential
        }
    }
}

pub fn map<T, U, F>(mode: Mode, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Mode::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

pub fn map_range<U, F>(mode: Mode, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Mode::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Calls `f(row_index, row)` for each `row_len`-sized row of `buf`.
pub fn for_each_row<F>(mode: Mode, buf: &mut [u8], row_len: usize, f: F)
where
    F: Fn(usize, &mut [u8]) + Sync + Send,
{
    if row_len == 0 {
        return;
    }
    match mode {
        #[cfg(feature = "parallel")]
        Mode::Parallel => buf
            .par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(y, row)| f(y, row)),
        _ => buf
            .chunks_mut(row_len)
            .enumerate()
            .for_each(|(y, row)| f(y, row)),
    }
}
