//! Execution policy for the data-parallel inner loops.
//!
//! With the `parallel` feature (on by default) the loops run on the rayon
//! pool; without it every policy degrades to the sequential path. Results
//! never depend on the policy: maps are computed element-wise and reductions
//! are summed over fixed-size chunks in a fixed order.

use serde::{Deserialize, Serialize};

/// Chunk length used for deterministic reductions.
pub const REDUCE_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// The policy actually used, after accounting for the compiled features.
    pub fn effective(self) -> Execution {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }

    pub fn describe(self) -> String {
        match self.effective() {
            Execution::Sequential => "sequential".to_string(),
            Execution::Parallel => format!("parallel(chunk={REDUCE_CHUNK})"),
        }
    }
}

/// `out[i] = f(i)` for every slot of `out`.
pub fn fill_indexed<T, F>(exec: Execution, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            out.par_iter_mut().enumerate().for_each(|(i, slot)| *slot = f(i));
        }
        _ => {
            for (i, slot) in out.iter_mut().enumerate() {
                *slot = f(i);
            }
        }
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Deterministic sum of `f(i)` over `0..n`: chunk sums in index order.
pub fn sum_indexed<F>(exec: Execution, n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let chunk_sum = |c: usize| {
        let lo = c * REDUCE_CHUNK;
        let hi = (lo + REDUCE_CHUNK).min(n);
        (lo..hi).map(&f).sum::<f64>()
    };
    let partial: Vec<f64> = match exec.effective() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..chunks).into_par_iter().map(chunk_sum).collect()
        }
        _ => (0..chunks).map(chunk_sum).collect(),
    };
    partial.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree_bitwise() {
        let n = 3 * REDUCE_CHUNK + 17;
        let f = |i: usize| ((i as f64) * 0.37).sin();
        let a = sum_indexed(Execution::Sequential, n, f);
        let b = sum_indexed(Execution::Parallel, n, f);
        assert_eq!(a.to_bits(), b.to_bits());

        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        fill_indexed(Execution::Sequential, &mut x, f);
        fill_indexed(Execution::Parallel, &mut y, f);
        assert_eq!(x, y);
    }
}
