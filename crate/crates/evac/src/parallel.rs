//! Data-parallel fan-out with a sequential fallback.
//!
//! With the default `parallel` feature the heavy inner loops (Monte Carlo
//! rollouts, resample studies, per-pair Wasserstein estimates) run on rayon;
//! without it they run sequentially. Both paths produce identical results:
//! outputs are collected in index order and every task derives its own
//! random stream up front.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n` sequentially, collecting in order.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Map `f` over `0..n` on the rayon pool, collecting in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed_par<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n` using the configured execution mode.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_indexed_par(n, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_seq(n, f)
    }
}

/// Sort a float slice ascending under the IEEE total order.
pub fn sort_f64(xs: &mut [f64]) {
    #[cfg(feature = "parallel")]
    {
        if xs.len() >= 1 << 14 {
            xs.par_sort_unstable_by(f64::total_cmp);
            return;
        }
    }
    xs.sort_unstable_by(f64::total_cmp);
}
