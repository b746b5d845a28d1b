//! Sequential/parallel execution helpers.
//!
//! Everything data-parallel in this crate (independent replicas, per-site
//! operator sweeps) funnels through these helpers so the `parallel` feature
//! is a single switch. With the feature disabled the same code runs on plain
//! iterators. The `*_seq` / `*_par` variants stay public so the benches can
//! compare both lanes in one build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Cap the global worker pool at `jobs` threads. No-op without the
/// `parallel` feature; returns false if the pool was already initialized.
pub fn configure_jobs(jobs: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        return rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().is_ok();
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        true
    }
}

/// How to execute a data-parallel region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl ExecMode {
    /// Default mode for a workload of `len` independent items each costing
    /// roughly `unit_cost` (arbitrary relative units; 1 = a few hundred ns).
    /// Small sweeps stay sequential; fan-outs of expensive items go wide.
    pub fn auto(len: usize, unit_cost: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            if len * unit_cost >= 4096 && len >= 2 {
                return ExecMode::Parallel;
            }
        }
        let _ = (len, unit_cost);
        ExecMode::Sequential
    }
}

/// Map `f` over `0..n`, collecting results in index order.
pub fn map_indexed<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        ExecMode::Sequential => map_indexed_seq(n, f),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => map_indexed_par(n, f),
    }
}

pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_indexed_par<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Fill `out[i] = f(i)` for all `i`.
pub fn fill_indexed<F>(mode: ExecMode, out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    match mode {
        ExecMode::Sequential => fill_indexed_seq(out, f),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => fill_indexed_par(out, f),
    }
}

pub fn fill_indexed_seq<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64,
{
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

#[cfg(feature = "parallel")]
pub fn fill_indexed_par<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    out.par_iter_mut().enumerate().for_each(|(i, slot)| *slot = f(i));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seq_and_par_agree() {
        let f = |i: usize| (i as f64).sin() * (i as f64 + 1.0);
        let seq = map_indexed_seq(1000, f);
        #[cfg(feature = "parallel")]
        {
            let par = map_indexed_par(1000, f);
            assert_eq!(seq, par);
        }
        let mut a = vec![0.0; 1000];
        fill_indexed_seq(&mut a, f);
        assert_eq!(a, seq);
        #[cfg(feature = "parallel")]
        {
            let mut b = vec![0.0; 1000];
            fill_indexed_par(&mut b, f);
            assert_eq!(b, seq);
        }
    }

    #[test]
    fn auto_mode_small_is_sequential() {
        assert_eq!(ExecMode::auto(8, 1), ExecMode::Sequential);
    }
}
