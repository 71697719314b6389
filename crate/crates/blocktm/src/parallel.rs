//! Data-parallel helpers.
//!
//! Grid scans, quadrature nodes and ensemble realizations are embarrassingly
//! parallel; every operation in this crate is pure, so items can be evaluated
//! on a rayon pool. With the `parallel` feature disabled everything runs
//! sequentially. Results are always collected in index order, so output is
//! bit-identical regardless of how work was scheduled.

use std::cell::Cell;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with parallel dispatch disabled on the calling thread.
///
/// Used by the benchmark suite to compare the rayon path against the
/// sequential one within a single build.
pub fn run_sequential<R>(f: impl FnOnce() -> R) -> R {
    FORCE_SEQUENTIAL.with(|flag| {
        let prev = flag.replace(true);
        let out = f();
        flag.set(prev);
        out
    })
}

fn sequential_forced() -> bool {
    FORCE_SEQUENTIAL.with(Cell::get)
}

/// Maps `f` over `0..n`, in parallel when available.
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !sequential_forced() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Maps `f` over a slice, in parallel when available.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !sequential_forced() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Order-independent sum: pairwise reduction over an ordered slice.
///
/// Ensemble aggregation must not depend on how realizations were scheduled;
/// summing a collected, index-ordered buffer pairwise gives one fixed
/// floating-point result (and better accuracy than a running sum).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let half = n / 2;
            pairwise_sum(&values[..half]) + pairwise_sum(&values[half..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_preserves_order() {
        let v = map_indexed(100, |i| i * i);
        assert_eq!(v[7], 49);
        assert_eq!(v.len(), 100);
    }

    #[test]
    fn sequential_scope_restores_flag() {
        let out = run_sequential(|| map_indexed(10, |i| i));
        assert_eq!(out, (0..10).collect::<Vec<_>>());
        assert!(!sequential_forced());
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (1..=1000).map(|i| 1.0 / i as f64).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }
}
