//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (the default) the `maybe_par_*` functions run
//! on the rayon thread pool; without it they degrade to plain iteration.
//! The `seq_*` variants always run sequentially so the two code paths can be
//! benchmarked against each other on the same build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
/// Output order matches input order in both modes.
pub fn maybe_par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential twin of [`maybe_par_map`].
pub fn seq_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Maps `f` over `items` and concatenates the resulting vectors, in
/// parallel when the `parallel` feature is on. Order is preserved.
pub fn maybe_par_flat_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Vec<U> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().flat_map_iter(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().flat_map(f).collect()
    }
}

/// Sequential twin of [`maybe_par_flat_map`].
pub fn seq_flat_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> Vec<U>,
{
    items.iter().flat_map(f).collect()
}

/// True when all items satisfy `pred`, evaluated in parallel when enabled.
pub fn maybe_par_all<T, F>(items: &[T], pred: F) -> bool
where
    T: Sync,
    F: Fn(&T) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().all(pred)
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().all(pred)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_and_seq_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let sq = |x: &u64| x * x;
        assert_eq!(maybe_par_map(&xs, sq), seq_map(&xs, sq));
        let dup = |x: &u64| vec![*x, *x + 1];
        assert_eq!(maybe_par_flat_map(&xs, dup), seq_flat_map(&xs, dup));
        assert!(maybe_par_all(&xs, |x| *x < 1000));
        assert!(!maybe_par_all(&xs, |x| *x < 999));
    }
}
