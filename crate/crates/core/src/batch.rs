//! Trial-level parallelism. Results always come back in index order, so
//! output does not depend on scheduling.

/// Map `f` over `0..n` on the calling thread.
pub fn map_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Map `f` over `0..n` on the rayon pool.
#[cfg(feature = "parallel")]
pub fn map_par<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n`, in parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn map_trials<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_par(n, f)
}

#[cfg(not(feature = "parallel"))]
pub fn map_trials<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_seq(n, f)
}

/// Per-trial seed derived from a base seed; distinct trials get
/// well-separated streams.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add((trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v = map_trials(100, |i| i * i);
        assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
        assert_eq!(map_seq(3, |i| i + 1), vec![1, 2, 3]);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential() {
        let f = |i: usize| (trial_seed(7, i) % 1000) as f64 / 3.0;
        assert_eq!(map_par(50, f), map_seq(50, f));
    }

    #[test]
    fn seeds_differ() {
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
        assert_eq!(trial_seed(5, 0), 5);
    }
}
