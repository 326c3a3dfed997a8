//! Data-parallel map over independent work items.
//!
//! With the `parallel` feature (default) the parallel entry point fans out
//! over rayon's current thread pool; without it, it falls back to the
//! sequential path. Results are returned in input order either way, so
//! callers are deterministic regardless of scheduling.

/// Sequential map; always available (used by the benches as the baseline).
pub fn map_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    map_seq(items, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_input_order() {
        let items: Vec<u64> = (0..256).collect();
        let out = map(&items, |x| x * x);
        let expected = map_seq(&items, |x| x * x);
        assert_eq!(out, expected);
    }
}
