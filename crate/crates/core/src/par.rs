//! Execution strategy for the data-parallel batch routines.
//!
//! Every batch operation maps an index range through a pure function and
//! collects results in index order. Each element is computed by the same
//! sequential code regardless of strategy, so serial and parallel runs
//! produce bit-identical output.
//!
//! When the crate is built without the `parallel` feature,
//! [`Strategy::Parallel`] silently runs serially.

/// How a batch of independent evaluations is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Serial,
    Parallel,
}

impl Default for Strategy {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Strategy::Parallel
        } else {
            Strategy::Serial
        }
    }
}

impl Strategy {
    /// True if this strategy will actually fan out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Strategy::Parallel
    }

    /// Evaluate `f(i)` for `i in 0..len`, returning results in index order.
    pub fn map_range<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Strategy::Parallel {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    /// Evaluate `f` on every element of `items`, preserving order.
    pub fn map_slice<S, T, F>(self, items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        self.map_range(items.len(), |i| f(&items[i]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_and_parallel_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = Strategy::Serial.map_range(10_000, f);
        let b = Strategy::Parallel.map_range(10_000, f);
        assert_eq!(a, b);
    }

    #[test]
    fn map_slice_preserves_order() {
        let xs = vec![3, 1, 2];
        assert_eq!(Strategy::Parallel.map_slice(&xs, |x| x * 10), vec![30, 10, 20]);
    }
}
