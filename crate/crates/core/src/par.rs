//! Data-parallel helpers. With the `parallel` feature the work runs on the
//! rayon pool; without it, or with [`Execution::Sequential`], it runs in
//! order on the calling thread. Results come back in index order either way.

/// How independent work items are dispatched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        let f = |i: usize| (i * i) as u64;
        let a = map_indexed(Execution::Sequential, 100, f);
        let b = map_indexed(Execution::Parallel, 100, f);
        assert_eq!(a, b);
        assert_eq!(a[9], 81);
    }
}
