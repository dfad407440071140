//! Execution policy for index-parallel scans.
//!
//! Every kernel is written as a map over `0..n` followed by an associative
//! reduction, so the sequential and parallel paths give identical answers.
//! Reductions that pick a witness break ties by the smaller index.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// True when the parallel path is both requested and compiled in.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// `(0..n).map(f).collect()`, order preserved.
pub fn map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Map every index and fold with an associative, commutative `combine`.
pub fn reduce_range<R, F, G>(exec: Exec, n: usize, identity: R, map: F, combine: G) -> R
where
    R: Send + Sync + Clone,
    F: Fn(usize) -> R + Sync + Send,
    G: Fn(R, R) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        let id = identity.clone();
        return (0..n)
            .into_par_iter()
            .map(&map)
            .reduce(|| id.clone(), &combine);
    }
    let _ = exec;
    (0..n).map(map).fold(identity, combine)
}

/// Running maximum with the witness index; ties keep the smaller index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArgMax {
    pub value: f64,
    pub index: usize,
}

impl ArgMax {
    pub const NONE: ArgMax = ArgMax { value: f64::NEG_INFINITY, index: usize::MAX };

    pub fn merge(a: ArgMax, b: ArgMax) -> ArgMax {
        if a.value > b.value || (a.value == b.value && a.index <= b.index) {
            a
        } else {
            b
        }
    }
}

/// Maximum of `f` over `0..n` with the first index attaining it.
pub fn argmax_range<F>(exec: Exec, n: usize, f: F) -> ArgMax
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    reduce_range(
        exec,
        n,
        ArgMax::NONE,
        |i| ArgMax { value: f(i), index: i },
        ArgMax::merge,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_first_index_on_ties() {
        let vals = [1.0, 3.0, 3.0, 2.0];
        for exec in [Exec::Sequential, Exec::Parallel] {
            let m = argmax_range(exec, vals.len(), |i| vals[i]);
            assert_eq!(m.index, 1);
            assert_eq!(m.value, 3.0);
        }
    }

    #[test]
    fn map_preserves_order() {
        let a = map_range(Exec::Parallel, 1000, |i| i * 2);
        let b = map_range(Exec::Sequential, 1000, |i| i * 2);
        assert_eq!(a, b);
    }

    #[test]
    fn empty_reduce_is_identity() {
        let m = argmax_range(Exec::Parallel, 0, |_| 1.0);
        assert_eq!(m, ArgMax::NONE);
    }
}
