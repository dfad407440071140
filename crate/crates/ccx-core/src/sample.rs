//! Enumeration plans for tuple scans: exhaustive when small, seeded
//! uniform subsample otherwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::path::DiscretePath;

/// Flattened `(path, grid index)` positions over a list of paths.
#[derive(Clone, Debug)]
pub struct FlatIndex {
    offsets: Vec<u64>,
}

impl FlatIndex {
    pub fn new<'a>(paths: impl IntoIterator<Item = &'a DiscretePath>) -> Self {
        let mut offsets = vec![0u64];
        for p in paths {
            offsets.push(offsets.last().unwrap() + p.len() as u64);
        }
        FlatIndex { offsets }
    }

    pub fn total(&self) -> u64 {
        *self.offsets.last().unwrap()
    }

    /// `(path id, grid index)` of flat position `f`.
    pub fn decode(&self, f: u64) -> (usize, usize) {
        let p = self.offsets.partition_point(|&o| o <= f) - 1;
        (p, (f - self.offsets[p]) as usize)
    }
}

/// Pairs `(i, j)` drawn from `0..n x 0..m`.
#[derive(Clone, Debug)]
pub enum PairPlan {
    Exhaustive { n: u64, m: u64 },
    Sampled { pairs: Vec<(u64, u64)>, seed: u64 },
}

impl PairPlan {
    /// Exhaustive when `n * m <= budget`, otherwise `budget` seeded draws.
    pub fn new(n: u64, m: u64, budget: u64, seed: u64) -> Self {
        if n.saturating_mul(m) <= budget {
            PairPlan::Exhaustive { n, m }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pairs = (0..budget).map(|_| (rng.gen_range(0..n), rng.gen_range(0..m))).collect();
            PairPlan::Sampled { pairs, seed }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            PairPlan::Exhaustive { n, m } => (n * m) as usize,
            PairPlan::Sampled { pairs, .. } => pairs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, k: usize) -> (u64, u64) {
        match self {
            PairPlan::Exhaustive { m, .. } => (k as u64 / m, k as u64 % m),
            PairPlan::Sampled { pairs, .. } => pairs[k],
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            PairPlan::Exhaustive { .. } => None,
            PairPlan::Sampled { seed, .. } => Some(*seed),
        }
    }
}

/// `count` seeded triples from `0..n`, or all triples if there are fewer.
pub fn triples(n: usize, count: usize, seed: u64) -> Vec<(usize, usize, usize)> {
    if n.saturating_pow(3) <= count {
        let mut out = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    out.push((a, b, c));
                }
            }
        }
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n)))
        .collect()
}

/// Seeded generator shared by the audit samplers.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_roundtrip() {
        let a = DiscretePath::segment(1.0, vec![0, 1, 2], 1.0, 0.0);
        let b = DiscretePath::segment(1.0, vec![5], 1.0, 0.0);
        let c = DiscretePath::segment(1.0, vec![3, 4], 1.0, 0.0);
        let f = FlatIndex::new([&a, &b, &c]);
        assert_eq!(f.total(), 6);
        let got: Vec<_> = (0..6).map(|i| f.decode(i)).collect();
        assert_eq!(got, vec![(0, 0), (0, 1), (0, 2), (1, 0), (2, 0), (2, 1)]);
    }

    #[test]
    fn sampled_plan_is_seeded() {
        let a = PairPlan::new(1000, 1000, 50, 7);
        let b = PairPlan::new(1000, 1000, 50, 7);
        assert_eq!((0..50).map(|k| a.get(k)).collect::<Vec<_>>(), (0..50).map(|k| b.get(k)).collect::<Vec<_>>());
        assert_eq!(PairPlan::new(3, 4, 100, 0).len(), 12);
    }
}
