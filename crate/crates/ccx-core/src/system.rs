//! Families of sampled quasi-geodesics.

use std::collections::{BTreeMap, HashSet};

use crate::metric::PointId;
use crate::path::{DiscretePath, PathKind};

/// Segments indexed by endpoints, plus truncated rays from the base point.
#[derive(Clone, Debug, Default)]
pub struct GeodesicSystem {
    pub segments: Vec<DiscretePath>,
    pub rays: Vec<DiscretePath>,
    pub symmetric: bool,
    pub prefix_closed: bool,
    by_ends: BTreeMap<(PointId, PointId), Vec<u32>>,
    by_start: BTreeMap<PointId, Vec<u32>>,
}

impl GeodesicSystem {
    pub fn new(segments: Vec<DiscretePath>, rays: Vec<DiscretePath>) -> Self {
        let mut sys = GeodesicSystem { segments, rays, ..Default::default() };
        sys.reindex();
        sys
    }

    fn reindex(&mut self) {
        self.by_ends.clear();
        self.by_start.clear();
        for (i, p) in self.segments.iter().enumerate() {
            self.by_ends.entry((p.start(), p.end())).or_default().push(i as u32);
            self.by_start.entry(p.start()).or_default().push(i as u32);
        }
    }

    /// Stored segments from `a` to `b`, in insertion order.
    pub fn between(&self, a: PointId, b: PointId) -> &[u32] {
        self.by_ends.get(&(a, b)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn from_point(&self, a: PointId) -> &[u32] {
        self.by_start.get(&a).map(Vec::as_slice).unwrap_or(&[])
    }

    /// First stored segment from `a` to `b`.
    pub fn first_between(&self, a: PointId, b: PointId) -> Option<&DiscretePath> {
        self.between(a, b).first().map(|&i| &self.segments[i as usize])
    }

    pub fn endpoint_pairs(&self) -> impl Iterator<Item = &(PointId, PointId)> {
        self.by_ends.keys()
    }

    /// Largest declared λ and k over all members.
    pub fn declared(&self) -> (f64, f64) {
        self.segments
            .iter()
            .chain(self.rays.iter())
            .fold((1.0f64, 0.0f64), |(l, k), p| (l.max(p.lambda), k.max(p.k)))
    }

    pub fn step(&self) -> f64 {
        self.segments
            .first()
            .or(self.rays.first())
            .map(|p| p.step)
            .unwrap_or(1.0)
    }

    /// Horizon shared by the stored rays (the smallest one).
    pub fn ray_horizon(&self) -> Option<f64> {
        self.rays
            .iter()
            .map(|r| match r.kind {
                PathKind::Ray { horizon } => horizon,
                PathKind::Segment => r.domain_end(),
            })
            .reduce(f64::min)
    }
}

/// Smallest superset closed under reversal and grid-prefix restriction.
///
/// Closing under both operations yields every contiguous sub-path of each
/// member and of its reversal. Output order is canonical (sorted by values),
/// so the operation is idempotent as a value, not only as a set.
pub fn close_system(sys: &GeodesicSystem) -> GeodesicSystem {
    let mut seen: HashSet<(u64, Vec<PointId>)> = HashSet::new();
    let mut out: Vec<DiscretePath> = Vec::new();
    for p in &sys.segments {
        for q in [p.clone(), p.reversed()] {
            let n = q.len();
            for i in 0..n {
                for j in i..n {
                    let key = (q.step.to_bits(), q.values[i..=j].to_vec());
                    if seen.insert(key) {
                        out.push(q.sub(i, j));
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| {
        a.values
            .cmp(&b.values)
            .then(a.step.total_cmp(&b.step))
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.k.total_cmp(&b.k))
    });
    let mut closed = GeodesicSystem::new(out, sys.rays.clone());
    closed.symmetric = true;
    closed.prefix_closed = true;
    closed
}

/// Checks the two closure properties directly.
pub fn is_closed(sys: &GeodesicSystem) -> bool {
    let have: HashSet<&[PointId]> = sys.segments.iter().map(|p| p.values.as_slice()).collect();
    sys.segments.iter().all(|p| {
        let rev: Vec<PointId> = p.values.iter().rev().copied().collect();
        have.contains(rev.as_slice()) && (1..=p.len()).all(|m| have.contains(&p.values[..m]))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(v: &[u32]) -> DiscretePath {
        DiscretePath::segment(1.0, v.to_vec(), 1.0, 0.0)
    }

    #[test]
    fn single_segment_closure() {
        let sys = GeodesicSystem::new(vec![seg(&[0, 1])], vec![]);
        let c = close_system(&sys);
        let vals: Vec<_> = c.segments.iter().map(|p| p.values.clone()).collect();
        assert_eq!(vals, vec![vec![0], vec![0, 1], vec![1], vec![1, 0]]);
        assert!(is_closed(&c));
    }

    #[test]
    fn closure_is_idempotent() {
        let sys = GeodesicSystem::new(vec![seg(&[0, 1, 2]), seg(&[4, 3])], vec![]);
        let once = close_system(&sys);
        let twice = close_system(&once);
        assert_eq!(once.segments, twice.segments);
    }

    #[test]
    fn closure_count_matches_fixpoint_enumeration() {
        // path graph 0-1-2-3-4 with segments 0..=3 and 2..=4
        let sys = GeodesicSystem::new(vec![seg(&[0, 1, 2, 3]), seg(&[2, 3, 4])], vec![]);
        let c = close_system(&sys);
        // oracle: iterate reversal and prefix until nothing new appears
        let mut set: HashSet<Vec<u32>> = sys.segments.iter().map(|p| p.values.clone()).collect();
        loop {
            let mut next = set.clone();
            for v in &set {
                next.insert(v.iter().rev().copied().collect());
                for m in 1..=v.len() {
                    next.insert(v[..m].to_vec());
                }
            }
            if next.len() == set.len() {
                break;
            }
            set = next;
        }
        assert_eq!(c.segments.len(), set.len());
    }

    #[test]
    fn lookup_by_endpoints() {
        let sys = GeodesicSystem::new(vec![seg(&[0, 1, 2]), seg(&[0, 3, 2])], vec![]);
        assert_eq!(sys.between(0, 2), &[0, 1]);
        assert!(sys.between(2, 0).is_empty());
        assert_eq!(sys.from_point(0).len(), 2);
    }
}
