//! Finite metric spaces.
//!
//! Small spaces carry a dense distance matrix. Large lattice samples keep
//! their coordinates instead and compute distances on demand, which is the
//! same metric without the quadratic memory.

use crate::error::{CcxError, Result};
use crate::exec::{map_range, Exec};
use crate::TOL;

/// Index of a point inside its space.
pub type PointId = u32;

#[derive(Clone, Debug)]
pub enum Metric {
    /// Row-major `n * n` matrix.
    Dense(Vec<f64>),
    /// Euclidean distance between planar coordinates.
    Euclidean(Vec<[f64; 2]>),
    /// l1 distance between integer lattice coordinates.
    Manhattan(Vec<[i64; 2]>),
    /// l1 sum of two factor metrics; point `i` is `(i / n_right, i % n_right)`.
    Product(Box<FiniteMetricSpace>, Box<FiniteMetricSpace>),
}

#[derive(Clone, Debug)]
pub struct FiniteMetricSpace {
    /// External point ids, in index order.
    pub ids: Vec<u64>,
    pub metric: Metric,
    pub base: PointId,
    pub label: String,
    /// Optional planar embedding used for angles and plots.
    pub coords: Option<Vec<[f64; 2]>>,
}

impl FiniteMetricSpace {
    /// Dense space from a row-major matrix. Fails on dimension mismatch.
    pub fn from_matrix(ids: Vec<u64>, rows: Vec<Vec<f64>>, base: u64, label: &str) -> Result<Self> {
        let n = ids.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(CcxError::Structural(format!(
                "distance matrix is not {n}x{n}"
            )));
        }
        let base = ids
            .iter()
            .position(|&p| p == base)
            .ok_or_else(|| CcxError::Structural(format!("base {base} is not a point")))?;
        let mut flat = Vec::with_capacity(n * n);
        for r in rows {
            flat.extend(r);
        }
        Ok(FiniteMetricSpace {
            ids,
            metric: Metric::Dense(flat),
            base: base as PointId,
            label: label.to_string(),
            coords: None,
        })
    }

    pub fn with_metric(n: usize, metric: Metric, base: PointId, label: &str) -> Self {
        FiniteMetricSpace {
            ids: (0..n as u64).collect(),
            metric,
            base,
            label: label.to_string(),
            coords: None,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub fn d(&self, a: PointId, b: PointId) -> f64 {
        let (a, b) = (a as usize, b as usize);
        match &self.metric {
            Metric::Dense(m) => m[a * self.ids.len() + b],
            Metric::Euclidean(c) => {
                let dx = c[a][0] - c[b][0];
                let dy = c[a][1] - c[b][1];
                (dx * dx + dy * dy).sqrt()
            }
            Metric::Manhattan(c) => ((c[a][0] - c[b][0]).abs() + (c[a][1] - c[b][1]).abs()) as f64,
            Metric::Product(x, y) => {
                let ny = y.len();
                x.d((a / ny) as PointId, (b / ny) as PointId)
                    + y.d((a % ny) as PointId, (b % ny) as PointId)
            }
        }
    }

    /// Index of the product point `(x, y)`; only meaningful for product spaces.
    pub fn product_index(&self, x: PointId, y: PointId) -> Option<PointId> {
        match &self.metric {
            Metric::Product(_, right) => Some(x * right.len() as PointId + y),
            _ => None,
        }
    }

    /// Factor coordinates of a product point.
    pub fn product_parts(&self, p: PointId) -> Option<(PointId, PointId)> {
        match &self.metric {
            Metric::Product(_, right) => {
                let ny = right.len() as PointId;
                Some((p / ny, p % ny))
            }
            _ => None,
        }
    }

    /// Dense row-major matrix, materialized if needed.
    pub fn dense_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.d(i as PointId, j as PointId)).collect())
            .collect()
    }

    /// Largest distance from the base point.
    pub fn radius(&self) -> f64 {
        (0..self.len() as PointId)
            .map(|p| self.d(self.base, p))
            .fold(0.0, f64::max)
    }

    /// Diameter, computed as an all-pairs maximum for dense spaces and from
    /// the coordinate bounding data otherwise.
    pub fn diameter(&self) -> f64 {
        match &self.metric {
            Metric::Product(x, y) => x.diameter() + y.diameter(),
            Metric::Manhattan(c) => {
                // l1 diameter is the larger spread of x+y and x-y
                let sums = c.iter().map(|p| p[0] + p[1]);
                let diffs = c.iter().map(|p| p[0] - p[1]);
                let spread = |it: &mut dyn Iterator<Item = i64>| {
                    let (lo, hi) = it.fold((i64::MAX, i64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
                    if lo > hi { 0 } else { hi - lo }
                };
                spread(&mut sums.into_iter()).max(spread(&mut diffs.into_iter())) as f64
            }
            _ => {
                let n = self.len();
                let mut best = 0.0f64;
                for i in 0..n {
                    for j in (i + 1)..n {
                        best = best.max(self.d(i as PointId, j as PointId));
                    }
                }
                best
            }
        }
    }

    /// Points within distance `r` of `p` (closed ball).
    pub fn ball(&self, p: PointId, r: f64) -> Vec<PointId> {
        (0..self.len() as PointId)
            .filter(|&q| self.d(p, q) <= r + TOL)
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ValidationReport {
    /// Points with a nonzero diagonal entry.
    pub diagonal: Vec<usize>,
    /// Pairs `(i, j)`, `i < j`, with `d(i,j) != d(j,i)` or a negative entry.
    pub asymmetric: Vec<(usize, usize)>,
    /// Triples `(i, j, k)` with `d(i,k) > d(i,j) + d(j,k)`.
    pub triangle: Vec<(usize, usize, usize)>,
    /// Total number of triangle violations, including any not listed.
    pub triangle_count: u64,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty() && self.asymmetric.is_empty() && self.triangle_count == 0
    }
}

/// Witness lists are capped at this many triangle triples.
pub const MAX_TRIANGLE_WITNESSES: usize = 10_000;

/// Check diagonal, symmetry and every triangle inequality.
pub fn validate_metric(space: &FiniteMetricSpace, exec: Exec) -> Result<ValidationReport> {
    let n = space.len();
    match &space.metric {
        Metric::Dense(m) if m.len() != n * n => {
            return Err(CcxError::Structural(format!(
                "matrix has {} entries for {n} points",
                m.len()
            )))
        }
        Metric::Euclidean(c) if c.len() != n => {
            return Err(CcxError::Structural("coordinate count mismatch".into()))
        }
        Metric::Manhattan(c) if c.len() != n => {
            return Err(CcxError::Structural("coordinate count mismatch".into()))
        }
        Metric::Product(x, y) if x.len() * y.len() != n => {
            return Err(CcxError::Structural("product size mismatch".into()))
        }
        _ => {}
    }
    if (space.base as usize) >= n {
        return Err(CcxError::Structural("base point out of range".into()));
    }
    let d = |i: usize, j: usize| space.d(i as PointId, j as PointId);
    let mut report = ValidationReport::default();
    for i in 0..n {
        if d(i, i).abs() > TOL {
            report.diagonal.push(i);
        }
        for j in (i + 1)..n {
            if (d(i, j) - d(j, i)).abs() > TOL || d(i, j) < -TOL {
                report.asymmetric.push((i, j));
            }
        }
    }
    let rows = map_range(exec, n, |i| {
        let mut out = Vec::new();
        let mut count = 0u64;
        for k in 0..n {
            if k == i {
                continue;
            }
            let dik = d(i, k);
            for j in 0..n {
                if dik > d(i, j) + d(j, k) + TOL {
                    count += 1;
                    if out.len() < MAX_TRIANGLE_WITNESSES {
                        out.push((i, j, k));
                    }
                }
            }
        }
        (count, out)
    });
    for (count, out) in rows {
        report.triangle_count += count;
        let room = MAX_TRIANGLE_WITNESSES.saturating_sub(report.triangle.len());
        report.triangle.extend(out.into_iter().take(room));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(rows: Vec<Vec<f64>>) -> FiniteMetricSpace {
        let n = rows.len() as u64;
        FiniteMetricSpace::from_matrix((0..n).collect(), rows, 0, "t").unwrap()
    }

    #[test]
    fn triangle_witness_reported() {
        let s = space(vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ]);
        let r = validate_metric(&s, Exec::Sequential).unwrap();
        assert!(r.triangle.contains(&(0, 1, 2)));
        assert!(r.diagonal.is_empty() && r.asymmetric.is_empty());
    }

    #[test]
    fn path_graph_is_valid() {
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|i: i32| (0..4).map(|j: i32| (i - j).abs() as f64).collect())
            .collect();
        assert!(validate_metric(&space(rows), Exec::Parallel).unwrap().is_empty());
    }

    #[test]
    fn dimension_mismatch_is_structural() {
        let err = FiniteMetricSpace::from_matrix(vec![0, 1], vec![vec![0.0]], 0, "x");
        assert!(matches!(err, Err(CcxError::Structural(_))));
    }

    #[test]
    fn manhattan_diameter_matches_scan() {
        let c: Vec<[i64; 2]> = vec![[0, 0], [3, -1], [-2, 4], [1, 1]];
        let s = FiniteMetricSpace::with_metric(4, Metric::Manhattan(c), 0, "m");
        let mut best = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                best = best.max(s.d(i, j));
            }
        }
        assert_eq!(s.diameter(), best);
    }
}
