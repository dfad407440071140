//! Discrete quasi-geodesics sampled on a uniform parameter grid.

use serde::{Deserialize, Serialize};

use crate::error::{CcxError, Result};
use crate::metric::{FiniteMetricSpace, PointId};
use crate::TOL;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PathKind {
    Segment,
    /// Ray truncated at parameter `horizon`.
    Ray { horizon: f64 },
}

/// Values of a path at `t = 0, h, 2h, ..., a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretePath {
    pub step: f64,
    pub values: Vec<PointId>,
    pub lambda: f64,
    pub k: f64,
    pub kind: PathKind,
}

impl DiscretePath {
    pub fn segment(step: f64, values: Vec<PointId>, lambda: f64, k: f64) -> Self {
        DiscretePath { step, values, lambda, k, kind: PathKind::Segment }
    }

    /// Truncated ray; the horizon is the last grid parameter.
    pub fn ray(step: f64, values: Vec<PointId>, lambda: f64, k: f64) -> Self {
        let horizon = step * (values.len().saturating_sub(1)) as f64;
        DiscretePath { step, values, lambda, k, kind: PathKind::Ray { horizon } }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_ray(&self) -> bool {
        matches!(self.kind, PathKind::Ray { .. })
    }

    /// Right end `a` of the domain `[0, a]`.
    pub fn domain_end(&self) -> f64 {
        self.step * (self.values.len().saturating_sub(1)) as f64
    }

    pub fn start(&self) -> PointId {
        self.values[0]
    }

    pub fn end(&self) -> PointId {
        *self.values.last().expect("empty path")
    }

    /// Grid index of parameter `t`, rounded down and clamped to the domain.
    #[inline]
    pub fn index_at(&self, t: f64) -> usize {
        let i = (t / self.step + TOL).floor();
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(self.values.len() - 1)
        }
    }

    /// `γ(t) = γ(⌊t⌋_grid)`; parameters past the end stay at the end point.
    #[inline]
    pub fn at(&self, t: f64) -> PointId {
        self.values[self.index_at(t)]
    }

    pub fn param(&self, i: usize) -> f64 {
        self.step * i as f64
    }

    /// The reversed path `t ↦ γ(a - t)`, always a segment.
    pub fn reversed(&self) -> DiscretePath {
        let mut values = self.values.clone();
        values.reverse();
        DiscretePath::segment(self.step, values, self.lambda, self.k)
    }

    /// Restriction to grid indices `i..=j`, reparameterized from 0.
    pub fn sub(&self, i: usize, j: usize) -> DiscretePath {
        DiscretePath::segment(self.step, self.values[i..=j].to_vec(), self.lambda, self.k)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// Grid parameters of the worst pair.
    pub t: f64,
    pub s: f64,
    /// Smallest λ that the pair would need at the declared k.
    pub required_lambda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Certification {
    Feasible { lambda: f64, k: f64 },
    Infeasible(Violation),
}

impl Certification {
    pub fn feasible(&self) -> Option<(f64, f64)> {
        match self {
            Certification::Feasible { lambda, k } => Some((*lambda, *k)),
            Certification::Infeasible(_) => None,
        }
    }
}

/// Lexicographically minimal `(λ, k)` on the grid with `λ ≤ path.lambda`
/// and `k ≤ path.k`, or the pair that rules the declared bounds out.
///
/// For fixed `k` the pair `(t, s)` forces `λ ≥ (d - k)/Δ` and
/// `λ ≥ Δ/(d + k)`, so the minimal λ is a maximum over pairs and the
/// matching k is the residual of both inequalities at that λ.
pub fn certify_quasi_geodesic(path: &DiscretePath, space: &FiniteMetricSpace) -> Result<Certification> {
    let n = path.len();
    if n == 0 {
        return Err(CcxError::Structural("empty path".into()));
    }
    if let Some(&p) = path.values.iter().find(|&&p| (p as usize) >= space.len()) {
        return Err(CcxError::Structural(format!("path value {p} not in space")));
    }
    let kd = path.k.max(0.0);
    let mut need = 1.0f64;
    let mut need_delta = 0.0f64;
    let mut witness = (0usize, 0usize);
    for i in 0..n {
        for j in (i + 1)..n {
            let delta = path.step * (j - i) as f64;
            let d = space.d(path.values[i], path.values[j]);
            let upper = (d - kd) / delta;
            let lower = if d + kd <= TOL { f64::INFINITY } else { delta / (d + kd) };
            let req = upper.max(lower);
            // among equally bad pairs the widest one is the clearest witness
            if req > need + TOL || (req >= need - TOL && req > 1.0 + TOL && delta > need_delta) {
                need = need.max(req);
                need_delta = delta;
                witness = (i, j);
            }
        }
    }
    if need > path.lambda + TOL {
        return Ok(Certification::Infeasible(Violation {
            t: path.param(witness.0),
            s: path.param(witness.1),
            required_lambda: need,
        }));
    }
    let lambda = need;
    let mut k = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let delta = path.step * (j - i) as f64;
            let d = space.d(path.values[i], path.values[j]);
            k = k.max(d - lambda * delta).max(delta / lambda - d);
        }
    }
    if k < TOL {
        k = 0.0;
    }
    Ok(Certification::Feasible { lambda, k })
}

/// Resample a truncated ray to the integer grid, `γ'(t) = γ(⌊t⌋)`.
///
/// The result is declared a `(λ, λ + k)` quasi-geodesic.
pub fn step_ray(path: &DiscretePath) -> Result<DiscretePath> {
    let horizon = match path.kind {
        PathKind::Ray { horizon } => horizon,
        PathKind::Segment => return Err(CcxError::Precondition("step_ray needs a truncated ray".into())),
    };
    let last = (horizon + TOL).floor() as usize;
    let values = (0..=last).map(|t| path.at(t as f64)).collect();
    let mut out = DiscretePath::ray(1.0, values, path.lambda, path.lambda + path.k);
    out.kind = PathKind::Ray { horizon: last as f64 };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Metric;

    fn line(n: usize) -> FiniteMetricSpace {
        let c = (0..n as i64).map(|i| [i, 0]).collect();
        FiniteMetricSpace::with_metric(n, Metric::Manhattan(c), 0, "line")
    }

    #[test]
    fn straight_row_is_geodesic() {
        let s = line(6);
        let p = DiscretePath::segment(1.0, (0..6).collect(), 1.0, 0.0);
        assert_eq!(
            certify_quasi_geodesic(&p, &s).unwrap(),
            Certification::Feasible { lambda: 1.0, k: 0.0 }
        );
    }

    #[test]
    fn constant_path_has_witness_at_ends() {
        let s = line(2);
        let p = DiscretePath::segment(1.0, vec![1; 4], 1.0, 0.0);
        match certify_quasi_geodesic(&p, &s).unwrap() {
            Certification::Infeasible(v) => {
                assert_eq!((v.t, v.s), (0.0, 3.0));
                assert!(v.required_lambda.is_infinite());
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn empty_path_is_structural() {
        let p = DiscretePath::segment(1.0, vec![], 1.0, 0.0);
        assert!(matches!(certify_quasi_geodesic(&p, &line(2)), Err(CcxError::Structural(_))));
    }

    #[test]
    fn alternating_path_matches_exhaustive_scan() {
        let s = line(2);
        let p = DiscretePath::segment(1.0, vec![0, 1, 0, 1, 0, 1, 0], 10.0, 1.0);
        let (lambda, k) = certify_quasi_geodesic(&p, &s).unwrap().feasible().unwrap();
        // independent oracle: bisection on λ over all grid pairs at k = 1
        let ok = |l: f64| {
            (0..7).all(|i| {
                (i..7).all(|j| {
                    let dt = (j - i) as f64;
                    let d = s.d(p.values[i], p.values[j]);
                    d <= l * dt + 1.0 + 1e-12 && d >= dt / l - 1.0 - 1e-12
                })
            })
        };
        let (mut lo, mut hi) = (1.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                hi = mid
            } else {
                lo = mid
            }
        }
        assert!((lambda - hi).abs() < 1e-9, "{lambda} vs {hi}");
        assert!(k <= 1.0 + 1e-12);
    }

    #[test]
    fn unit_ray_unchanged_by_flooring() {
        let r = DiscretePath::ray(1.0, vec![0, 1, 2, 3], 1.0, 0.0);
        let s = step_ray(&r).unwrap();
        assert_eq!(s.values, r.values);
        assert_eq!((s.lambda, s.k), (1.0, 1.0));
        let s6 = line(4);
        let (l, k) = certify_quasi_geodesic(&s, &s6).unwrap().feasible().unwrap();
        assert!(l <= 1.0 && k <= 1.0);
    }

    #[test]
    fn half_step_ray_gives_integer_samples() {
        let r = DiscretePath::ray(0.5, (0..9).collect(), 1.0, 0.0);
        let s = step_ray(&r).unwrap();
        assert_eq!(s.values, vec![0, 2, 4, 6, 8]);
    }

    #[test]
    fn reversal_is_involution() {
        let p = DiscretePath::segment(1.0, vec![3, 1, 4, 1, 5], 1.0, 0.0);
        assert_eq!(p.reversed().reversed(), p);
    }
}
