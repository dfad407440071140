//! Open cone over the boundary model, exponential and logarithmic maps,
//! a radial contraction, and the closeness audits between them.

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryModel;
use crate::error::{CcxError, Result};
use crate::exec::{map_range, Exec};
use crate::metric::{FiniteMetricSpace, PointId};
use crate::products::subsample;
use crate::TOL;

/// `t x` in the open cone; every point with `t = 0` is the apex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    pub t: f64,
    pub class: u32,
}

impl ConePoint {
    pub fn is_apex(&self) -> bool {
        self.t <= 0.0
    }
}

/// `|t - s| + min(t, s) d_ε(x, y)`.
pub fn cone_distance(p: ConePoint, q: ConePoint, d_eps: &[Vec<f64>]) -> f64 {
    let ang = if p.class == q.class { 0.0 } else { d_eps[p.class as usize][q.class as usize] };
    (p.t - q.t).abs() + p.t.min(q.t) * ang
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpValue {
    pub point: PointId,
    /// The ray parameter exceeded the horizon and was clamped.
    pub clamped: bool,
}

/// Exponential and logarithmic maps of a boundary model. Each class is
/// represented by its smallest ray id.
pub struct ConeMaps<'a> {
    pub space: &'a FiniteMetricSpace,
    pub model: &'a BoundaryModel,
    pub epsilon: f64,
    /// For each point, the first `(ray id, grid index)` through it.
    first_hit: Vec<Option<(u32, u32)>>,
}

impl<'a> ConeMaps<'a> {
    pub fn new(space: &'a FiniteMetricSpace, model: &'a BoundaryModel) -> Self {
        let mut first_hit = vec![None; space.len()];
        for (r, ray) in model.rays.iter().enumerate() {
            for (i, &v) in ray.values.iter().enumerate() {
                first_hit[v as usize].get_or_insert((r as u32, i as u32));
            }
        }
        ConeMaps { space, model, epsilon: model.epsilon, first_hit }
    }

    fn ray_exp(&self, class: u32, param: f64) -> ExpValue {
        let rep = self.model.representative(class);
        let clamped = param > rep.domain_end() + TOL;
        ExpValue { point: rep.at(param), clamped }
    }

    /// `η_x(t^{1/ε})`, clamped at the horizon with a flag.
    pub fn exp_clamped(&self, p: ConePoint) -> ExpValue {
        if p.is_apex() {
            return ExpValue { point: self.model.base, clamped: false };
        }
        self.ray_exp(p.class, p.t.powf(1.0 / self.epsilon))
    }

    /// `η_x(t^{1/ε})`; parameters beyond the horizon are an error.
    pub fn exp(&self, p: ConePoint) -> Result<PointId> {
        let v = self.exp_clamped(p);
        if v.clamped {
            return Err(CcxError::Horizon(format!(
                "t^(1/eps) = {} beyond horizon {}",
                p.t.powf(1.0 / self.epsilon),
                self.model.horizon
            )));
        }
        Ok(v.point)
    }

    /// Ray parameter `t_v` and ray id picked for `v`.
    pub fn ray_through(&self, v: PointId) -> Option<(u32, f64)> {
        let (r, i) = self.first_hit.get(v as usize).copied().flatten()?;
        Some((r, self.model.rays[r as usize].param(i as usize)))
    }

    /// `t_v^ε [γ_v]` for the first ray through `v`.
    pub fn log(&self, v: PointId) -> Result<ConePoint> {
        if v == self.model.base {
            return Ok(ConePoint { t: 0.0, class: 0 });
        }
        let (r, tv) = self
            .ray_through(v)
            .ok_or_else(|| CcxError::Domain(format!("point {v} lies on no stored ray")))?;
        Ok(ConePoint { t: tv.powf(self.epsilon), class: self.model.class_of[r as usize] })
    }

    /// Points on the class representatives.
    pub fn exp_image(&self) -> Vec<PointId> {
        let mut seen = vec![false; self.space.len()];
        let mut out = Vec::new();
        for c in 0..self.model.class_count() as u32 {
            for &v in &self.model.representative(c).values {
                if !std::mem::replace(&mut seen[v as usize], true) {
                    out.push(v);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Points on any stored ray of the model.
    pub fn ray_points(&self) -> Vec<PointId> {
        (0..self.space.len() as PointId).filter(|&v| self.first_hit[v as usize].is_some()).collect()
    }

    pub fn distance(&self, p: ConePoint, q: ConePoint) -> f64 {
        cone_distance(p, q, &self.model.d_eps)
    }
}

/// Piecewise-linear `r` with `r(0) = 0`, given by its values at breakpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialContraction {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(with = "crate::real")]
    pub bound: f64,
}

impl RadialContraction {
    pub fn identity() -> Self {
        RadialContraction { breaks: vec![0.0, 1.0], values: vec![0.0, 1.0], bound: f64::INFINITY }
    }

    /// Linear interpolation; slope 1 past the last breakpoint.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.breaks.len();
        if t >= self.breaks[n - 1] {
            return self.values[n - 1] + (t - self.breaks[n - 1]);
        }
        let i = self.breaks.partition_point(|&b| b <= t).max(1) - 1;
        let (b0, b1) = (self.breaks[i], self.breaks[i + 1]);
        let f = (t - b0) / (b1 - b0);
        self.values[i] + f * (self.values[i + 1] - self.values[i])
    }

    pub fn is_contraction(&self) -> bool {
        self.breaks.first() == Some(&0.0)
            && self.values.first() == Some(&0.0)
            && self.breaks.windows(2).zip(self.values.windows(2)).all(|(b, v)| {
                let (db, dv) = (b[1] - b[0], v[1] - v[0]);
                db > 0.0 && dv >= -TOL && dv <= db + TOL
            })
    }

    pub fn is_identity(&self) -> bool {
        self.breaks.iter().zip(&self.values).all(|(b, v)| (b - v).abs() < TOL)
    }
}

/// Default diameter target of the radial contraction, `4(E(D1 + 2k1) + D)`.
pub fn default_contraction_bound(model: &BoundaryModel) -> f64 {
    let t = &model.table;
    4.0 * (t.e * (t.d1 + 2.0 * t.k1) + t.d)
}

/// Cone radii of the sample: `(j h)^ε` for the grid parameters up to the horizon.
pub fn cone_knots(maps: &ConeMaps<'_>) -> Vec<f64> {
    let Some(rep) = maps.model.rays.first() else {
        return vec![0.0];
    };
    (0..rep.len()).map(|j| rep.param(j).powf(maps.epsilon)).collect()
}

/// Largest image distance over cone pairs at knots `a ≤ j` within cone
/// distance 1, when the knot values of `r` are `vals[..=j]`.
fn worst_pair_at(maps: &ConeMaps<'_>, knots: &[f64], vals: &[f64], j: usize) -> (f64, Option<[ConePoint; 2]>) {
    let nc = maps.model.class_count() as u32;
    let mut worst = (0.0, None);
    for a in 0..=j {
        for x in 0..nc {
            for y in 0..nc {
                let p = ConePoint { t: knots[a], class: x };
                let q = ConePoint { t: knots[j], class: y };
                if maps.distance(p, q) > 1.0 + TOL {
                    continue;
                }
                let u = maps.exp_clamped(ConePoint { t: vals[a], class: x }).point;
                let w = maps.exp_clamped(ConePoint { t: vals[j], class: y }).point;
                let d = maps.space.d(u, w);
                if d > worst.0 {
                    worst = (d, Some([p, q]));
                }
            }
        }
    }
    worst
}

/// Greedy radial contraction: follow slope 1 while every cone pair within
/// distance 1 maps to points at most `bound` apart, otherwise hold a plateau.
pub fn build_radial_contraction(maps: &ConeMaps<'_>, bound: f64) -> Result<RadialContraction> {
    let knots = cone_knots(maps);
    let mut vals = vec![0.0; knots.len()];
    for j in 1..knots.len() {
        vals[j] = vals[j - 1] + (knots[j] - knots[j - 1]);
        if worst_pair_at(maps, &knots, &vals, j).0 <= bound + TOL {
            continue;
        }
        vals[j] = vals[j - 1];
        let (d, w) = worst_pair_at(maps, &knots, &vals, j);
        if d > bound + TOL {
            return Err(CcxError::Contraction(format!(
                "no plateau keeps diameter {bound} at cone radius {}: pair {:?} maps {d} apart",
                knots[j], w
            )));
        }
    }
    if knots.len() == 1 {
        return Ok(RadialContraction { bound, ..RadialContraction::identity() });
    }
    Ok(RadialContraction { breaks: knots, values: vals, bound })
}

/// Replay of the greedy condition: the largest image distance over cone pairs
/// within distance 1, after applying `r`.
pub fn contraction_modulus(maps: &ConeMaps<'_>, r: &RadialContraction, samples: usize, seed: u64) -> (u64, f64) {
    let knots = cone_knots(maps);
    let nc = maps.model.class_count() as u32;
    let pts: Vec<ConePoint> = knots
        .iter()
        .flat_map(|&t| (0..nc).map(move |c| ConePoint { t, class: c }))
        .collect();
    let pairs: Vec<(usize, usize)> = (0..pts.len()).flat_map(|i| (i..pts.len()).map(move |j| (i, j))).collect();
    let pairs = subsample(pairs, samples, seed);
    let mut checked = 0;
    let mut worst = 0.0f64;
    for (i, j) in pairs {
        let (p, q) = (pts[i], pts[j]);
        if maps.distance(p, q) > 1.0 + TOL {
            continue;
        }
        checked += 1;
        let u = maps.exp_clamped(ConePoint { t: r.eval(p.t), class: p.class }).point;
        let w = maps.exp_clamped(ConePoint { t: r.eval(q.t), class: q.class }).point;
        worst = worst.max(maps.space.d(u, w));
    }
    (checked, worst)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BoundCheck {
    pub checked: u64,
    pub violations: u64,
    /// Largest `value - bound`.
    #[serde(with = "crate::real")]
    pub worst_slack: f64,
    pub witnesses: Vec<(PointId, PointId)>,
}

impl BoundCheck {
    fn new() -> Self {
        BoundCheck { worst_slack: f64::NEG_INFINITY, ..Default::default() }
    }

    fn record(&mut self, value: f64, bound: f64, w: (PointId, PointId)) {
        self.checked += 1;
        self.worst_slack = self.worst_slack.max(value - bound);
        if value > bound + TOL {
            self.violations += 1;
            if self.witnesses.len() < 16 {
                self.witnesses.push(w);
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveRow {
    pub t: f64,
    pub displacement: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundtripReport {
    /// `d(exp(log v), v) ≤ D` over points on stored rays.
    pub exp_log: BoundCheck,
    pub exp_log_max: f64,
    /// Points skipped because their ray strays more than `D` from its class
    /// representative, which chain merging at a finite horizon can cause.
    pub exp_log_premise_failures: u64,
    /// Cone distance between `log(exp(t x))` and `t x` against its closed form.
    pub log_exp: BoundCheck,
    /// Per ray parameter: worst displacement over classes and the bound there.
    pub curve: Vec<CurveRow>,
}

impl RoundtripReport {
    pub fn passed(&self) -> bool {
        self.exp_log.violations == 0 && self.log_exp.violations == 0
    }
}

/// Both roundtrip audits. `params` are ray parameters `T`; the cone radius is `T^ε`.
pub fn audit_roundtrips(maps: &ConeMaps<'_>, params: &[f64], exec: Exec) -> Result<RoundtripReport> {
    let t = &maps.model.table;
    let pts = maps.ray_points();
    let model = maps.model;
    let within: Vec<bool> = model
        .rays
        .iter()
        .enumerate()
        .map(|(r, ray)| {
            let rep = model.representative(model.class_of[r]);
            crate::boundary::max_trace(maps.space, ray, rep, ray.len().min(rep.len())) <= t.d + TOL
        })
        .collect();
    let rows = map_range(exec, pts.len(), |i| {
        let v = pts[i];
        let (r, _) = maps.ray_through(v).expect("points on rays have a ray");
        let p = maps.log(v).expect("points on rays have a logarithm");
        let back = maps.exp_clamped(ConePoint { t: p.t, class: p.class }).point;
        (v, back, maps.space.d(v, back), within[r as usize])
    });
    let mut exp_log = BoundCheck::new();
    let mut exp_log_max = 0.0f64;
    let mut exp_log_premise_failures = 0;
    for (v, back, d, ok) in rows {
        if !ok {
            exp_log_premise_failures += 1;
            continue;
        }
        exp_log_max = exp_log_max.max(d);
        exp_log.record(d, t.d, (v, back));
    }

    let mut log_exp = BoundCheck::new();
    let mut curve = Vec::new();
    for &big_t in params {
        if big_t > maps.model.horizon + TOL {
            continue;
        }
        let ct = big_t.powf(maps.epsilon);
        let mut worst = (f64::NEG_INFINITY, 0.0, 0.0);
        for c in 0..maps.model.class_count() as u32 {
            let p = ConePoint { t: ct, class: c };
            let v = maps.exp(p)?;
            let q = maps.log(v)?;
            let (_, tv) = maps.ray_through(v).unwrap_or((0, 0.0));
            let disp = maps.distance(p, q);
            let bound = t.log_exp_bound(ct, tv);
            log_exp.record(disp, bound, (v, maps.exp_clamped(q).point));
            if disp - bound > worst.0 - worst.1 || worst.0 == f64::NEG_INFINITY {
                worst = (disp, bound, 0.0);
            }
        }
        if worst.0 > f64::NEG_INFINITY {
            curve.push(CurveRow { t: big_t, displacement: worst.0, bound: worst.1 });
        }
    }
    Ok(RoundtripReport { exp_log, exp_log_max, exp_log_premise_failures, log_exp, curve })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PseudoReport {
    pub radius: f64,
    pub bound: f64,
    pub check: BoundCheck,
    /// True when no sampled pair met the premise.
    pub vacuous: bool,
}

/// Pseudocontinuity of `exp_1` on the grid: cone points with radial parts
/// `≥ 1` closer than the radius map within the bound.
pub fn audit_pseudocontinuity(maps: &ConeMaps<'_>, samples: usize, seed: u64) -> PseudoReport {
    let t = &maps.model.table;
    let (radius, bound) = (t.pseudo_radius(), t.pseudo_bound());
    let nc = maps.model.class_count() as u32;
    let len = maps.model.rays.first().map(|r| r.len()).unwrap_or(0);
    let mut check = BoundCheck::new();
    let pairs: Vec<(u32, u32)> = (0..nc).flat_map(|x| (x..nc).map(move |y| (x, y))).collect();
    let pairs = subsample(pairs, samples, seed);
    for (x, y) in pairs {
        let (rx, ry) = (maps.model.representative(x), maps.model.representative(y));
        for i in 0..len {
            for j in i..len {
                let (s, u) = (rx.param(i), ry.param(j));
                if s < 1.0 || u < 1.0 {
                    continue;
                }
                let dc = cone_distance(ConePoint { t: s, class: x }, ConePoint { t: u, class: y }, &maps.model.d_eps);
                if dc < radius {
                    check.record(maps.space.d(rx.values[i], ry.values[j]), bound, (rx.values[i], ry.values[j]));
                }
            }
        }
    }
    let vacuous = check.checked == 0;
    PseudoReport { radius, bound, check, vacuous }
}

/// The logarithm's modulus on sampled pairs of exp-image points.
pub fn audit_log_modulus(maps: &ConeMaps<'_>, max_dist: f64, samples: usize, seed: u64) -> Result<BoundCheck> {
    let img = maps.exp_image();
    let t = &maps.model.table;
    let pairs: Vec<(PointId, PointId)> = img
        .iter()
        .flat_map(|&v| img.iter().map(move |&w| (v, w)))
        .filter(|&(v, w)| v < w && maps.space.d(v, w) <= max_dist + TOL)
        .collect();
    let mut check = BoundCheck::new();
    for (v, w) in subsample(pairs, samples, seed) {
        let (p, q) = (maps.log(v)?, maps.log(w)?);
        let tv = maps.ray_through(v).map(|x| x.1).unwrap_or(0.0);
        let tw = maps.ray_through(w).map(|x| x.1).unwrap_or(0.0);
        check.record(maps.distance(p, q), t.log_modulus(maps.space.d(v, w), tv, tw), (v, w));
    }
    Ok(check)
}

pub fn write_curve_csv<W: std::io::Write>(rows: &[CurveRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(crate::products::csv_err)?;
    }
    wr.flush()?;
    Ok(())
}
