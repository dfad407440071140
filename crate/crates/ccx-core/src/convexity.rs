//! Fitting and replaying the two convexity axioms on sampled tuples.
//!
//! Axiom (ii) is checked at tuples `(γ, η, t, s, c)` where `ct` and `cs`
//! land on the parameter grid, so no flooring slack enters the fitted `C`.
//! Axiom (iii) yields the θ step table and its affine majorant.

use serde::{Deserialize, Serialize};

use crate::constants::{derive_constants, ConstantTable};
use crate::error::{CcxError, Result};
use crate::exec::{map_range, Exec};
use crate::metric::FiniteMetricSpace;
use crate::path::DiscretePath;
use crate::sample::{FlatIndex, PairPlan};
use crate::system::GeodesicSystem;
use crate::TOL;

/// Non-decreasing piecewise function: on `[breaks[i], breaks[i+1])` it is
/// `values[i] + slope * (r - breaks[i])`. A fitted table has slope 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaTable {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub slope: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl ThetaTable {
    /// `θ(r) = a r + b`.
    pub fn affine(a: f64, b: f64) -> Self {
        ThetaTable { breaks: vec![0.0], values: vec![b], slope: a }
    }

    pub fn identity() -> Self {
        Self::affine(1.0, 0.0)
    }

    pub fn eval(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        let i = self.breaks.partition_point(|&b| b <= r + TOL).saturating_sub(1);
        self.values[i] + self.slope * (r - self.breaks[i])
    }

    /// `θ̃(t) = θ(t + 1) + 1`.
    pub fn tilde(&self) -> ThetaTable {
        let mut breaks = vec![0.0];
        let mut values = vec![self.eval(1.0) + 1.0];
        for (&b, &v) in self.breaks.iter().zip(&self.values) {
            if b > 1.0 + TOL {
                breaks.push(b - 1.0);
                values.push(v + 1.0);
            }
        }
        ThetaTable { breaks, values, slope: self.slope }
    }

    pub fn is_monotone(&self) -> bool {
        self.slope >= 0.0
            && self.breaks.windows(2).all(|w| w[0] < w[1])
            && self.values.windows(2).all(|w| w[0] <= w[1] + TOL)
    }

    /// Largest sampled radius (last break).
    pub fn range_end(&self) -> f64 {
        *self.breaks.last().unwrap_or(&0.0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexityCertificate {
    pub lambda: f64,
    pub k: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub theta: ThetaTable,
    pub affine_theta: Option<(f64, f64)>,
    /// Seed of the tuple subsample, `None` when the scan was exhaustive.
    pub seed: Option<u64>,
    pub tuples: u64,
    pub derived: ConstantTable,
}

impl ConvexityCertificate {
    /// Certificate from given constants, e.g. the exact ones of a model space.
    pub fn from_parts(lambda: f64, k: f64, e: f64, c: f64, theta: ThetaTable, affine: Option<(f64, f64)>) -> Self {
        let mut cert = ConvexityCertificate {
            lambda,
            k,
            e,
            c,
            theta,
            affine_theta: affine,
            seed: None,
            tuples: 0,
            derived: ConstantTable::default(),
        };
        cert.derived = derive_constants(&cert);
        cert
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TupleWitness {
    pub gamma: usize,
    pub eta: usize,
    pub t: f64,
    pub s: f64,
    pub c: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// `max(t, s)` rounded down to an integer.
    pub scale: u64,
    /// Largest `d(γ(ct),η(cs)) - c d(γ(t),η(s)) - (1-c) d(γ(0),η(0))` at this scale.
    pub gap: f64,
    pub witness: TupleWitness,
}

/// Evidence that no `(E, C)` under the caps works: the gap grows with scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationCurve {
    pub points: Vec<CurvePoint>,
    /// Least-squares slope of gap against scale.
    #[serde(with = "crate::real")]
    pub slope: f64,
    /// Smallest E that would be needed with C at its cap (infinite if none).
    #[serde(with = "crate::real")]
    pub e_required: f64,
    pub e_cap: f64,
    pub c_cap: f64,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub enum ConvexityFit {
    Certified(ConvexityCertificate),
    Violation(ViolationCurve),
}

#[derive(Clone, Debug)]
pub struct FitConfig {
    /// Upper bound on the number of `(γ, η, t, s, c)` tuples.
    pub budget: u64,
    pub seed: u64,
    pub e_cap: f64,
    /// Defaults to a quarter of the diameter.
    pub c_cap: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { budget: 1_000_000, seed: 0x5eed, e_cap: 8.0, c_cap: None }
    }
}

/// `{0, 1/16, ..., 1}` plus the adversarial values `1/(2E)`.
pub fn c_grid(adversarial_e: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = (0..=16).map(|j| j as f64 / 16.0).collect();
    for &e in adversarial_e {
        let c = 1.0 / (2.0 * e);
        if c <= 1.0 && !g.iter().any(|&x| (x - c).abs() < 1e-12) {
            g.push(c);
        }
    }
    g.sort_by(f64::total_cmp);
    g
}

/// `c * i` as a grid index when it is (numerically) an integer.
#[inline]
fn landing(c: f64, i: usize) -> Option<usize> {
    let x = c * i as f64;
    let r = x.round();
    ((x - r).abs() < 1e-9).then_some(r as usize)
}

/// Signed gap of axiom (ii) at one tuple: positive means violated.
pub fn convexity_gap(
    space: &FiniteMetricSpace,
    gamma: &DiscretePath,
    eta: &DiscretePath,
    t: f64,
    s: f64,
    c: f64,
    e: f64,
    big_c: f64,
) -> f64 {
    let lhs = space.d(gamma.at(c * t), eta.at(c * s));
    let rhs = c * e * space.d(gamma.at(t), eta.at(s))
        + (1.0 - c) * e * space.d(gamma.start(), eta.start())
        + big_c;
    lhs - rhs
}

/// One evaluated tuple of axiom (ii): `lhs <= E * m + C` is required.
#[derive(Clone, Copy, Debug)]
struct Term {
    lhs: f64,
    m: f64,
    c: f64,
}

struct TupleScan<'a> {
    space: &'a FiniteMetricSpace,
    paths: &'a [DiscretePath],
    flat: FlatIndex,
    plan: PairPlan,
    cs: Vec<f64>,
}

impl<'a> TupleScan<'a> {
    fn new(space: &'a FiniteMetricSpace, paths: &'a [DiscretePath], cs: Vec<f64>, budget: u64, seed: u64) -> Self {
        let flat = FlatIndex::new(paths);
        let pairs = (budget / cs.len().max(1) as u64).max(1);
        let plan = PairPlan::new(flat.total(), flat.total(), pairs, seed);
        TupleScan { space, paths, flat, plan, cs }
    }

    /// Tuples of pair `k` with their positions.
    fn terms(&self, k: usize, out: &mut Vec<Term>) -> (usize, usize, usize, usize) {
        out.clear();
        let (a, b) = self.plan.get(k);
        let (gi, i) = self.flat.decode(a);
        let (hi, j) = self.flat.decode(b);
        let (g, h) = (&self.paths[gi], &self.paths[hi]);
        let d1 = self.space.d(g.values[i], h.values[j]);
        let d0 = self.space.d(g.values[0], h.values[0]);
        for &c in &self.cs {
            if let (Some(ci), Some(cj)) = (landing(c, i), landing(c, j)) {
                let lhs = self.space.d(g.values[ci], h.values[cj]);
                out.push(Term { lhs, m: c * d1 + (1.0 - c) * d0, c });
            }
        }
        (gi, i, hi, j)
    }

    fn tuple_count(&self) -> u64 {
        (self.plan.len() * self.cs.len()) as u64
    }
}

/// Fit `(E, C)`: the smallest `E ≥ 1` for which some `C ≤ c_cap` works, then
/// the smallest such `C`. Each tuple is linear in `(E, C)`, so both steps are
/// single max-reductions. Also fits θ and derives the constant table.
pub fn fit_convexity(
    space: &FiniteMetricSpace,
    sys: &GeodesicSystem,
    lambda: f64,
    k: f64,
    cfg: &FitConfig,
    exec: Exec,
) -> Result<ConvexityFit> {
    if sys.segments.is_empty() {
        return Err(CcxError::Structural("empty geodesic system".into()));
    }
    let c_cap = cfg.c_cap.unwrap_or_else(|| space.diameter() / 4.0);
    let scan = TupleScan::new(space, &sys.segments, c_grid(&[1.0, cfg.e_cap]), cfg.budget, cfg.seed);
    let n = scan.plan.len();

    // pass 1: E requirement and per-scale gap at E = 1, C = 0
    struct Pass1 {
        e_need: f64,
        blocked: bool,
        scale: u64,
        gap: f64,
        witness: Option<TupleWitness>,
    }
    let rows = map_range(exec, n, |kk| {
        let mut terms = Vec::with_capacity(scan.cs.len());
        let (gi, i, hi, j) = scan.terms(kk, &mut terms);
        let mut row = Pass1 { e_need: 1.0, blocked: false, scale: i.max(j) as u64, gap: f64::NEG_INFINITY, witness: None };
        let step = scan.paths[gi].step;
        for t in &terms {
            if t.m > TOL {
                row.e_need = row.e_need.max((t.lhs - c_cap) / t.m);
            } else if t.lhs > c_cap + TOL {
                row.blocked = true;
            }
            let gap = t.lhs - t.m;
            if gap > row.gap + TOL {
                row.gap = gap;
                row.witness = Some(TupleWitness {
                    gamma: gi,
                    eta: hi,
                    t: i as f64 * step,
                    s: j as f64 * step,
                    c: t.c,
                    lhs: t.lhs,
                    rhs: t.m,
                });
            }
        }
        row.scale = ((i.max(j)) as f64 * step).floor() as u64;
        row
    });
    let blocked = rows.iter().any(|r| r.blocked);
    let e_star = rows.iter().map(|r| r.e_need).fold(1.0, f64::max);
    let curve = |rows: Vec<Pass1>, e_required: f64| {
        let mut by_scale: std::collections::BTreeMap<u64, (f64, TupleWitness)> = Default::default();
        for r in rows {
            if let Some(w) = r.witness {
                let e = by_scale.entry(r.scale).or_insert((r.gap, w.clone()));
                if r.gap > e.0 + TOL {
                    *e = (r.gap, w);
                }
            }
        }
        let points: Vec<CurvePoint> = by_scale
            .into_iter()
            .map(|(scale, (gap, witness))| CurvePoint { scale, gap, witness })
            .collect();
        let slope = least_squares_slope(&points);
        ConvexityFit::Violation(ViolationCurve {
            points,
            slope,
            e_required,
            e_cap: cfg.e_cap,
            c_cap,
            seed: scan.plan.seed(),
        })
    };
    if blocked || e_star > cfg.e_cap + TOL {
        return Ok(curve(rows, if blocked { f64::INFINITY } else { e_star }));
    }

    // pass 2: smallest C at E*, overall and over the lower half of the scales
    let needs = map_range(exec, n, |kk| {
        let mut terms = Vec::new();
        scan.terms(kk, &mut terms);
        terms.iter().map(|t| t.lhs - e_star * t.m).fold(0.0, f64::max)
    });
    let c_star = needs.iter().copied().fold(0.0, f64::max);
    let c_star = if c_star < TOL { 0.0 } else { c_star };
    // A finite sample always admits some C. The constant is only a constant
    // if it stops growing: doubling the scale range may cost grid slack only.
    let top = rows.iter().map(|r| r.scale).max().unwrap_or(0);
    let c_half = rows
        .iter()
        .zip(&needs)
        .filter(|(r, _)| 2 * r.scale <= top)
        .map(|(_, &c)| c)
        .fold(0.0, f64::max);
    let slack = lambda * sys.step() + k;
    if top >= 4 && c_star > c_half + slack + TOL {
        return Ok(curve(rows, e_star));
    }

    let (theta, affine) = fit_theta(space, sys, cfg.budget, cfg.seed, exec)?;
    let mut cert = ConvexityCertificate::from_parts(lambda, k, e_star, c_star, theta, Some(affine));
    cert.seed = scan.plan.seed();
    cert.tuples = scan.tuple_count();
    Ok(ConvexityFit::Certified(cert))
}

fn least_squares_slope(points: &[CurvePoint]) -> f64 {
    let n = points.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mx = points.iter().map(|p| p.scale as f64).sum::<f64>() / n;
    let my = points.iter().map(|p| p.gap).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.scale as f64 - mx) * (p.gap - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.scale as f64 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Fit θ as the monotone envelope of `|t - s|` against
/// `r = d(γ(0),η(0)) + d(γ(t),η(s))`, and its least-maximum affine majorant.
pub fn fit_theta(
    space: &FiniteMetricSpace,
    sys: &GeodesicSystem,
    budget: u64,
    seed: u64,
    exec: Exec,
) -> Result<(ThetaTable, (f64, f64))> {
    let paths = &sys.segments;
    let flat = FlatIndex::new(paths.iter());
    let plan = PairPlan::new(flat.total(), flat.total(), budget, seed ^ 0x7e7a);
    let mut samples: Vec<(f64, f64)> = map_range(exec, plan.len(), |kk| {
        let (a, b) = plan.get(kk);
        let (gi, i) = flat.decode(a);
        let (hi, j) = flat.decode(b);
        let (g, h) = (&paths[gi], &paths[hi]);
        let r = space.d(g.values[0], h.values[0]) + space.d(g.values[i], h.values[j]);
        (r, (g.param(i) - h.param(j)).abs())
    });
    Ok(theta_from_samples(&mut samples))
}

/// Monotone step table and affine majorant from `(r, |t-s|)` samples.
pub fn theta_from_samples(samples: &mut [(f64, f64)]) -> (ThetaTable, (f64, f64)) {
    samples.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut breaks = vec![0.0];
    let mut values = vec![0.0];
    for &(r, v) in samples.iter() {
        let last = *values.last().unwrap();
        if v > last + TOL {
            if r <= *breaks.last().unwrap() + TOL {
                *values.last_mut().unwrap() = v;
            } else {
                breaks.push(r);
                values.push(v);
            }
        }
    }
    let r_max = samples.last().map(|s| s.0).unwrap_or(0.0).max(*breaks.last().unwrap());
    let table = ThetaTable { breaks, values, slope: 0.0 };
    let affine = affine_majorant(&table, r_max);
    (table, affine)
}

/// Least-maximum affine majorant `A r + B` of a step table on `[0, r_max]`:
/// minimize the largest excess over θ subject to domination, with `A, B ≥ 0`.
/// The objective is convex in `A` (B is then forced), so a golden-section
/// search over `A` solves the two-variable program.
pub fn affine_majorant(table: &ThetaTable, r_max: f64) -> (f64, f64) {
    let n = table.breaks.len();
    let right: Vec<f64> = (0..n)
        .map(|i| if i + 1 < n { table.breaks[i + 1] } else { r_max.max(table.breaks[i]) })
        .collect();
    let b_of = |a: f64| {
        (0..n)
            .map(|i| table.values[i] - a * table.breaks[i])
            .fold(0.0, f64::max)
    };
    let excess = |a: f64| {
        let b = b_of(a);
        (0..n)
            .map(|i| a * right[i] + b - table.values[i])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut hi = 1.0f64;
    for i in 0..n {
        if table.breaks[i] > TOL {
            hi = hi.max(table.values[i] / table.breaks[i]);
        }
    }
    hi += 1.0;
    let (mut lo, mut up) = (0.0f64, hi);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let m1 = up - g * (up - lo);
        let m2 = lo + g * (up - lo);
        if excess(m1) <= excess(m2) {
            up = m2;
        } else {
            lo = m1;
        }
    }
    let a = 0.5 * (lo + up);
    // snap to nearby round values when they are equally good
    let a = [a.round(), (a * 1e6).round() / 1e6, a]
        .into_iter()
        .find(|&x| x >= 0.0 && excess(x) <= excess(a) + 1e-12)
        .unwrap_or(a);
    (a, b_of(a))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditMode {
    Segments,
    Rays,
    Interval,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct AuditReport {
    pub checked: u64,
    pub violations: u64,
    /// Largest `lhs - rhs` seen (negative when everything holds with room).
    #[serde(with = "crate::real")]
    pub max_slack: f64,
    pub tolerance: f64,
    pub witnesses: Vec<TupleWitness>,
    pub seed: Option<u64>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn absorb(&mut self, lhs: f64, rhs: f64, w: impl FnOnce() -> TupleWitness) {
        self.checked += 1;
        let slack = lhs - rhs;
        if slack > self.max_slack {
            self.max_slack = slack;
        }
        if slack > self.tolerance {
            self.violations += 1;
            if self.witnesses.len() < 32 {
                self.witnesses.push(w());
            }
        }
    }

    fn merge(mut self, other: AuditReport) -> AuditReport {
        self.checked += other.checked;
        self.violations += other.violations;
        self.max_slack = self.max_slack.max(other.max_slack);
        let room = 32usize.saturating_sub(self.witnesses.len());
        self.witnesses.extend(other.witnesses.into_iter().take(room));
        self
    }
}

/// Replay axiom (ii) (segments), its ray version with constant `D`, or the
/// two-sided interval form on a symmetric prefix-closed system.
pub fn verify_convexity(
    space: &FiniteMetricSpace,
    sys: &GeodesicSystem,
    cert: &ConvexityCertificate,
    mode: AuditMode,
    budget: u64,
    seed: u64,
    exec: Exec,
) -> Result<AuditReport> {
    let t = &cert.derived;
    let (e, h) = (cert.e, sys.step());
    match mode {
        AuditMode::Segments => {
            let tol = cert.lambda * h + cert.k + TOL;
            let scan = TupleScan::new(space, &sys.segments, c_grid(&[e]), budget, seed);
            let parts = map_range(exec, scan.plan.len(), |kk| {
                let mut rep = AuditReport { tolerance: tol, max_slack: f64::NEG_INFINITY, ..Default::default() };
                let mut terms = Vec::new();
                let (gi, i, hi, j) = scan.terms(kk, &mut terms);
                for term in &terms {
                    rep.absorb(term.lhs, e * term.m + cert.c, || TupleWitness {
                        gamma: gi,
                        eta: hi,
                        t: i as f64 * h,
                        s: j as f64 * h,
                        c: term.c,
                        lhs: term.lhs,
                        rhs: e * term.m + cert.c,
                    });
                }
                rep
            });
            Ok(collect(parts, tol, scan.plan.seed()))
        }
        AuditMode::Rays => {
            // rays and segments from the base point, floor-sampled, constant D
            let mut paths: Vec<DiscretePath> = sys.rays.clone();
            paths.extend(sys.from_point(space.base).iter().map(|&i| sys.segments[i as usize].clone()));
            let cs = c_grid(&[e]);
            let flat = FlatIndex::new(paths.iter());
            let plan = PairPlan::new(flat.total(), flat.total(), (budget / cs.len() as u64).max(1), seed);
            let tol = TOL;
            let parts = map_range(exec, plan.len(), |kk| {
                let mut rep = AuditReport { tolerance: tol, max_slack: f64::NEG_INFINITY, ..Default::default() };
                let (a, b) = plan.get(kk);
                let (gi, i) = flat.decode(a);
                let (hi, j) = flat.decode(b);
                let (g, hp) = (&paths[gi], &paths[hi]);
                let (tt, ss) = (g.param(i), hp.param(j));
                let d1 = space.d(g.values[i], hp.values[j]);
                let d0 = space.d(g.start(), hp.start());
                for &c in &cs {
                    let lhs = space.d(g.at(c * tt), hp.at(c * ss));
                    let rhs = c * e * d1 + (1.0 - c) * e * d0 + t.d;
                    rep.absorb(lhs, rhs, || TupleWitness { gamma: gi, eta: hi, t: tt, s: ss, c, lhs, rhs });
                }
                rep
            });
            Ok(collect(parts, tol, plan.seed()))
        }
        AuditMode::Interval => {
            if !(sys.symmetric && sys.prefix_closed) {
                return Err(CcxError::Precondition(
                    "interval mode needs a symmetric prefix-closed system".into(),
                ));
            }
            let tol = cert.lambda * h + cert.k + TOL;
            let cs = c_grid(&[e]);
            let n = sys.segments.len() as u64;
            let draws = (budget / cs.len() as u64).max(1);
            let mut rng = crate::sample::rng(seed);
            use rand::Rng;
            let picks: Vec<(usize, usize, [usize; 4])> = (0..draws)
                .map(|_| {
                    let gi = rng.gen_range(0..n) as usize;
                    let hi = rng.gen_range(0..n) as usize;
                    let (lg, lh) = (sys.segments[gi].len(), sys.segments[hi].len());
                    (
                        gi,
                        hi,
                        [rng.gen_range(0..lg), rng.gen_range(0..lg), rng.gen_range(0..lh), rng.gen_range(0..lh)],
                    )
                })
                .collect();
            let parts = map_range(exec, picks.len(), |kk| {
                let mut rep = AuditReport { tolerance: tol, max_slack: f64::NEG_INFINITY, ..Default::default() };
                let (gi, hi, [t1, t2, s1, s2]) = picks[kk];
                let (g, hp) = (&sys.segments[gi], &sys.segments[hi]);
                let d2 = space.d(g.values[t2], hp.values[s2]);
                let d1 = space.d(g.values[t1], hp.values[s1]);
                for &c in &cs {
                    let tm = c * t2 as f64 + (1.0 - c) * t1 as f64;
                    let sm = c * s2 as f64 + (1.0 - c) * s1 as f64;
                    let (Some(ti), Some(si)) = (land(tm), land(sm)) else {
                        continue;
                    };
                    let lhs = space.d(g.values[ti], hp.values[si]);
                    let rhs = c * e * d2 + (1.0 - c) * e * d1 + cert.c;
                    rep.absorb(lhs, rhs, || TupleWitness {
                        gamma: gi,
                        eta: hi,
                        t: g.param(t2),
                        s: hp.param(s2),
                        c,
                        lhs,
                        rhs,
                    });
                }
                rep
            });
            Ok(collect(parts, tol, Some(seed)))
        }
    }
}

fn land(x: f64) -> Option<usize> {
    let r = x.round();
    ((x - r).abs() < 1e-9 && r >= 0.0).then_some(r as usize)
}

fn collect(parts: Vec<AuditReport>, tol: f64, seed: Option<u64>) -> AuditReport {
    let init = AuditReport { tolerance: tol, max_slack: f64::NEG_INFINITY, seed, ..Default::default() };
    let mut rep = parts.into_iter().fold(init, AuditReport::merge);
    rep.seed = seed;
    rep
}

/// Replay of the same-origin bound
/// `d(γ(t),η(t)) ≤ E(d(γ(a),η(b)) + λθ̃(d(γ(a),η(b))) + k₁) + D`, `t ≤ min(a,b)`,
/// over pairs of rays and segments from the base point.
pub fn audit_same_origin(
    space: &FiniteMetricSpace,
    sys: &GeodesicSystem,
    table: &ConstantTable,
    budget: u64,
    seed: u64,
    exec: Exec,
) -> AuditReport {
    let mut paths: Vec<&DiscretePath> = sys.rays.iter().collect();
    paths.extend(sys.from_point(space.base).iter().map(|&i| &sys.segments[i as usize]));
    let flat = FlatIndex::new(paths.iter().copied());
    let plan = PairPlan::new(flat.total(), flat.total(), budget, seed);
    let parts = map_range(exec, plan.len(), |kk| {
        let mut rep = AuditReport { tolerance: TOL, max_slack: f64::NEG_INFINITY, ..Default::default() };
        let (a, b) = plan.get(kk);
        let (gi, i) = flat.decode(a);
        let (hi, j) = flat.decode(b);
        let (g, h) = (paths[gi], paths[hi]);
        let dab = space.d(g.values[i], h.values[j]);
        let bound = table.ray_same_param_bound(dab);
        for m in 0..=i.min(j) {
            let lhs = space.d(g.values[m], h.values[m]);
            rep.absorb(lhs, bound, || TupleWitness {
                gamma: gi,
                eta: hi,
                t: g.param(i),
                s: h.param(j),
                c: m as f64,
                lhs,
                rhs: bound,
            });
        }
        rep
    });
    collect(parts, TOL, plan.seed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{gen_space, GeodesicPolicy, SpaceKind, SpaceRecipe};

    #[test]
    fn theta_tilde_of_identity() {
        let t = ThetaTable::identity().tilde();
        assert_eq!(t.eval(0.0), 2.0);
        assert_eq!(t.eval(3.0), 5.0);
    }

    #[test]
    fn tilde_of_step_table() {
        let t = ThetaTable { breaks: vec![0.0, 1.0, 2.5], values: vec![0.0, 1.0, 3.0], slope: 0.0 };
        let tt = t.tilde();
        for r in [0.0, 0.4, 1.2, 1.5, 1.6, 4.0] {
            assert_eq!(tt.eval(r), t.eval(r + 1.0) + 1.0, "r = {r}");
        }
    }

    #[test]
    fn endpoint_c_values_contribute_nothing() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 3, GeodesicPolicy::Canonical)).unwrap();
        let (g, h) = (&l.segments[17], &l.segments[90]);
        let (t, u) = (g.domain_end(), h.domain_end());
        assert!(convexity_gap(&s, g, h, t, u, 1.0, 1.0, 0.0) <= 0.0);
        assert!(convexity_gap(&s, g, h, t, u, 0.0, 1.0, 0.0) <= 0.0);
    }

    #[test]
    fn affine_majorant_of_identity_steps() {
        let mut samples: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, i as f64)).collect();
        let (table, (a, b)) = theta_from_samples(&mut samples);
        assert_eq!((a, b), (1.0, 0.0));
        assert!(table.is_monotone());
    }

    #[test]
    fn majorant_dominates_table() {
        let mut samples = vec![(0.0, 1.0), (0.5, 1.0), (2.0, 4.0), (3.0, 4.5), (7.0, 6.0)];
        let (table, (a, b)) = theta_from_samples(&mut samples);
        for (&r, &v) in table.breaks.iter().zip(&table.values) {
            assert!(a * r + b >= v - 1e-9);
        }
    }

    #[test]
    fn tree_fits_exact_constants() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 4, GeodesicPolicy::Canonical)).unwrap();
        let cfg = FitConfig { budget: 400_000, ..Default::default() };
        match fit_convexity(&s, &l, 1.0, 0.0, &cfg, Exec::Parallel).unwrap() {
            ConvexityFit::Certified(c) => {
                assert_eq!(c.e, 1.0);
                assert_eq!(c.c, 0.0);
                assert_eq!(c.derived.d, 4.0);
            }
            ConvexityFit::Violation(v) => panic!("unexpected violation {v:?}"),
        }
    }

    #[test]
    fn interval_mode_needs_closed_system() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 2, GeodesicPolicy::Canonical)).unwrap();
        let cert = ConvexityCertificate::from_parts(1.0, 0.0, 1.0, 0.0, ThetaTable::identity(), None);
        let mut open = l.clone();
        open.symmetric = false;
        assert!(verify_convexity(&s, &open, &cert, AuditMode::Interval, 100, 1, Exec::Sequential).is_err());
    }
}
