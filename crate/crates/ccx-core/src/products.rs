//! Gromov products of rays, segments, points and boundary classes, and the
//! replay of their quantitative laws.

use serde::{Deserialize, Serialize};

use crate::constants::ConstantTable;
use crate::error::{CcxError, Result};
use crate::exec::{map_range, Exec};
use crate::metric::{FiniteMetricSpace, PointId};
use crate::path::DiscretePath;
use crate::sample::triples;
use crate::system::GeodesicSystem;
use crate::TOL;

/// Stored representatives consulted per entity.
pub const MAX_REPRESENTATIVES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Product {
    pub value: f64,
    /// The last compared parameter still satisfied the threshold.
    pub saturated: bool,
}

/// `sup{t ≤ min(a, b) : d(γ(t), η(t)) ≤ threshold}` over the common grid.
pub fn path_product(space: &FiniteMetricSpace, g: &DiscretePath, h: &DiscretePath, threshold: f64) -> Product {
    let n = g.len().min(h.len());
    let mut last = 0usize;
    for i in 0..n {
        if space.d(g.values[i], h.values[i]) <= threshold + TOL {
            last = i;
        }
    }
    Product { value: g.param(last), saturated: last + 1 == n }
}

/// Product of two rays from the base point at threshold `D1`.
pub fn ray_product(space: &FiniteMetricSpace, g: &DiscretePath, h: &DiscretePath, table: &ConstantTable) -> Result<Product> {
    if g.start() != h.start() {
        return Err(CcxError::Precondition(format!(
            "rays start at different points {} and {}",
            g.start(),
            h.start()
        )));
    }
    if (g.step - h.step).abs() > TOL {
        return Err(CcxError::Precondition("rays use different grid steps".into()));
    }
    Ok(path_product(space, g, h, table.d1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum Entity {
    Segment(u32),
    Ray(u32),
    Point(PointId),
    Class(u32),
}

impl std::fmt::Display for Entity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Entity::Segment(i) => write!(f, "segment:{i}"),
            Entity::Ray(i) => write!(f, "ray:{i}"),
            Entity::Point(i) => write!(f, "point:{i}"),
            Entity::Class(i) => write!(f, "class:{i}"),
        }
    }
}

/// Everything needed to evaluate products of entities.
#[derive(Clone, Copy)]
pub struct ProductContext<'a> {
    pub space: &'a FiniteMetricSpace,
    pub system: &'a GeodesicSystem,
    pub table: &'a ConstantTable,
    /// Ray ids per boundary class.
    pub classes: Option<&'a [Vec<u32>]>,
}

impl<'a> ProductContext<'a> {
    pub fn new(space: &'a FiniteMetricSpace, system: &'a GeodesicSystem, table: &'a ConstantTable) -> Self {
        ProductContext { space, system, table, classes: None }
    }

    pub fn with_classes(mut self, classes: &'a [Vec<u32>]) -> Self {
        self.classes = Some(classes);
        self
    }

    fn in_ball(&self, p: PointId) -> bool {
        self.space.d(self.space.base, p) <= self.table.ball_radius + TOL
    }

    /// Paths standing for `e`; empty for points inside the base ball.
    pub fn representatives(&self, e: Entity) -> Result<Vec<&'a DiscretePath>> {
        let sys = self.system;
        let out: Vec<&DiscretePath> = match e {
            Entity::Segment(i) => sys.segments.get(i as usize).into_iter().collect(),
            Entity::Ray(i) => sys.rays.get(i as usize).into_iter().collect(),
            Entity::Point(p) => sys
                .between(self.space.base, p)
                .iter()
                .take(MAX_REPRESENTATIVES)
                .map(|&i| &sys.segments[i as usize])
                .collect(),
            Entity::Class(c) => self
                .classes
                .and_then(|cl| cl.get(c as usize))
                .map(|members| {
                    members
                        .iter()
                        .take(MAX_REPRESENTATIVES)
                        .map(|&r| &sys.rays[r as usize])
                        .collect()
                })
                .unwrap_or_default(),
        };
        if out.is_empty() {
            return Err(CcxError::Representation(format!("no stored representative for {e}")));
        }
        Ok(out)
    }

    /// Product of two entities: 0 near the base point, otherwise the largest
    /// path product over stored representatives.
    pub fn product(&self, a: Entity, b: Entity) -> Result<Product> {
        for e in [a, b] {
            if let Entity::Point(p) = e {
                if self.in_ball(p) {
                    return Ok(Product { value: 0.0, saturated: false });
                }
            }
        }
        let ra = self.representatives(a)?;
        let rb = self.representatives(b)?;
        let mut best = Product { value: f64::NEG_INFINITY, saturated: false };
        for g in &ra {
            for h in &rb {
                let p = path_product(self.space, g, h, self.table.d1);
                if p.value > best.value + TOL || (p.value >= best.value - TOL && p.saturated) {
                    best = p;
                }
            }
        }
        Ok(best)
    }
}

/// Convenience wrapper over [`ProductContext::product`].
pub fn entity_product(ctx: &ProductContext<'_>, a: Entity, b: Entity) -> Result<Product> {
    ctx.product(a, b)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductEntry {
    pub a: Entity,
    pub b: Entity,
    pub value: f64,
    pub saturated: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductTable {
    pub entries: Vec<ProductEntry>,
    pub threshold: f64,
    pub horizon: f64,
    pub base: PointId,
}

impl ProductTable {
    /// Products of all unordered pairs of `entities` (including the diagonal).
    pub fn build(ctx: &ProductContext<'_>, entities: &[Entity], exec: Exec) -> Result<Self> {
        let n = entities.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        let values = map_range(exec, pairs.len(), |k| {
            let (i, j) = pairs[k];
            ctx.product(entities[i], entities[j])
        });
        let mut entries = Vec::with_capacity(pairs.len());
        for ((i, j), v) in pairs.into_iter().zip(values) {
            let v = v?;
            entries.push(ProductEntry { a: entities[i], b: entities[j], value: v.value, saturated: v.saturated });
        }
        Ok(ProductTable {
            entries,
            threshold: ctx.table.d1,
            horizon: ctx.system.ray_horizon().unwrap_or(0.0),
            base: ctx.space.base,
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["entity_a", "entity_b", "value", "saturated"])
            .map_err(csv_err)?;
        for e in &self.entries {
            wr.write_record([e.a.to_string(), e.b.to_string(), e.value.to_string(), e.saturated.to_string()])
                .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> CcxError {
    CcxError::Io(std::io::Error::other(e))
}

/// Symmetric matrix of ray products.
pub fn ray_product_matrix(space: &FiniteMetricSpace, rays: &[DiscretePath], table: &ConstantTable, exec: Exec) -> Vec<Vec<Product>> {
    let n = rays.len();
    map_range(exec, n, |i| (0..n).map(|j| path_product(space, &rays[i], &rays[j], table.d1)).collect::<Vec<_>>())
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LawCheck {
    pub name: String,
    pub checked: u64,
    pub skipped: u64,
    pub violations: u64,
    /// Smallest `lhs - rhs` seen; negative exactly when violated.
    #[serde(with = "crate::real")]
    pub worst_margin: f64,
    /// Largest constant the sample actually required, where meaningful.
    #[serde(with = "crate::real")]
    pub observed_constant: f64,
    pub witnesses: Vec<Vec<String>>,
}

impl LawCheck {
    fn new(name: &str) -> Self {
        LawCheck { name: name.into(), worst_margin: f64::INFINITY, observed_constant: 1.0, ..Default::default() }
    }

    fn record(&mut self, lhs: f64, rhs: f64, witness: impl FnOnce() -> Vec<String>) {
        self.checked += 1;
        let m = lhs - rhs;
        if m < self.worst_margin {
            self.worst_margin = m;
        }
        if m < -TOL {
            self.violations += 1;
            if self.witnesses.len() < 16 {
                self.witnesses.push(witness());
            }
        }
    }

    fn merge(&mut self, o: LawCheck) {
        self.checked += o.checked;
        self.skipped += o.skipped;
        self.violations += o.violations;
        self.worst_margin = self.worst_margin.min(o.worst_margin);
        self.observed_constant = self.observed_constant.max(o.observed_constant);
        let room = 16usize.saturating_sub(self.witnesses.len());
        self.witnesses.extend(o.witnesses.into_iter().take(room));
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LawReport {
    pub checks: Vec<LawCheck>,
}

impl LawReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.violations == 0)
    }

    pub fn get(&self, name: &str) -> Option<&LawCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Debug)]
pub struct LawConfig {
    pub triples: usize,
    pub point_pairs: usize,
    pub seed: u64,
}

impl Default for LawConfig {
    fn default() -> Self {
        LawConfig { triples: 20_000, point_pairs: 2_000, seed: 0x1a75 }
    }
}

/// Replay the product laws on the rays, points and (optional) classes of `ctx`.
pub fn audit_product_laws(ctx: &ProductContext<'_>, cfg: &LawConfig, exec: Exec) -> Result<LawReport> {
    let (space, sys, t) = (ctx.space, ctx.system, ctx.table);
    let rays = &sys.rays;
    let m = ray_product_matrix(space, rays, t, exec);
    let mut report = LawReport::default();

    // (a) the product is attained with slack D1 + 2k1
    let mut maxi = LawCheck::new("maximizer");
    for i in 0..rays.len() {
        for j in 0..rays.len() {
            let a = m[i][j].value;
            let d = space.d(rays[i].at(a), rays[j].at(a));
            maxi.record(t.d1 + 2.0 * t.k1, d, || vec![format!("ray:{i}"), format!("ray:{j}")]);
        }
    }
    report.checks.push(maxi);

    // (b) quasi-ultrametric on rays with D2
    let tri = triples(rays.len(), cfg.triples, cfg.seed);
    let parts = map_range(exec, tri.len(), |k| {
        let (x, y, z) = tri[k];
        let mut c = LawCheck::new("ultrametric_rays");
        let (xz, xy, yz) = (m[x][z].value, m[x][y].value, m[y][z].value);
        let mn = xy.min(yz);
        if xz > TOL {
            c.observed_constant = mn / xz;
        } else if mn > TOL {
            c.observed_constant = f64::INFINITY;
        }
        c.record(xz, mn / t.d2, || vec![format!("ray:{x}"), format!("ray:{y}"), format!("ray:{z}")]);
        c
    });
    let mut ult = LawCheck::new("ultrametric_rays");
    parts.into_iter().for_each(|p| ult.merge(p));
    report.checks.push(ult);

    // points with stored segments from the base, used by (b') (c) (d) (e)
    let points: Vec<PointId> = (0..space.len() as PointId)
        .filter(|&p| !sys.between(space.base, p).is_empty())
        .collect();
    let mut entities: Vec<Entity> = points.iter().map(|&p| Entity::Point(p)).collect();
    if let Some(cl) = ctx.classes {
        entities.extend((0..cl.len() as u32).map(Entity::Class));
    }

    // (b') quasi-ultrametric on entities with D2 D3
    if !entities.is_empty() {
        let tri = triples(entities.len(), cfg.triples / 4, cfg.seed ^ 1);
        let parts = map_range(exec, tri.len(), |k| {
            let (x, y, z) = tri[k];
            let (ex, ey, ez) = (entities[x], entities[y], entities[z]);
            let mut c = LawCheck::new("ultrametric_entities");
            let (Ok(xz), Ok(xy), Ok(yz)) = (ctx.product(ex, ez), ctx.product(ex, ey), ctx.product(ey, ez)) else {
                c.skipped += 1;
                return c;
            };
            c.record(xz.value, xy.value.min(yz.value) / (t.d2 * t.d3), || {
                vec![ex.to_string(), ey.to_string(), ez.to_string()]
            });
            c
        });
        let mut c = LawCheck::new("ultrametric_entities");
        parts.into_iter().for_each(|p| c.merge(p));
        report.checks.push(c);
    }

    // (c) two segments to the same end point share most of their length
    let mut same = LawCheck::new("same_endpoint");
    for &p in &points {
        let segs = sys.between(space.base, p);
        for (x, &i) in segs.iter().enumerate() {
            for &j in &segs[x + 1..] {
                let (g, h) = (&sys.segments[i as usize], &sys.segments[j as usize]);
                let pr = path_product(space, g, h, t.d1).value;
                let bound = g.domain_end().min(h.domain_end()) / t.d2p;
                same.record(pr, bound, || vec![format!("segment:{i}"), format!("segment:{j}")]);
            }
        }
    }
    report.checks.push(same);

    // (d) representative choices agree up to D3
    let pairs = pair_sample(points.len(), cfg.point_pairs, cfg.seed ^ 2);
    let parts = map_range(exec, pairs.len(), |k| {
        let (x, y) = pairs[k];
        let (p, q) = (points[x], points[y]);
        let mut c = LawCheck::new("representative_choice");
        if ctx.in_ball(p) || ctx.in_ball(q) {
            c.skipped += 1;
            return c;
        }
        let (Ok(rp), Ok(rq)) = (ctx.representatives(Entity::Point(p)), ctx.representatives(Entity::Point(q))) else {
            return c;
        };
        let vals: Vec<f64> = rp
            .iter()
            .flat_map(|g| rq.iter().map(move |h| (g, h)))
            .map(|(g, h)| path_product(space, g, h, t.d1).value)
            .collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(0.0, f64::max);
        if lo > TOL {
            c.observed_constant = hi / lo;
        }
        c.record(lo, hi / t.d3, || vec![format!("point:{p}"), format!("point:{q}")]);
        c
    });
    let mut rep = LawCheck::new("representative_choice");
    parts.into_iter().for_each(|p| rep.merge(p));
    report.checks.push(rep);

    // (e) moving a point by at most 1 keeps its product with x up to D3 D4
    let threshold = 2.0 * t.d3 * t.theta.eval(1.0);
    let close: Vec<(PointId, PointId)> = points
        .iter()
        .flat_map(|&v| points.iter().map(move |&w| (v, w)))
        .filter(|&(v, w)| v != w && space.d(v, w) <= 1.0 + TOL)
        .collect();
    let close = subsample(close, cfg.point_pairs, cfg.seed ^ 3);
    let xs: Vec<Entity> = subsample(entities.clone(), 64, cfg.seed ^ 4);
    let parts = map_range(exec, close.len(), |k| {
        let (v, w) = close[k];
        let mut c = LawCheck::new("perturbation");
        for &x in &xs {
            let (Ok(vx), Ok(wx)) = (ctx.product(Entity::Point(v), x), ctx.product(Entity::Point(w), x)) else {
                c.skipped += 1;
                continue;
            };
            if vx.value >= threshold - TOL {
                c.record(wx.value, vx.value / (t.d3 * t.d4), || {
                    vec![format!("point:{v}"), format!("point:{w}"), x.to_string()]
                });
            } else {
                c.skipped += 1;
            }
        }
        c
    });
    let mut pert = LawCheck::new("perturbation");
    parts.into_iter().for_each(|p| pert.merge(p));
    report.checks.push(pert);

    Ok(report)
}

fn pair_sample(n: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let all: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    subsample(all, count, seed)
}

/// Deterministic subsample of at most `count` items (all of them when fewer).
pub fn subsample<T>(mut items: Vec<T>, count: usize, seed: u64) -> Vec<T> {
    use rand::seq::SliceRandom;
    if items.len() <= count {
        return items;
    }
    let mut rng = crate::sample::rng(seed);
    items.partial_shuffle(&mut rng, count);
    items.truncate(count);
    items
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexity::{ConvexityCertificate, ThetaTable};
    use crate::spaces::{gen_space, tree_depth, GeodesicPolicy, SpaceKind, SpaceRecipe};

    fn unit() -> ConstantTable {
        ConvexityCertificate::from_parts(1.0, 0.0, 1.0, 0.0, ThetaTable::identity(), Some((1.0, 0.0))).derived
    }

    fn branch_depth(a: &DiscretePath, b: &DiscretePath) -> usize {
        a.values.iter().zip(&b.values).take_while(|(x, y)| x == y).count() - 1
    }

    #[test]
    fn tree_products_follow_branch_depth() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 7, GeodesicPolicy::Canonical)).unwrap();
        let t = unit();
        for i in (0..l.rays.len()).step_by(5) {
            for j in (0..l.rays.len()).step_by(3) {
                let p = ray_product(&s, &l.rays[i], &l.rays[j], &t).unwrap();
                if i == j {
                    assert!(p.saturated);
                    continue;
                }
                let b = branch_depth(&l.rays[i], &l.rays[j]);
                // d = 2(t - b) for t > b, so the product is min(b + 5, horizon)
                assert_eq!(p.value, ((b + 5) as f64).min(7.0), "branch at {b}");
            }
        }
        assert_eq!(tree_depth(l.rays[0].end()), 7);
    }

    #[test]
    fn product_is_symmetric() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 5, GeodesicPolicy::Canonical)).unwrap();
        let t = unit();
        for a in &l.rays {
            for b in &l.rays {
                assert_eq!(ray_product(&s, a, b, &t).unwrap(), ray_product(&s, b, a, &t).unwrap());
            }
        }
    }

    #[test]
    fn antipodal_disc_rays_meet_at_five() {
        let r = SpaceRecipe { pair_cap: Some(0), directions: Some(4), ..SpaceRecipe::new(SpaceKind::EuclideanL2Disc, 20, GeodesicPolicy::Affine) };
        let (s, l) = gen_space(&r).unwrap();
        let p = ray_product(&s, &l.rays[0], &l.rays[2], &unit()).unwrap();
        assert_eq!(p.value, 5.0);
    }

    #[test]
    fn base_point_has_zero_product() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 3, GeodesicPolicy::Canonical)).unwrap();
        let t = unit();
        let ctx = ProductContext::new(&s, &l, &t);
        assert_eq!(ctx.product(Entity::Point(0), Entity::Point(9)).unwrap().value, 0.0);
    }

    #[test]
    fn point_product_is_max_over_stored_pairs() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::GridL1, 6, GeodesicPolicy::StaircaseAll)).unwrap();
        let t = unit();
        let ctx = ProductContext::new(&s, &l, &t);
        let (p, q) = (40, 150);
        let got = ctx.product(Entity::Point(p), Entity::Point(q)).unwrap().value;
        let mut want = 0.0f64;
        for &i in l.between(s.base, p) {
            for &j in l.between(s.base, q) {
                let (g, h) = (&l.segments[i as usize], &l.segments[j as usize]);
                let n = g.len().min(h.len());
                let sup = (0..n).filter(|&m| s.d(g.values[m], h.values[m]) <= 10.0).max().unwrap();
                want = want.max(sup as f64);
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn missing_representative_is_reported() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 3, GeodesicPolicy::Canonical)).unwrap();
        let t = unit();
        let ctx = ProductContext::new(&s, &l, &t);
        assert!(matches!(ctx.product(Entity::Class(0), Entity::Point(3)), Err(CcxError::Representation(_))));
    }

    #[test]
    fn tree_laws_hold() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 4, GeodesicPolicy::Canonical)).unwrap();
        let t = unit();
        let ctx = ProductContext::new(&s, &l, &t);
        let r = audit_product_laws(&ctx, &LawConfig { triples: 5000, point_pairs: 300, seed: 3 }, Exec::Parallel).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.get("ultrametric_rays").unwrap().observed_constant <= 1.0 + 1e-9);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 2, GeodesicPolicy::Canonical)).unwrap();
        let t = unit();
        let ctx = ProductContext::new(&s, &l, &t);
        let tab = ProductTable::build(&ctx, &[Entity::Ray(0), Entity::Ray(1)], Exec::Sequential).unwrap();
        let mut buf = Vec::new();
        tab.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("entity_a,entity_b,value,saturated"));
    }
}
