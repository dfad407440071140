//! Approximate ideal boundary: ray extraction, clustering, the quasi-metric
//! `ρ = (x|y)^{-ε}`, its chain metric, base-point change and diagnostics.

use std::collections::BTreeMap;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::constants::ConstantTable;
use crate::error::{CcxError, Result};
use crate::exec::{map_range, Exec};
use crate::metric::{FiniteMetricSpace, PointId};
use crate::path::DiscretePath;
use crate::products::{path_product, subsample, Entity, Product, ProductContext};
use crate::sample::triples;
use crate::system::GeodesicSystem;
use crate::TOL;

/// Diagonal extraction on a finite sample: at each integer time keep the
/// members agreeing on the most common value (ties: value of the smallest
/// surviving index). Returns the limit ray on `[0, R]` and the surviving indices.
pub fn extract_limit_ray(seq: &[DiscretePath], horizon: usize) -> Result<(DiscretePath, Vec<usize>)> {
    let mut alive: Vec<usize> = (0..seq.len())
        .filter(|&i| seq[i].domain_end() + TOL >= horizon as f64)
        .collect();
    if alive.is_empty() {
        return Err(CcxError::Horizon(format!("no segment reaches horizon {horizon}")));
    }
    let mut values = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let mut counts: BTreeMap<PointId, (usize, usize)> = BTreeMap::new();
        for &i in &alive {
            let v = seq[i].at(t as f64);
            let e = counts.entry(v).or_insert((0, i));
            e.0 += 1;
        }
        let (&v, _) = counts
            .iter()
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
            .expect("alive is non-empty");
        alive.retain(|&i| seq[i].at(t as f64) == v);
        values.push(v);
    }
    let (lambda, k) = seq
        .iter()
        .fold((1.0f64, 0.0f64), |(l, k), p| (l.max(p.lambda), k.max(p.k)));
    Ok((DiscretePath::ray(1.0, values, lambda, lambda + k), alive))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryModel {
    pub rays: Vec<DiscretePath>,
    /// Ray ids per class, classes ordered by smallest member.
    pub classes: Vec<Vec<u32>>,
    pub class_of: Vec<u32>,
    /// Class products; the diagonal holds the horizon.
    pub products: Vec<Vec<f64>>,
    pub saturated: Vec<Vec<bool>>,
    pub rho: Vec<Vec<f64>>,
    pub d_eps: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub horizon: f64,
    pub base: PointId,
    pub table: ConstantTable,
    /// In-class ray pairs whose distance exceeds D somewhere (merged only
    /// through a chain of closer pairs).
    pub overmerged_pairs: u64,
    /// Cross-class pairs whose product reaches the horizon, i.e. whose
    /// separation is not resolved inside the sample.
    pub unresolved_pairs: u64,
    /// Entries where `ρ/(2K) ≤ d_ε ≤ ρ` fails.
    pub sandwich_violations: u64,
}

#[derive(Clone, Debug, Default)]
pub struct BoundaryConfig {
    /// Defaults to half the space radius, capped by the ray horizon.
    pub horizon: Option<f64>,
    pub epsilon: Option<f64>,
    /// Also cluster maximal stored segments from the base point, truncated at the horizon.
    pub segment_rays: bool,
}

/// Largest distance between two paths over the first `n` grid values.
pub fn max_trace(space: &FiniteMetricSpace, a: &DiscretePath, b: &DiscretePath, n: usize) -> f64 {
    (0..n).map(|i| space.d(a.values[i], b.values[i])).fold(0.0, f64::max)
}

fn truncate(p: &DiscretePath, n: usize) -> DiscretePath {
    let mut q = DiscretePath::ray(p.step, p.values[..n].to_vec(), p.lambda, p.k);
    q.kind = crate::path::PathKind::Ray { horizon: p.param(n - 1) };
    q
}

fn maximal_segments(space: &FiniteMetricSpace, sys: &GeodesicSystem, n: usize) -> Vec<DiscretePath> {
    let from: Vec<&DiscretePath> = sys.from_point(space.base).iter().map(|&i| &sys.segments[i as usize]).collect();
    let mut prefixes = std::collections::HashSet::new();
    for p in &from {
        for m in 1..p.len() {
            prefixes.insert(&p.values[..m]);
        }
    }
    let mut seen = std::collections::HashSet::new();
    from.iter()
        .filter(|p| p.len() >= n && !prefixes.contains(p.values.as_slice()))
        .map(|p| truncate(p, n))
        .filter(|p| seen.insert(p.values.clone()))
        .collect()
}

/// Cluster the stored rays into boundary classes and build `ρ` and `d_ε`.
pub fn build_boundary(
    space: &FiniteMetricSpace,
    sys: &GeodesicSystem,
    table: &ConstantTable,
    cfg: &BoundaryConfig,
    exec: Exec,
) -> Result<BoundaryModel> {
    let table = match cfg.epsilon {
        Some(e) => table.with_epsilon(e)?,
        None => table.clone(),
    };
    let ray_horizon = sys.ray_horizon().unwrap_or(0.0);
    let horizon = cfg.horizon.unwrap_or(space.radius() / 2.0).min(ray_horizon);
    let h = sys.step();
    let n = (horizon / h + TOL).floor() as usize + 1;
    let mut rays: Vec<DiscretePath> = sys.rays.iter().filter(|r| r.len() >= n).map(|r| truncate(r, n)).collect();
    if cfg.segment_rays {
        let have: std::collections::HashSet<Vec<PointId>> = rays.iter().map(|r| r.values.clone()).collect();
        rays.extend(maximal_segments(space, sys, n).into_iter().filter(|r| !have.contains(&r.values)));
    }
    let horizon = h * (n - 1) as f64;
    let m = rays.len();
    if m == 0 {
        return Ok(BoundaryModel {
            rays,
            classes: vec![],
            class_of: vec![],
            products: vec![],
            saturated: vec![],
            rho: vec![],
            d_eps: vec![],
            epsilon: table.epsilon,
            horizon,
            base: space.base,
            table,
            overmerged_pairs: 0,
            unresolved_pairs: 0,
            sandwich_violations: 0,
        });
    }

    // pairwise traces in parallel, merging serially in ray-id order
    let traces = map_range(exec, m, |i| ((i + 1)..m).map(|j| max_trace(space, &rays[i], &rays[j], n)).collect::<Vec<_>>());
    let mut uf = UnionFind::<usize>::new(m);
    for (i, row) in traces.iter().enumerate() {
        for (o, &d) in row.iter().enumerate() {
            if d <= table.d + TOL {
                uf.union(i, i + 1 + o);
            }
        }
    }
    let labels = uf.into_labeling();
    let mut order: BTreeMap<usize, u32> = BTreeMap::new();
    let mut classes: Vec<Vec<u32>> = Vec::new();
    let mut class_of = vec![0u32; m];
    for i in 0..m {
        let next = order.len() as u32;
        let c = *order.entry(labels[i]).or_insert(next);
        if c as usize == classes.len() {
            classes.push(Vec::new());
        }
        classes[c as usize].push(i as u32);
        class_of[i] = c;
    }
    let mut overmerged = 0u64;
    for (i, row) in traces.iter().enumerate() {
        for (o, &d) in row.iter().enumerate() {
            if class_of[i] == class_of[i + 1 + o] && d > table.d + TOL {
                overmerged += 1;
            }
        }
    }

    let sys_rays = GeodesicSystem::new(vec![], rays.clone());
    let ctx = ProductContext::new(space, &sys_rays, &table).with_classes(&classes);
    let nc = classes.len();
    let prods: Vec<Vec<Product>> = map_range(exec, nc, |a| {
        (0..nc)
            .map(|b| {
                if a == b {
                    Product { value: horizon, saturated: true }
                } else {
                    ctx.product(Entity::Class(a as u32), Entity::Class(b as u32))
                        .expect("classes are non-empty")
                }
            })
            .collect()
    });
    let mut unresolved = 0;
    let mut rho = vec![vec![0.0; nc]; nc];
    for a in 0..nc {
        for b in 0..nc {
            if a != b {
                rho[a][b] = prods[a][b].value.powf(-table.epsilon);
                if prods[a][b].saturated && a < b {
                    unresolved += 1;
                }
            }
        }
    }
    let d_eps = chain_metric(&rho);
    let sandwich_violations = sandwich_violations(&rho, &d_eps, table.big_k);
    Ok(BoundaryModel {
        rays,
        classes,
        class_of,
        products: prods.iter().map(|r| r.iter().map(|p| p.value).collect()).collect(),
        saturated: prods.iter().map(|r| r.iter().map(|p| p.saturated).collect()).collect(),
        rho,
        d_eps,
        epsilon: table.epsilon,
        horizon,
        base: space.base,
        table,
        overmerged_pairs: overmerged,
        unresolved_pairs: unresolved,
        sandwich_violations,
    })
}

/// Infimum of chain lengths: shortest paths on the complete graph weighted by `rho`.
#[allow(clippy::needless_range_loop)]
pub fn chain_metric(rho: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rho.len();
    let mut d = rho.to_vec();
    for k in 0..n {
        for i in 0..n {
            let dik = d[i][k];
            if !dik.is_finite() {
                continue;
            }
            for j in 0..n {
                let c = dik + d[k][j];
                if c < d[i][j] {
                    d[i][j] = c;
                }
            }
        }
    }
    d
}

pub fn sandwich_violations(rho: &[Vec<f64>], d: &[Vec<f64>], big_k: f64) -> u64 {
    let mut bad = 0;
    for (i, row) in rho.iter().enumerate() {
        for (j, &r) in row.iter().enumerate() {
            if d[i][j] > r + TOL || d[i][j] < r / (2.0 * big_k) - TOL {
                bad += 1;
            }
        }
    }
    bad
}

impl BoundaryModel {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Smallest ray id of each class.
    pub fn representatives(&self) -> Vec<u32> {
        self.classes.iter().map(|c| c[0]).collect()
    }

    pub fn representative(&self, class: u32) -> &DiscretePath {
        &self.rays[self.classes[class as usize][0] as usize]
    }

    /// The rays as a system, for product contexts over the model.
    pub fn ray_system(&self) -> GeodesicSystem {
        GeodesicSystem::new(vec![], self.rays.clone())
    }

    /// Consistency of the clustering: in-class traces stay within D except
    /// for the reported over-merges, cross-class traces exceed D.
    pub fn clustering_consistent(&self, space: &FiniteMetricSpace) -> bool {
        let n = self.rays.first().map(|r| r.len()).unwrap_or(0);
        let mut over = 0;
        for i in 0..self.rays.len() {
            for j in (i + 1)..self.rays.len() {
                let d = max_trace(space, &self.rays[i], &self.rays[j], n);
                let same = self.class_of[i] == self.class_of[j];
                if !same && d <= self.table.d + TOL {
                    return false;
                }
                if same && d > self.table.d + TOL {
                    over += 1;
                }
            }
        }
        over == self.overmerged_pairs
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RebaseReport {
    /// For each class at the new base, the matched class at the old base.
    pub correspondence: Vec<Option<u32>>,
    pub bijective: bool,
    pub unmatched_new: Vec<u32>,
    pub unmatched_old: Vec<u32>,
    /// Largest pointwise distance between a new-base ray and its transported ray.
    pub max_pointwise: f64,
    pub c_bound: f64,
    /// Smallest `(γ_O|η_O)_O · D_OO' / (γ|η)_O'` over class pairs.
    pub min_product_ratio: f64,
    pub d_bound: f64,
    pub pointwise_ok: bool,
    pub products_ok: bool,
}

/// Transport every class of `new` (built at another base point) to a ray
/// from the base of `old` by limit extraction along its representative, and
/// match it with a class of `old`.
pub fn rebase(
    space: &FiniteMetricSpace,
    sys_old: &GeodesicSystem,
    old: &BoundaryModel,
    new: &BoundaryModel,
) -> Result<RebaseReport> {
    let t = &old.table;
    let shift = space.d(old.base, new.base);
    let c_bound = t.c_base_change(shift);
    let d_bound = t.d_base_change(shift);
    let n_old = old.rays.first().map(|r| r.len()).unwrap_or(0);
    let horizon = n_old.saturating_sub(1);
    let mut transported = Vec::new();
    let mut correspondence = Vec::new();
    let mut max_pointwise = 0.0f64;
    for c in 0..new.class_count() {
        let rep = new.representative(c as u32);
        let seq: Vec<DiscretePath> = rep
            .values
            .iter()
            .filter_map(|&v| sys_old.first_between(old.base, v).cloned())
            .collect();
        let reach = seq.iter().map(|p| p.domain_end()).fold(0.0, f64::max).floor() as usize;
        let (ray, _) = extract_limit_ray(&seq, horizon.min(reach))?;
        let m = ray.len().min(rep.len());
        max_pointwise = max_pointwise.max(max_trace(space, &ray, rep, m));
        let mut best: Option<(f64, u32)> = None;
        for oc in 0..old.class_count() {
            let orep = old.representative(oc as u32);
            let d = max_trace(space, &ray, orep, ray.len().min(orep.len()));
            if best.is_none_or(|b| d < b.0 - TOL) {
                best = Some((d, oc as u32));
            }
        }
        correspondence.push(best.filter(|b| b.0 <= t.d + TOL).map(|b| b.1));
        transported.push(ray);
    }
    let mut hit = vec![0u32; old.class_count()];
    for &c in correspondence.iter().flatten() {
        hit[c as usize] += 1;
    }
    let unmatched_new: Vec<u32> = (0..correspondence.len() as u32)
        .filter(|&c| correspondence[c as usize].is_none())
        .collect();
    let unmatched_old: Vec<u32> = (0..hit.len() as u32).filter(|&c| hit[c as usize] == 0).collect();
    let bijective = unmatched_new.is_empty() && hit.iter().all(|&h| h == 1);

    let mut min_ratio = f64::INFINITY;
    for a in 0..transported.len() {
        for b in (a + 1)..transported.len() {
            let before = new.products[a][b];
            if before <= TOL || new.saturated[a][b] {
                continue;
            }
            let after = path_product(space, &transported[a], &transported[b], t.d1).value;
            min_ratio = min_ratio.min(after * d_bound / before);
        }
    }
    Ok(RebaseReport {
        correspondence,
        bijective,
        unmatched_new,
        unmatched_old,
        max_pointwise,
        c_bound,
        min_product_ratio: min_ratio,
        d_bound,
        pointwise_ok: max_pointwise <= c_bound + TOL,
        products_ok: min_ratio >= 1.0 - TOL,
    })
}

/// Membership in the entourage `V_n` for two classes or a class and a point.
#[derive(Clone, Copy, Debug)]
pub struct Entourage {
    pub n: f64,
}

impl Entourage {
    pub fn contains(&self, ctx: &ProductContext<'_>, a: Entity, b: Entity) -> Result<bool> {
        match (a, b) {
            (Entity::Point(p), Entity::Point(q)) => Ok(ctx.space.d(p, q) < 1.0 / self.n),
            _ if a == b => Ok(true),
            _ => Ok(ctx.product(a, b)?.value > self.n),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CircleSample {
    pub a: u32,
    pub b: u32,
    pub angle: f64,
    pub product: f64,
    /// `(x|y) sin(θ/2)`.
    pub invariant: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JoinKey {
    pub x: Option<u32>,
    pub y: Option<u32>,
    pub s_index: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DiagnosticReport {
    Circle {
        samples: Vec<CircleSample>,
        skipped_saturated: u64,
        /// `None` when no pair was sampled.
        min: Option<f64>,
        max: Option<f64>,
        median: Option<f64>,
    },
    Join {
        classes: usize,
        expected: usize,
        /// Classes containing rays with different join keys.
        collisions: usize,
        /// Join keys spread over several classes.
        misses: usize,
    },
    Entourage {
        n: f64,
        m: f64,
        checked: u64,
        /// Triples where both premises held.
        applicable: u64,
        violations: u64,
    },
}

/// Angle of a class direction, from the coordinates of its representative's end point.
fn direction(space: &FiniteMetricSpace, model: &BoundaryModel, class: u32) -> Result<f64> {
    let coords = space
        .coords
        .as_ref()
        .ok_or_else(|| CcxError::Precondition("circle diagnostic needs planar coordinates".into()))?;
    let o = coords[model.base as usize];
    let e = coords[model.representative(class).end() as usize];
    Ok((e[1] - o[1]).atan2(e[0] - o[0]))
}

/// `(x|y) sin(θ/2)` over class pairs of a planar model.
pub fn circle_diagnostic(space: &FiniteMetricSpace, model: &BoundaryModel) -> Result<DiagnosticReport> {
    let nc = model.class_count();
    let angles: Vec<f64> = (0..nc as u32).map(|c| direction(space, model, c)).collect::<Result<_>>()?;
    let mut samples = Vec::new();
    let mut skipped = 0;
    for a in 0..nc {
        for b in (a + 1)..nc {
            let mut th = (angles[a] - angles[b]).abs();
            if th > std::f64::consts::PI {
                th = std::f64::consts::TAU - th;
            }
            if model.saturated[a][b] || th < TOL {
                skipped += 1;
                continue;
            }
            let p = model.products[a][b];
            samples.push(CircleSample { a: a as u32, b: b as u32, angle: th, product: p, invariant: p * (th / 2.0).sin() });
        }
    }
    let mut inv: Vec<f64> = samples.iter().map(|s| s.invariant).collect();
    inv.sort_by(f64::total_cmp);
    let median = inv.get(inv.len() / 2).copied();
    Ok(DiagnosticReport::Circle {
        min: inv.first().copied(),
        max: inv.last().copied(),
        median,
        samples,
        skipped_saturated: skipped,
    })
}

/// Compare the classes of a product boundary with the join of the factor
/// boundaries, using the provenance `(x ray, y ray, s index)` of each ray.
pub fn join_diagnostic(
    model: &BoundaryModel,
    provenance: &[(u32, u32, u32)],
    s_grid_len: usize,
    x_class_of: &[u32],
    y_class_of: &[u32],
    x_classes: usize,
    y_classes: usize,
) -> Result<DiagnosticReport> {
    if provenance.len() != model.rays.len() {
        return Err(CcxError::Precondition("join diagnostic needs product provenance for every ray".into()));
    }
    let last = s_grid_len as u32 - 1;
    let key = |r: usize| {
        let (x, y, s) = provenance[r];
        let (cx, cy) = (x_class_of[x as usize], y_class_of[y as usize]);
        if s == 0 {
            (Some(cx), None, s)
        } else if s == last {
            (None, Some(cy), s)
        } else {
            (Some(cx), Some(cy), s)
        }
    };
    let mut collisions = 0;
    let mut key_classes: BTreeMap<(Option<u32>, Option<u32>, u32), std::collections::BTreeSet<u32>> = BTreeMap::new();
    for members in &model.classes {
        let keys: std::collections::BTreeSet<_> = members.iter().map(|&r| key(r as usize)).collect();
        if keys.len() > 1 {
            collisions += 1;
        }
    }
    for (r, &c) in model.class_of.iter().enumerate() {
        key_classes.entry(key(r)).or_default().insert(c);
    }
    let misses = key_classes.values().filter(|s| s.len() > 1).count();
    let interior = s_grid_len.saturating_sub(2);
    Ok(DiagnosticReport::Join {
        classes: model.class_count(),
        expected: x_classes + y_classes + x_classes * y_classes * interior,
        collisions,
        misses,
    })
}

/// Composition law of the entourages on sampled class triples.
pub fn entourage_diagnostic(
    space: &FiniteMetricSpace,
    model: &BoundaryModel,
    n: f64,
    samples: usize,
    seed: u64,
) -> Result<DiagnosticReport> {
    let sys = model.ray_system();
    let ctx = ProductContext::new(space, &sys, &model.table).with_classes(&model.classes);
    let m = model.table.entourage_scale() * n * (1.0 + 1e-9);
    let (vm, vn) = (Entourage { n: m }, Entourage { n });
    let nc = model.class_count();
    let tri = subsample(triples(nc, samples, seed), samples, seed);
    let (mut applicable, mut violations) = (0, 0);
    for &(a, b, c) in &tri {
        let (ea, eb, ec) = (Entity::Class(a as u32), Entity::Class(b as u32), Entity::Class(c as u32));
        if vm.contains(&ctx, ea, eb)? && vm.contains(&ctx, eb, ec)? {
            applicable += 1;
            if !vn.contains(&ctx, ea, ec)? {
                violations += 1;
            }
        }
    }
    Ok(DiagnosticReport::Entourage { n, m, checked: tri.len() as u64, applicable, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexity::{ConvexityCertificate, ThetaTable};
    use crate::spaces::{gen_space, Disc, GeodesicPolicy, SpaceKind, SpaceRecipe};

    fn unit() -> ConstantTable {
        ConvexityCertificate::from_parts(1.0, 0.0, 1.0, 0.0, ThetaTable::identity(), Some((1.0, 0.0))).derived
    }

    #[test]
    fn chain_metric_three_points() {
        let rho = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
        let d = chain_metric(&rho);
        assert_eq!(d[0][2], 2.0);
        // brute force over all chains through the middle point
        assert_eq!(d[0][2], rho[0][2].min(rho[0][1] + rho[1][2]));
        assert_eq!(sandwich_violations(&rho, &d, 2.0), 0);
    }

    #[test]
    fn single_ray_single_class() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 3, GeodesicPolicy::Canonical)).unwrap();
        let one = GeodesicSystem::new(vec![], vec![l.rays[0].clone()]);
        let b = build_boundary(&s, &one, &unit(), &BoundaryConfig { horizon: Some(3.0), ..Default::default() }, Exec::Sequential).unwrap();
        assert_eq!(b.class_count(), 1);
        assert_eq!(b.rho, vec![vec![0.0]]);
    }

    #[test]
    fn tree_classes_one_per_leaf_when_shallow() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 3, GeodesicPolicy::Canonical)).unwrap();
        let b = build_boundary(&s, &l, &unit(), &BoundaryConfig { horizon: Some(3.0), ..Default::default() }, Exec::Parallel).unwrap();
        // rays branching at depth b are 2(3-b) apart at the end, ≤ 4 iff b ≥ 1
        assert_eq!(b.class_count(), 2);
        assert!(b.clustering_consistent(&s));
        assert_eq!(b.sandwich_violations, 0);
    }

    #[test]
    fn epsilon_above_max_is_rejected() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 3, GeodesicPolicy::Canonical)).unwrap();
        let cfg = BoundaryConfig { epsilon: Some(0.5), ..Default::default() };
        assert!(matches!(build_boundary(&s, &l, &unit(), &cfg, Exec::Sequential), Err(CcxError::Parameter(_))));
    }

    #[test]
    fn extraction_on_one_branch_is_that_branch() {
        let (_, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 4, GeodesicPolicy::Canonical)).unwrap();
        let ray = &l.rays[3];
        let seq = vec![DiscretePath::segment(1.0, ray.values.clone(), 1.0, 0.0); 5];
        let (lim, alive) = extract_limit_ray(&seq, 4).unwrap();
        assert_eq!(lim.values, ray.values);
        assert_eq!(alive, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn extraction_alternating_directions() {
        let disc = Disc::new(12.0, 1.0);
        let east = disc.ray(0.0);
        let north = disc.ray(std::f64::consts::FRAC_PI_2);
        let seg = |r: &DiscretePath| DiscretePath::segment(1.0, r.values.clone(), 1.0, 2.0);
        let seq: Vec<DiscretePath> = (0..6).map(|i| if i % 2 == 0 { seg(&east) } else { seg(&north) }).collect();
        let (lim, alive) = extract_limit_ray(&seq, 10).unwrap();
        assert_eq!(alive, vec![0, 2, 4]);
        assert_eq!(lim.values[..], east.values[..11]);
    }

    #[test]
    fn extraction_needs_long_segments() {
        let seq = vec![DiscretePath::segment(1.0, vec![0, 1], 1.0, 0.0)];
        assert!(matches!(extract_limit_ray(&seq, 5), Err(CcxError::Horizon(_))));
    }

    #[test]
    fn rebase_to_same_point_is_identity() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 4, GeodesicPolicy::Canonical)).unwrap();
        let cfg = BoundaryConfig { horizon: Some(4.0), ..Default::default() };
        let b = build_boundary(&s, &l, &unit(), &cfg, Exec::Sequential).unwrap();
        let r = rebase(&s, &l, &b, &b).unwrap();
        assert!(r.bijective && r.pointwise_ok && r.products_ok);
        assert_eq!(r.correspondence, (0..b.class_count() as u32).map(Some).collect::<Vec<_>>());
    }
}
