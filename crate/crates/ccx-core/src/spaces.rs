//! Generators for the example spaces and the two transport constructions
//! (direct products and pushforward along a quasi-isometry).
//!
//! Sampling densities:
//! - `euclidean_l2_disc`: lattice `hZ^2` inside the closed disc of radius `size`.
//! - `grid_l1`: the square `[-size, size]^2` of `Z^2` with the l1 metric.
//! - `tree`: rooted binary tree of depth `size`, `2^(size+1) - 1` vertices.
//! - `hyperbolic_disc`: rings of hyperbolic radius `0.5 i` up to `size`, each
//!   ring sampled with spacing at most 0.5 along its circumference; edges
//!   join points at hyperbolic distance at most 1 and the metric is hop count.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{CcxError, Result};
use crate::metric::{FiniteMetricSpace, Metric, PointId};
use crate::path::DiscretePath;
use crate::system::GeodesicSystem;
use crate::TOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    EuclideanL2Disc,
    GridL1,
    Tree,
    HyperbolicDisc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeodesicPolicy {
    Affine,
    StaircaseAll,
    Canonical,
}

fn default_step() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceRecipe {
    pub kind: SpaceKind,
    pub size: u32,
    pub policy: GeodesicPolicy,
    #[serde(default = "default_step")]
    pub grid_step: f64,
    /// Number of ray directions for the disc samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<u32>,
    /// Spaces with at most this many points get segments between all pairs;
    /// larger ones only get segments from the base point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_cap: Option<usize>,
}

pub const DEFAULT_PAIR_CAP: usize = 600;
pub const DEFAULT_DIRECTIONS: u32 = 64;
pub const DEFAULT_PRODUCT_BUDGET: usize = 20_000;
/// Segment-pair count above which products only combine segments from the base.
pub const PRODUCT_SEGMENT_BUDGET: usize = 200_000;

impl SpaceRecipe {
    pub fn new(kind: SpaceKind, size: u32, policy: GeodesicPolicy) -> Self {
        SpaceRecipe { kind, size, policy, grid_step: 1.0, directions: None, pair_cap: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 2 {
            return Err(CcxError::Recipe(format!("size {} < 2", self.size)));
        }
        if self.grid_step.is_nan() || self.grid_step <= 0.0 {
            return Err(CcxError::Recipe("grid_step must be positive".into()));
        }
        let ok = matches!(
            (self.kind, self.policy),
            (SpaceKind::EuclideanL2Disc, GeodesicPolicy::Affine)
                | (SpaceKind::GridL1, GeodesicPolicy::StaircaseAll)
                | (SpaceKind::Tree, GeodesicPolicy::Canonical)
                | (SpaceKind::HyperbolicDisc, GeodesicPolicy::Canonical)
        );
        if !ok {
            return Err(CcxError::Recipe(format!(
                "policy {:?} is not available for {:?}",
                self.policy, self.kind
            )));
        }
        if self.kind != SpaceKind::EuclideanL2Disc && (self.grid_step - 1.0).abs() > TOL {
            return Err(CcxError::Recipe("combinatorial spaces use grid_step 1".into()));
        }
        Ok(())
    }
}

/// Sample the space described by `recipe` together with its geodesic family.
pub fn gen_space(recipe: &SpaceRecipe) -> Result<(FiniteMetricSpace, GeodesicSystem)> {
    recipe.validate()?;
    let cap = recipe.pair_cap.unwrap_or(DEFAULT_PAIR_CAP);
    Ok(match recipe.kind {
        SpaceKind::EuclideanL2Disc => {
            let disc = Disc::new(recipe.size as f64, recipe.grid_step);
            disc.generate(recipe.directions.unwrap_or(DEFAULT_DIRECTIONS), cap)
        }
        SpaceKind::GridL1 => grid_l1(recipe.size as i64, cap),
        SpaceKind::Tree => binary_tree(recipe.size, cap),
        SpaceKind::HyperbolicDisc => hyperbolic_disc(recipe.size, cap),
    })
}

/// Endpoint pairs for a space of `n` points: all pairs below the cap,
/// otherwise only pairs starting at the base point.
fn endpoint_pairs(n: usize, base: PointId, cap: usize) -> Vec<(PointId, PointId)> {
    if n <= cap {
        (0..n as PointId)
            .flat_map(|p| (0..n as PointId).map(move |q| (p, q)))
            .collect()
    } else {
        (0..n as PointId).map(|q| (base, q)).collect()
    }
}

/// Lattice sample of a Euclidean disc with snapped affine segments.
pub struct Disc {
    pub h: f64,
    pub m: i64,
    coords: Vec<[f64; 2]>,
    lattice: Vec<[i64; 2]>,
    lookup: Vec<u32>,
}

impl Disc {
    pub fn new(radius: f64, h: f64) -> Self {
        let m = (radius / h + TOL).floor() as i64;
        let side = (2 * m + 1) as usize;
        let mut lookup = vec![u32::MAX; side * side];
        let mut coords = Vec::new();
        let mut lattice = Vec::new();
        for i in -m..=m {
            for j in -m..=m {
                if i * i + j * j <= m * m {
                    lookup[((i + m) as usize) * side + (j + m) as usize] = coords.len() as u32;
                    coords.push([i as f64 * h, j as f64 * h]);
                    lattice.push([i, j]);
                }
            }
        }
        Disc { h, m, coords, lattice, lookup }
    }

    fn index(&self, i: i64, j: i64) -> Option<PointId> {
        if i.abs() > self.m || j.abs() > self.m {
            return None;
        }
        let side = (2 * self.m + 1) as usize;
        let v = self.lookup[((i + self.m) as usize) * side + (j + self.m) as usize];
        (v != u32::MAX).then_some(v)
    }

    pub fn point(&self, i: i64, j: i64) -> Option<PointId> {
        self.index(i, j)
    }

    /// Nearest sample point; ties go to the lexicographically smallest lattice coordinates.
    pub fn snap(&self, x: f64, y: f64) -> PointId {
        let (fx, fy) = (x / self.h, y / self.h);
        let (bx, by) = (fx.floor() as i64, fy.floor() as i64);
        let mut best: Option<(f64, i64, i64, PointId)> = None;
        for i in (bx - 1)..=(bx + 2) {
            for j in (by - 1)..=(by + 2) {
                if let Some(p) = self.index(i, j) {
                    let d2 = (i as f64 - fx).powi(2) + (j as f64 - fy).powi(2);
                    let cand = (d2, i, j, p);
                    best = match best {
                        None => Some(cand),
                        Some(b) if d2 < b.0 - 1e-12 || ((d2 - b.0).abs() <= 1e-12 && (i, j) < (b.1, b.2)) => {
                            Some(cand)
                        }
                        keep => keep,
                    };
                }
            }
        }
        best.map(|b| b.3).unwrap_or_else(|| self.index(0, 0).expect("disc has a center"))
    }

    /// Snapped straight segment from `p` to `q`.
    pub fn segment(&self, p: PointId, q: PointId) -> DiscretePath {
        let (a, b) = (self.coords[p as usize], self.coords[q as usize]);
        if p == q {
            return DiscretePath::segment(self.h, vec![p], 1.0, 2.0 * self.h);
        }
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let n = ((len / self.h).round() as usize).max(1);
        let mut values: Vec<PointId> = (0..=n)
            .map(|j| {
                let c = j as f64 / n as f64;
                self.snap(a[0] + c * (b[0] - a[0]), a[1] + c * (b[1] - a[1]))
            })
            .collect();
        values[0] = p;
        values[n] = q;
        DiscretePath::segment(self.h, values, 1.0, 2.0 * self.h)
    }

    /// Snapped ray from the center in direction `angle`, up to the disc radius.
    pub fn ray(&self, angle: f64) -> DiscretePath {
        let (c, s) = (angle.cos(), angle.sin());
        let values = (0..=self.m)
            .map(|t| {
                let r = t as f64 * self.h;
                self.snap(r * c, r * s)
            })
            .collect();
        DiscretePath::ray(self.h, values, 1.0, 2.0 * self.h)
    }

    pub fn space(&self) -> FiniteMetricSpace {
        let n = self.coords.len();
        let base = self.index(0, 0).unwrap();
        let mut sp = FiniteMetricSpace::with_metric(
            n,
            Metric::Euclidean(self.coords.clone()),
            base,
            &format!("euclidean_l2_disc r={} h={}", self.m as f64 * self.h, self.h),
        );
        sp.coords = Some(self.coords.clone());
        sp
    }

    pub fn lattice(&self) -> &[[i64; 2]] {
        &self.lattice
    }

    fn generate(&self, directions: u32, cap: usize) -> (FiniteMetricSpace, GeodesicSystem) {
        let space = self.space();
        let segments = endpoint_pairs(space.len(), space.base, cap)
            .into_iter()
            .map(|(p, q)| self.segment(p, q))
            .collect();
        let rays = (0..directions)
            .map(|j| self.ray(std::f64::consts::TAU * j as f64 / directions as f64))
            .collect();
        (space, GeodesicSystem::new(segments, rays))
    }
}

fn grid_index(m: i64, x: i64, y: i64) -> PointId {
    ((x + m) * (2 * m + 1) + (y + m)) as PointId
}

/// Both monotone L-shaped paths from `p` to `q` (one when they are aligned).
fn staircases(m: i64, p: [i64; 2], q: [i64; 2]) -> Vec<Vec<PointId>> {
    let walk = |first: usize| {
        let mut cur = p;
        let mut out = vec![grid_index(m, cur[0], cur[1])];
        for axis in [first, 1 - first] {
            while cur[axis] != q[axis] {
                cur[axis] += (q[axis] - cur[axis]).signum();
                out.push(grid_index(m, cur[0], cur[1]));
            }
        }
        out
    };
    let h = walk(0);
    if p[0] == q[0] || p[1] == q[1] {
        vec![h]
    } else {
        vec![h, walk(1)]
    }
}

/// The staircase ray that runs `n` steps along x (sign `sx`), then along y.
pub fn staircase_ray(m: i64, n: i64, sx: i64, sy: i64, horizontal_first: bool) -> Vec<PointId> {
    (0..=m)
        .map(|t| {
            let (a, b) = (t.min(n), (t - n).max(0));
            if horizontal_first {
                grid_index(m, sx * a, sy * b)
            } else {
                grid_index(m, sx * b, sy * a)
            }
        })
        .collect()
}

fn grid_l1(m: i64, cap: usize) -> (FiniteMetricSpace, GeodesicSystem) {
    let mut lattice = Vec::new();
    for x in -m..=m {
        for y in -m..=m {
            lattice.push([x, y]);
        }
    }
    let n = lattice.len();
    let base = grid_index(m, 0, 0);
    let mut space = FiniteMetricSpace::with_metric(
        n,
        Metric::Manhattan(lattice.clone()),
        base,
        &format!("grid_l1 r={m}"),
    );
    space.coords = Some(lattice.iter().map(|p| [p[0] as f64, p[1] as f64]).collect());
    let mut segments = Vec::new();
    for (p, q) in endpoint_pairs(n, base, cap) {
        for v in staircases(m, lattice[p as usize], lattice[q as usize]) {
            segments.push(DiscretePath::segment(1.0, v, 1.0, 0.0));
        }
    }
    let mut seen = HashSet::new();
    let mut rays = Vec::new();
    for (sx, sy) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
        for hf in [true, false] {
            for k in 0..=m {
                let v = staircase_ray(m, k, sx, sy, hf);
                if seen.insert(v.clone()) {
                    rays.push(DiscretePath::ray(1.0, v, 1.0, 0.0));
                }
            }
        }
    }
    (space, GeodesicSystem::new(segments, rays))
}

/// Depth of heap-indexed tree vertex `i`.
pub fn tree_depth(i: u32) -> u32 {
    31 - (i + 1).leading_zeros()
}

/// Vertices on the tree geodesic from `u` to `v`.
pub fn tree_path(mut u: u32, mut v: u32) -> Vec<PointId> {
    let mut up = Vec::new();
    let mut down = Vec::new();
    while u != v {
        if tree_depth(u) >= tree_depth(v) {
            up.push(u);
            u = (u - 1) / 2;
        } else {
            down.push(v);
            v = (v - 1) / 2;
        }
    }
    up.push(u);
    up.extend(down.into_iter().rev());
    up
}

fn binary_tree(depth: u32, cap: usize) -> (FiniteMetricSpace, GeodesicSystem) {
    let n = (1usize << (depth + 1)) - 1;
    let mut dist = vec![0.0; n * n];
    for u in 0..n {
        for v in (u + 1)..n {
            let d = (tree_path(u as u32, v as u32).len() - 1) as f64;
            dist[u * n + v] = d;
            dist[v * n + u] = d;
        }
    }
    let space = FiniteMetricSpace::with_metric(n, Metric::Dense(dist), 0, &format!("binary tree depth {depth}"));
    let segments = endpoint_pairs(n, 0, cap)
        .into_iter()
        .map(|(p, q)| DiscretePath::segment(1.0, tree_path(p, q), 1.0, 0.0))
        .collect();
    let first_leaf = (1u32 << depth) - 1;
    let rays = (first_leaf..n as u32)
        .map(|leaf| DiscretePath::ray(1.0, tree_path(0, leaf), 1.0, 0.0))
        .collect();
    (space, GeodesicSystem::new(segments, rays))
}

/// Breadth-first distances and parents; neighbours are visited in index order.
fn bfs(adj: &[Vec<u32>], src: usize) -> (Vec<u32>, Vec<u32>) {
    let n = adj.len();
    let mut dist = vec![u32::MAX; n];
    let mut parent = vec![u32::MAX; n];
    dist[src] = 0;
    let mut q = VecDeque::from([src as u32]);
    while let Some(u) = q.pop_front() {
        for &w in &adj[u as usize] {
            if dist[w as usize] == u32::MAX {
                dist[w as usize] = dist[u as usize] + 1;
                parent[w as usize] = u;
                q.push_back(w);
            }
        }
    }
    (dist, parent)
}

fn bfs_path(parent: &[u32], src: u32, dst: u32) -> Vec<PointId> {
    let mut out = vec![dst];
    let mut cur = dst;
    while cur != src {
        cur = parent[cur as usize];
        out.push(cur);
    }
    out.reverse();
    out
}

fn hyperbolic_disc(radius: u32, cap: usize) -> (FiniteMetricSpace, GeodesicSystem) {
    const SPACING: f64 = 0.5;
    let rings = (radius as f64 / SPACING).round() as usize;
    let mut polar: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for i in 1..=rings {
        let rho = i as f64 * SPACING;
        let count = ((std::f64::consts::TAU * rho.sinh() / SPACING).ceil() as usize).max(6);
        let shift = if i % 2 == 1 { 0.5 } else { 0.0 };
        for k in 0..count {
            polar.push((rho, std::f64::consts::TAU * (k as f64 + shift) / count as f64));
        }
    }
    let n = polar.len();
    let hyp = |a: (f64, f64), b: (f64, f64)| {
        let c = a.0.cosh() * b.0.cosh() - a.0.sinh() * b.0.sinh() * (a.1 - b.1).cos();
        c.max(1.0).acosh()
    };
    let mut adj = vec![Vec::new(); n];
    for u in 0..n {
        for v in (u + 1)..n {
            if hyp(polar[u], polar[v]) <= 1.0 + TOL {
                adj[u].push(v as u32);
                adj[v].push(u as u32);
            }
        }
    }
    let trees: Vec<(Vec<u32>, Vec<u32>)> = (0..n).map(|s| bfs(&adj, s)).collect();
    let mut dist = vec![0.0; n * n];
    for u in 0..n {
        for v in 0..n {
            dist[u * n + v] = trees[u].0[v] as f64;
        }
    }
    let mut space = FiniteMetricSpace::with_metric(n, Metric::Dense(dist), 0, &format!("hyperbolic_disc r={radius}"));
    space.coords = Some(
        polar
            .iter()
            .map(|&(rho, phi)| {
                let r = (rho / 2.0).tanh();
                [r * phi.cos(), r * phi.sin()]
            })
            .collect(),
    );
    let segments = endpoint_pairs(n, 0, cap)
        .into_iter()
        .map(|(p, q)| DiscretePath::segment(1.0, bfs_path(&trees[p as usize].1, p, q), 1.0, 0.0))
        .collect();
    let outer: Vec<u32> = (0..n as u32)
        .filter(|&p| (polar[p as usize].0 - rings as f64 * SPACING).abs() < TOL)
        .collect();
    let horizon = outer.iter().map(|&p| trees[0].0[p as usize]).min().unwrap_or(0) as usize;
    let rays = outer
        .iter()
        .map(|&p| {
            let mut v = bfs_path(&trees[0].1, 0, p);
            v.truncate(horizon + 1);
            DiscretePath::ray(1.0, v, 1.0, 0.0)
        })
        .collect();
    (space, GeodesicSystem::new(segments, rays))
}

/// Product space with its combined system and the provenance of each ray.
#[derive(Clone, Debug)]
pub struct ProductModel {
    pub space: FiniteMetricSpace,
    pub system: GeodesicSystem,
    /// For ray `i`: (ray id in X, ray id in Y, index into `s_grid`).
    pub provenance: Vec<(u32, u32, u32)>,
    pub s_grid: Vec<f64>,
}

/// Combined path `t ↦ (γ(a t/(a+b)), η(b t/(a+b)))` on `[0, a+b]`.
pub fn combine_segments(
    x: &DiscretePath,
    y: &DiscretePath,
    ny: usize,
    h: f64,
    lambda: f64,
    k: f64,
) -> DiscretePath {
    let (a, b) = (x.domain_end(), y.domain_end());
    let total = a + b;
    let steps = (total / h).round() as usize;
    let values = (0..=steps)
        .map(|i| {
            let t = i as f64 * h;
            let (u, v) = if total > 0.0 {
                (x.at(a / total * t), y.at(b / total * t))
            } else {
                (x.start(), y.start())
            };
            u * ny as PointId + v
        })
        .collect();
    DiscretePath::segment(h, values, lambda, k)
}

/// l1 product of two sampled spaces with the reparameterized pair system.
///
/// Rays of the product are `t ↦ (γ((1-s)t), η(st))` for every pair of factor
/// rays and every `s` in `s_grid`, truncated at the smaller factor horizon.
pub fn gen_product(
    x: (&FiniteMetricSpace, &GeodesicSystem),
    y: (&FiniteMetricSpace, &GeodesicSystem),
    budget: usize,
    s_grid: &[f64],
) -> Result<ProductModel> {
    let (xs, xl) = x;
    let (ys, yl) = y;
    let n = xs.len() * ys.len();
    if n > budget {
        return Err(CcxError::Resource(format!("product has {n} points, budget {budget}")));
    }
    let h = xl.step();
    if (yl.step() - h).abs() > TOL {
        return Err(CcxError::Precondition("factor systems use different grid steps".into()));
    }
    let ny = ys.len();
    let (lx, kx) = xl.declared();
    let (ly, ky) = yl.declared();
    let lambda = lx.max(ly);
    let k = kx + ky + 2.0 * lambda * h;
    let space = FiniteMetricSpace {
        ids: (0..n as u64).collect(),
        metric: Metric::Product(Box::new(xs.clone()), Box::new(ys.clone())),
        base: xs.base * ny as PointId + ys.base,
        label: format!("({}) x ({})", xs.label, ys.label),
        coords: None,
    };
    let (gx, gy): (Vec<&DiscretePath>, Vec<&DiscretePath>) =
        if xl.segments.len() * yl.segments.len() <= PRODUCT_SEGMENT_BUDGET {
            (xl.segments.iter().collect(), yl.segments.iter().collect())
        } else {
            (
                xl.from_point(xs.base).iter().map(|&i| &xl.segments[i as usize]).collect(),
                yl.from_point(ys.base).iter().map(|&i| &yl.segments[i as usize]).collect(),
            )
        };
    let mut segments = Vec::with_capacity(gx.len() * gy.len());
    for g in &gx {
        for e in &gy {
            segments.push(combine_segments(g, e, ny, h, lambda, k));
        }
    }
    let horizon = xl.ray_horizon().unwrap_or(0.0).min(yl.ray_horizon().unwrap_or(0.0));
    let steps = (horizon / h + TOL).floor() as usize;
    let mut rays = Vec::new();
    let mut provenance = Vec::new();
    for (i, g) in xl.rays.iter().enumerate() {
        for (j, e) in yl.rays.iter().enumerate() {
            for (si, &s) in s_grid.iter().enumerate() {
                let values = (0..=steps)
                    .map(|m| {
                        let t = m as f64 * h;
                        g.at((1.0 - s) * t) * ny as PointId + e.at(s * t)
                    })
                    .collect();
                rays.push(DiscretePath::ray(h, values, lambda, k));
                provenance.push((i as u32, j as u32, si as u32));
            }
        }
    }
    Ok(ProductModel {
        space,
        system: GeodesicSystem::new(segments, rays),
        provenance,
        s_grid: s_grid.to_vec(),
    })
}

/// Transport a system along `f: X → Y`, an `(A, A)`-quasi-isometry with
/// `A`-dense image. Each `p, q ∈ Y` gets `f∘γ` for a segment γ between chosen
/// preimages, with its endpoints replaced by `p` and `q`; members are declared
/// `(Aλ, A(k+3))` quasi-geodesics.
pub fn pushforward_system(
    f: &[PointId],
    a: f64,
    x: &FiniteMetricSpace,
    lx: &GeodesicSystem,
    y: &FiniteMetricSpace,
    pair_cap: usize,
) -> Result<GeodesicSystem> {
    if a < 1.0 {
        return Err(CcxError::Parameter("A must be at least 1".into()));
    }
    if f.len() != x.len() {
        return Err(CcxError::Structural("map length differs from |X|".into()));
    }
    for u in 0..x.len() as PointId {
        for v in (u + 1)..x.len() as PointId {
            let dx = x.d(u, v);
            let dy = y.d(f[u as usize], f[v as usize]);
            if dy > a * dx + a + TOL || dy < dx / a - a - TOL {
                return Err(CcxError::Pushforward(format!(
                    "not an (A,A)-quasi-isometric embedding at ({u},{v}): d_X={dx}, d_Y={dy}"
                )));
            }
        }
    }
    let mut pre = Vec::with_capacity(y.len());
    for q in 0..y.len() as PointId {
        let mut best = (f64::INFINITY, 0u32);
        for (u, &fu) in f.iter().enumerate() {
            let d = y.d(fu, q);
            if d < best.0 - TOL {
                best = (d, u as u32);
            }
        }
        if best.0 > a + TOL {
            return Err(CcxError::Pushforward(format!(
                "image is not A-dense: point {q} at distance {}",
                best.0
            )));
        }
        pre.push(best.1);
    }
    let (l, k) = lx.declared();
    let (dl, dk) = (a * l, a * (k + 3.0));
    let h = lx.step();
    let mut segments = Vec::new();
    for (p, q) in endpoint_pairs(y.len(), y.base, pair_cap) {
        let Some(g) = lx.first_between(pre[p as usize], pre[q as usize]) else {
            continue;
        };
        let mut values: Vec<PointId> = g.values.iter().map(|&u| f[u as usize]).collect();
        if values.len() == 1 && p != q {
            values.push(q);
        }
        values[0] = p;
        let last = values.len() - 1;
        values[last] = q;
        segments.push(DiscretePath::segment(h, values, dl, dk));
    }
    let rays = lx
        .rays
        .iter()
        .map(|r| {
            let mut values: Vec<PointId> = r.values.iter().map(|&u| f[u as usize]).collect();
            values[0] = y.base;
            DiscretePath::ray(r.step, values, dl, dk)
        })
        .collect();
    Ok(GeodesicSystem::new(segments, rays))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::certify_quasi_geodesic;

    #[test]
    fn tree_depth3_has_15_points_and_exact_geodesics() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 3, GeodesicPolicy::Canonical)).unwrap();
        assert_eq!(s.len(), 15);
        for p in &l.segments {
            let c = certify_quasi_geodesic(p, &s).unwrap();
            assert_eq!(c.feasible(), Some((1.0, 0.0)));
        }
    }

    #[test]
    fn grid_contains_counterexample_staircases() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::GridL1, 8, GeodesicPolicy::StaircaseAll)).unwrap();
        let m = 8;
        for n in 0..=8i64 {
            let want: Vec<PointId> = (0..=8 + n)
                .map(|t| if t <= n { grid_index(m, t, 0) } else { grid_index(m, n, t - n) })
                .take(9)
                .collect();
            let end = grid_index(m, n, 8);
            let found = l
                .between(s.base, end)
                .iter()
                .any(|&i| l.segments[i as usize].values[..9.min(l.segments[i as usize].len())] == want[..]);
            assert!(found, "γ_{n} missing");
        }
    }

    #[test]
    fn disc_segments_within_two_steps() {
        let r = SpaceRecipe { pair_cap: Some(0), ..SpaceRecipe::new(SpaceKind::EuclideanL2Disc, 16, GeodesicPolicy::Affine) };
        let (s, l) = gen_space(&r).unwrap();
        for p in l.segments.iter().step_by(7) {
            let (lam, k) = certify_quasi_geodesic(p, &s).unwrap().feasible().unwrap();
            assert_eq!(lam, 1.0);
            assert!(k <= 2.0 + 1e-9, "k = {k}");
        }
    }

    #[test]
    fn unsupported_policy_rejected() {
        let r = SpaceRecipe::new(SpaceKind::Tree, 3, GeodesicPolicy::StaircaseAll);
        assert!(matches!(gen_space(&r), Err(CcxError::Recipe(_))));
        let r = SpaceRecipe::new(SpaceKind::Tree, 1, GeodesicPolicy::Canonical);
        assert!(matches!(gen_space(&r), Err(CcxError::Recipe(_))));
    }

    #[test]
    fn product_metric_is_sum() {
        let (a, la) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 2, GeodesicPolicy::Canonical)).unwrap();
        let (b, lb) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 2, GeodesicPolicy::Canonical)).unwrap();
        let pm = gen_product((&a, &la), (&b, &lb), 1000, &[0.0, 0.5, 1.0]).unwrap();
        for i in 0..pm.space.len() as PointId {
            for j in 0..pm.space.len() as PointId {
                let (x1, y1) = pm.space.product_parts(i).unwrap();
                let (x2, y2) = pm.space.product_parts(j).unwrap();
                assert_eq!(pm.space.d(i, j), a.d(x1, x2) + b.d(y1, y2));
            }
        }
        assert_eq!(pm.system.rays.len(), 4 * 4 * 3);
        assert!(gen_product((&a, &la), (&b, &lb), 10, &[0.0]).is_err());
    }

    #[test]
    fn hyperbolic_sample_is_connected() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::HyperbolicDisc, 2, GeodesicPolicy::Canonical)).unwrap();
        assert!((0..s.len() as PointId).all(|p| s.d(0, p).is_finite() && s.d(0, p) < 1e6));
        assert!(!l.rays.is_empty());
    }
}
