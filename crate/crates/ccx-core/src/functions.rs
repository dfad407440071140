//! Slowly oscillating and Gromov functions, their boundary values, and the
//! coarse-compactification radius.

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryModel;
use crate::constants::ConstantTable;
use crate::error::{CcxError, Result};
use crate::exec::{map_range, Exec};
use crate::metric::{FiniteMetricSpace, PointId};
use crate::products::{Entity, ProductContext};
use crate::sample::PairPlan;
use crate::TOL;

/// Complex values as `[re, im]`, one per point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub values: Vec<[f64; 2]>,
    pub label: String,
}

impl ScalarField {
    pub fn constant(n: usize, c: [f64; 2]) -> Self {
        ScalarField { values: vec![c; n], label: "constant".into() }
    }

    pub fn real(label: &str, values: impl IntoIterator<Item = f64>) -> Self {
        ScalarField { values: values.into_iter().map(|x| [x, 0.0]).collect(), label: label.into() }
    }

    pub fn check_total(&self, space: &FiniteMetricSpace) -> Result<()> {
        if self.values.len() != space.len() {
            return Err(CcxError::Structural(format!(
                "function has {} values for {} points",
                self.values.len(),
                space.len()
            )));
        }
        Ok(())
    }

    pub fn add(&self, o: &ScalarField) -> ScalarField {
        let values = self.values.iter().zip(&o.values).map(|(a, b)| [a[0] + b[0], a[1] + b[1]]).collect();
        ScalarField { values, label: format!("({}) + ({})", self.label, o.label) }
    }

    pub fn mul(&self, o: &ScalarField) -> ScalarField {
        let values = self.values.iter().zip(&o.values).map(|(a, b)| cmul(*a, *b)).collect();
        ScalarField { values, label: format!("({}) * ({})", self.label, o.label) }
    }
}

pub fn cmul(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0]]
}

pub fn cabs_diff(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionMode {
    SlowlyOscillating,
    Gromov,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Classification {
    pub mode: FunctionMode,
    pub epsilon_f: f64,
    pub r: f64,
    pub passed: bool,
    /// Slowly oscillating: radius of the exceptional ball (`None` when empty).
    /// Gromov: the product threshold `R_g`.
    pub threshold: Option<f64>,
    pub pairs: u64,
    pub bad_pairs: u64,
    pub seed: Option<u64>,
    pub witness: Option<(PointId, PointId)>,
}

/// Slowly oscillating: the smallest ball about the base point containing a
/// point of every pair with `d ≤ R` and `|f(v) - f(w)| ≥ ε_f`; fails when
/// that ball reaches the outer shell of the sample.
/// Gromov: the largest product among such pairs (any distance); fails when
/// a bad pair has a product that saturates.
pub fn classify_function(
    f: &ScalarField,
    ctx: &ProductContext<'_>,
    mode: FunctionMode,
    epsilon_f: f64,
    r: f64,
    budget: u64,
    seed: u64,
    exec: Exec,
) -> Result<Classification> {
    let space = ctx.space;
    f.check_total(space)?;
    let n = space.len() as u64;
    let plan = PairPlan::new(n, n, budget, seed);
    let base = space.base;
    let rows = map_range(exec, plan.len(), |k| {
        let (v, w) = plan.get(k);
        let (v, w) = (v as PointId, w as PointId);
        if v >= w || cabs_diff(f.values[v as usize], f.values[w as usize]) < epsilon_f {
            return None;
        }
        match mode {
            FunctionMode::SlowlyOscillating => {
                if space.d(v, w) > r + TOL {
                    return None;
                }
                Some(Ok((v, w, space.d(base, v).min(space.d(base, w)), false)))
            }
            FunctionMode::Gromov => Some(
                ctx.product(Entity::Point(v), Entity::Point(w))
                    .map(|p| (v, w, p.value, p.saturated)),
            ),
        }
    });
    let mut threshold: Option<(f64, PointId, PointId)> = None;
    let mut bad = 0u64;
    let mut saturated = false;
    for row in rows.into_iter().flatten() {
        let (v, w, x, sat) = row?;
        bad += 1;
        saturated |= sat;
        if threshold.is_none_or(|t| x > t.0) {
            threshold = Some((x, v, w));
        }
    }
    let passed = match mode {
        FunctionMode::SlowlyOscillating => threshold.is_none_or(|t| t.0 < space.radius() - r - TOL),
        FunctionMode::Gromov => !saturated,
    };
    let th = match mode {
        FunctionMode::SlowlyOscillating => threshold.map(|t| t.0),
        FunctionMode::Gromov => Some(threshold.map_or(0.0, |t| t.0)),
    };
    Ok(Classification {
        mode,
        epsilon_f,
        r,
        passed,
        threshold: th,
        pairs: plan.len() as u64,
        bad_pairs: bad,
        seed: plan.seed(),
        witness: threshold.map(|t| (t.1, t.2)),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Extension {
    /// Value at the horizon sample of each class representative.
    #[serde(with = "crate::real::pairs")]
    pub values: Vec<[f64; 2]>,
    /// Largest deviation of member horizon values from the representative's.
    #[serde(with = "crate::real::vec")]
    pub spread: Vec<f64>,
    /// Classes without a ray reaching the horizon.
    pub gaps: Vec<u32>,
}

impl Extension {
    pub fn max_spread(&self) -> f64 {
        self.spread.iter().copied().fold(0.0, f64::max)
    }
}

pub fn extend_to_boundary(f: &ScalarField, model: &BoundaryModel) -> Extension {
    let mut values = Vec::new();
    let mut spread = Vec::new();
    let mut gaps = Vec::new();
    for (c, members) in model.classes.iter().enumerate() {
        let reach: Vec<&crate::path::DiscretePath> = members
            .iter()
            .map(|&r| &model.rays[r as usize])
            .filter(|r| r.domain_end() + TOL >= model.horizon)
            .collect();
        let Some(rep) = reach.first() else {
            gaps.push(c as u32);
            values.push([f64::NAN, f64::NAN]);
            spread.push(f64::NAN);
            continue;
        };
        let v = f.values[rep.end() as usize];
        values.push(v);
        spread.push(reach.iter().map(|r| cabs_diff(f.values[r.end() as usize], v)).fold(0.0, f64::max));
    }
    Extension { values, spread, gaps }
}

/// Pull a function on classes back to the space: each point takes the value
/// of the class whose representative passes closest at the same distance from the base.
pub fn pullback_from_classes(space: &FiniteMetricSpace, model: &BoundaryModel, g: &[[f64; 2]]) -> ScalarField {
    let values = (0..space.len() as PointId)
        .map(|v| {
            let r = space.d(model.base, v);
            let mut best = (f64::INFINITY, 0usize);
            for c in 0..model.class_count() {
                let d = space.d(v, model.representative(c as u32).at(r));
                if d < best.0 - TOL {
                    best = (d, c);
                }
            }
            g[best.1]
        })
        .collect();
    ScalarField { values, label: "class pullback".into() }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompactificationReport {
    /// `λ n E (R + λθ(R) + k) + k`.
    pub radius: f64,
    pub reading: String,
    pub n: f64,
    pub r: f64,
    pub checked: u64,
    pub violations: u64,
    pub witnesses: Vec<(PointId, PointId)>,
}

/// Checks that points outside the radius with `d(v, w) ≤ R` have `(v|w) ≥ n`.
pub fn compactification_bound(ctx: &ProductContext<'_>, table: &ConstantTable, r: f64, n: f64, exec: Exec) -> Result<CompactificationReport> {
    let space = ctx.space;
    let radius = table.compactification_radius(n, r);
    let outside: Vec<PointId> = (0..space.len() as PointId)
        .filter(|&v| space.d(space.base, v) > radius + TOL && !ctx.system.between(space.base, v).is_empty())
        .collect();
    let rows = map_range(exec, outside.len(), |i| {
        let v = outside[i];
        let mut out = (0u64, Vec::new());
        for &w in &outside[i..] {
            if space.d(v, w) > r + TOL {
                continue;
            }
            out.0 += 1;
            match ctx.product(Entity::Point(v), Entity::Point(w)) {
                Ok(p) if p.value + TOL >= n => {}
                _ => out.1.push((v, w)),
            }
        }
        out
    });
    let mut rep = CompactificationReport {
        radius,
        reading: "lambda * n * E * (R + lambda * theta(R) + k) + k".into(),
        n,
        r,
        checked: 0,
        violations: 0,
        witnesses: Vec::new(),
    };
    for (c, bad) in rows {
        rep.checked += c;
        rep.violations += bad.len() as u64;
        rep.witnesses.extend(bad.into_iter().take(16usize.saturating_sub(rep.witnesses.len())));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{build_boundary, BoundaryConfig};
    use crate::convexity::{ConvexityCertificate, ThetaTable};
    use crate::spaces::{gen_space, GeodesicPolicy, SpaceKind, SpaceRecipe};

    fn unit() -> ConstantTable {
        ConvexityCertificate::from_parts(1.0, 0.0, 1.0, 0.0, ThetaTable::identity(), Some((1.0, 0.0))).derived
    }

    #[test]
    fn constant_passes_both_modes() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 4, GeodesicPolicy::Canonical)).unwrap();
        let t = unit();
        let ctx = ProductContext::new(&s, &l, &t);
        let f = ScalarField::constant(s.len(), [1.0, 2.0]);
        for mode in [FunctionMode::SlowlyOscillating, FunctionMode::Gromov] {
            let c = classify_function(&f, &ctx, mode, 0.1, 1.0, 1_000_000, 1, Exec::Sequential).unwrap();
            assert!(c.passed);
            assert_eq!(c.bad_pairs, 0);
        }
        let so = classify_function(&f, &ctx, FunctionMode::SlowlyOscillating, 0.1, 1.0, 1_000_000, 1, Exec::Sequential).unwrap();
        assert_eq!(so.threshold, None);
        let g = classify_function(&f, &ctx, FunctionMode::Gromov, 0.1, 1.0, 1_000_000, 1, Exec::Sequential).unwrap();
        assert_eq!(g.threshold, Some(0.0));
    }

    #[test]
    fn distance_from_base_is_not_slowly_oscillating() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 5, GeodesicPolicy::Canonical)).unwrap();
        let t = unit();
        let ctx = ProductContext::new(&s, &l, &t);
        let f = ScalarField::real("d(O,v)", (0..s.len() as PointId).map(|v| s.d(0, v)));
        let c = classify_function(&f, &ctx, FunctionMode::SlowlyOscillating, 0.5, 1.0, 1_000_000, 1, Exec::Parallel).unwrap();
        assert!(!c.passed);
    }

    #[test]
    fn extension_is_additive() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 5, GeodesicPolicy::Canonical)).unwrap();
        let b = build_boundary(&s, &l, &unit(), &BoundaryConfig { horizon: Some(5.0), ..Default::default() }, Exec::Sequential).unwrap();
        let f = ScalarField::real("a", (0..s.len()).map(|i| (i % 7) as f64));
        let g = ScalarField::real("b", (0..s.len()).map(|i| (i % 3) as f64));
        let (ef, eg, es) = (extend_to_boundary(&f, &b), extend_to_boundary(&g, &b), extend_to_boundary(&f.add(&g), &b));
        for c in 0..b.class_count() {
            assert_eq!(es.values[c][0], ef.values[c][0] + eg.values[c][0]);
        }
    }

    #[test]
    fn tree_compactification_scan() {
        let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 8, GeodesicPolicy::Canonical)).unwrap();
        let t = unit();
        let ctx = ProductContext::new(&s, &l, &t);
        let rep = compactification_bound(&ctx, &t, 1.0, 3.0, Exec::Parallel).unwrap();
        assert_eq!(rep.radius, 6.0);
        assert!(rep.checked > 0);
        assert_eq!(rep.violations, 0);
    }
}
