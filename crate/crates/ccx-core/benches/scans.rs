use ccx_core::boundary::{build_boundary, BoundaryConfig};
use ccx_core::convexity::{fit_convexity, FitConfig};
use ccx_core::metric::validate_metric;
use ccx_core::spaces::{gen_space, GeodesicPolicy, SpaceKind, SpaceRecipe};
use ccx_core::{derive_constants, ConvexityCertificate, Exec, ThetaTable};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn metric_scan(c: &mut Criterion) {
    let (s, _) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 7, GeodesicPolicy::Canonical)).unwrap();
    let mut g = c.benchmark_group("validate_metric");
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| b.iter(|| validate_metric(&s, e).unwrap()));
    }
    g.finish();
}

fn convexity_scan(c: &mut Criterion) {
    let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 6, GeodesicPolicy::Canonical)).unwrap();
    let cfg = FitConfig { budget: 200_000, ..Default::default() };
    let mut g = c.benchmark_group("fit_convexity");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| fit_convexity(&s, &l, 1.0, 0.0, &cfg, e).unwrap())
        });
    }
    g.finish();
}

fn boundary_scan(c: &mut Criterion) {
    let (s, l) = gen_space(&SpaceRecipe::new(SpaceKind::Tree, 7, GeodesicPolicy::Canonical)).unwrap();
    let cert = ConvexityCertificate::from_parts(1.0, 0.0, 1.0, 0.0, ThetaTable::identity(), Some((1.0, 0.0)));
    let table = derive_constants(&cert);
    let cfg = BoundaryConfig { horizon: Some(7.0), ..Default::default() };
    let mut g = c.benchmark_group("build_boundary");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| build_boundary(&s, &l, &table, &cfg, e).unwrap())
        });
    }
    g.finish();
}

criterion_group!(scans, metric_scan, convexity_scan, boundary_scan);
criterion_main!(scans);
