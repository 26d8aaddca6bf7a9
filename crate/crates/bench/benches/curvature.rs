//! Benchmarks for the hot paths: jet multiplication, curvature-pack
//! assembly at the orders the checks actually use, Bach evaluation, and
//! the invariant report.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use bachex_core::{
    bach_values, curvature_pack, invariant_report, parse_expr, AffineSurface, Deformation,
    EndoField, ExtensionMetric, Field, Jet, MetricField, Point4,
};

fn generic_metric() -> MetricField {
    MetricField::extension(ExtensionMetric::new(
        AffineSurface::type_a([0.3, -0.1, 0.2, 0.4, -0.3, 0.1]),
        EndoField::nilpotent(
            Field::expr(parse_expr("1 + x1^2/4").unwrap()),
            Field::expr(parse_expr("x2/2").unwrap()),
        ),
        Deformation::new(
            Field::constant(0.8),
            Field::constant(-0.3),
            Field::constant(0.5),
        ),
    ))
}

fn bench_jet_mul(c: &mut Criterion) {
    let mut group = c.benchmark_group("jet_mul");
    for order in [2usize, 4, 6] {
        let a = Jet::variable(order, 0, 0.7)
            .mul(&Jet::variable(order, 1, -0.4))
            .add(&Jet::variable(order, 2, 1.3));
        let b = Jet::variable(order, 3, 0.9).add(&Jet::constant(order, 2.0));
        group.bench_function(format!("order_{order}"), |bench| {
            bench.iter(|| black_box(&a).mul(black_box(&b)))
        });
    }
    group.finish();
}

fn bench_curvature_pack(c: &mut Criterion) {
    let m = generic_metric();
    let p = Point4::new(0.4, -0.1, 0.3, 0.6);
    let mut group = c.benchmark_group("curvature_pack");
    for order in [2usize, 4, 5] {
        group.bench_function(format!("order_{order}"), |bench| {
            bench.iter(|| curvature_pack(black_box(&m), black_box(&p), order).unwrap())
        });
    }
    group.finish();
}

fn bench_bach_values(c: &mut Criterion) {
    let m = generic_metric();
    let p = Point4::new(0.4, -0.1, 0.3, 0.6);
    c.bench_function("bach_values", |bench| {
        bench.iter(|| bach_values(black_box(&m), black_box(&p)).unwrap())
    });
}

fn bench_invariant_report(c: &mut Criterion) {
    let m = generic_metric();
    let p = Point4::new(0.4, -0.1, 0.3, 0.6);
    c.bench_function("invariant_report", |bench| {
        bench.iter(|| invariant_report(black_box(&m), black_box(&p), 1e-9).unwrap())
    });
}

criterion_group!(
    benches,
    bench_jet_mul,
    bench_curvature_pack,
    bench_bach_values,
    bench_invariant_report
);
criterion_main!(benches);
