//! Sequential against rayon paths: CSR mat-vec on a large exterior operator
//! and a ladder of small spectral windows mapped over radii.
//!
//! Without the `parallel` feature only the sequential variants are built.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use magspec::eigensolve::SolverOptions;
use magspec::spectra::{build_operator, run_window, PipelineConfig};
use magspec::{Complex64, DomainSpec, FieldSpec, InnerBoundary, Obstacle, TruncationShape};

fn exterior(radius: f64) -> DomainSpec {
    DomainSpec::free(2, radius, TruncationShape::Disk).with_obstacle(Obstacle::Disk {
        center: vec![0.0, 0.0],
        radius: 1.0,
    })
}

fn matvec(c: &mut Criterion) {
    let op = build_operator(&exterior(12.0), &FieldSpec::constant(1.0, 2), InnerBoundary::Robin { gamma: 0.5 }, 0.1).unwrap();
    let x: Vec<Complex64> = (0..op.dim()).map(|i| Complex64::new((i as f64).sin(), (i as f64).cos())).collect();
    let mut y = vec![Complex64::new(0.0, 0.0); op.dim()];
    let mut group = c.benchmark_group("matvec");
    group.bench_function(BenchmarkId::new("sequential", op.dim()), |b| b.iter(|| op.matvec_seq(&x, &mut y)));
    #[cfg(feature = "parallel")]
    group.bench_function(BenchmarkId::new("parallel", op.dim()), |b| b.iter(|| op.matvec_par(&x, &mut y)));
    group.finish();
}

fn ladder(c: &mut Criterion) {
    let cfg = PipelineConfig {
        domain: exterior(4.0),
        field: FieldSpec::constant(1.0, 2),
        boundary: InnerBoundary::Robin { gamma: 0.0 },
        h: 0.2,
        window: [0.0, 3.5],
        cap: 1000,
        delta: 0.15,
        solver: SolverOptions::default(),
    };
    let radii = [3.0, 3.5, 4.0, 4.5];
    let mut group = c.benchmark_group("ladder");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| magspec::exec::map_seq(&radii, |&r| run_window(&cfg, r).unwrap().len()))
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| magspec::exec::map_par(&radii, |&r| run_window(&cfg, r).unwrap().len()))
    });
    group.finish();
}

criterion_group!(benches, matvec, ladder);
criterion_main!(benches);
