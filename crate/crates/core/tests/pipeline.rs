use magspec::eigensolve::SolverOptions;
use magspec::spectra::{
    ladder_compare, model_for_field, run_ladder, run_window, PipelineConfig, Verdict,
};
use magspec::{eigs_lowest, DomainSpec, FieldSpec, InnerBoundary, Obstacle, TruncationShape};

fn config(field: FieldSpec, obstacle: Obstacle, h: f64) -> PipelineConfig {
    PipelineConfig {
        domain: DomainSpec::free(2, 4.0, TruncationShape::Disk).with_obstacle(obstacle),
        field,
        boundary: InnerBoundary::Robin { gamma: 0.0 },
        h,
        window: [0.0, 6.0],
        cap: 2000,
        delta: 0.15,
        solver: SolverOptions::default(),
    }
}

#[test]
fn constant_field_counts_grow_along_the_ladder() {
    let cfg = config(FieldSpec::constant(1.0, 2), Obstacle::None, 0.2);
    let model = model_for_field(&cfg.field, 6.0).unwrap();
    let ladder = run_ladder(&cfg, &[3.0, 4.0, 5.0], &model).unwrap();
    assert!(ladder.certified);
    for level in [1.0, 3.0, 5.0] {
        let counts: Vec<usize> = ladder.rungs.iter().map(|r| r.report.count_at(level).unwrap()).collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]), "level {level}: {counts:?}");
    }
    let totals: Vec<usize> = ladder.rungs.iter().map(|r| r.report.total).collect();
    assert!(totals.windows(2).all(|w| w[0] < w[1]), "{totals:?}");
}

#[test]
fn reflexive_comparison_passes() {
    let cfg = config(FieldSpec::constant(1.0, 2), Obstacle::None, 0.25);
    let c = ladder_compare(&cfg, &cfg, &[3.0, 4.0], 6.0).unwrap();
    assert_eq!(c.verdict, Verdict::Pass);
    assert!(c.max_differences.iter().all(|&(_, d)| d == 0));
    for (a, b) in c.reference.rungs.iter().zip(&c.test.rungs) {
        assert_eq!(a.spectrum.eigenvalues, b.spectrum.eigenvalues);
    }
}

#[test]
fn growing_field_spectrum_is_truncation_independent() {
    let field = FieldSpec::radial_growth(1.0, 2.0, 2);
    let opts = SolverOptions::default();
    let lowest = |r: f64| {
        let domain = DomainSpec::free(2, r, TruncationShape::Disk);
        let op = magspec::spectra::build_operator(&domain, &field, InnerBoundary::Dirichlet, 0.15).unwrap();
        eigs_lowest(&op, 6, &opts).unwrap().eigenvalues
    };
    // Eigenfunctions are confined well inside R = 4; at R = 3 the sixth still feels the wall.
    let (small, large) = (lowest(4.0), lowest(6.0));
    for (a, b) in small.iter().zip(&large) {
        assert!((a - b).abs() / b < 1e-8, "{a} vs {b}");
    }
    // The constant field keeps adding states to a fixed window.
    let cfg = config(FieldSpec::constant(1.0, 2), Obstacle::None, 0.15);
    let count = |r: f64| run_window(&cfg, r).unwrap().len();
    assert!(count(6.0) > count(3.0));
}

#[test]
fn obstacle_run_keeps_its_window_certified() {
    let obstacle = Obstacle::Disk {
        center: vec![0.0, 0.0],
        radius: 1.0,
    };
    let mut cfg = config(FieldSpec::constant(1.0, 2), obstacle, 0.2);
    cfg.boundary = InnerBoundary::Robin { gamma: 0.5 };
    let r = run_window(&cfg, 4.0).unwrap();
    assert!(r.certified());
    assert!(r.eigenvalues.iter().all(|&x| (0.0..=6.0).contains(&x)));
    assert!(r.residuals.iter().all(|&x| x <= cfg.solver.tol));
}
