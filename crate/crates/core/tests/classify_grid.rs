//! Grid classification and the Bochner-flat audit on catalog charts.

use tvb_core::catalog::{self, Params};
use tvb_core::classify::{self, GridSpec, DEFAULT_TOL};
use tvb_core::geometry::{Chart, ChartSpec};
use tvb_core::Error;

fn hermitian_chart() -> Chart {
    let metric = vec![
        vec!["2 + x1^2", "0", "0.3*x2", "0"],
        vec!["0", "2 + x1^2", "0", "0.3*x2"],
        vec!["0.3*x2", "0", "3", "0"],
        vec!["0", "0.3*x2", "0", "3"],
    ];
    let j = vec![
        vec!["0", "-1", "0", "0"],
        vec!["1", "0", "0", "0"],
        vec!["0", "0", "0", "-1"],
        vec!["0", "0", "1", "0"],
    ];
    Chart::new(ChartSpec::from_text("hermitian", &["x1", "x2", "x3", "x4"], "", &metric, &j).unwrap()).unwrap()
}

#[test]
fn grid_reports_keep_lexicographic_order_under_any_thread_count() {
    let entry = catalog::example3().unwrap();
    let chart = entry.chart().unwrap();
    let grid = GridSpec::parse("0.5:1.5:2,-1:1:2,0:0:1,0:pi:3").unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| classify::classify_grid(chart, &grid, DEFAULT_TOL, 0.1).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    let points: Vec<Vec<f64>> = one.reports.iter().map(|r| r.point.clone()).collect();
    assert_eq!(points, grid.points());
    assert_eq!(points.len(), 12);
    assert_eq!(points[1], vec![0.5, -1.0, 0.0, std::f64::consts::FRAC_PI_2]);
    assert_eq!(one.summary.points, 12);
    let ak = one.summary.predicate("almostKahler").unwrap();
    assert_eq!(ak.holds_at, 12);
    assert_eq!(one.summary.predicate("hermitian").unwrap().holds_at, 0);
    assert!((one.summary.tau_range[0] + 6.0).abs() < 1e-9 && (one.summary.tau_range[1] + 6.0).abs() < 1e-9);
}

#[test]
fn grids_reject_points_inside_the_domain_margin() {
    let entry = catalog::example1().unwrap();
    let chart = entry.chart().unwrap();
    // x4 > 0: the point x4 = 0.05 lies inside the 0.1 margin.
    let grid = GridSpec::parse("0:0:1,0:0:1,0:0:1,0.05:1:2").unwrap();
    match classify::classify_grid(chart, &grid, DEFAULT_TOL, 0.1) {
        Err(Error::OutOfDomain { point, .. }) => assert_eq!(point, vec![0.0, 0.0, 0.0, 0.05]),
        other => panic!("expected OutOfDomain, got {other:?}"),
    }
    assert!(classify::classify_grid(chart, &grid, DEFAULT_TOL, 0.01).is_ok());
    let empty = GridSpec::parse("0:0:1,0:0:1,0:0:0,1:2:2").unwrap();
    assert!(matches!(classify::classify_grid(chart, &empty, DEFAULT_TOL, 0.1), Err(Error::EmptyGrid)));
    let short = GridSpec::parse("0:1:2,0:1:2").unwrap();
    assert!(matches!(classify::classify_grid(chart, &short, DEFAULT_TOL, 0.1), Err(Error::InvalidArgument(_))));
}

#[test]
fn point_classification_rejects_points_outside_the_domain() {
    let entry = catalog::example1().unwrap();
    let chart = entry.chart().unwrap();
    assert!(matches!(
        classify::classify_point(chart, &[0.0, 0.0, 0.0, -1.0], DEFAULT_TOL),
        Err(Error::OutOfDomain { .. })
    ));
    assert!(classify::classify_point(chart, &[0.0, 0.0, 0.0], DEFAULT_TOL).is_err());
}

#[test]
fn audit_refuses_charts_that_are_not_bochner_flat() {
    let chart = hermitian_chart();
    let grid = GridSpec::parse("0:1:2,0.5:1:2,0:0:1,0:0:1").unwrap();
    let report = classify::classify_grid(&chart, &grid, DEFAULT_TOL, 0.1).unwrap();
    assert_eq!(report.summary.predicate("bochnerFlat").unwrap().holds_at, 0);
    assert!(matches!(
        classify::theorem_audit(&chart, &grid, DEFAULT_TOL, 0.1),
        Err(Error::ContractViolation(_))
    ));
}

#[test]
fn audit_passes_on_the_catalog_examples() {
    for params in [Params::default(), Params { k: 2.5, u: "x1^2 - x2^2".into(), c: 1.0 }] {
        for name in ["example1", "example2", "example3", "example4", "flat"] {
            let entry = catalog::entry(name, &params).unwrap();
            let chart = entry.chart().unwrap();
            let grid = entry.grid.as_ref().unwrap();
            let audit = classify::theorem_audit(chart, grid, DEFAULT_TOL, 0.1).unwrap();
            assert_eq!(audit.points, grid.len());
            for check in &audit.checks {
                assert!(
                    check.passed,
                    "{name}: {} failed with {} counterexamples, worst {:e} at {:?}",
                    check.name, check.counterexamples, check.worst_residual, check.worst_point
                );
            }
        }
    }
}

#[test]
fn audit_on_algebraic_data_covers_both_complex_dimensions() {
    let cd = catalog::csf_data(2, -1.0).unwrap();
    let report = classify::classify_algebraic(&cd, DEFAULT_TOL).unwrap();
    let audit = classify::audit_curvature("csf2", &[(cd, report)], DEFAULT_TOL).unwrap();
    assert!(audit.passed());
    assert!(audit.check("self-dual").unwrap().applicable_points == 1);
    let cd6 = catalog::csf_data(3, 1.0).unwrap();
    let report6 = classify::classify_algebraic(&cd6, DEFAULT_TOL).unwrap();
    assert!(report6.bochner_flat.holds && report6.const_hol_sect.holds);
    assert!(report6.self_dual.is_none() && report6.uvwh.is_none());
    assert!(matches!(
        classify::audit_curvature("csf3", &[(cd6, report6)], DEFAULT_TOL),
        Err(Error::UnsupportedDimension { dim: 6, .. })
    ));
    assert!(matches!(classify::audit_curvature("none", &[], DEFAULT_TOL), Err(Error::EmptyGrid)));
}
