use tvb_core::catalog::{self, Model, Params};
use tvb_core::classify::{self, DEFAULT_TOL};

fn failures(params: &Params) -> Vec<String> {
    let mut out = Vec::new();
    for entry in catalog::all(params).unwrap() {
        let reports = match &entry.model {
            Model::Chart(chart) => {
                let mut reports = vec![classify::classify_point(chart, &entry.sample_point, DEFAULT_TOL).unwrap()];
                if let Some(grid) = &entry.grid {
                    reports.extend(classify::classify_grid(chart, grid, DEFAULT_TOL, 0.1).unwrap().reports);
                }
                reports
            }
            Model::Algebraic(cd) => vec![classify::classify_algebraic(cd, DEFAULT_TOL).unwrap()],
        };
        for r in &reports {
            for outcome in entry.check_claims(r) {
                if !outcome.passed {
                    out.push(format!("{} at {:?}: {} ({})", entry.name, r.point, outcome.claim, outcome.detail));
                }
            }
        }
    }
    out
}

#[test]
fn default_catalog_claims_hold_on_sample_points_and_grids() {
    let f = failures(&Params::default());
    assert!(f.is_empty(), "{}", f.join("\n"));
}

#[test]
fn parametrized_catalog_claims_hold() {
    let params = Params {
        k: 2.5,
        u: "x1^2 - x2^2".into(),
        c: -0.75,
    };
    let f = failures(&params);
    assert!(f.is_empty(), "{}", f.join("\n"));
}
