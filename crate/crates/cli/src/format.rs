//! Text and CSV rendering of reports.

use std::fmt::Write as _;

use tvb_core::classify::{AuditReport, ClassificationReport, GridSummary, PREDICATE_NAMES};

/// Nine significant digits, fixed notation for moderate exponents.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn point_text(p: &[f64]) -> String {
    p.iter().map(|x| sig9(*x)).collect::<Vec<_>>().join(", ")
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn report_text(manifold: &str, tol: f64, r: &ClassificationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "manifold   {manifold}");
    if !r.point.is_empty() {
        let _ = writeln!(s, "point      {}", point_text(&r.point));
    }
    let _ = writeln!(s, "tolerance  {}", sig9(tol));
    let _ = writeln!(s, "scale      {}", sig9(r.scale));
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<20} {:<6} residual", "predicate", "holds");
    for (name, p) in r.predicates() {
        let _ = writeln!(s, "{name:<20} {:<6} {}", yes_no(p.holds), sig9(p.residual));
    }
    let _ = writeln!(s);
    let scalars = [
        ("tau", r.tau),
        ("tauStar", r.tau_star),
        ("threeTauStarMinusTau", r.three_tau_star_minus_tau),
        ("gQuantity", r.g_quantity),
        ("holSect", r.hol_sect),
    ];
    for (name, v) in scalars {
        let _ = writeln!(s, "{name:<20} {}", sig9(v));
    }
    let _ = writeln!(s, "{:<20} {}", "ricciEigenvalues", point_text(&r.ricci_eigenvalues));
    if let Some([l, m]) = r.lambda_mu {
        let _ = writeln!(s, "{:<20} {}, {}", "lambdaMu", sig9(l), sig9(m));
    }
    if let Some(q) = r.uvwh {
        let _ = writeln!(s, "{:<20} {}, {}, {}, {}", "u, v, w, h", sig9(q.u), sig9(q.v), sig9(q.w), sig9(q.h));
    }
    if let (Some(wp), Some(wm)) = (r.w_plus_sq, r.w_minus_sq) {
        let _ = writeln!(s, "{:<20} {}", "wPlusSq", sig9(wp));
        let _ = writeln!(s, "{:<20} {}", "wMinusSq", sig9(wm));
    }
    if let Some(d) = r.densities {
        let _ = writeln!(s, "{:<20} {}", "p1 density", sig9(d.p1));
        let _ = writeln!(s, "{:<20} {}", "chi density", sig9(d.chi));
        let _ = writeln!(s, "{:<20} {}", "c1sq density", sig9(d.c1sq));
    }
    s
}

pub fn summary_text(manifold: &str, grid: &str, tol: f64, summary: &GridSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "manifold   {manifold}");
    let _ = writeln!(s, "grid       {grid} ({} points)", summary.points);
    let _ = writeln!(s, "tolerance  {}", sig9(tol));
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<20} {:<12} max residual", "predicate", "holds at");
    for p in &summary.predicates {
        let _ = writeln!(
            s,
            "{:<20} {:<12} {}",
            p.name,
            format!("{}/{}", p.holds_at, summary.points),
            sig9(p.max_residual)
        );
    }
    let _ = writeln!(s);
    let range = |r: [f64; 2]| format!("[{}, {}] (spread {})", sig9(r[0]), sig9(r[1]), sig9(r[1] - r[0]));
    let _ = writeln!(s, "{:<20} {}", "tau", range(summary.tau_range));
    let _ = writeln!(s, "{:<20} {}", "tauStar", range(summary.tau_star_range));
    s
}

pub fn audit_text(grid: &str, tol: f64, audit: &AuditReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "manifold   {}", audit.chart);
    let _ = writeln!(s, "grid       {grid} ({} points)", audit.points);
    let _ = writeln!(s, "tolerance  {}", sig9(tol));
    let _ = writeln!(s);
    for c in &audit.checks {
        let _ = writeln!(s, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.statement);
        let _ = write!(
            s,
            "     applicable at {} points, counterexamples {}, worst residual {}",
            c.applicable_points,
            c.counterexamples,
            sig9(c.worst_residual)
        );
        if !c.worst_point.is_empty() {
            let _ = write!(s, " at ({})", point_text(&c.worst_point));
        }
        let _ = writeln!(s);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "audit {}", if audit.passed() { "passed" } else { "FAILED" });
    s
}

/// CSV columns, in order: `point` (space-separated coordinates), the scalar
/// quantities, then `<predicate>` and `<predicate>Residual` for every
/// predicate, then the dimension-4 extras. Unavailable values are empty.
pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = ["point", "tau", "tauStar", "threeTauStarMinusTau", "gQuantity", "holSect", "ricciEigenvalues"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for p in PREDICATE_NAMES {
        h.push(p.to_string());
        h.push(format!("{p}Residual"));
    }
    for extra in ["u", "v", "w", "h", "wPlusSq", "wMinusSq", "p1", "chi", "c1sq"] {
        h.push(extra.to_string());
    }
    h
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn csv_row(r: &ClassificationReport) -> Vec<String> {
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
    let mut row = vec![
        join(&r.point),
        r.tau.to_string(),
        r.tau_star.to_string(),
        r.three_tau_star_minus_tau.to_string(),
        r.g_quantity.to_string(),
        r.hol_sect.to_string(),
        join(&r.ricci_eigenvalues),
    ];
    for p in PREDICATE_NAMES {
        match r.predicate(p) {
            Some(pred) => {
                row.push(pred.holds.to_string());
                row.push(pred.residual.to_string());
            }
            None => {
                row.push(String::new());
                row.push(String::new());
            }
        }
    }
    let q = r.uvwh;
    row.push(opt(q.map(|q| q.u)));
    row.push(opt(q.map(|q| q.v)));
    row.push(opt(q.map(|q| q.w)));
    row.push(opt(q.map(|q| q.h)));
    row.push(opt(r.w_plus_sq));
    row.push(opt(r.w_minus_sq));
    row.push(opt(r.densities.map(|d| d.p1)));
    row.push(opt(r.densities.map(|d| d.chi)));
    row.push(opt(r.densities.map(|d| d.c1sq)));
    row
}

pub fn csv_document(reports: &[ClassificationReport]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(csv_header())?;
    for r in reports {
        w.write_record(csv_row(r))?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}
