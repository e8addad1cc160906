//! Acceptance criteria over the catalog charts. Each criterion returns the
//! failed sub-checks and a one-line summary of the measured values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvb_core::bochner::{self, Lambda2Basis};
use tvb_core::catalog::{self, CatalogEntry, Model, Params};
use tvb_core::classify::{self, DEFAULT_TOL};
use tvb_core::geometry::{self, Chart, CurvatureData};
use tvb_core::tensor::{self, Tensor, Variance};

/// Collects failed sub-checks for one criterion.
pub struct Check {
    pub failures: Vec<String>,
    pub notes: Vec<String>,
}

impl Check {
    fn new() -> Check {
        Check { failures: Vec::new(), notes: Vec::new() }
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn note(&mut self, text: String) {
        self.notes.push(text);
    }
}

pub type Outcome = Result<Check, tvb_core::Error>;

fn chart_of(entry: &CatalogEntry) -> &Chart {
    entry.chart().expect("catalog entry has a chart")
}

fn grid_of(entry: &CatalogEntry) -> Result<Vec<Vec<f64>>, tvb_core::Error> {
    classify::grid_points(chart_of(entry), entry.grid.as_ref().expect("grid"), 0.1)
}

fn random_unit_pair(rng: &mut ChaCha8Rng, d: usize) -> (Vec<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (x, y)
}

pub fn criterion1() -> Outcome {
    let mut c = Check::new();
    let entry = catalog::example3()?;
    let chart = chart_of(&entry);
    let points = grid_of(&entry)?;
    c.require(points.len() == 81, || format!("grid has {} points", points.len()));
    let mut worst_n = f64::INFINITY;
    let mut worst = [0.0f64; 6];
    for p in &points {
        let cd = geometry::curvature_data(chart, p)?;
        let s = geometry::structure_residuals(chart, p)?;
        let report = classify::classify_curvature(&cd, Some(s), DEFAULT_TOL)?;
        let b = cd.norm(&bochner::bochner_surface(&cd)?)?;
        let w = cd.norm(&bochner::weyl_tensor(&cd)?)?;
        let nr = cd.norm(&geometry::nabla_riemann(chart, p)?)?;
        let n = report.normalized_residual("hermitian").unwrap_or(0.0);
        for (slot, v) in worst.iter_mut().zip([
            (cd.tau + 6.0).abs(),
            (cd.tau_star + 2.0).abs(),
            s.d_omega,
            b,
            w,
            nr,
        ]) {
            *slot = slot.max(v);
        }
        worst_n = worst_n.min(n);
    }
    let [tau, tau_s, d_omega, b, w, nr] = worst;
    c.require(tau < 1e-6, || format!("|τ + 6| = {tau:e}"));
    c.require(tau_s < 1e-6, || format!("|τ* + 2| = {tau_s:e}"));
    c.require(d_omega < 1e-8, || format!("‖dΩ‖ = {d_omega:e}"));
    c.require(b < 1e-8, || format!("‖B(R)‖ = {b:e}"));
    c.require(w < 1e-8, || format!("‖W‖ = {w:e}"));
    c.require(nr < 1e-7, || format!("‖∇R‖ = {nr:e}"));
    c.require(worst_n > 0.1, || format!("min ‖N‖ = {worst_n}"));
    c.note(format!(
        "81 points, max |τ+6| {tau:.1e}, max |τ*+2| {tau_s:.1e}, max ‖dΩ‖ {d_omega:.1e}, max ‖B‖ {b:.1e}, max ‖W‖ {w:.1e}, max ‖∇R‖ {nr:.1e}, min ‖N‖ {worst_n:.3}"
    ));
    Ok(c)
}

pub fn criterion2() -> Outcome {
    let mut c = Check::new();
    let entry = catalog::example1()?;
    let chart = chart_of(&entry);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_k = 0.0f64;
    let mut worst = [0.0f64; 3];
    for _ in 0..5 {
        let p = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0)];
        let cd = geometry::curvature_data(chart, &p)?;
        for _ in 0..50 {
            let (x, y) = random_unit_pair(&mut rng, 4);
            worst_k = worst_k.max((geometry::sectional_curvature(&cd.riemann, &cd.g, &x, &y)? + 1.0).abs());
        }
        let s = geometry::structure_residuals(chart, &p)?;
        let b = cd.norm(&bochner::bochner_surface(&cd)?)?;
        for (slot, v) in worst.iter_mut().zip([b, s.nijenhuis, (cd.tau + 12.0).abs()]) {
            *slot = slot.max(v);
        }
    }
    let [b, n, tau] = worst;
    c.require(worst_k < 1e-8, || format!("|K + 1| = {worst_k:e}"));
    c.require(b < 1e-8, || format!("‖B(R)‖ = {b:e}"));
    c.require(n < 1e-8, || format!("‖N‖ = {n:e}"));
    c.require(tau < 1e-6, || format!("|τ + 12| = {tau:e}"));
    c.note(format!("250 planes, max |K+1| {worst_k:.1e}, max ‖B‖ {b:.1e}, max ‖N‖ {n:.1e}, max |τ+12| {tau:.1e}"));
    Ok(c)
}

pub fn criterion3() -> Outcome {
    let mut c = Check::new();
    let entry = catalog::example2(1.0)?;
    let chart = chart_of(&entry);
    let mut worst = [0.0f64; 5];
    let points = grid_of(&entry)?;
    for p in &points {
        let cd = geometry::curvature_data(chart, p)?;
        let s = geometry::structure_residuals(chart, p)?;
        let report = classify::classify_curvature(&cd, Some(s), DEFAULT_TOL)?;
        let ev = &report.ricci_eigenvalues;
        let ev_err = ev.iter().zip([1.0, 1.0, -1.0, -1.0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let rs = cd.norm(&cd.ricci_star.sub(&cd.ricci)?)?;
        let b = cd.norm(&bochner::bochner_surface(&cd)?)?;
        for (slot, v) in worst.iter_mut().zip([b, s.nabla_j, cd.tau.abs(), rs, ev_err]) {
            *slot = slot.max(v);
        }
    }
    let [b, nj, tau, rs, ev] = worst;
    c.require(b < 1e-8, || format!("‖B(R)‖ = {b:e}"));
    c.require(nj < 1e-8, || format!("‖∇J‖ = {nj:e}"));
    c.require(tau < 1e-8, || format!("|τ| = {tau:e}"));
    c.require(rs < 1e-8, || format!("‖ρ* − ρ‖ = {rs:e}"));
    c.require(ev < 1e-6, || format!("Ricci eigenvalue error {ev:e}"));
    c.note(format!(
        "{} points, max ‖B‖ {b:.1e}, max ‖∇J‖ {nj:.1e}, max |τ| {tau:.1e}, max ‖ρ*−ρ‖ {rs:.1e}, eigenvalue error {ev:.1e}",
        points.len()
    ));
    Ok(c)
}

pub fn criterion4(u: &str) -> Outcome {
    let mut c = Check::new();
    let entry = catalog::example4(u)?;
    let chart = chart_of(&entry);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let points = grid_of(&entry)?;
    let mut worst = [0.0f64; 4];
    let mut least_rho0 = f64::INFINITY;
    for p in &points {
        let cd = geometry::curvature_data(chart, p)?;
        let b = cd.norm(&bochner::bochner_surface(&cd)?)?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h = geometry::hol_sect_curv(&cd.riemann, &cd.g, &cd.j, &x)?;
            lo = lo.min(h);
            hi = hi.max(h);
        }
        let h = 0.5 * (lo + hi);
        let rs0 = cd.norm(&cd.ricci_star.axpy(-cd.tau_star / 4.0, &cd.g)?)?;
        let rho0 = cd.norm(&cd.ricci.axpy(-cd.tau / 4.0, &cd.g)?)?;
        for (slot, v) in worst.iter_mut().zip([b, hi - lo, (cd.tau_star - 4.0 * h).abs(), rs0]) {
            *slot = slot.max(v);
        }
        least_rho0 = least_rho0.min(rho0);
    }
    let [b, spread, t4h, rs0] = worst;
    c.require(b < 1e-8, || format!("‖B(R)‖ = {b:e}"));
    c.require(spread < 1e-7, || format!("H spread {spread:e}"));
    c.require(t4h < 1e-6, || format!("|τ* − 4H| = {t4h:e}"));
    c.require(rs0 < 1e-7, || format!("‖ρ* − (τ*/4)g‖ = {rs0:e}"));
    c.require(least_rho0 > 0.01, || {
        format!("not Einstein clause fails: min ‖ρ − (τ/4)g‖ = {least_rho0:e} (this metric is hyperbolic, hence Einstein)")
    });
    c.note(format!(
        "{} points, max ‖B‖ {b:.1e}, max H spread {spread:.1e}, max |τ*−4H| {t4h:.1e}, max ‖ρ*−(τ*/4)g‖ {rs0:.1e}, min ‖ρ−(τ/4)g‖ {least_rho0:.3}",
        points.len()
    ));
    Ok(c)
}

/// Curvature data at the grid points of every Bochner-flat catalog model in
/// real dimension 4.
fn bochner_flat_samples() -> Result<Vec<(String, CurvatureData)>, tvb_core::Error> {
    let mut out = Vec::new();
    let variants = [
        Params::default(),
        Params { k: 2.5, u: "x1^2 - x2^2".into(), c: -0.75 },
    ];
    for params in &variants {
        for entry in catalog::all(params)? {
            match &entry.model {
                Model::Chart(chart) => {
                    for p in grid_of(&entry)? {
                        out.push((format!("{} at {p:?}", entry.name), geometry::curvature_data(chart, &p)?));
                    }
                }
                Model::Algebraic(_) => {
                    if let Some(n) = entry.name.strip_prefix("csf").and_then(|n| n.parse::<usize>().ok()) {
                        if n == 2 {
                            out.push((format!("{} (c = {})", entry.name, params.c), catalog::csf_data(2, params.c)?));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn criterion5() -> Outcome {
    let mut c = Check::new();
    let samples = bochner_flat_samples()?;
    let mut worst = [0.0f64; 6];
    for (label, cd) in &samples {
        let b = cd.norm(&bochner::bochner_surface(cd)?)?;
        c.require(b < 1e-8, || format!("{label} is not Bochner-flat (‖B‖ = {b:e})"));
        let rebuilt = bochner::reconstruct_riemann(&cd.ricci, &cd.ricci_star, cd.tau, cd.tau_star, &cd.g, &cd.j, 1e-9)?;
        let a = cd.norm(&rebuilt.sub(&cd.riemann)?)?;
        let w = bochner::weyl_tensor(cd)?;
        let closed = bochner::weyl_closed_form(&cd.ricci_star, cd.tau, cd.tau_star, &cd.g, &cd.j)?;
        let bw = cd.norm(&w.sub(&closed)?)?;
        let frame = cd.frame()?;
        let rsf = frame.pull_back(&cd.ricci_star)?;
        let basis = Lambda2Basis::new(&frame, &cd.g, &cd.j)?;
        let blocks = bochner::weyl_operator(&w, &cd.g_inv, &basis, 1e-8)?;
        let cc = blocks.max_abs_diff(&bochner::weyl_operator_closed_form(&rsf, cd.tau, cd.tau_star));
        let (wp, wm) = bochner::wpm_norms(&blocks);
        let (cp, cm) = bochner::wpm_closed_form(&rsf, cd.tau, cd.tau_star);
        let d = (wp - cp).abs().max((wm - cm).abs());
        let g_value = bochner::g_quantity(&rsf)?;
        let e = bochner::curvature_norm_decomposition(cd, g_value, 1e-8)?.residual;
        let f = bochner::gray_identity_residual(cd)?;
        for (slot, v) in worst.iter_mut().zip([a, bw, cc, d, e, f]) {
            *slot = slot.max(v);
        }
    }
    let [a, bw, cc, d, e, f] = worst;
    c.require(a < 1e-8, || format!("(a) reconstruction {a:e}"));
    c.require(bw < 1e-8, || format!("(b) closed-form Weyl {bw:e}"));
    c.require(cc < 1e-8, || format!("(c) Weyl operator blocks {cc:e}"));
    c.require(d < 1e-8, || format!("(d) block norms {d:e}"));
    c.require(e < 1e-7, || format!("(e) ‖R‖² decomposition {e:e}"));
    c.require(f < 1e-8, || format!("(f) curvature identity {f:e}"));
    c.note(format!(
        "{} samples, (a) {a:.1e} (b) {bw:.1e} (c) {cc:.1e} (d) {d:.1e} (e) {e:.1e} (f) {f:.1e}",
        samples.len()
    ));
    Ok(c)
}

pub fn criterion6() -> Outcome {
    let mut c = Check::new();
    let mut worst = 0.0f64;
    for n in [2usize, 3] {
        for cv in [1.0, -1.0, 0.5] {
            let cd = catalog::csf_data(n, cv)?;
            let b = bochner::bochner_tensor(&cd, n)?;
            worst = worst.max(cd.norm(&b)?);
        }
    }
    c.require(worst < 1e-10, || format!("complex space form ‖B‖ = {worst:e}"));
    let flat = catalog::flat()?;
    let cd = geometry::curvature_data(chart_of(&flat), &[0.1, 0.2, -0.3, 0.4])?;
    let fb = bochner::bochner_tensor(&cd, 2)?.max_abs();
    c.require(fb == 0.0, || format!("flat ‖B‖ = {fb:e}"));
    c.note(format!("dims 4 and 6, max ‖B‖ {worst:.1e}, flat exactly {fb}"));
    Ok(c)
}

fn fd_gamma_error(chart: &Chart, p: &[f64]) -> Result<f64, tvb_core::Error> {
    let d = chart.dim();
    let h = 1e-4;
    let g_at = |q: &[f64]| chart.metric_derivatives(q, 0).map(|t| t.rows());
    let mut dg = vec![vec![vec![0.0; d]; d]; d];
    for m in 0..d {
        let (mut a, mut b) = (p.to_vec(), p.to_vec());
        a[m] += h;
        b[m] -= h;
        let (ga, gb) = (g_at(&a)?, g_at(&b)?);
        for i in 0..d {
            for j in 0..d {
                dg[m][i][j] = (ga[i][j] - gb[i][j]) / (2.0 * h);
            }
        }
    }
    let ps = chart.structure_at(p)?;
    let conn = geometry::christoffel(chart, p)?;
    let scale = conn.gamma.max_abs().max(1.0);
    let mut err = 0.0f64;
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let want: f64 =
                    (0..d).map(|l| 0.5 * ps.g_inv.get2(k, l) * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j])).sum();
                err = err.max((conn.gamma.get(&[k, i, j]) - want).abs() / scale);
            }
        }
    }
    Ok(err)
}

fn kulkarni_naive(a: &[Vec<f64>], b: &[Vec<f64>], x: usize, y: usize, z: usize, w: usize) -> f64 {
    a[x][z] * b[y][w] - a[x][w] * b[y][z] + b[x][z] * a[y][w] - b[x][w] * a[y][z]
}

pub fn criterion7() -> Outcome {
    let mut c = Check::new();
    let mut worst_fd = 0.0f64;
    let mut charts = 0;
    let variants = [Params::default(), Params { k: 2.5, u: "x1^2 - x2^2".into(), c: 1.0 }];
    for params in &variants {
        for entry in catalog::all(params)? {
            let Some(chart) = entry.chart() else { continue };
            charts += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut found = 0;
            while found < 20 {
                let p: Vec<f64> = entry.sample_point.iter().map(|x| x + rng.gen_range(-0.2..0.2)).collect();
                if chart.domain().margin_violation(&p, 0.05).is_some() {
                    continue;
                }
                found += 1;
                worst_fd = worst_fd.max(fd_gamma_error(chart, &p)?);
            }
        }
    }
    c.require(worst_fd < 1e-6, || format!("Christoffel vs differences {worst_fd:e}"));

    let cov2 = [Variance::Covariant; 2];
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_rel = 0.0f64;
    let j0 = Tensor::standard_complex_structure(4);
    let jr = j0.rows();
    for _ in 0..200 {
        let rand_rows = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..4).map(|_| (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect()
        };
        let (a, b) = (rand_rows(&mut rng), rand_rows(&mut rng));
        let (ta, tb) = (Tensor::from_rows(cov2, &a)?, Tensor::from_rows(cov2, &b)?);
        let barred = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            (0..4).map(|x| (0..4).map(|y| (0..4).map(|k| m[x][k] * jr[k][y]).sum()).collect()).collect()
        };
        let (ab, bb) = (barred(&a), barred(&b));
        let k = tensor::kulkarni(&ta, &tb)?;
        let t = tensor::triangle(&ta, &tb, &j0)?;
        let o = tensor::outer(&ta, &tb)?;
        let bar = tensor::bar(&ta, &j0)?;
        let jc = tensor::j_conjugate(&ta, &j0)?;
        let mut rel = |got: f64, want: f64| worst_rel = worst_rel.max((got - want).abs() / want.abs().max(1.0));
        for x in 0..4 {
            for y in 0..4 {
                rel(bar.get2(x, y), ab[x][y]);
                let want: f64 = (0..4).map(|m| (0..4).map(|n| jr[m][x] * jr[n][y] * a[m][n]).sum::<f64>()).sum();
                rel(jc.get2(x, y), want);
                for z in 0..4 {
                    for w in 0..4 {
                        rel(k.get4(x, y, z, w), kulkarni_naive(&a, &b, x, y, z, w));
                        rel(o.get4(x, y, z, w), a[x][y] * b[z][w]);
                        let tw = kulkarni_naive(&a, &b, x, y, z, w)
                            + kulkarni_naive(&ab, &bb, x, y, z, w)
                            + 2.0 * ab[x][y] * bb[z][w]
                            + 2.0 * bb[x][y] * ab[z][w];
                        rel(t.get4(x, y, z, w), tw);
                    }
                }
            }
        }
    }
    c.require(worst_rel < 1e-12, || format!("tensor products vs loops {worst_rel:e}"));
    c.note(format!(
        "{charts} charts × 20 points, Christoffel error {worst_fd:.1e}; 200 random inputs, product error {worst_rel:.1e}"
    ));
    Ok(c)
}

pub fn criterion8() -> Outcome {
    let mut c = Check::new();
    let samples = bochner_flat_samples()?;
    let mut worst = 0.0f64;
    let mut exact = true;
    for (_, cd) in &samples {
        let report = classify::classify_algebraic(cd, DEFAULT_TOL)?;
        let dens = report.densities.expect("dimension 4");
        worst = worst.max(dens.max_form_gap());
        exact &= dens.c1sq == dens.p1 + 2.0 * dens.chi;
    }
    c.require(worst < 1e-7, || format!("density forms differ by {worst:e}"));
    c.require(exact, || "c1² density is not p1 + 2χ".into());
    c.note(format!("{} samples, max density gap {worst:.1e}, c1² = p1 + 2χ exactly", samples.len()));
    Ok(c)
}

pub fn criterion9() -> Outcome {
    let mut c = Check::new();
    let entry = catalog::example1()?;
    let chart = chart_of(&entry);
    let mut worst = [0.0f64; 3];
    let points = grid_of(&entry)?;
    for p in &points {
        let cd = geometry::curvature_data(chart, p)?;
        let q = bochner::uvwh(&cd)?;
        let target = -(cd.tau_star - cd.tau) / 8.0;
        let uv = (q.u - target).abs().max((q.v - target).abs());
        for (slot, v) in worst.iter_mut().zip([uv, q.w.abs(), q.h.abs()]) {
            *slot = slot.max(v);
        }
    }
    let [uv, w, h] = worst;
    c.require(uv < 1e-8, || format!("|u, v + (τ*−τ)/8| = {uv:e}"));
    c.require(w < 1e-10, || format!("|w| = {w:e}"));
    c.require(h < 1e-10, || format!("|h| = {h:e}"));
    c.note(format!("{} points, u/v error {uv:.1e}, |w| {w:.1e}, |h| {h:.1e}", points.len()));
    Ok(c)
}

/// Labels and entry points in reporting order. Criterion 4 appears twice:
/// once for `u = x1` and once for the non-affine `u = x1^2 - x2^2`.
pub fn criteria() -> Vec<(&'static str, Box<dyn Fn() -> Outcome>)> {
    vec![
        ("criterion 1 (example 3)", Box::new(criterion1)),
        ("criterion 2 (example 1)", Box::new(criterion2)),
        ("criterion 3 (example 2, K = 1)", Box::new(criterion3)),
        ("criterion 4 (example 4, u = x1)", Box::new(|| criterion4("x1"))),
        ("criterion 4 (example 4, u = x1^2 - x2^2)", Box::new(|| criterion4("x1^2 - x2^2"))),
        ("criterion 5 (closed-form equivalences)", Box::new(criterion5)),
        ("criterion 6 (Bochner branches)", Box::new(criterion6)),
        ("criterion 7 (oracles)", Box::new(criterion7)),
        ("criterion 8 (density consistency)", Box::new(criterion8)),
        ("criterion 9 (u, v, w, h on example 1)", Box::new(criterion9)),
    ]
}
