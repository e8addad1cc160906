//! Pointwise classification of curvature data, grid sweeps and the audit of
//! the structural consequences of Bochner-flatness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bochner::{self, Densities, Lambda2Basis, Uvwh, WeylBlocks};
use crate::error::{Error, Result};
use crate::expr;
use crate::geometry::{self, Chart, CurvatureData, StructureResiduals};
use crate::linalg;
use crate::tensor::{Tensor, Variance};

/// Default threshold for "vanishes" claims.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Threshold a normalized residual must exceed for a "does not vanish"
/// claim to count as confirmed.
pub const NONZERO_GAP: f64 = 0.1;

const HOL_SECT_SAMPLES: usize = 64;
const HOL_SECT_SEED: u64 = 0x7662_6f63;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub holds: bool,
    pub residual: f64,
}

impl Predicate {
    fn zero(residual: f64, threshold: f64) -> Predicate {
        Predicate {
            holds: residual <= threshold,
            residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassificationReport {
    pub point: Vec<f64>,
    pub dim: usize,
    /// `max(1, ‖R‖)`; curvature residuals are judged relative to it.
    pub scale: f64,
    pub kahler: Option<Predicate>,
    pub almost_kahler: Option<Predicate>,
    pub hermitian: Option<Predicate>,
    pub einstein: Predicate,
    pub weakly_star_einstein: Predicate,
    pub bochner_flat: Predicate,
    pub weyl_flat: Predicate,
    pub self_dual: Option<Predicate>,
    pub anti_self_dual: Option<Predicate>,
    pub gray_identity: Option<Predicate>,
    pub const_hol_sect: Predicate,
    /// Mean holomorphic sectional curvature over the sampled directions.
    pub hol_sect: f64,
    pub tau: f64,
    pub tau_star: f64,
    pub three_tau_star_minus_tau: f64,
    pub g_quantity: f64,
    pub uvwh: Option<Uvwh>,
    pub ricci_eigenvalues: Vec<f64>,
    /// `(λ, μ)` when the Ricci eigenvalues come in two equal pairs.
    pub lambda_mu: Option<[f64; 2]>,
    pub w_plus_sq: Option<f64>,
    pub w_minus_sq: Option<f64>,
    pub densities: Option<Densities>,
}

impl ClassificationReport {
    /// All predicates present in this report, by their report name.
    pub fn predicates(&self) -> Vec<(&'static str, Predicate)> {
        let optional = [
            ("kahler", self.kahler),
            ("almostKahler", self.almost_kahler),
            ("hermitian", self.hermitian),
        ];
        let mut out: Vec<(&'static str, Predicate)> =
            optional.into_iter().filter_map(|(n, p)| p.map(|p| (n, p))).collect();
        out.extend([
            ("einstein", self.einstein),
            ("weaklyStarEinstein", self.weakly_star_einstein),
            ("bochnerFlat", self.bochner_flat),
            ("weylFlat", self.weyl_flat),
        ]);
        for (n, p) in [
            ("selfDual", self.self_dual),
            ("antiSelfDual", self.anti_self_dual),
            ("grayIdentity", self.gray_identity),
        ] {
            if let Some(p) = p {
                out.push((n, p));
            }
        }
        out.push(("constHolSect", self.const_hol_sect));
        out
    }

    pub fn predicate(&self, name: &str) -> Option<Predicate> {
        self.predicates().into_iter().find(|(n, _)| *n == name).map(|(_, p)| p)
    }

    /// Residual divided by the scale it is judged against.
    pub fn normalized_residual(&self, name: &str) -> Option<f64> {
        let p = self.predicate(name)?;
        Some(if STRUCTURE_PREDICATES.contains(&name) {
            p.residual
        } else {
            p.residual / self.scale
        })
    }
}

/// Predicates whose residuals are first-order structure quantities, judged
/// without the curvature scale.
pub const STRUCTURE_PREDICATES: [&str; 3] = ["kahler", "almostKahler", "hermitian"];

pub const PREDICATE_NAMES: [&str; 11] = [
    "kahler",
    "almostKahler",
    "hermitian",
    "einstein",
    "weaklyStarEinstein",
    "bochnerFlat",
    "weylFlat",
    "selfDual",
    "antiSelfDual",
    "grayIdentity",
    "constHolSect",
];

/// Intermediate dimension-4 quantities shared by the report and the audit.
struct SurfaceData {
    blocks: WeylBlocks,
    rho_star_frame: Tensor,
    weyl: Tensor,
}

fn surface_data(cd: &CurvatureData, tol: f64) -> Result<SurfaceData> {
    let frame = cd.frame()?;
    let basis = Lambda2Basis::new(&frame, &cd.g, &cd.j)?;
    let weyl = bochner::weyl_tensor(cd)?;
    let blocks = bochner::weyl_operator(&weyl, &cd.g_inv, &basis, tol.max(1e-8))?;
    let rho_star_frame = frame.pull_back(&cd.ricci_star)?;
    Ok(SurfaceData {
        blocks,
        rho_star_frame,
        weyl,
    })
}

/// Spread (max − min) and mean of the holomorphic sectional curvature over
/// a fixed pseudo-random sample of directions.
fn hol_sect_spread(cd: &CurvatureData) -> Result<(f64, f64)> {
    let d = cd.dim();
    let frame = cd.frame()?;
    let rf = frame.pull_back(&cd.riemann)?;
    let jm = frame.j_matrix(&cd.g, &cd.j);
    let jf = Tensor::from_fn(d, &[Variance::Contravariant, Variance::Covariant], |i| jm[i[0]][i[1]]);
    let id = Tensor::euclidean(d);
    let mut rng = ChaCha8Rng::seed_from_u64(HOL_SECT_SEED);
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    let mut count = 0;
    while count < HOL_SECT_SAMPLES {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if x.iter().map(|v| v * v).sum::<f64>() < 1e-4 {
            continue;
        }
        let h = geometry::hol_sect_curv(&rf, &id, &jf, &x)?;
        lo = lo.min(h);
        hi = hi.max(h);
        sum += h;
        count += 1;
    }
    Ok((hi - lo, sum / count as f64))
}

/// Classify curvature data; `structure` carries the first-order residuals
/// when the data comes from a chart.
pub fn classify_curvature(
    cd: &CurvatureData,
    structure: Option<StructureResiduals>,
    tol: f64,
) -> Result<ClassificationReport> {
    let d = cd.dim();
    let r_norm = cd.norm(&cd.riemann)?;
    let scale = r_norm.max(1.0);
    let curv = |residual: f64| Predicate::zero(residual, tol * scale);

    let rho0 = cd.ricci.axpy(-cd.tau / d as f64, &cd.g)?;
    let rho_star0 = cd.ricci_star.axpy(-cd.tau_star / d as f64, &cd.g)?;
    let bochner_t = bochner::bochner_tensor(cd, cd.n())?;
    let weyl_norm = cd.norm(&bochner::weyl_tensor(cd)?)?;

    let frame = cd.frame()?;
    let ricci_frame = frame.pull_back(&cd.ricci)?;
    let ricci_eigenvalues = linalg::symmetric_eigenvalues(&ricci_frame.rows());
    let pair_tol = 1e-6 * ricci_eigenvalues.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let lambda_mu = if d == 4
        && (ricci_eigenvalues[0] - ricci_eigenvalues[1]).abs() <= pair_tol
        && (ricci_eigenvalues[2] - ricci_eigenvalues[3]).abs() <= pair_tol
    {
        Some([ricci_eigenvalues[0], ricci_eigenvalues[3]])
    } else {
        None
    };

    let (spread, hol_sect) = hol_sect_spread(cd)?;
    let g_quantity = bochner::g_quantity(&frame.pull_back(&cd.ricci_star)?)?;

    let mut report = ClassificationReport {
        point: cd.point.clone(),
        dim: d,
        scale,
        kahler: structure.map(|s| Predicate::zero(s.nabla_j, tol)),
        almost_kahler: structure.map(|s| Predicate::zero(s.d_omega, tol)),
        hermitian: structure.map(|s| Predicate::zero(s.nijenhuis, tol)),
        einstein: curv(cd.norm(&rho0)?),
        weakly_star_einstein: curv(cd.norm(&rho_star0)?),
        bochner_flat: curv(cd.norm(&bochner_t)?),
        weyl_flat: curv(weyl_norm),
        self_dual: None,
        anti_self_dual: None,
        gray_identity: None,
        const_hol_sect: curv(spread),
        hol_sect,
        tau: cd.tau,
        tau_star: cd.tau_star,
        three_tau_star_minus_tau: 3.0 * cd.tau_star - cd.tau,
        g_quantity,
        uvwh: None,
        ricci_eigenvalues,
        lambda_mu,
        w_plus_sq: None,
        w_minus_sq: None,
        densities: None,
    };
    if d == 4 {
        let sd = surface_data(cd, tol)?;
        let (wp, wm) = bochner::wpm_norms(&sd.blocks);
        report.self_dual = Some(curv(wm.sqrt()));
        report.anti_self_dual = Some(curv(wp.sqrt()));
        report.gray_identity = Some(curv(bochner::gray_identity_residual(cd)?));
        report.uvwh = Some(bochner::uvwh(cd)?);
        report.w_plus_sq = Some(wp);
        report.w_minus_sq = Some(wm);
        report.densities = Some(bochner::characteristic_integrands(cd, &sd.blocks, g_quantity)?);
    }
    Ok(report)
}

pub fn classify_point(chart: &Chart, point: &[f64], tol: f64) -> Result<ClassificationReport> {
    let cd = geometry::curvature_data(chart, point)?;
    let structure = geometry::structure_residuals(chart, point)?;
    classify_curvature(&cd, Some(structure), tol)
}

/// Classification of algebraic curvature data; structure predicates are
/// absent.
pub fn classify_algebraic(cd: &CurvatureData, tol: f64) -> Result<ClassificationReport> {
    classify_curvature(cd, None, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

/// Tensor-product grid, one axis per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> GridSpec {
        GridSpec { axes }
    }

    /// `min:max:count` per coordinate, comma separated. Endpoints are
    /// constant expressions such as `pi/2`.
    pub fn parse(text: &str) -> Result<GridSpec> {
        let no_coords: [&str; 0] = [];
        let mut axes = Vec::new();
        let mut offset = 0;
        for part in text.split(',') {
            let fields: Vec<&str> = part.split(':').collect();
            if fields.len() != 3 {
                return Err(Error::InvalidArgument(format!(
                    "grid axis `{}` must have the form min:max:count",
                    part.trim()
                )));
            }
            let endpoint = |s: &str, shift: usize| -> Result<f64> {
                let e = expr::parse(s, &no_coords).map_err(|e| e.shifted(offset + shift))?;
                Ok(e.eval(&[])?)
            };
            let min = endpoint(fields[0], 0)?;
            let max = endpoint(fields[1], fields[0].len() + 1)?;
            let count: usize = fields[2].trim().parse().map_err(|_| {
                Error::InvalidArgument(format!("grid count `{}` is not a non-negative integer", fields[2].trim()))
            })?;
            if count > 1 && !(max >= min) {
                return Err(Error::InvalidArgument(format!("grid axis `{}` has max < min", part.trim())));
            }
            axes.push(Axis { min, max, count });
            offset += part.len() + 1;
        }
        Ok(GridSpec { axes })
    }

    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            return 0;
        }
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All points in lexicographic order, first coordinate slowest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let values: Vec<Vec<f64>> = self
            .axes
            .iter()
            .map(|a| match a.count {
                0 => Vec::new(),
                1 => vec![a.min],
                n => (0..n)
                    .map(|k| a.min + (a.max - a.min) * k as f64 / (n - 1) as f64)
                    .collect(),
            })
            .collect();
        let mut out: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in &values {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        if self.is_empty() {
            Vec::new()
        } else {
            out
        }
    }
}

/// Grid points, checked against the chart dimension and the domain with the
/// required margin.
pub fn grid_points(chart: &Chart, grid: &GridSpec, margin: f64) -> Result<Vec<Vec<f64>>> {
    if grid.axes.len() != chart.dim() {
        return Err(Error::InvalidArgument(format!(
            "grid has {} axes, chart `{}` has {} coordinates",
            grid.axes.len(),
            chart.name(),
            chart.dim()
        )));
    }
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for p in &points {
        if let Some(condition) = chart.domain().margin_violation(p, margin) {
            return Err(Error::OutOfDomain {
                point: p.clone(),
                condition: format!("{condition} (with margin {margin})"),
            });
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PredicateSummary {
    pub name: &'static str,
    pub holds_at: usize,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GridSummary {
    pub points: usize,
    pub predicates: Vec<PredicateSummary>,
    pub tau_range: [f64; 2],
    pub tau_star_range: [f64; 2],
}

impl GridSummary {
    pub fn from_reports(reports: &[ClassificationReport]) -> GridSummary {
        let mut predicates = Vec::new();
        for name in PREDICATE_NAMES {
            let present: Vec<Predicate> = reports.iter().filter_map(|r| r.predicate(name)).collect();
            if present.is_empty() {
                continue;
            }
            predicates.push(PredicateSummary {
                name,
                holds_at: present.iter().filter(|p| p.holds).count(),
                max_residual: present.iter().map(|p| p.residual).fold(0.0, f64::max),
            });
        }
        let range = |f: fn(&ClassificationReport) -> f64| {
            reports.iter().map(f).fold([f64::INFINITY, f64::NEG_INFINITY], |[lo, hi], x| {
                [lo.min(x), hi.max(x)]
            })
        };
        GridSummary {
            points: reports.len(),
            predicates,
            tau_range: range(|r| r.tau),
            tau_star_range: range(|r| r.tau_star),
        }
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateSummary> {
        self.predicates.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub chart: String,
    pub reports: Vec<ClassificationReport>,
    pub summary: GridSummary,
}

/// Classify every grid point in parallel; the output keeps grid order.
pub fn classify_grid(chart: &Chart, grid: &GridSpec, tol: f64, margin: f64) -> Result<GridReport> {
    let points = grid_points(chart, grid, margin)?;
    let reports = points
        .par_iter()
        .map(|p| classify_point(chart, p, tol))
        .collect::<Result<Vec<_>>>()?;
    let summary = GridSummary::from_reports(&reports);
    Ok(GridReport {
        chart: chart.name().to_string(),
        reports,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditCheck {
    pub name: &'static str,
    pub statement: &'static str,
    pub applicable_points: usize,
    pub counterexamples: usize,
    pub worst_residual: f64,
    pub worst_point: Vec<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub chart: String,
    pub points: usize,
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AuditCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tally {
    name: &'static str,
    statement: &'static str,
    applicable: usize,
    failures: usize,
    worst: f64,
    worst_point: Vec<f64>,
}

impl Tally {
    fn new(name: &'static str, statement: &'static str) -> Tally {
        Tally {
            name,
            statement,
            applicable: 0,
            failures: 0,
            worst: 0.0,
            worst_point: Vec::new(),
        }
    }

    fn record(&mut self, point: &[f64], residual: f64, ok: bool) {
        self.applicable += 1;
        if !ok {
            self.failures += 1;
        }
        if residual > self.worst || self.worst_point.is_empty() {
            self.worst = self.worst.max(residual);
            self.worst_point = point.to_vec();
        }
    }

    fn finish(self) -> AuditCheck {
        AuditCheck {
            name: self.name,
            statement: self.statement,
            applicable_points: self.applicable,
            counterexamples: self.failures,
            worst_residual: self.worst,
            worst_point: self.worst_point,
            passed: self.failures == 0,
        }
    }
}

/// Audit the consequences of Bochner-flatness for real-dimension-4 data.
/// Every item must already be Bochner-flat; otherwise the audit refuses.
pub fn audit_curvature(
    name: &str,
    items: &[(CurvatureData, ClassificationReport)],
    tol: f64,
) -> Result<AuditReport> {
    if items.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if let Some((cd, r)) = items.iter().find(|(_, r)| !r.bochner_flat.holds) {
        return Err(Error::ContractViolation(format!(
            "audit needs Bochner-flat data, but ‖B(R)‖ = {:e} at {:?}",
            r.bochner_flat.residual, cd.point
        )));
    }
    if let Some((cd, _)) = items.iter().find(|(cd, _)| cd.dim() != 4) {
        return Err(Error::UnsupportedDimension {
            dim: cd.dim(),
            what: "the Bochner-flat surface audit",
        });
    }
    let mut self_dual = Tally::new("self-dual", "Bochner-flat implies the anti-self-dual Weyl part vanishes");
    let mut asd = Tally::new(
        "anti-self-dual-criterion",
        "anti-self-dual if and only if ρ* is symmetric and 3τ* − τ = 0",
    );
    let mut cf = Tally::new(
        "conformally-flat-criterion",
        "conformally flat if and only if ρ* is symmetric and 3τ* − τ = 0",
    );
    let mut gray = Tally::new("curvature-identity", "the J-twisted curvature identity holds");
    let mut ein = Tally::new(
        "einstein-hermitian-weyl",
        "Einstein implies u = v = −(τ* − τ)/8, w = 0 and h = 0",
    );
    let mut kah = Tally::new("kahler-ricci-star", "Kähler implies ρ* = ρ");
    let mut rec = Tally::new(
        "curvature-reconstruction",
        "R is determined by ρ, ρ*, τ, τ* through the Bochner-flat expansion",
    );
    let mut wop = Tally::new(
        "weyl-operator-structure",
        "the Weyl operator matrix equals its prediction from ρ*, τ, τ*",
    );
    let mut dens = Tally::new(
        "density-consistency",
        "general and specialized characteristic densities agree",
    );

    for (cd, r) in items {
        let p = &cd.point;
        let scale = r.scale;
        let small = |x: f64| x <= tol * scale;
        let sd = surface_data(cd, tol)?;
        let (wp, wm) = bochner::wpm_norms(&sd.blocks);
        self_dual.record(p, wm.sqrt(), small(wm.sqrt()));

        let s = 3.0 * cd.tau_star - cd.tau;
        let g_val = r.g_quantity;
        let criterion = small(g_val.sqrt()) && small(s.abs());
        let closed = (s * s / 96.0 + g_val / 8.0).sqrt();
        let asd_res = (wp.sqrt() - closed).abs();
        asd.record(p, asd_res, small(asd_res) && (small(wp.sqrt()) == criterion));

        let w_closed = bochner::weyl_closed_form(&cd.ricci_star, cd.tau, cd.tau_star, &cd.g, &cd.j)?;
        let cf_res = cd.norm(&sd.weyl.sub(&w_closed)?)?;
        cf.record(p, cf_res, small(cf_res) && (r.weyl_flat.holds == criterion));

        let gray_res = r.gray_identity.map_or(0.0, |g| g.residual);
        gray.record(p, gray_res, small(gray_res));

        if r.einstein.holds {
            let u = r.uvwh.expect("dimension 4");
            let target = -(cd.tau_star - cd.tau) / 8.0;
            let res = (u.u - target).abs().max((u.v - target).abs()).max(u.w.abs()).max(u.h.abs());
            ein.record(p, res, small(res));
        }
        if r.kahler.is_some_and(|k| k.holds) {
            let res = cd.norm(&cd.ricci_star.sub(&cd.ricci)?)?;
            kah.record(p, res, small(res));
        }
        let rebuilt = bochner::reconstruct_riemann(
            &cd.ricci,
            &cd.ricci_star,
            cd.tau,
            cd.tau_star,
            &cd.g,
            &cd.j,
            tol.max(1e-8),
        )?;
        let rec_res = cd.norm(&cd.riemann.sub(&rebuilt)?)?;
        rec.record(p, rec_res, small(rec_res));

        let predicted = bochner::weyl_operator_closed_form(&sd.rho_star_frame, cd.tau, cd.tau_star);
        let wop_res = sd.blocks.max_abs_diff(&predicted);
        wop.record(p, wop_res, small(wop_res));

        let d = r.densities.expect("dimension 4");
        let dens_res = d.max_form_gap().max((d.c1sq - d.p1 - 2.0 * d.chi).abs());
        dens.record(p, dens_res, dens_res <= tol.max(1e-7) * scale * scale);
    }
    Ok(AuditReport {
        chart: name.to_string(),
        points: items.len(),
        checks: [self_dual, asd, cf, gray, ein, kah, rec, wop, dens]
            .into_iter()
            .map(Tally::finish)
            .collect(),
    })
}

pub fn theorem_audit(chart: &Chart, grid: &GridSpec, tol: f64, margin: f64) -> Result<AuditReport> {
    let points = grid_points(chart, grid, margin)?;
    let items = points
        .par_iter()
        .map(|p| {
            let cd = geometry::curvature_data(chart, p)?;
            let structure = geometry::structure_residuals(chart, p)?;
            let report = classify_curvature(&cd, Some(structure), tol)?;
            Ok((cd, report))
        })
        .collect::<Result<Vec<_>>>()?;
    audit_curvature(chart.name(), &items, tol)
}
