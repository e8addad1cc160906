//! Built-in models: the worked example charts, the flat chart, and algebraic
//! complex-space-form curvature tensors. Each entry lists the properties it
//! is expected to have as checks against a [`ClassificationReport`].

use serde::{Deserialize, Serialize};

use crate::classify::{ClassificationReport, GridSpec, NONZERO_GAP};
use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::geometry::{Chart, ChartSpec, CurvatureData};
use crate::tensor::{Tensor, Variance};

pub const NAMES: [&str; 7] = ["example1", "example2", "example3", "example4", "flat", "csf2", "csf3"];

const COORDS: [&str; 4] = ["x1", "x2", "x3", "x4"];

/// Parameters of the parametrized entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// Curvature `K > 0` of the product surface.
    pub k: f64,
    /// Function `u` of the conformal factor `1/(1+u)²`.
    pub u: String,
    /// Holomorphic sectional curvature of the complex space forms.
    pub c: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            k: 1.0,
            u: "x1".into(),
            c: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Chart(Chart),
    Algebraic(CurvatureData),
}

/// A machine-checkable expectation.
#[derive(Debug, Clone, PartialEq)]
pub enum Claim {
    /// The named predicate holds.
    Holds(&'static str),
    /// The named predicate fails clearly: its normalized residual exceeds
    /// [`NONZERO_GAP`].
    Fails(&'static str),
    /// A scalar of the report equals a (possibly point-dependent) value.
    Scalar {
        quantity: &'static str,
        value: Expr,
        tol: f64,
    },
    /// Ricci eigenvalues in decreasing order.
    RicciEigenvalues { values: Vec<f64>, tol: f64 },
    /// `τ* = 4H` for the sampled holomorphic sectional curvature `H`.
    TauStarIsFourH { tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimOutcome {
    pub claim: String,
    pub passed: bool,
    pub detail: String,
}

fn scalar(report: &ClassificationReport, quantity: &str) -> Option<f64> {
    Some(match quantity {
        "tau" => report.tau,
        "tauStar" => report.tau_star,
        "holSect" => report.hol_sect,
        "gQuantity" => report.g_quantity,
        "threeTauStarMinusTau" => report.three_tau_star_minus_tau,
        _ => return None,
    })
}

impl Claim {
    pub fn describe(&self) -> String {
        match self {
            Claim::Holds(p) => p.to_string(),
            Claim::Fails(p) => format!("not {p}"),
            Claim::Scalar { quantity, value, .. } => format!("{quantity} = {}", value.to_text(&COORDS)),
            Claim::RicciEigenvalues { values, .. } => format!("ricci eigenvalues = {values:?}"),
            Claim::TauStarIsFourH { .. } => "tauStar = 4 holSect".into(),
        }
    }

    pub fn check(&self, report: &ClassificationReport) -> ClaimOutcome {
        let (passed, detail) = match self {
            Claim::Holds(name) => match report.predicate(name) {
                Some(p) => (p.holds, format!("residual {:e}", p.residual)),
                None => (false, "predicate not available".into()),
            },
            Claim::Fails(name) => match report.normalized_residual(name) {
                Some(r) => (r > NONZERO_GAP, format!("normalized residual {r:e}")),
                None => (false, "predicate not available".into()),
            },
            Claim::Scalar { quantity, value, tol } => match (scalar(report, quantity), value.eval(&report.point)) {
                (Some(got), Ok(want)) => ((got - want).abs() <= *tol, format!("got {got}, expected {want}")),
                (None, _) => (false, format!("unknown quantity {quantity}")),
                (_, Err(e)) => (false, e.to_string()),
            },
            Claim::RicciEigenvalues { values, tol } => {
                let got = &report.ricci_eigenvalues;
                let ok = got.len() == values.len() && got.iter().zip(values).all(|(a, b)| (a - b).abs() <= *tol);
                (ok, format!("got {got:?}"))
            }
            Claim::TauStarIsFourH { tol } => {
                let gap = (report.tau_star - 4.0 * report.hol_sect).abs();
                (gap <= *tol, format!("|τ* − 4H| = {gap:e}"))
            }
        };
        ClaimOutcome {
            claim: self.describe(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub title: String,
    pub source: String,
    pub model: Model,
    pub claims: Vec<Claim>,
    pub grid: Option<GridSpec>,
    pub sample_point: Vec<f64>,
}

impl CatalogEntry {
    pub fn chart(&self) -> Option<&Chart> {
        match &self.model {
            Model::Chart(c) => Some(c),
            Model::Algebraic(_) => None,
        }
    }

    pub fn check_claims(&self, report: &ClassificationReport) -> Vec<ClaimOutcome> {
        self.claims.iter().map(|c| c.check(report)).collect()
    }
}

pub fn entry(name: &str, params: &Params) -> Result<CatalogEntry> {
    match name {
        "example1" => example1(),
        "example2" => example2(params.k),
        "example3" => example3(),
        "example4" => example4(&params.u),
        "flat" => flat(),
        "csf2" => csf_entry(2, params.c),
        "csf3" => csf_entry(3, params.c),
        _ => Err(Error::InvalidArgument(format!(
            "unknown catalog entry `{name}` (known: {})",
            NAMES.join(", ")
        ))),
    }
}

pub fn all(params: &Params) -> Result<Vec<CatalogEntry>> {
    NAMES.iter().map(|n| entry(n, params)).collect()
}

fn konst(x: f64) -> Expr {
    Expr::constant(x)
}

fn chart_from_text(name: &str, domain: &str, metric: Vec<Vec<String>>, j: Vec<Vec<String>>) -> Result<Chart> {
    let spec = ChartSpec::from_text(name, &COORDS, domain, &metric, &j)?;
    Chart::new(spec)
}

fn diagonal(entries: [&str; 4]) -> Vec<Vec<String>> {
    (0..4)
        .map(|i| (0..4).map(|k| if i == k { entries[i].to_string() } else { "0".into() }).collect())
        .collect()
}

/// Standard complex structure `J∂1 = ∂2, J∂3 = ∂4` as text.
fn standard_j() -> Vec<Vec<String>> {
    let j = Tensor::standard_complex_structure(4);
    j.rows()
        .iter()
        .map(|r| r.iter().map(|x| format!("{x}")).collect())
        .collect()
}

fn grid(text: &str) -> GridSpec {
    GridSpec::parse(text).expect("built-in grid")
}

/// Hyperbolic space on `x4 > 0` with frame `e_i = x4 ∂_i` and `J e1 = e2`,
/// `J e3 = e4`.
pub fn example1() -> Result<CatalogEntry> {
    let chart = chart_from_text("example1", "x4 > 0", diagonal(["1/x4^2"; 4]), standard_j())?;
    Ok(CatalogEntry {
        name: "example1".into(),
        title: "hyperbolic Hermitian surface".into(),
        source: "Example 1: R^4_+ with frame e_i = x4 d/dx_i, J e1 = e2, J e3 = e4".into(),
        model: Model::Chart(chart),
        claims: vec![
            Claim::Holds("hermitian"),
            Claim::Fails("kahler"),
            Claim::Holds("einstein"),
            Claim::Holds("bochnerFlat"),
            Claim::Holds("weylFlat"),
            Claim::Holds("selfDual"),
            Claim::Holds("grayIdentity"),
            Claim::Holds("constHolSect"),
            Claim::Scalar { quantity: "holSect", value: konst(-1.0), tol: 1e-8 },
            Claim::Scalar { quantity: "tau", value: konst(-12.0), tol: 1e-8 },
            Claim::Scalar { quantity: "tauStar", value: konst(-4.0), tol: 1e-8 },
        ],
        grid: Some(grid("-1:1:3,-1:1:3,-1:1:3,0.5:2:3")),
        sample_point: vec![0.0, 0.0, 0.0, 2.0],
    })
}

/// Product of a curvature-`K` and a curvature-`(−K)` surface in isothermal
/// coordinates, with the product complex structure.
pub fn example2(k: f64) -> Result<CatalogEntry> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidArgument(format!("example2 needs K > 0, got {k}")));
    }
    let first = format!("4/(1 + {k}*(x1^2 + x2^2))^2");
    let second = format!("4/(1 - {k}*(x3^2 + x4^2))^2");
    let chart = chart_from_text(
        "example2",
        &format!("1 - {k}*(x3^2 + x4^2) > 0"),
        diagonal([&first, &first, &second, &second]),
        standard_j(),
    )?;
    let a = 0.5 / k.sqrt();
    Ok(CatalogEntry {
        name: "example2".into(),
        title: format!("product of surfaces of curvature {k} and -{k}"),
        source: "Example 2: M1(K) x M2(-K) with the product complex structure".into(),
        model: Model::Chart(chart),
        claims: vec![
            Claim::Holds("kahler"),
            Claim::Holds("almostKahler"),
            Claim::Holds("hermitian"),
            Claim::Holds("bochnerFlat"),
            Claim::Fails("einstein"),
            Claim::Scalar { quantity: "tau", value: konst(0.0), tol: 1e-8 },
            Claim::RicciEigenvalues { values: vec![k, k, -k, -k], tol: 1e-8 },
        ],
        grid: Some(grid(&format!("-1:1:3,-1:1:3,{}:{a}:3,{}:{a}:3", -a, -a))),
        sample_point: vec![0.3, -0.2, 0.1, 0.2 * a],
    })
}

/// The complex structure of the third example in its moving frame, as
/// `Jdisp[i][j]` with `J e_i = Σ_j Jdisp[i][j] e_j`.
const EXAMPLE3_J: [[&str; 4]; 4] = [
    ["0", "cos(x4)", "sin(x4)", "0"],
    ["-cos(x4)", "0", "0", "-sin(x4)"],
    ["-sin(x4)", "0", "0", "cos(x4)"],
    ["0", "sin(x4)", "-cos(x4)", "0"],
];

/// Frame scale factors: `e_a = E_a ∂_a`.
const EXAMPLE3_FRAME: [&str; 4] = ["x1", "x1", "x1", "1"];

/// `J^a_b = E_a Jdisp[b][a] / E_b` for a diagonal frame.
fn frame_j_to_coordinates(frame: [&str; 4], jdisp: [[&str; 4]; 4]) -> Result<Vec<Vec<String>>> {
    let mut out = Vec::new();
    for a in 0..4 {
        let mut row = Vec::new();
        for b in 0..4 {
            let e = expr::parse(&format!("({})*({})/({})", frame[a], jdisp[b][a], frame[b]), &COORDS)?;
            row.push(e.simplify().to_text(&COORDS));
        }
        out.push(row);
    }
    Ok(out)
}

/// `H³(−1) × R` on `x1 > 0` with frame `e_i = x1 ∂_i (i ≤ 3)`, `e4 = ∂4`
/// and an `x4`-dependent almost Kähler structure.
pub fn example3() -> Result<CatalogEntry> {
    let metric: Vec<String> = EXAMPLE3_FRAME.iter().map(|e| format!("1/({e})^2")).collect();
    let metric = diagonal([&metric[0], &metric[1], &metric[2], &metric[3]]);
    let j = frame_j_to_coordinates(EXAMPLE3_FRAME, EXAMPLE3_J)?;
    let chart = chart_from_text("example3", "x1 > 0", metric, j)?;
    Ok(CatalogEntry {
        name: "example3".into(),
        title: "almost Kähler structure on H^3(-1) x R".into(),
        source: "Example 3: R^3_+ x R with frame x1 d/dx1, x1 d/dx2, x1 d/dx3, d/dx4 and the rotating J".into(),
        model: Model::Chart(chart),
        claims: vec![
            Claim::Holds("almostKahler"),
            Claim::Fails("kahler"),
            Claim::Fails("hermitian"),
            Claim::Holds("bochnerFlat"),
            Claim::Holds("weylFlat"),
            Claim::Holds("selfDual"),
            Claim::Holds("antiSelfDual"),
            Claim::Scalar { quantity: "tau", value: konst(-6.0), tol: 1e-8 },
            Claim::Scalar { quantity: "tauStar", value: konst(-2.0), tol: 1e-8 },
            Claim::RicciEigenvalues { values: vec![0.0, -2.0, -2.0, -2.0], tol: 1e-8 },
        ],
        grid: Some(grid("0.5:2:3,-1:1:3,-1:1:3,0:pi:3")),
        sample_point: vec![1.0, 0.0, 0.0, 0.0],
    })
}

/// Conformal change `g/(1+u)²` of the flat Hermitian structure.
///
/// `u` should be the real part of a holomorphic function of
/// `z1 = x1 + i x2`, `z2 = x3 + i x4`; this is not checked.
pub fn example4(u: &str) -> Result<CatalogEntry> {
    let u_expr = expr::parse(u, &COORDS)?.simplify();
    let u_text = u_expr.to_text(&COORDS);
    let factor = format!("1/(1 + ({u_text}))^2");
    let chart = chart_from_text(
        "example4",
        &format!("1 + ({u_text}) > 0"),
        diagonal([&factor, &factor, &factor, &factor]),
        standard_j(),
    )?;
    // H = −e^{−2σ} |dσ|²_g = −|du|²_g with σ = −log(1 + u)
    let grad_sq = (0..4).fold(Expr::constant(0.0), |acc, k| {
        let d = u_expr.differentiate(k);
        Expr::Add(Box::new(acc), Box::new(Expr::Mul(Box::new(d.clone()), Box::new(d))))
    });
    let hol = Expr::Neg(Box::new(grad_sq)).simplify();
    let affine = (0..4).all(|k| (0..4).all(|l| u_expr.differentiate(k).differentiate(l).simplify().is_zero()));
    let mut claims = vec![
        Claim::Holds("hermitian"),
        Claim::Holds("bochnerFlat"),
        Claim::Holds("weaklyStarEinstein"),
        Claim::Holds("constHolSect"),
        Claim::Holds("grayIdentity"),
        Claim::Scalar { quantity: "holSect", value: hol, tol: 1e-7 },
        Claim::TauStarIsFourH { tol: 1e-7 },
    ];
    if !affine {
        claims.push(Claim::Fails("einstein"));
    }
    Ok(CatalogEntry {
        name: "example4".into(),
        title: format!("conformally flat Hermitian surface with u = {u_text}"),
        source: "Example 4: the flat Hermitian surface rescaled by 1/(1+u)^2 with u = Re f, f holomorphic".into(),
        model: Model::Chart(chart),
        claims,
        grid: Some(grid("0.25:1.5:3,-0.5:0.5:3,-0.5:0.5:3,-0.5:0.5:3")),
        sample_point: vec![0.5, 0.1, -0.2, 0.3],
    })
}

pub fn flat() -> Result<CatalogEntry> {
    let chart = chart_from_text("flat", "true", diagonal(["1"; 4]), standard_j())?;
    let mut claims: Vec<Claim> = crate::classify::PREDICATE_NAMES.iter().map(|p| Claim::Holds(p)).collect();
    claims.push(Claim::Scalar { quantity: "tau", value: konst(0.0), tol: 0.0 });
    claims.push(Claim::Scalar { quantity: "tauStar", value: konst(0.0), tol: 0.0 });
    Ok(CatalogEntry {
        name: "flat".into(),
        title: "flat Kähler surface".into(),
        source: "R^4 with the Euclidean metric and the standard complex structure".into(),
        model: Model::Chart(chart),
        claims,
        grid: Some(grid("-1:1:3,-1:1:3,-1:1:3,-1:1:3")),
        sample_point: vec![0.0; 4],
    })
}

/// Algebraic curvature tensor of constant holomorphic sectional curvature
/// `c` on `(R^{2n}, δ, J)` with the standard `J`:
/// `R(X,Y,Z,W) = (c/4)[g(Y,Z)g(X,W) − g(X,Z)g(Y,W) + g(JY,Z)g(JX,W)
///  − g(JX,Z)g(JY,W) + 2 g(X,JY) g(JZ,W)]`.
pub fn csf_algebraic(n: usize, c: f64) -> Result<Tensor> {
    if !(n == 2 || n == 3) {
        return Err(Error::InvalidArgument(format!("complex space forms are provided for n = 2, 3, got {n}")));
    }
    Ok(csf_tensor(2 * n, c))
}

fn csf_tensor(d: usize, c: f64) -> Tensor {
    let j = Tensor::standard_complex_structure(d);
    let g = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    // g(J e_a, e_b) = J^b_a
    let gj = |a: usize, b: usize| j.get2(b, a);
    Tensor::from_fn(d, &[Variance::Covariant; 4], |i| {
        let (x, y, z, w) = (i[0], i[1], i[2], i[3]);
        0.25 * c
            * (g(y, z) * g(x, w) - g(x, z) * g(y, w) + gj(y, z) * gj(x, w) - gj(x, z) * gj(y, w)
                + 2.0 * gj(y, x) * gj(z, w))
    })
}

pub fn csf_data(n: usize, c: f64) -> Result<CurvatureData> {
    let d = 2 * n;
    CurvatureData::algebraic(
        Tensor::euclidean(d),
        Tensor::standard_complex_structure(d),
        csf_algebraic(n, c)?,
    )
}

fn csf_entry(n: usize, c: f64) -> Result<CatalogEntry> {
    let nf = n as f64;
    Ok(CatalogEntry {
        name: format!("csf{n}"),
        title: format!("complex space form, n = {n}, holomorphic sectional curvature {c}"),
        source: "algebraic curvature tensor of constant holomorphic sectional curvature".into(),
        model: Model::Algebraic(csf_data(n, c)?),
        claims: vec![
            Claim::Holds("bochnerFlat"),
            Claim::Holds("einstein"),
            Claim::Holds("weaklyStarEinstein"),
            Claim::Holds("constHolSect"),
            Claim::Scalar { quantity: "holSect", value: konst(c), tol: 1e-10 },
            Claim::Scalar { quantity: "tau", value: konst(nf * (nf + 1.0) * c), tol: 1e-10 },
        ],
        grid: None,
        sample_point: Vec::new(),
    })
}
