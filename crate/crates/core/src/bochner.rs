//! Tensors of Bochner and Weyl type, the Λ² decomposition of the Weyl
//! operator in real dimension 4, and the pointwise quantities derived from
//! them.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CurvatureData, Frame};
use crate::linalg;
use crate::tensor::{self, j_conjugate, kulkarni, triangle, Tensor};

fn require_dim4(dim: usize, what: &'static str) -> Result<()> {
    if dim != 4 {
        return Err(Error::UnsupportedDimension { dim, what });
    }
    Ok(())
}

/// Bochner curvature tensor for complex dimension `n`, dispatching to the
/// surface formula for `n = 2` and the general one for `n >= 3`.
///
/// Both formulas contain `ρJ` and `ρ*J`, taken here as `a(J·, J·)`.
pub fn bochner_tensor(cd: &CurvatureData, n: usize) -> Result<Tensor> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("the Bochner tensor needs n >= 2, got {n}")));
    }
    if cd.n() != n {
        return Err(Error::InvalidArgument(format!(
            "curvature data has complex dimension {}, requested n = {n}",
            cd.n()
        )));
    }
    if n == 2 {
        bochner_surface(cd)
    } else {
        bochner_general(cd)
    }
}

/// The `n = 2` formula
/// `R + ½ g○∧ρ + (1/12){gΔρ* − g○∧ρ* − gΔ(ρ*J) + g○∧(ρ*J)}
///  + (3τ*−τ)/96 gΔg − (τ+τ*)/16 g○∧g`.
pub fn bochner_surface(cd: &CurvatureData) -> Result<Tensor> {
    if cd.dim() != 4 {
        return Err(Error::UnsupportedDimension {
            dim: cd.dim(),
            what: "the n = 2 Bochner formula",
        });
    }
    let (g, j) = (&cd.g, &cd.j);
    let rs = &cd.ricci_star;
    let rsj = j_conjugate(rs, j)?;
    let mut b = cd.riemann.axpy(0.5, &kulkarni(g, &cd.ricci)?)?;
    let braces = triangle(g, rs, j)?
        .sub(&kulkarni(g, rs)?)?
        .sub(&triangle(g, &rsj, j)?)?
        .add(&kulkarni(g, &rsj)?)?;
    b = b.axpy(1.0 / 12.0, &braces)?;
    b = b.axpy((3.0 * cd.tau_star - cd.tau) / 96.0, &triangle(g, g, j)?)?;
    b = b.axpy(-(cd.tau + cd.tau_star) / 16.0, &kulkarni(g, g)?)?;
    Ok(b)
}

/// The ten-term formula valid for `n >= 3`.
pub fn bochner_general(cd: &CurvatureData) -> Result<Tensor> {
    let n = cd.n();
    if n == 2 {
        return Err(Error::BranchMismatch { dim: cd.dim() });
    }
    if n < 2 {
        return Err(Error::UnsupportedDimension {
            dim: cd.dim(),
            what: "the Bochner tensor",
        });
    }
    let nf = n as f64;
    let (g, j) = (&cd.g, &cd.j);
    let (rho, rs) = (&cd.ricci, &cd.ricci_star);
    let rhoj = j_conjugate(rho, j)?;
    let rsj = j_conjugate(rs, j)?;
    let (tau, tau_s) = (cd.tau, cd.tau_star);
    let terms: [(f64, Tensor); 10] = [
        (-1.0 / (4.0 * (nf + 2.0) * (nf - 2.0)), triangle(g, rho, j)?),
        ((2.0 * nf - 3.0) / (4.0 * (nf - 1.0) * (nf - 2.0)), kulkarni(g, rho)?),
        (-1.0 / (4.0 * (nf + 2.0) * (nf - 2.0)), triangle(g, &rhoj, j)?),
        (1.0 / (4.0 * (nf - 1.0) * (nf - 2.0)), kulkarni(g, &rhoj)?),
        (
            (2.0 * nf * nf - 5.0) / (4.0 * (nf + 1.0) * (nf + 2.0) * (nf - 2.0)),
            triangle(g, rs, j)?,
        ),
        (-(2.0 * nf - 1.0) / (4.0 * (nf + 1.0) * (nf - 2.0)), kulkarni(g, rs)?),
        (3.0 / (4.0 * (nf + 1.0) * (nf + 2.0) * (nf - 2.0)), triangle(g, &rsj, j)?),
        (-3.0 / (4.0 * (nf + 1.0) * (nf - 2.0)), kulkarni(g, &rsj)?),
        (
            (3.0 * nf * tau - (2.0 * nf * nf - 3.0 * nf + 4.0) * tau_s)
                / (16.0 * (nf + 1.0) * (nf + 2.0) * (nf - 1.0) * (nf - 2.0)),
            triangle(g, g, j)?,
        ),
        (-(tau - tau_s) / (8.0 * (nf - 1.0) * (nf - 2.0)), kulkarni(g, g)?),
    ];
    let mut b = cd.riemann.clone();
    for (c, t) in &terms {
        b = b.axpy(*c, t)?;
    }
    Ok(b)
}

/// `W = R + 1/(2n−2) g○∧ρ − τ/(2(2n−1)(2n−2)) g○∧g` (real dimension `2n`).
pub fn weyl_tensor(cd: &CurvatureData) -> Result<Tensor> {
    let m = cd.dim() as f64;
    if cd.dim() < 4 {
        return Err(Error::UnsupportedDimension {
            dim: cd.dim(),
            what: "the Weyl tensor",
        });
    }
    let g = &cd.g;
    Ok(cd
        .riemann
        .axpy(1.0 / (m - 2.0), &kulkarni(g, &cd.ricci)?)?
        .axpy(-cd.tau / (2.0 * (m - 1.0) * (m - 2.0)), &kulkarni(g, g)?)?)
}

/// Largest g-trace of a (0,4) tensor over its first and last slots.
pub fn trace_defect(t: &Tensor, g_inv: &Tensor) -> Result<f64> {
    Ok(tensor::contract(t, 0, 3, Some(g_inv))?.max_abs())
}

/// The pieces of the dimension-4 curvature expansions that are built from
/// `g`, `J`, `ρ*` only.
struct SurfacePieces {
    /// `g(X,W)g(Y,Z) − g(X,Z)g(Y,W)`
    gg: Tensor,
    /// the `1/12` brace of `ρ*`-antisymmetry terms, without the prefactor
    star: Tensor,
    /// the `(3τ*−τ)/48` brace, without the prefactor
    hol: Tensor,
}

fn surface_pieces(rho_star: &Tensor, g: &Tensor, j: &Tensor) -> Result<SurfacePieces> {
    let d = g.dim();
    require_dim4(d, "the dimension-4 curvature expansions")?;
    let gj = tensor::bar(g, j)?;
    // a(x, y) = ρ*(x, Jy) − ρ*(Jy, x)
    let p = tensor::bar(rho_star, j)?;
    let a = Tensor::from_fn(d, &[tensor::Variance::Covariant; 2], |i| {
        let q: f64 = (0..d).map(|m| j.get2(m, i[1]) * rho_star.get2(m, i[0])).sum();
        p.get2(i[0], i[1]) - q
    });
    let cov = [tensor::Variance::Covariant; 4];
    let gg = Tensor::from_fn(d, &cov, |i| {
        let (x, y, z, w) = (i[0], i[1], i[2], i[3]);
        g.get2(x, w) * g.get2(y, z) - g.get2(x, z) * g.get2(y, w)
    });
    let star = Tensor::from_fn(d, &cov, |i| {
        let (x, y, z, w) = (i[0], i[1], i[2], i[3]);
        2.0 * gj.get2(x, y) * a.get2(w, z)
            + 2.0 * gj.get2(z, w) * a.get2(y, x)
            + gj.get2(x, z) * a.get2(w, y)
            + gj.get2(y, w) * a.get2(z, x)
            + gj.get2(x, w) * a.get2(y, z)
            + gj.get2(y, z) * a.get2(x, w)
    });
    let hol = Tensor::from_fn(d, &cov, |i| {
        let (x, y, z, w) = (i[0], i[1], i[2], i[3]);
        g.get2(x, w) * g.get2(y, z) - g.get2(x, z) * g.get2(y, w)
            - 2.0 * gj.get2(x, y) * gj.get2(z, w)
            - gj.get2(x, z) * gj.get2(y, w)
            + gj.get2(y, z) * gj.get2(x, w)
    });
    Ok(SurfacePieces { gg, star, hol })
}

/// Weyl tensor of a Bochner-flat surface expressed through `ρ*`, `τ`, `τ*`.
pub fn weyl_closed_form(rho_star: &Tensor, tau: f64, tau_star: f64, g: &Tensor, j: &Tensor) -> Result<Tensor> {
    let p = surface_pieces(rho_star, g, j)?;
    Ok(p.gg
        .scaled((tau - 3.0 * tau_star) / 24.0)
        .axpy(1.0 / 12.0, &p.star)?
        .axpy((3.0 * tau_star - tau) / 48.0, &p.hol)?)
}

/// Curvature tensor of a Bochner-flat surface rebuilt from its Ricci data.
/// The inputs are checked for the symmetries they must have: `ρ` symmetric,
/// `ρ*(X,Y) = ρ*(JY,JX)`, and `τ`, `τ*` equal to the traces.
pub fn reconstruct_riemann(
    rho: &Tensor,
    rho_star: &Tensor,
    tau: f64,
    tau_star: f64,
    g: &Tensor,
    j: &Tensor,
    tol: f64,
) -> Result<Tensor> {
    let d = g.dim();
    require_dim4(d, "curvature reconstruction")?;
    let g_inv = linalg::invert_metric(g).ok_or(Error::SingularMetric { point: Vec::new() })?;
    let scale = rho.max_abs().max(rho_star.max_abs()).max(1.0);
    let asym = rho.max_abs_diff(&rho.transpose())?;
    if asym > tol * scale {
        return Err(Error::ContractViolation(format!("ρ is not symmetric (defect {asym:e})")));
    }
    let jt = j_conjugate(rho_star, j)?.transpose();
    let defect = rho_star.max_abs_diff(&jt)?;
    if defect > tol * scale {
        return Err(Error::ContractViolation(format!(
            "ρ*(X,Y) != ρ*(JY,JX) (defect {defect:e})"
        )));
    }
    let trace = |a: &Tensor| -> f64 {
        (0..d).map(|x| (0..d).map(|y| g_inv.get2(x, y) * a.get2(x, y)).sum::<f64>()).sum()
    };
    for (name, given, actual) in [("τ", tau, trace(rho)), ("τ*", tau_star, trace(rho_star))] {
        if (given - actual).abs() > tol * scale.max(given.abs()) {
            return Err(Error::ContractViolation(format!(
                "{name} = {given} does not match the trace {actual}"
            )));
        }
    }
    let p = surface_pieces(rho_star, g, j)?;
    let cov = [tensor::Variance::Covariant; 4];
    let ricci_part = Tensor::from_fn(d, &cov, |i| {
        let (x, y, z, w) = (i[0], i[1], i[2], i[3]);
        0.5 * (g.get2(x, w) * rho.get2(y, z) + g.get2(y, z) * rho.get2(x, w)
            - g.get2(x, z) * rho.get2(y, w)
            - g.get2(y, w) * rho.get2(x, z))
    });
    Ok(ricci_part
        .axpy(1.0 / 12.0, &p.star)?
        .axpy((3.0 * tau_star - tau) / 48.0, &p.hol)?
        .axpy(-(tau + tau_star) / 8.0, &p.gg)?)
}

pub const LAMBDA2_NAMES: [&str; 6] = ["Omega0", "Phi", "JPhi", "Psi1", "Psi2", "Psi3"];

/// The orthonormal basis `Ω₀, Φ, JΦ` of Λ²₊ and `Ψ₁, Ψ₂, Ψ₃` of Λ²₋ in an
/// adapted frame, as antisymmetric frame-component matrices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lambda2Basis {
    pub forms: [[[f64; 4]; 4]; 6],
    #[serde(skip)]
    frame: Frame,
}

fn wedge_sum(terms: &[(usize, usize, f64)]) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for &(i, k, c) in terms {
        m[i][k] += c / SQRT_2;
        m[k][i] -= c / SQRT_2;
    }
    m
}

impl Lambda2Basis {
    /// Requires an adapted orthonormal frame (`e₂ = Je₁`, `e₄ = Je₃`).
    pub fn new(frame: &Frame, g: &Tensor, j: &Tensor) -> Result<Lambda2Basis> {
        require_dim4(frame.dim(), "the Λ² basis")?;
        let defect = frame.defect(g, j);
        if defect > 1e-8 {
            return Err(Error::FrameBreakdown(format!(
                "frame is not orthonormal and J-adapted (defect {defect:e})"
            )));
        }
        let forms = [
            wedge_sum(&[(0, 1, 1.0), (2, 3, 1.0)]),
            wedge_sum(&[(0, 2, 1.0), (1, 3, -1.0)]),
            wedge_sum(&[(0, 3, 1.0), (1, 2, 1.0)]),
            wedge_sum(&[(0, 1, 1.0), (2, 3, -1.0)]),
            wedge_sum(&[(0, 2, 1.0), (1, 3, 1.0)]),
            wedge_sum(&[(0, 3, 1.0), (1, 2, -1.0)]),
        ];
        Ok(Lambda2Basis {
            forms,
            frame: frame.clone(),
        })
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    /// `⟨α, β⟩ = ½ Σ α_ij β_ij` in the orthonormal frame.
    pub fn inner(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]) -> f64 {
        let mut acc = 0.0;
        for i in 0..4 {
            for k in 0..4 {
                acc += a[i][k] * b[i][k];
            }
        }
        0.5 * acc
    }
}

/// Matrix of the Weyl operator in the Λ² basis, rows and columns ordered
/// `Ω₀, Φ, JΦ, Ψ₁, Ψ₂, Ψ₃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WeylBlocks {
    pub matrix: [[f64; 6]; 6],
}

impl WeylBlocks {
    fn block(&self, r: usize, c: usize) -> [[f64; 3]; 3] {
        let mut b = [[0.0; 3]; 3];
        for (i, row) in b.iter_mut().enumerate() {
            for (k, x) in row.iter_mut().enumerate() {
                *x = self.matrix[r + i][c + k];
            }
        }
        b
    }

    pub fn w_plus(&self) -> [[f64; 3]; 3] {
        self.block(0, 0)
    }

    pub fn w_minus(&self) -> [[f64; 3]; 3] {
        self.block(3, 3)
    }

    pub fn off_diagonal(&self) -> [[f64; 3]; 3] {
        self.block(0, 3)
    }

    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..6 {
            for b in 0..6 {
                worst = worst.max((self.matrix[a][b] - self.matrix[b][a]).abs());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &[[f64; 6]; 6]) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..6 {
            for b in 0..6 {
                worst = worst.max((self.matrix[a][b] - other[a][b]).abs());
            }
        }
        worst
    }
}

/// `M_ab = ⟨𝒲(β_a), β_b⟩` where the curvature-operator convention gives
/// `𝒲(α)_kl = −½ Σ α_ij W_ijkl`. The input must be trace-free to `tol`
/// relative to its size.
pub fn weyl_operator(w: &Tensor, g_inv: &Tensor, basis: &Lambda2Basis, tol: f64) -> Result<WeylBlocks> {
    require_dim4(w.dim(), "the Weyl operator")?;
    let defect = trace_defect(w, g_inv)?;
    if defect > tol * w.max_abs().max(1.0) {
        return Err(Error::ContractViolation(format!(
            "Weyl operator input is not trace-free (defect {defect:e})"
        )));
    }
    let wf = basis.frame().pull_back(w)?;
    let mut matrix = [[0.0; 6]; 6];
    for (a, ba) in basis.forms.iter().enumerate() {
        for (b, bb) in basis.forms.iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..4 {
                for k in 0..4 {
                    if ba[i][k] == 0.0 {
                        continue;
                    }
                    for l in 0..4 {
                        for m in 0..4 {
                            acc += ba[i][k] * wf.get4(i, k, l, m) * bb[l][m];
                        }
                    }
                }
            }
            matrix[a][b] = -0.25 * acc;
        }
    }
    Ok(WeylBlocks { matrix })
}

/// The Weyl operator of a Bochner-flat surface predicted from `ρ*` in the
/// adapted frame and `s = 3τ* − τ`.
pub fn weyl_operator_closed_form(rho_star_frame: &Tensor, tau: f64, tau_star: f64) -> [[f64; 6]; 6] {
    let s = 3.0 * tau_star - tau;
    let a = rho_star_frame.get2(0, 3) - rho_star_frame.get2(3, 0);
    let b = rho_star_frame.get2(0, 2) - rho_star_frame.get2(2, 0);
    let mut m = [[0.0; 6]; 6];
    m[0][0] = s / 12.0;
    m[1][1] = -s / 24.0;
    m[2][2] = -s / 24.0;
    m[0][1] = -a / 2.0;
    m[1][0] = -a / 2.0;
    m[0][2] = b / 2.0;
    m[2][0] = b / 2.0;
    m
}

/// `(‖𝒲₊‖², ‖𝒲₋‖²)` as sums of squared block entries.
pub fn wpm_norms(blocks: &WeylBlocks) -> (f64, f64) {
    let sq = |b: [[f64; 3]; 3]| b.iter().flatten().map(|x| x * x).sum::<f64>();
    (sq(blocks.w_plus()), sq(blocks.w_minus()))
}

/// `(‖𝒲₊‖², ‖𝒲₋‖²)` predicted for a Bochner-flat surface.
pub fn wpm_closed_form(rho_star_frame: &Tensor, tau: f64, tau_star: f64) -> (f64, f64) {
    let s = 3.0 * tau_star - tau;
    let a = rho_star_frame.get2(0, 3) - rho_star_frame.get2(3, 0);
    let b = rho_star_frame.get2(0, 2) - rho_star_frame.get2(2, 0);
    (s * s / 96.0 + 0.5 * (a * a + b * b), 0.0)
}

/// `G = Σ (ρ*_ij − ρ*_ji)²` of frame components. In dimension 4 it is
/// cross-checked against `4{(ρ*₁₃−ρ*₃₁)² + (ρ*₁₄−ρ*₄₁)²}`.
pub fn g_quantity(rho_star_frame: &Tensor) -> Result<f64> {
    let d = rho_star_frame.dim();
    let mut full = 0.0;
    for i in 0..d {
        for k in 0..d {
            full += (rho_star_frame.get2(i, k) - rho_star_frame.get2(k, i)).powi(2);
        }
    }
    if d == 4 {
        let b = rho_star_frame.get2(0, 2) - rho_star_frame.get2(2, 0);
        let a = rho_star_frame.get2(0, 3) - rho_star_frame.get2(3, 0);
        let short = 4.0 * (a * a + b * b);
        if (full - short).abs() > 1e-10 * full.max(1.0) {
            return Err(Error::ContractViolation(format!(
                "G cross-check failed: full sum {full} vs adapted-frame form {short}"
            )));
        }
    }
    Ok(full)
}

/// Pointwise characteristic densities in the general form and in the form
/// specialized to Bochner-flat surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Densities {
    pub p1: f64,
    pub chi: f64,
    pub c1sq: f64,
    pub p1_bochner_flat: f64,
    pub chi_bochner_flat: f64,
    pub c1sq_bochner_flat: f64,
}

impl Densities {
    pub fn max_form_gap(&self) -> f64 {
        (self.p1 - self.p1_bochner_flat)
            .abs()
            .max((self.chi - self.chi_bochner_flat).abs())
            .max((self.c1sq - self.c1sq_bochner_flat).abs())
    }
}

/// Squared norm of the traceless Ricci tensor `ρ − (τ/2n) g`.
pub fn traceless_ricci_norm_sq(cd: &CurvatureData) -> Result<f64> {
    let rho0 = cd.ricci.axpy(-cd.tau / cd.dim() as f64, &cd.g)?;
    Ok(tensor::norm_sq(&rho0, &cd.g, &cd.g_inv)?)
}

pub fn characteristic_integrands(cd: &CurvatureData, blocks: &WeylBlocks, g_value: f64) -> Result<Densities> {
    require_dim4(cd.dim(), "characteristic densities")?;
    let (wp, wm) = wpm_norms(blocks);
    let r_sq = tensor::norm_sq(&cd.riemann, &cd.g, &cd.g_inv)?;
    let rho_sq = tensor::norm_sq(&cd.ricci, &cd.g, &cd.g_inv)?;
    let rho0_sq = traceless_ricci_norm_sq(cd)?;
    let tau = cd.tau;
    let s = 3.0 * cd.tau_star - tau;
    let k = 1.0 / (32.0 * PI * PI);
    let p1 = (wp - wm) / (4.0 * PI * PI);
    let chi = k * (r_sq - 4.0 * rho_sq + tau * tau);
    Ok(Densities {
        p1,
        chi,
        c1sq: p1 + 2.0 * chi,
        p1_bochner_flat: k * (s * s / 12.0 + g_value),
        chi_bochner_flat: k * (s * s / 24.0 - 2.0 * rho0_sq + tau * tau / 6.0 + g_value / 2.0),
        c1sq_bochner_flat: k * (s * s / 6.0 - 4.0 * rho0_sq + tau * tau / 3.0 + 2.0 * g_value),
    })
}

/// Frame curvature components used for Einstein Bochner-flat surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uvwh {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub h: f64,
}

pub fn uvwh(cd: &CurvatureData) -> Result<Uvwh> {
    require_dim4(cd.dim(), "u, v, w, h")?;
    let rf = cd.frame()?.pull_back(&cd.riemann)?;
    let u = -rf.get4(0, 2, 0, 2) + rf.get4(0, 2, 1, 3);
    let v = -rf.get4(0, 3, 0, 3) - rf.get4(0, 3, 1, 2);
    let w = -rf.get4(0, 2, 0, 3) - rf.get4(0, 2, 1, 2);
    Ok(Uvwh {
        u,
        v,
        w,
        h: (u - v).powi(2) - 4.0 * w * w,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormDecomposition {
    /// `‖R‖²`
    pub lhs: f64,
    /// `(3τ*−τ)²/24 + 2‖ρ−(τ/4)g‖² + τ²/6 + G/2`
    pub rhs: f64,
    pub residual: f64,
}

/// Both sides of the `‖R‖²` decomposition for a Bochner-flat surface.
/// Refuses data whose Bochner tensor exceeds `tol` relative to `‖R‖`.
pub fn curvature_norm_decomposition(cd: &CurvatureData, g_value: f64, tol: f64) -> Result<NormDecomposition> {
    require_dim4(cd.dim(), "the curvature norm decomposition")?;
    let b = bochner_surface(cd)?;
    let b_norm = cd.norm(&b)?;
    let r_sq = tensor::norm_sq(&cd.riemann, &cd.g, &cd.g_inv)?;
    if b_norm > tol * r_sq.sqrt().max(1.0) {
        return Err(Error::ContractViolation(format!(
            "curvature norm decomposition needs Bochner-flat data, ‖B(R)‖ = {b_norm:e}"
        )));
    }
    let s = 3.0 * cd.tau_star - cd.tau;
    let rhs = s * s / 24.0 + 2.0 * traceless_ricci_norm_sq(cd)? + cd.tau * cd.tau / 6.0 + g_value / 2.0;
    Ok(NormDecomposition {
        lhs: r_sq,
        rhs,
        residual: (r_sq - rhs).abs(),
    })
}

/// Largest frame-component residual of
/// `R − R(J,J,·,·) − R(·,·,J,J) + R(J,J,J,J)
///  = R(·,J,·,J) + R(·,J,J,·) + R(J,·,J,·) + R(J,·,·,J)`.
pub fn gray_identity_residual(cd: &CurvatureData) -> Result<f64> {
    let frame = cd.frame()?;
    let rf = frame.pull_back(&cd.riemann)?;
    let jm = frame.j_matrix(&cd.g, &cd.j);
    let d = cd.dim();
    // J in the frame as a (1,1) tensor: Jf[b][a] is the b-component of J e_a.
    let jf = Tensor::from_fn(d, &[tensor::Variance::Contravariant, tensor::Variance::Covariant], |i| {
        jm[i[0]][i[1]]
    });
    let with = |slots: &[usize]| -> Result<Tensor> {
        let mut t = rf.clone();
        for &s in slots {
            t = tensor::j_in_slot(&t, s, &jf)?;
        }
        Ok(t)
    };
    let lhs = rf.sub(&with(&[0, 1])?)?.sub(&with(&[2, 3])?)?.add(&with(&[0, 1, 2, 3])?)?;
    let rhs = with(&[1, 3])?.add(&with(&[1, 2])?)?.add(&with(&[0, 2])?)?.add(&with(&[0, 3])?)?;
    Ok(lhs.max_abs_diff(&rhs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::adapted_frame;

    fn flat4() -> CurvatureData {
        CurvatureData::algebraic(
            Tensor::euclidean(4),
            Tensor::standard_complex_structure(4),
            Tensor::covariant(4, 4),
        )
        .unwrap()
    }

    #[test]
    fn flat_gives_exact_zeros() {
        let cd = flat4();
        assert_eq!(bochner_tensor(&cd, 2).unwrap().max_abs(), 0.0);
        assert_eq!(weyl_tensor(&cd).unwrap().max_abs(), 0.0);
        let basis = Lambda2Basis::new(&cd.frame().unwrap(), &cd.g, &cd.j).unwrap();
        let blocks = weyl_operator(&weyl_tensor(&cd).unwrap(), &cd.g_inv, &basis, 1e-8).unwrap();
        assert_eq!(wpm_norms(&blocks), (0.0, 0.0));
        let u = uvwh(&cd).unwrap();
        assert_eq!((u.u, u.v, u.w, u.h), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn branch_mismatch() {
        let cd = flat4();
        assert!(matches!(bochner_general(&cd), Err(Error::BranchMismatch { dim: 4 })));
        assert!(matches!(bochner_tensor(&cd, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(bochner_tensor(&cd, 3), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn lambda2_basis_is_orthonormal() {
        let g = Tensor::euclidean(4);
        let j = Tensor::standard_complex_structure(4);
        let basis = Lambda2Basis::new(&adapted_frame(&g, &j).unwrap(), &g, &j).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                let expect = if a == b { 1.0 } else { 0.0 };
                let got = Lambda2Basis::inner(&basis.forms[a], &basis.forms[b]);
                assert!((got - expect).abs() < 1e-15, "{a} {b} {got}");
            }
        }
        assert!((basis.forms[0][0][1] - 1.0 / SQRT_2).abs() < 1e-15);
        assert!((basis.forms[0][2][3] - 1.0 / SQRT_2).abs() < 1e-15);
        // Ω₀ = Ω/√2
        let omega = crate::geometry::kahler_form(&g, &j);
        for i in 0..4 {
            for k in 0..4 {
                assert!((basis.forms[0][i][k] - omega.get2(i, k) / SQRT_2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn g_quantity_synthetic() {
        let mut rs = Tensor::covariant(4, 2);
        rs.set(&[0, 2], 0.5);
        rs.set(&[2, 0], -0.5);
        // the antisymmetric part of ρ* is J-anti-invariant, which forces
        // ρ*24 − ρ*42 = −(ρ*13 − ρ*31)
        rs.set(&[1, 3], -0.5);
        rs.set(&[3, 1], 0.5);
        assert!((g_quantity(&rs).unwrap() - 4.0).abs() < 1e-15);
        rs.set(&[0, 1], 1.0);
        assert!(matches!(g_quantity(&rs), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn reconstruction_of_zero_is_zero() {
        let g = Tensor::euclidean(4);
        let j = Tensor::standard_complex_structure(4);
        let z = Tensor::covariant(4, 2);
        let r = reconstruct_riemann(&z, &z, 0.0, 0.0, &g, &j, 1e-10).unwrap();
        assert_eq!(r.max_abs(), 0.0);
        let mut bad = z.clone();
        bad.set(&[0, 1], 1.0);
        assert!(reconstruct_riemann(&bad, &z, 0.0, 0.0, &g, &j, 1e-10).is_err());
        assert!(reconstruct_riemann(&z, &z, 1.0, 0.0, &g, &j, 1e-10).is_err());
    }
}
