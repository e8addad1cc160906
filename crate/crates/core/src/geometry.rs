//! Riemannian and almost Hermitian geometry of a coordinate chart.
//!
//! Conventions: `R(X,Y)Z = [∇_X, ∇_Y]Z - ∇_[X,Y] Z` and
//! `R_ijkl = g(R(∂_i, ∂_j)∂_k, ∂_l)`, so the round sphere has
//! `R(X,Y,Y,X) > 0`. Derivative indices always come last in the stored
//! arrays, e.g. `dgamma[k][i][j][m] = ∂_m Γ^k_ij`, except for `∇R`, where
//! the differentiating direction is the first slot.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::expr::{self, Expr, ParseError};
use crate::linalg;
use crate::tensor::{self, Tensor, Variance};

use Variance::{Contravariant as Up, Covariant as Down};

/// Relative tolerance for the pointwise algebraic constraints of an almost
/// Hermitian structure (J² = -1, g(J·,J·) = g).
pub const STRUCTURE_TOL: f64 = 1e-9;

/// Symbolic description of a chart: coordinate names, domain, metric
/// components `g[i][j]` and complex structure components `J[i][j] = J^i_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartSpec {
    pub name: String,
    pub coords: Vec<String>,
    pub domain: Domain,
    pub metric: Vec<Vec<Expr>>,
    pub complex_structure: Vec<Vec<Expr>>,
}

impl ChartSpec {
    /// Build from expression strings. `metric` and `complex_structure` are
    /// full `dim x dim` tables.
    pub fn from_text<C: AsRef<str>, S: AsRef<str>>(
        name: &str,
        coords: &[C],
        domain: &str,
        metric: &[Vec<S>],
        complex_structure: &[Vec<S>],
    ) -> std::result::Result<ChartSpec, ParseError> {
        let table = |rows: &[Vec<S>]| -> std::result::Result<Vec<Vec<Expr>>, ParseError> {
            rows.iter()
                .map(|row| row.iter().map(|s| expr::parse(s.as_ref(), coords)).collect())
                .collect()
        };
        Ok(ChartSpec {
            name: name.to_string(),
            coords: coords.iter().map(|c| c.as_ref().to_string()).collect(),
            domain: Domain::parse(domain, coords)?,
            metric: table(metric)?,
            complex_structure: table(complex_structure)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// One derivative order of a matrix-valued symbolic field: the distinct
/// expressions and, for every dense index `(i, j, k1, .., ko)`, which of them
/// it equals.
#[derive(Debug, Clone)]
struct JetOrder {
    keys: Vec<(usize, usize, Vec<usize>)>,
    exprs: Vec<Expr>,
    table: Vec<usize>,
}

impl JetOrder {
    fn base(entries: &[Vec<Expr>], symmetric: bool) -> JetOrder {
        let dim = entries.len();
        let mut keys = Vec::new();
        let mut exprs = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                if symmetric && j < i {
                    continue;
                }
                keys.push((i, j, Vec::new()));
                exprs.push(entries[i][j].simplify());
            }
        }
        JetOrder::with_table(keys, exprs, dim, 0, symmetric)
    }

    fn next(&self, dim: usize, symmetric: bool) -> JetOrder {
        let mut keys = Vec::new();
        let mut exprs = Vec::new();
        for ((i, j, ks), e) in self.keys.iter().zip(&self.exprs) {
            let first = ks.last().copied().unwrap_or(0);
            for k in first..dim {
                let mut nk = ks.clone();
                nk.push(k);
                keys.push((*i, *j, nk));
                exprs.push(e.differentiate(k));
            }
        }
        let order = self.keys.first().map_or(0, |k| k.2.len()) + 1;
        JetOrder::with_table(keys, exprs, dim, order, symmetric)
    }

    fn with_table(
        keys: Vec<(usize, usize, Vec<usize>)>,
        exprs: Vec<Expr>,
        dim: usize,
        order: usize,
        symmetric: bool,
    ) -> JetOrder {
        let lookup: HashMap<&(usize, usize, Vec<usize>), usize> =
            keys.iter().enumerate().map(|(n, k)| (k, n)).collect();
        let rank = 2 + order;
        let total = dim.pow(rank as u32);
        let mut table = Vec::with_capacity(total);
        let mut idx = vec![0usize; rank];
        for _ in 0..total {
            let (mut i, mut j) = (idx[0], idx[1]);
            if symmetric && j < i {
                std::mem::swap(&mut i, &mut j);
            }
            let mut ks = idx[2..].to_vec();
            ks.sort_unstable();
            table.push(lookup[&(i, j, ks)]);
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < dim {
                    break;
                }
                *slot = 0;
            }
        }
        JetOrder { keys, exprs, table }
    }

    fn eval(&self, point: &[f64], dim: usize, variance: &[Variance]) -> Result<Tensor> {
        let values = self
            .exprs
            .iter()
            .map(|e| e.eval(point))
            .collect::<std::result::Result<Vec<f64>, _>>()?;
        let data = self.table.iter().map(|&n| values[n]).collect();
        Ok(Tensor::from_data(dim, variance, data)?)
    }
}

/// A chart compiled for evaluation: symbolic derivatives of the metric up to
/// second order (third order on first use) and of J to first order.
#[derive(Debug)]
pub struct Chart {
    spec: ChartSpec,
    metric_jet: Vec<JetOrder>,
    metric_third: OnceLock<JetOrder>,
    j_jet: Vec<JetOrder>,
}

impl Clone for Chart {
    fn clone(&self) -> Self {
        Chart {
            spec: self.spec.clone(),
            metric_jet: self.metric_jet.clone(),
            metric_third: self.metric_third.clone(),
            j_jet: self.j_jet.clone(),
        }
    }
}

/// Metric, inverse metric and complex structure at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointStructure {
    pub g: Tensor,
    pub g_inv: Tensor,
    pub j: Tensor,
}

impl Chart {
    pub fn new(spec: ChartSpec) -> Result<Chart> {
        let dim = spec.dim();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::InvalidChart(format!(
                "an almost complex structure needs an even positive dimension, got {dim}"
            )));
        }
        let square = |rows: &Vec<Vec<Expr>>| rows.len() == dim && rows.iter().all(|r| r.len() == dim);
        if !square(&spec.metric) || !square(&spec.complex_structure) {
            return Err(Error::InvalidChart(format!("component tables must be {dim} x {dim}")));
        }
        for i in 0..dim {
            for j in 0..i {
                if spec.metric[i][j].simplify() != spec.metric[j][i].simplify() {
                    return Err(Error::InvalidChart(format!(
                        "metric is not symmetric: g[{}][{}] differs from g[{}][{}]",
                        i + 1,
                        j + 1,
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        let g0 = JetOrder::base(&spec.metric, true);
        let g1 = g0.next(dim, true);
        let g2 = g1.next(dim, true);
        let j0 = JetOrder::base(&spec.complex_structure, false);
        let j1 = j0.next(dim, false);
        Ok(Chart {
            spec,
            metric_jet: vec![g0, g1, g2],
            metric_third: OnceLock::new(),
            j_jet: vec![j0, j1],
        })
    }

    pub fn spec(&self) -> &ChartSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Complex dimension.
    pub fn n(&self) -> usize {
        self.dim() / 2
    }

    pub fn coords(&self) -> &[String] {
        &self.spec.coords
    }

    pub fn domain(&self) -> &Domain {
        &self.spec.domain
    }

    /// Check the point's length and domain membership.
    pub fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "point has {} coordinates, chart `{}` has {}",
                point.len(),
                self.name(),
                self.dim()
            )));
        }
        if point.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("point {point:?} is not finite")));
        }
        if let Some(condition) = self.domain().violation(point) {
            return Err(Error::OutOfDomain {
                point: point.to_vec(),
                condition: condition.to_string(),
            });
        }
        Ok(())
    }

    /// Metric derivatives of the given order (0..=3), all slots covariant,
    /// derivative slots last.
    pub fn metric_derivatives(&self, point: &[f64], order: usize) -> Result<Tensor> {
        let dim = self.dim();
        let variance = vec![Down; 2 + order];
        match order {
            0..=2 => self.metric_jet[order].eval(point, dim, &variance),
            3 => self
                .metric_third
                .get_or_init(|| self.metric_jet[2].next(dim, true))
                .eval(point, dim, &variance),
            _ => Err(Error::InvalidArgument(format!(
                "metric derivatives are available up to order 3, requested {order}"
            ))),
        }
    }

    /// `J^i_j` (order 0) or `∂_k J^i_j` stored as `[i][j][k]` (order 1).
    pub fn complex_structure_derivatives(&self, point: &[f64], order: usize) -> Result<Tensor> {
        let dim = self.dim();
        match order {
            0 => self.j_jet[0].eval(point, dim, &[Up, Down]),
            1 => self.j_jet[1].eval(point, dim, &[Up, Down, Down]),
            _ => Err(Error::InvalidArgument(format!(
                "complex structure derivatives are available up to order 1, requested {order}"
            ))),
        }
    }

    /// Evaluate g, g⁻¹ and J at a domain point and verify the almost
    /// Hermitian conditions.
    pub fn structure_at(&self, point: &[f64]) -> Result<PointStructure> {
        self.check_point(point)?;
        let g = self.metric_derivatives(point, 0)?;
        let j = self.complex_structure_derivatives(point, 0)?;
        let g_inv = linalg::invert_metric(&g).ok_or_else(|| Error::SingularMetric {
            point: point.to_vec(),
        })?;
        if !linalg::is_positive_definite(&g) {
            return Err(Error::NotPositiveDefinite {
                point: point.to_vec(),
            });
        }
        check_almost_hermitian(&g, &j).map_err(|(what, residual)| Error::IncompatibleStructure {
            point: point.to_vec(),
            what,
            residual,
        })?;
        Ok(PointStructure { g, g_inv, j })
    }
}

/// Residual checks of `J² = -1` and `g(J·,J·) = g`, relative to the size of
/// the data.
pub fn check_almost_hermitian(g: &Tensor, j: &Tensor) -> std::result::Result<(), (&'static str, f64)> {
    let d = g.dim();
    let mut square = 0.0f64;
    let mut compat = 0.0f64;
    for a in 0..d {
        for b in 0..d {
            let jj: f64 = (0..d).map(|m| j.get2(a, m) * j.get2(m, b)).sum();
            let id = if a == b { 1.0 } else { 0.0 };
            square = square.max((jj + id).abs());
            let mut gjj = 0.0;
            for m in 0..d {
                for n in 0..d {
                    gjj += j.get2(m, a) * j.get2(n, b) * g.get2(m, n);
                }
            }
            compat = compat.max((gjj - g.get2(a, b)).abs());
        }
    }
    let jscale = j.max_abs().max(1.0);
    if square > STRUCTURE_TOL * jscale * jscale {
        return Err(("J^2 != -1", square));
    }
    if compat > STRUCTURE_TOL * g.max_abs().max(1.0) * jscale * jscale {
        return Err(("g(JX, JY) != g(X, Y)", compat));
    }
    Ok(())
}

/// Christoffel symbols `Γ^k_ij` and their first derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub gamma: Tensor,
    pub dgamma: Tensor,
}

/// Christoffel symbols with derivatives up to `order` (1 or 2), assembled
/// from the symbolic metric jet by the product rule with
/// `∂g⁻¹ = -g⁻¹ (∂g) g⁻¹`.
struct GammaJet {
    gamma: Tensor,
    dgamma: Tensor,
    ddgamma: Option<Tensor>,
}

fn gamma_jet(chart: &Chart, point: &[f64], ps: &PointStructure, second: bool) -> Result<GammaJet> {
    let d = chart.dim();
    let g_inv = &ps.g_inv;
    let dg = chart.metric_derivatives(point, 1)?;
    let ddg = chart.metric_derivatives(point, 2)?;

    let dginv = Tensor::from_fn(d, &[Up, Up, Down], |x| {
        let (k, l, m) = (x[0], x[1], x[2]);
        let mut acc = 0.0;
        for a in 0..d {
            for b in 0..d {
                acc -= g_inv.get2(k, a) * dg.get(&[a, b, m]) * g_inv.get2(b, l);
            }
        }
        acc
    });
    let g1 = Tensor::from_fn(d, &[Down; 3], |x| {
        let (l, i, j) = (x[0], x[1], x[2]);
        0.5 * (dg.get(&[j, l, i]) + dg.get(&[i, l, j]) - dg.get(&[i, j, l]))
    });
    let dg1 = Tensor::from_fn(d, &[Down; 4], |x| {
        let (l, i, j, m) = (x[0], x[1], x[2], x[3]);
        0.5 * (ddg.get(&[j, l, i, m]) + ddg.get(&[i, l, j, m]) - ddg.get(&[i, j, l, m]))
    });
    let gamma = Tensor::from_fn(d, &[Up, Down, Down], |x| {
        (0..d).map(|l| g_inv.get2(x[0], l) * g1.get(&[l, x[1], x[2]])).sum()
    });
    let dgamma = Tensor::from_fn(d, &[Up, Down, Down, Down], |x| {
        let (k, i, j, m) = (x[0], x[1], x[2], x[3]);
        (0..d)
            .map(|l| dginv.get(&[k, l, m]) * g1.get(&[l, i, j]) + g_inv.get2(k, l) * dg1.get(&[l, i, j, m]))
            .sum()
    });
    let ddgamma = if second {
        let dddg = chart.metric_derivatives(point, 3)?;
        let ddginv = Tensor::from_fn(d, &[Up, Up, Down, Down], |x| {
            let (k, l, m, n) = (x[0], x[1], x[2], x[3]);
            let mut acc = 0.0;
            for a in 0..d {
                for b in 0..d {
                    acc -= dginv.get(&[k, a, n]) * dg.get(&[a, b, m]) * g_inv.get2(b, l)
                        + g_inv.get2(k, a) * ddg.get(&[a, b, m, n]) * g_inv.get2(b, l)
                        + g_inv.get2(k, a) * dg.get(&[a, b, m]) * dginv.get(&[b, l, n]);
                }
            }
            acc
        });
        let ddg1 = Tensor::from_fn(d, &[Down; 5], |x| {
            let (l, i, j, m, n) = (x[0], x[1], x[2], x[3], x[4]);
            0.5 * (dddg.get(&[j, l, i, m, n]) + dddg.get(&[i, l, j, m, n]) - dddg.get(&[i, j, l, m, n]))
        });
        Some(Tensor::from_fn(d, &[Up, Down, Down, Down, Down], |x| {
            let (k, i, j, m, n) = (x[0], x[1], x[2], x[3], x[4]);
            (0..d)
                .map(|l| {
                    ddginv.get(&[k, l, m, n]) * g1.get(&[l, i, j])
                        + dginv.get(&[k, l, m]) * dg1.get(&[l, i, j, n])
                        + dginv.get(&[k, l, n]) * dg1.get(&[l, i, j, m])
                        + g_inv.get2(k, l) * ddg1.get(&[l, i, j, m, n])
                })
                .sum()
        }))
    } else {
        None
    };
    Ok(GammaJet { gamma, dgamma, ddgamma })
}

pub fn christoffel(chart: &Chart, point: &[f64]) -> Result<Connection> {
    let ps = chart.structure_at(point)?;
    let jet = gamma_jet(chart, point, &ps, false)?;
    Ok(Connection {
        gamma: jet.gamma,
        dgamma: jet.dgamma,
    })
}

/// `R^l_ijk` stored as `[l][i][j][k]`.
fn riemann_mixed(gamma: &Tensor, dgamma: &Tensor) -> Tensor {
    let d = gamma.dim();
    Tensor::from_fn(d, &[Up, Down, Down, Down], |x| {
        let (l, i, j, k) = (x[0], x[1], x[2], x[3]);
        let mut acc = dgamma.get(&[l, j, k, i]) - dgamma.get(&[l, i, k, j]);
        for m in 0..d {
            acc += gamma.get(&[l, i, m]) * gamma.get(&[m, j, k]) - gamma.get(&[l, j, m]) * gamma.get(&[m, i, k]);
        }
        acc
    })
}

fn lower_last(mixed: &Tensor, g: &Tensor) -> Tensor {
    let d = g.dim();
    Tensor::from_fn(d, &[Down; 4], |x| {
        (0..d).map(|m| g.get2(x[3], m) * mixed.get(&[m, x[0], x[1], x[2]])).sum()
    })
}

/// Fully covariant curvature tensor `R_ijkl`.
pub fn riemann(chart: &Chart, point: &[f64]) -> Result<Tensor> {
    Ok(curvature_data(chart, point)?.riemann)
}

/// Covariant derivative `(∇_m R)_ijkl` stored as `[m][i][j][k][l]`.
pub fn nabla_riemann(chart: &Chart, point: &[f64]) -> Result<Tensor> {
    let ps = chart.structure_at(point)?;
    let jet = gamma_jet(chart, point, &ps, true)?;
    let d = chart.dim();
    let (gamma, dgamma) = (&jet.gamma, &jet.dgamma);
    let ddgamma = jet.ddgamma.as_ref().expect("second derivatives requested");
    let dg = chart.metric_derivatives(point, 1)?;
    let mixed = riemann_mixed(gamma, dgamma);
    let r = lower_last(&mixed, &ps.g);
    // ∂_n R^l_ijk stored as [l][i][j][k][n]
    let dmixed = Tensor::from_fn(d, &[Up, Down, Down, Down, Down], |x| {
        let (l, i, j, k, n) = (x[0], x[1], x[2], x[3], x[4]);
        let mut acc = ddgamma.get(&[l, j, k, i, n]) - ddgamma.get(&[l, i, k, j, n]);
        for m in 0..d {
            acc += dgamma.get(&[l, i, m, n]) * gamma.get(&[m, j, k])
                + gamma.get(&[l, i, m]) * dgamma.get(&[m, j, k, n])
                - dgamma.get(&[l, j, m, n]) * gamma.get(&[m, i, k])
                - gamma.get(&[l, j, m]) * dgamma.get(&[m, i, k, n]);
        }
        acc
    });
    Ok(Tensor::from_fn(d, &[Down; 5], |x| {
        let (n, i, j, k, l) = (x[0], x[1], x[2], x[3], x[4]);
        let mut acc = 0.0;
        for m in 0..d {
            acc += dg.get(&[l, m, n]) * mixed.get(&[m, i, j, k]) + ps.g.get2(l, m) * dmixed.get(&[m, i, j, k, n]);
        }
        for p in 0..d {
            acc -= gamma.get(&[p, n, i]) * r.get4(p, j, k, l)
                + gamma.get(&[p, n, j]) * r.get4(i, p, k, l)
                + gamma.get(&[p, n, k]) * r.get4(i, j, p, l)
                + gamma.get(&[p, n, l]) * r.get4(i, j, k, p);
        }
        acc
    }))
}

/// Largest component of the cyclic sum
/// `∇_m R_ijkl + ∇_i R_jmkl + ∇_j R_mikl`.
pub fn second_bianchi_residual(nabla_r: &Tensor) -> f64 {
    let d = nabla_r.dim();
    let mut worst = 0.0f64;
    for m in 0..d {
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let s = nabla_r.get(&[m, i, j, k, l])
                            + nabla_r.get(&[i, j, m, k, l])
                            + nabla_r.get(&[j, m, i, k, l]);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
    }
    worst
}

/// Ricci tensor `ρ_jk = R^i_ijk` and Ricci-star tensor
/// `ρ*_jk = J^m_i J^n_k R^i_jmn`.
pub fn ricci_pair(g_inv: &Tensor, j: &Tensor, r: &Tensor) -> Result<(Tensor, Tensor)> {
    let d = r.dim();
    if g_inv.dim() != d || j.dim() != d {
        return Err(crate::tensor::TensorError::DimensionMismatch {
            left: d,
            right: g_inv.dim().min(j.dim()),
        }
        .into());
    }
    let ricci = Tensor::from_fn(d, &[Down, Down], |x| {
        let mut acc = 0.0;
        for i in 0..d {
            for l in 0..d {
                acc += g_inv.get2(i, l) * r.get4(i, x[0], x[1], l);
            }
        }
        acc
    });
    // R^i_jmn
    let up = Tensor::from_fn(d, &[Up, Down, Down, Down], |x| {
        (0..d).map(|l| g_inv.get2(x[0], l) * r.get4(x[1], x[2], x[3], l)).sum()
    });
    let ricci_star = Tensor::from_fn(d, &[Down, Down], |x| {
        let (jj, k) = (x[0], x[1]);
        let mut acc = 0.0;
        for i in 0..d {
            for m in 0..d {
                let jmi = j.get2(m, i);
                if jmi == 0.0 {
                    continue;
                }
                for n in 0..d {
                    acc += jmi * j.get2(n, k) * up.get4(i, jj, m, n);
                }
            }
        }
        acc
    });
    Ok((ricci, ricci_star))
}

/// Endomorphism `Q^a_b = g^{ac} a_bc` of a (0,2)-tensor.
pub fn endomorphism(a: &Tensor, g_inv: &Tensor) -> Tensor {
    let d = a.dim();
    Tensor::from_fn(d, &[Up, Down], |x| {
        (0..d).map(|c| g_inv.get2(x[0], c) * a.get2(x[1], c)).sum()
    })
}

/// Everything curvature-related at one point. Built either from a chart or
/// directly from an algebraic curvature tensor (then the connection fields
/// are zero and `point` is empty).
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureData {
    pub point: Vec<f64>,
    pub g: Tensor,
    pub g_inv: Tensor,
    pub j: Tensor,
    pub gamma: Tensor,
    pub dgamma: Tensor,
    pub riemann: Tensor,
    pub ricci: Tensor,
    pub ricci_star: Tensor,
    pub q: Tensor,
    pub q_star: Tensor,
    pub tau: f64,
    pub tau_star: f64,
}

impl CurvatureData {
    /// Curvature data for a given algebraic curvature tensor on
    /// `(R^{2n}, g, J)`.
    pub fn algebraic(g: Tensor, j: Tensor, riemann: Tensor) -> Result<CurvatureData> {
        let d = g.dim();
        if d == 0 || d % 2 != 0 {
            return Err(Error::InvalidArgument(format!("dimension must be even and positive, got {d}")));
        }
        if g.variance() != [Down, Down] || j.variance() != [Up, Down] || riemann.variance() != [Down; 4] {
            return Err(Error::InvalidArgument(
                "expected g of type (0,2), J of type (1,1) and R of type (0,4)".into(),
            ));
        }
        if j.dim() != d || riemann.dim() != d {
            return Err(crate::tensor::TensorError::DimensionMismatch {
                left: d,
                right: j.dim().min(riemann.dim()),
            }
            .into());
        }
        let g_inv = linalg::invert_metric(&g).ok_or(Error::SingularMetric { point: Vec::new() })?;
        if !linalg::is_positive_definite(&g) {
            return Err(Error::NotPositiveDefinite { point: Vec::new() });
        }
        check_almost_hermitian(&g, &j).map_err(|(what, residual)| Error::IncompatibleStructure {
            point: Vec::new(),
            what,
            residual,
        })?;
        let gamma = Tensor::zeros(d, &[Up, Down, Down]);
        let dgamma = Tensor::zeros(d, &[Up, Down, Down, Down]);
        Self::assemble(Vec::new(), g, g_inv, j, gamma, dgamma, riemann)
    }

    fn assemble(
        point: Vec<f64>,
        g: Tensor,
        g_inv: Tensor,
        j: Tensor,
        gamma: Tensor,
        dgamma: Tensor,
        riemann: Tensor,
    ) -> Result<CurvatureData> {
        let (ricci, ricci_star) = ricci_pair(&g_inv, &j, &riemann)?;
        let q = endomorphism(&ricci, &g_inv);
        let q_star = endomorphism(&ricci_star, &g_inv);
        let d = g.dim();
        let tau = (0..d).map(|a| q.get2(a, a)).sum();
        let tau_star = (0..d).map(|a| q_star.get2(a, a)).sum();
        Ok(CurvatureData {
            point,
            g,
            g_inv,
            j,
            gamma,
            dgamma,
            riemann,
            ricci,
            ricci_star,
            q,
            q_star,
            tau,
            tau_star,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn n(&self) -> usize {
        self.dim() / 2
    }

    pub fn frame(&self) -> Result<Frame> {
        adapted_frame(&self.g, &self.j)
    }

    /// g-norm of a covariant tensor at this point.
    pub fn norm(&self, t: &Tensor) -> Result<f64> {
        Ok(tensor::norm_sq(t, &self.g, &self.g_inv)?.max(0.0).sqrt())
    }
}

pub fn curvature_data(chart: &Chart, point: &[f64]) -> Result<CurvatureData> {
    let ps = chart.structure_at(point)?;
    let jet = gamma_jet(chart, point, &ps, false)?;
    let r = lower_last(&riemann_mixed(&jet.gamma, &jet.dgamma), &ps.g);
    CurvatureData::assemble(point.to_vec(), ps.g, ps.g_inv, ps.j, jet.gamma, jet.dgamma, r)
}

/// Kähler form `Ω(X, Y) = g(JX, Y)`.
pub fn kahler_form(g: &Tensor, j: &Tensor) -> Tensor {
    let d = g.dim();
    Tensor::from_fn(d, &[Down, Down], |x| {
        (0..d).map(|k| j.get2(k, x[0]) * g.get2(k, x[1])).sum()
    })
}

/// `g((∇_i J) ∂_j, ∂_k)` stored as `[i][j][k]`.
pub fn nabla_j(chart: &Chart, point: &[f64]) -> Result<Tensor> {
    let ps = chart.structure_at(point)?;
    let conn = gamma_jet(chart, point, &ps, false)?;
    let dj = chart.complex_structure_derivatives(point, 1)?;
    let d = chart.dim();
    let (j, gamma) = (&ps.j, &conn.gamma);
    // (∇_i J)^k_j
    let mixed = Tensor::from_fn(d, &[Down, Up, Down], |x| {
        let (i, k, jj) = (x[0], x[1], x[2]);
        let mut acc = dj.get(&[k, jj, i]);
        for m in 0..d {
            acc += gamma.get(&[k, i, m]) * j.get2(m, jj) - gamma.get(&[m, i, jj]) * j.get2(k, m);
        }
        acc
    });
    Ok(Tensor::from_fn(d, &[Down; 3], |x| {
        (0..d).map(|m| mixed.get(&[x[0], m, x[1]]) * ps.g.get2(m, x[2])).sum()
    }))
}

/// Nijenhuis tensor `N(∂_i, ∂_j)^c` stored as `[c][i][j]`.
pub fn nijenhuis(chart: &Chart, point: &[f64]) -> Result<Tensor> {
    chart.check_point(point)?;
    let j = chart.complex_structure_derivatives(point, 0)?;
    let dj = chart.complex_structure_derivatives(point, 1)?;
    let d = chart.dim();
    Ok(Tensor::from_fn(d, &[Up, Down, Down], |x| {
        let (c, i, jj) = (x[0], x[1], x[2]);
        let mut acc = 0.0;
        for a in 0..d {
            acc += j.get2(a, i) * dj.get(&[c, jj, a]) - j.get2(a, jj) * dj.get(&[c, i, a]);
            acc += j.get2(c, a) * (dj.get(&[a, i, jj]) - dj.get(&[a, jj, i]));
        }
        acc
    }))
}

/// Exterior derivative of the Kähler form,
/// `dΩ_ijk = ∂_i Ω_jk + ∂_j Ω_ki + ∂_k Ω_ij`.
pub fn d_omega(chart: &Chart, point: &[f64]) -> Result<Tensor> {
    chart.check_point(point)?;
    let d = chart.dim();
    let g = chart.metric_derivatives(point, 0)?;
    let dg = chart.metric_derivatives(point, 1)?;
    let j = chart.complex_structure_derivatives(point, 0)?;
    let dj = chart.complex_structure_derivatives(point, 1)?;
    // ∂_m Ω_ab stored as [a][b][m]
    let domega = Tensor::from_fn(d, &[Down; 3], |x| {
        let (a, b, m) = (x[0], x[1], x[2]);
        (0..d)
            .map(|k| dj.get(&[k, a, m]) * g.get2(k, b) + j.get2(k, a) * dg.get(&[k, b, m]))
            .sum()
    });
    Ok(Tensor::from_fn(d, &[Down; 3], |x| {
        let (i, jj, k) = (x[0], x[1], x[2]);
        domega.get(&[jj, k, i]) + domega.get(&[k, i, jj]) + domega.get(&[i, jj, k])
    }))
}

/// g-norms of ∇J, N and dΩ at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StructureResiduals {
    pub nabla_j: f64,
    pub nijenhuis: f64,
    pub d_omega: f64,
}

pub fn structure_residuals(chart: &Chart, point: &[f64]) -> Result<StructureResiduals> {
    let ps = chart.structure_at(point)?;
    let norm = |t: &Tensor| -> Result<f64> { Ok(tensor::norm_sq(t, &ps.g, &ps.g_inv)?.max(0.0).sqrt()) };
    Ok(StructureResiduals {
        nabla_j: norm(&nabla_j(chart, point)?)?,
        nijenhuis: norm(&nijenhuis(chart, point)?)?,
        d_omega: norm(&d_omega(chart, point)?)?,
    })
}

/// A g-orthonormal frame `e_1, .., e_2n` with `e_{2k} = J e_{2k-1}`, stored
/// as coordinate components of each vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Frame {
    vectors: Vec<Vec<f64>>,
}

impl Frame {
    /// Accepts an explicit frame after checking it is orthonormal and
    /// adapted to J (to `tol`).
    pub fn from_vectors(vectors: Vec<Vec<f64>>, g: &Tensor, j: &Tensor, tol: f64) -> Result<Frame> {
        let d = g.dim();
        if vectors.len() != d || vectors.iter().any(|v| v.len() != d) {
            return Err(Error::FrameBreakdown(format!("a frame needs {d} vectors of length {d}")));
        }
        let frame = Frame { vectors };
        let worst = frame.defect(g, j);
        if worst > tol {
            return Err(Error::FrameBreakdown(format!(
                "frame is not orthonormal and J-adapted (defect {worst:e})"
            )));
        }
        Ok(frame)
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Frame components of a covariant tensor.
    pub fn pull_back(&self, t: &Tensor) -> Result<Tensor> {
        Ok(tensor::pull_back(t, &self.vectors)?)
    }

    /// `Jf[b][a] = g(e_b, J e_a)`: the matrix of J in this frame.
    pub fn j_matrix(&self, g: &Tensor, j: &Tensor) -> Vec<Vec<f64>> {
        let d = self.dim();
        let jv: Vec<Vec<f64>> = self.vectors.iter().map(|v| apply(j, v)).collect();
        (0..d)
            .map(|b| (0..d).map(|a| inner(g, &self.vectors[b], &jv[a])).collect())
            .collect()
    }

    /// Largest deviation from orthonormality and from `J e_{2k-1} = e_{2k}`.
    pub fn defect(&self, g: &Tensor, j: &Tensor) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((inner(g, &self.vectors[a], &self.vectors[b]) - target).abs());
            }
        }
        for k in (0..d).step_by(2) {
            let je = apply(j, &self.vectors[k]);
            for (x, y) in je.iter().zip(&self.vectors[k + 1]) {
                worst = worst.max((x - y).abs());
            }
        }
        worst
    }
}

fn apply(j: &Tensor, v: &[f64]) -> Vec<f64> {
    let d = j.dim();
    (0..d).map(|i| (0..d).map(|k| j.get2(i, k) * v[k]).sum()).collect()
}

fn inner(g: &Tensor, u: &[f64], v: &[f64]) -> f64 {
    let d = g.dim();
    let mut acc = 0.0;
    for i in 0..d {
        for k in 0..d {
            acc += g.get2(i, k) * u[i] * v[k];
        }
    }
    acc
}

/// Gram-Schmidt on the coordinate basis in order, taking each new unit
/// vector `e` together with `J e`. Candidates that are (numerically) already
/// in the span are skipped.
pub fn adapted_frame(g: &Tensor, j: &Tensor) -> Result<Frame> {
    let d = g.dim();
    if d == 0 || d % 2 != 0 || j.dim() != d {
        return Err(Error::FrameBreakdown(format!("cannot build an adapted frame in dimension {d}")));
    }
    if !linalg::is_positive_definite(g) {
        return Err(Error::NotPositiveDefinite { point: Vec::new() });
    }
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(d);
    for c in 0..d {
        if vectors.len() == d {
            break;
        }
        let cand: Vec<f64> = (0..d).map(|i| if i == c { 1.0 } else { 0.0 }).collect();
        let cand_norm = inner(g, &cand, &cand).sqrt();
        let mut v = cand.clone();
        for e in &vectors {
            let p = inner(g, &cand, e);
            for (vi, ei) in v.iter_mut().zip(e) {
                *vi -= p * ei;
            }
        }
        let norm = inner(g, &v, &v).max(0.0).sqrt();
        if norm < 1e-8 * cand_norm {
            continue;
        }
        let e: Vec<f64> = v.iter().map(|x| x / norm).collect();
        let je = apply(j, &e);
        vectors.push(e);
        vectors.push(je);
    }
    if vectors.len() != d {
        return Err(Error::FrameBreakdown(format!(
            "only {} of {d} frame vectors could be constructed",
            vectors.len()
        )));
    }
    let frame = Frame { vectors };
    let defect = frame.defect(g, j);
    if defect > 1e-8 {
        return Err(Error::FrameBreakdown(format!("frame defect {defect:e} exceeds 1e-8")));
    }
    Ok(frame)
}

/// Holomorphic sectional curvature `R(X, JX, JX, X) / g(X, X)²`.
pub fn hol_sect_curv(r: &Tensor, g: &Tensor, j: &Tensor, x: &[f64]) -> Result<f64> {
    let jx = apply(j, x);
    sectional_curvature(r, g, x, &jx)
}

/// Sectional curvature `R(X, Y, Y, X) / (g(X,X) g(Y,Y) - g(X,Y)²)`.
pub fn sectional_curvature(r: &Tensor, g: &Tensor, x: &[f64], y: &[f64]) -> Result<f64> {
    let d = r.dim();
    if x.len() != d || y.len() != d {
        return Err(Error::InvalidArgument(format!("vectors must have {d} components")));
    }
    let area = inner(g, x, x) * inner(g, y, y) - inner(g, x, y).powi(2);
    let scale = inner(g, x, x) * inner(g, y, y);
    if !(area > 1e-14 * scale) || scale == 0.0 {
        return Err(Error::InvalidArgument("vectors span no plane".into()));
    }
    let mut num = 0.0;
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for e in 0..d {
                    num += r.get4(a, b, c, e) * x[a] * y[b] * y[c] * x[e];
                }
            }
        }
    }
    Ok(num / area)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyperbolic() -> Chart {
        let x = ["x1", "x2", "x3", "x4"];
        let g: Vec<Vec<&str>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { "1/x4^2" } else { "0" }).collect())
            .collect();
        let j: Vec<Vec<&str>> = vec![
            vec!["0", "-1", "0", "0"],
            vec!["1", "0", "0", "0"],
            vec!["0", "0", "0", "-1"],
            vec!["0", "0", "1", "0"],
        ];
        Chart::new(ChartSpec::from_text("h", &x, "x4 > 0", &g, &j).unwrap()).unwrap()
    }

    #[test]
    fn hyperbolic_curvature_is_minus_one() {
        let chart = hyperbolic();
        let p = [0.3, -0.2, 0.1, 1.7];
        let cd = curvature_data(&chart, &p).unwrap();
        assert!((cd.tau + 12.0).abs() < 1e-10);
        assert!((cd.tau_star + 4.0).abs() < 1e-10);
        let x = [1.0, 0.0, 0.0, 0.0];
        let y = [0.0, 0.0, 1.0, 0.0];
        assert!((sectional_curvature(&cd.riemann, &cd.g, &x, &y).unwrap() + 1.0).abs() < 1e-10);
        assert!((hol_sect_curv(&cd.riemann, &cd.g, &cd.j, &x).unwrap() + 1.0).abs() < 1e-10);
    }

    #[test]
    fn derivative_tables_are_symmetric() {
        let chart = hyperbolic();
        let p = [0.0, 0.0, 0.0, 2.0];
        let ddg = chart.metric_derivatives(&p, 2).unwrap();
        // ∂4∂4 (1/x4²) = 6/x4⁴
        assert!((ddg.get(&[0, 0, 3, 3]) - 6.0 / 16.0).abs() < 1e-14);
        let dddg = chart.metric_derivatives(&p, 3).unwrap();
        assert!((dddg.get(&[1, 1, 3, 3, 3]) + 24.0 / 32.0).abs() < 1e-14);
        assert_eq!(dddg.get(&[0, 1, 3, 3, 3]), 0.0);
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let chart = hyperbolic();
        match curvature_data(&chart, &[0.0, 0.0, 0.0, -1.0]) {
            Err(Error::OutOfDomain { condition, .. }) => assert_eq!(condition, "x4 > 0"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            curvature_data(&chart, &[0.0, 0.0, 1.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn frame_is_adapted() {
        let chart = hyperbolic();
        let cd = curvature_data(&chart, &[0.0, 0.0, 0.0, 0.5]).unwrap();
        let f = cd.frame().unwrap();
        assert!(f.defect(&cd.g, &cd.j) < 1e-12);
        let jf = f.j_matrix(&cd.g, &cd.j);
        assert!((jf[1][0] - 1.0).abs() < 1e-12);
        assert!((jf[3][2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_symmetric_metric_is_invalid() {
        let x = ["x1", "x2"];
        let g = vec![vec!["1", "x1"], vec!["0", "1"]];
        let j = vec![vec!["0", "-1"], vec!["1", "0"]];
        let spec = ChartSpec::from_text("bad", &x, "", &g, &j).unwrap();
        assert!(matches!(Chart::new(spec), Err(Error::InvalidChart(_))));
    }

    #[test]
    fn incompatible_j_is_reported() {
        let x = ["x1", "x2"];
        let g = vec![vec!["1", "0"], vec!["0", "4"]];
        let j = vec![vec!["0", "-1"], vec!["1", "0"]];
        let chart = Chart::new(ChartSpec::from_text("bad", &x, "", &g, &j).unwrap()).unwrap();
        assert!(matches!(
            chart.structure_at(&[0.0, 0.0]),
            Err(Error::IncompatibleStructure { .. })
        ));
    }

    #[test]
    fn second_bianchi_on_hyperbolic_space() {
        let chart = hyperbolic();
        let nr = nabla_riemann(&chart, &[0.1, 0.2, 0.3, 0.9]).unwrap();
        assert!(nr.max_abs() < 1e-9, "space form has parallel curvature");
        assert!(second_bianchi_residual(&nr) < 1e-9);
    }
}
