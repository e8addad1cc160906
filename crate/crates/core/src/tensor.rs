//! Dense pointwise tensors and the algebraic products used to assemble
//! curvature-type tensors.
//!
//! Storage is row-major over `dim^rank` entries. A (1,1)-tensor `J` is stored
//! as `J[i][j] = J^i_j`, so it acts on vectors by `(Jv)^i = sum_j J^i_j v^j`.
//! A (0,2)-tensor `a` is stored as `a[i][j] = a(e_i, e_j)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variance {
    Covariant,
    Contravariant,
}

use Variance::{Contravariant as Up, Covariant as Down};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("expected a tensor of type {expected}, found {found}")]
    TypeMismatch { expected: String, found: String },
    #[error("slot {slot} out of range for a rank-{rank} tensor")]
    SlotOutOfRange { slot: usize, rank: usize },
    #[error("cannot contract slot {0} with itself")]
    SameSlot(usize),
    #[error("contracting two slots of equal variance needs a metric of type {0}")]
    MetricRequired(&'static str),
}

pub type Result<T> = std::result::Result<T, TensorError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    dim: usize,
    variance: Vec<Variance>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dim: usize, variance: &[Variance]) -> Tensor {
        Tensor {
            dim,
            variance: variance.to_vec(),
            data: vec![0.0; dim.pow(variance.len() as u32)],
        }
    }

    /// All-covariant zero tensor.
    pub fn covariant(dim: usize, rank: usize) -> Tensor {
        Tensor::zeros(dim, &vec![Down; rank])
    }

    pub fn from_fn(dim: usize, variance: &[Variance], mut f: impl FnMut(&[usize]) -> f64) -> Tensor {
        let mut t = Tensor::zeros(dim, variance);
        let rank = variance.len();
        let mut idx = vec![0usize; rank];
        for slot in t.data.iter_mut() {
            *slot = f(&idx);
            increment(&mut idx, dim);
        }
        t
    }

    pub fn from_data(dim: usize, variance: &[Variance], data: Vec<f64>) -> Result<Tensor> {
        let expected = dim.pow(variance.len() as u32);
        if data.len() != expected {
            return Err(TensorError::DimensionMismatch {
                left: data.len(),
                right: expected,
            });
        }
        Ok(Tensor {
            dim,
            variance: variance.to_vec(),
            data,
        })
    }

    /// Rank-2 tensor from a row-major square matrix.
    pub fn from_rows(variance: [Variance; 2], rows: &[Vec<f64>]) -> Result<Tensor> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(TensorError::DimensionMismatch {
                left: bad.len(),
                right: dim,
            });
        }
        Tensor::from_data(dim, &variance, rows.concat())
    }

    /// The Euclidean metric `delta_ij` as a (0,2)-tensor.
    pub fn euclidean(dim: usize) -> Tensor {
        Tensor::from_fn(dim, &[Down, Down], |i| if i[0] == i[1] { 1.0 } else { 0.0 })
    }

    /// Inverse Euclidean metric `delta^ij`.
    pub fn euclidean_inverse(dim: usize) -> Tensor {
        Tensor::from_fn(dim, &[Up, Up], |i| if i[0] == i[1] { 1.0 } else { 0.0 })
    }

    /// The standard complex structure on R^(2n): `J e_(2k) = e_(2k+1)`.
    pub fn standard_complex_structure(dim: usize) -> Tensor {
        Tensor::from_fn(dim, &[Up, Down], |i| {
            let (row, col) = (i[0], i[1]);
            if col % 2 == 0 && row == col + 1 {
                1.0
            } else if col % 2 == 1 && row + 1 == col {
                -1.0
            } else {
                0.0
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |acc, &i| {
            debug_assert!(i < self.dim);
            acc * self.dim + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    pub fn add_at(&mut self, idx: &[usize], value: f64) {
        let o = self.offset(idx);
        self.data[o] += value;
    }

    pub fn get2(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn get4(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let d = self.dim;
        self.data[((i * d + j) * d + k) * d + l]
    }

    /// Row-major square matrix view of a rank-2 tensor.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        assert_eq!(self.rank(), 2, "rows() needs a rank-2 tensor");
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Plain sum of squared components (no metric).
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Tensor {
        Tensor {
            dim: self.dim,
            variance: self.variance.clone(),
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    fn check_same_type(&self, other: &Tensor) -> Result<()> {
        if self.dim != other.dim {
            return Err(TensorError::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        if self.variance != other.variance {
            return Err(TensorError::TypeMismatch {
                expected: type_name(&self.variance),
                found: type_name(&other.variance),
            });
        }
        Ok(())
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &Tensor) -> Result<Tensor> {
        self.check_same_type(other)?;
        Ok(Tensor {
            dim: self.dim,
            variance: self.variance.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + factor * b).collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.axpy(-1.0, other)
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        self.check_same_type(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Swap of the two slots of a rank-2 tensor.
    pub fn transpose(&self) -> Tensor {
        assert_eq!(self.rank(), 2, "transpose needs a rank-2 tensor");
        let d = self.dim;
        let mut variance = self.variance.clone();
        variance.swap(0, 1);
        Tensor::from_fn(d, &variance, |i| self.get2(i[1], i[0]))
    }

    fn require(&self, variance: &[Variance]) -> Result<()> {
        if self.variance != variance {
            return Err(TensorError::TypeMismatch {
                expected: type_name(variance),
                found: type_name(&self.variance),
            });
        }
        Ok(())
    }

    /// Replace one slot through a linear map: `out[.., a, ..] = sum_i m(a, i) t[.., i, ..]`.
    fn transform_slot(&self, slot: usize, variance: Variance, m: impl Fn(usize, usize) -> f64) -> Tensor {
        let d = self.dim;
        let rank = self.rank();
        let mut new_variance = self.variance.clone();
        new_variance[slot] = variance;
        let stride = d.pow((rank - 1 - slot) as u32);
        let block = stride * d;
        let mut out = Tensor::zeros(d, &new_variance);
        for outer in 0..self.data.len() / block {
            for inner in 0..stride {
                let base = outer * block + inner;
                for a in 0..d {
                    let mut acc = 0.0;
                    for i in 0..d {
                        acc += m(a, i) * self.data[base + i * stride];
                    }
                    out.data[base + a * stride] = acc;
                }
            }
        }
        out
    }
}

fn type_name(variance: &[Variance]) -> String {
    let up = variance.iter().filter(|v| **v == Up).count();
    format!("({}, {})", up, variance.len() - up)
}

fn increment(idx: &mut [usize], dim: usize) {
    for slot in idx.iter_mut().rev() {
        *slot += 1;
        if *slot < dim {
            return;
        }
        *slot = 0;
    }
}

fn check_dims(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.dim != b.dim {
        return Err(TensorError::DimensionMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    Ok(())
}

/// `(p (x) q)(x, y, z, w) = p(x, y) q(z, w)`, general ranks.
pub fn outer(p: &Tensor, q: &Tensor) -> Result<Tensor> {
    check_dims(p, q)?;
    let variance: Vec<Variance> = p.variance.iter().chain(&q.variance).copied().collect();
    let mut data = Vec::with_capacity(p.data.len() * q.data.len());
    for a in &p.data {
        data.extend(q.data.iter().map(|b| a * b));
    }
    Tensor::from_data(p.dim, &variance, data)
}

/// Kulkarni–Nomizu type product of two (0,2)-tensors:
/// `a(x,z)b(y,w) - a(x,w)b(y,z) + b(x,z)a(y,w) - b(x,w)a(y,z)`.
pub fn kulkarni(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.require(&[Down, Down])?;
    b.require(&[Down, Down])?;
    check_dims(a, b)?;
    let d = a.dim;
    let mut out = Tensor::covariant(d, 4);
    let mut o = 0;
    for x in 0..d {
        for y in 0..d {
            for z in 0..d {
                for w in 0..d {
                    out.data[o] = a.get2(x, z) * b.get2(y, w) - a.get2(x, w) * b.get2(y, z)
                        + b.get2(x, z) * a.get2(y, w)
                        - b.get2(x, w) * a.get2(y, z);
                    o += 1;
                }
            }
        }
    }
    Ok(out)
}

fn check_complex_structure(a: &Tensor, j: &Tensor) -> Result<()> {
    a.require(&[Down, Down])?;
    j.require(&[Up, Down])?;
    check_dims(a, j)
}

/// `bar(a)(x, y) = a(x, J y)`.
pub fn bar(a: &Tensor, j: &Tensor) -> Result<Tensor> {
    check_complex_structure(a, j)?;
    let d = a.dim;
    Ok(Tensor::from_fn(d, &[Down, Down], |i| {
        (0..d).map(|m| a.get2(i[0], m) * j.get2(m, i[1])).sum()
    }))
}

/// `a(J x, J y)`.
pub fn j_conjugate(a: &Tensor, j: &Tensor) -> Result<Tensor> {
    check_complex_structure(a, j)?;
    let d = a.dim;
    Ok(Tensor::from_fn(d, &[Down, Down], |i| {
        let mut acc = 0.0;
        for m in 0..d {
            for n in 0..d {
                acc += j.get2(m, i[0]) * j.get2(n, i[1]) * a.get2(m, n);
            }
        }
        acc
    }))
}

/// The J-twisted product
/// `a ○∧ b + bar(a) ○∧ bar(b) + 2 bar(a) ⊗ bar(b) + 2 bar(b) ⊗ bar(a)`.
pub fn triangle(a: &Tensor, b: &Tensor, j: &Tensor) -> Result<Tensor> {
    check_dims(a, b)?;
    let abar = bar(a, j)?;
    let bbar = bar(b, j)?;
    kulkarni(a, b)?
        .add(&kulkarni(&abar, &bbar)?)?
        .axpy(2.0, &outer(&abar, &bbar)?)?
        .axpy(2.0, &outer(&bbar, &abar)?)
}

/// Trace over slots `i` and `j`. Mixed slots are traced directly; two
/// covariant slots need the inverse metric (type (2,0)), two contravariant
/// slots need the metric (type (0,2)).
pub fn contract(t: &Tensor, i: usize, j: usize, metric: Option<&Tensor>) -> Result<Tensor> {
    let rank = t.rank();
    for s in [i, j] {
        if s >= rank {
            return Err(TensorError::SlotOutOfRange { slot: s, rank });
        }
    }
    if i == j {
        return Err(TensorError::SameSlot(i));
    }
    let (i, j) = (i.min(j), i.max(j));
    let d = t.dim;
    let weights: Box<dyn Fn(usize, usize) -> f64> = match (t.variance[i], t.variance[j]) {
        (Up, Down) | (Down, Up) => Box::new(|k, l| if k == l { 1.0 } else { 0.0 }),
        (Down, Down) => {
            let m = metric.ok_or(TensorError::MetricRequired("(2,0)"))?;
            m.require(&[Up, Up])?;
            check_dims(t, m)?;
            Box::new(move |k, l| m.get2(k, l))
        }
        (Up, Up) => {
            let m = metric.ok_or(TensorError::MetricRequired("(0,2)"))?;
            m.require(&[Down, Down])?;
            check_dims(t, m)?;
            Box::new(move |k, l| m.get2(k, l))
        }
    };
    let remaining: Vec<Variance> = t
        .variance
        .iter()
        .enumerate()
        .filter(|(s, _)| *s != i && *s != j)
        .map(|(_, v)| *v)
        .collect();
    let mut full = vec![0usize; rank];
    Ok(Tensor::from_fn(d, &remaining, |idx| {
        let mut r = 0;
        for (s, slot) in full.iter_mut().enumerate() {
            if s != i && s != j {
                *slot = idx[r];
                r += 1;
            }
        }
        let mut acc = 0.0;
        for k in 0..d {
            for l in 0..d {
                let w = weights(k, l);
                if w != 0.0 {
                    full[i] = k;
                    full[j] = l;
                    acc += w * t.get(&full);
                }
            }
        }
        acc
    }))
}

/// Raise a covariant slot with the inverse metric.
pub fn raise(t: &Tensor, slot: usize, g_inv: &Tensor) -> Result<Tensor> {
    if slot >= t.rank() {
        return Err(TensorError::SlotOutOfRange { slot, rank: t.rank() });
    }
    g_inv.require(&[Up, Up])?;
    check_dims(t, g_inv)?;
    if t.variance[slot] != Down {
        return Err(TensorError::TypeMismatch {
            expected: "covariant slot".into(),
            found: "contravariant slot".into(),
        });
    }
    Ok(t.transform_slot(slot, Up, |a, i| g_inv.get2(a, i)))
}

/// Lower a contravariant slot with the metric.
pub fn lower(t: &Tensor, slot: usize, g: &Tensor) -> Result<Tensor> {
    if slot >= t.rank() {
        return Err(TensorError::SlotOutOfRange { slot, rank: t.rank() });
    }
    g.require(&[Down, Down])?;
    check_dims(t, g)?;
    if t.variance[slot] != Up {
        return Err(TensorError::TypeMismatch {
            expected: "contravariant slot".into(),
            found: "covariant slot".into(),
        });
    }
    Ok(t.transform_slot(slot, Down, |a, i| g.get2(a, i)))
}

/// Insert J into one covariant slot: `out(.., x, ..) = t(.., J x, ..)`.
pub fn j_in_slot(t: &Tensor, slot: usize, j: &Tensor) -> Result<Tensor> {
    check_dims(t, j)?;
    j.require(&[Up, Down])?;
    if slot >= t.rank() {
        return Err(TensorError::SlotOutOfRange { slot, rank: t.rank() });
    }
    if t.variance[slot] != Down {
        return Err(TensorError::TypeMismatch {
            expected: "a covariant slot".into(),
            found: type_name(&t.variance),
        });
    }
    Ok(t.transform_slot(slot, Down, |a, i| j.get2(i, a)))
}

/// Metric norm squared: every slot is moved to the opposite position and the
/// result is contracted against `t`. No combinatorial prefactor is applied,
/// so in a g-orthonormal frame this is the plain sum of squared components.
pub fn norm_sq(t: &Tensor, g: &Tensor, g_inv: &Tensor) -> Result<f64> {
    let mut dual = t.clone();
    for slot in 0..t.rank() {
        dual = match t.variance[slot] {
            Down => raise(&dual, slot, g_inv)?,
            Up => lower(&dual, slot, g)?,
        };
    }
    Ok(dual.data.iter().zip(&t.data).map(|(a, b)| a * b).sum())
}

/// Components of an all-covariant tensor in a new basis, given as the list
/// of basis vectors (coordinate components): `out[a..] = t(e_a, ..)`.
pub fn pull_back(t: &Tensor, basis: &[Vec<f64>]) -> Result<Tensor> {
    if basis.len() != t.dim {
        return Err(TensorError::DimensionMismatch {
            left: basis.len(),
            right: t.dim,
        });
    }
    if t.variance.iter().any(|v| *v == Up) {
        return Err(TensorError::TypeMismatch {
            expected: format!("(0, {})", t.rank()),
            found: type_name(&t.variance),
        });
    }
    let mut out = t.clone();
    for slot in 0..t.rank() {
        out = out.transform_slot(slot, Down, |a, i| basis[a][i]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta(d: usize) -> Tensor {
        Tensor::euclidean(d)
    }

    #[test]
    fn kulkarni_of_identity() {
        let k = kulkarni(&delta(4), &delta(4)).unwrap();
        assert_eq!(k.get4(0, 1, 0, 1), 2.0);
        assert_eq!(k.get4(0, 1, 1, 0), -2.0);
        let zero = Tensor::covariant(4, 2);
        assert_eq!(kulkarni(&delta(4), &zero).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn bar_of_flat_metric_is_kahler_matrix() {
        let j = Tensor::standard_complex_structure(4);
        let gbar = bar(&delta(4), &j).unwrap();
        // J e2 = -e1 so g(e1, J e2) = -1.
        assert_eq!(gbar.get2(0, 1), -1.0);
        assert_eq!(gbar.get2(1, 0), 1.0);
        let twice = bar(&gbar, &j).unwrap();
        assert!(twice.add(&delta(4)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn triangle_of_zero_is_zero() {
        let j = Tensor::standard_complex_structure(4);
        let z = Tensor::covariant(4, 2);
        assert_eq!(triangle(&z, &z, &j).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn contraction_of_delta_product() {
        let mixed = Tensor::from_fn(4, &[Up, Down], |i| if i[0] == i[1] { 1.0 } else { 0.0 });
        let prod = outer(&mixed, &mixed).unwrap();
        // delta^a_b delta^c_d traced over b and c gives delta^a_d.
        let c = contract(&prod, 1, 2, None).unwrap();
        assert_eq!(c.variance(), &[Up, Down]);
        assert!(c.sub(&mixed).unwrap().max_abs() < 1e-15);
        // delta^a_b delta^c_d traced over a,b gives 4 delta^c_d
        let c = contract(&prod, 0, 1, None).unwrap();
        assert!(c.sub(&mixed.scaled(4.0)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn contraction_errors() {
        let t = Tensor::covariant(4, 2);
        assert!(matches!(contract(&t, 0, 2, None), Err(TensorError::SlotOutOfRange { slot: 2, rank: 2 })));
        assert!(matches!(contract(&t, 1, 1, None), Err(TensorError::SameSlot(1))));
        assert!(matches!(contract(&t, 0, 1, None), Err(TensorError::MetricRequired(_))));
        let g_inv = Tensor::euclidean_inverse(4);
        assert_eq!(contract(&delta(4), 0, 1, Some(&g_inv)).unwrap().data(), &[4.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        assert!(matches!(
            kulkarni(&delta(4), &delta(6)),
            Err(TensorError::DimensionMismatch { left: 4, right: 6 })
        ));
        let j = Tensor::standard_complex_structure(6);
        assert!(bar(&delta(4), &j).is_err());
    }

    #[test]
    fn norm_of_metric_is_dimension() {
        let g = delta(4);
        let g_inv = Tensor::euclidean_inverse(4);
        assert!((norm_sq(&g, &g, &g_inv).unwrap() - 4.0).abs() < 1e-15);
        assert_eq!(norm_sq(&Tensor::covariant(4, 4), &g, &g_inv).unwrap(), 0.0);

        // Conformally scaled metric: still 2n.
        let s = 0.25;
        let gs = g.scaled(s);
        let gs_inv = g_inv.scaled(1.0 / s);
        assert!((norm_sq(&gs, &gs, &gs_inv).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn standard_complex_structure_squares_to_minus_one() {
        for d in [2, 4, 6] {
            let j = Tensor::standard_complex_structure(d);
            for a in 0..d {
                for b in 0..d {
                    let jj: f64 = (0..d).map(|m| j.get2(a, m) * j.get2(m, b)).sum();
                    assert_eq!(jj, if a == b { -1.0 } else { 0.0 });
                }
            }
        }
        let j = Tensor::standard_complex_structure(4);
        assert_eq!(j.get2(1, 0), 1.0);
        assert_eq!(j.get2(0, 1), -1.0);
    }
}
