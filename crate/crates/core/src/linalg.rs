//! Small dense linear algebra on rank-2 tensors.

use nalgebra::DMatrix;

use crate::tensor::{Tensor, Variance};

fn to_matrix(t: &Tensor) -> DMatrix<f64> {
    let d = t.dim();
    DMatrix::from_row_slice(d, d, t.data())
}

/// Inverse of a (0,2) metric as a (2,0) tensor; `None` when singular.
pub fn invert_metric(g: &Tensor) -> Option<Tensor> {
    let inv = to_matrix(g).try_inverse()?;
    if inv.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let d = g.dim();
    Some(Tensor::from_fn(d, &[Variance::Contravariant, Variance::Contravariant], |i| {
        inv[(i[0], i[1])]
    }))
}

pub fn is_positive_definite(g: &Tensor) -> bool {
    let m = to_matrix(g);
    let sym = (&m + m.transpose()) * 0.5;
    sym.cholesky().is_some()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted in
/// decreasing order.
pub fn symmetric_eigenvalues(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    // Symmetrize so tiny asymmetries from roundoff do not bias the result.
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = s;
            a[j][i] = s;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // Q diag(3, 1, -1, -2) Q^T with a rotation mixing all axes.
        let (c, s) = (0.6f64, 0.8f64);
        let q = [
            [c, -s, 0.0, 0.0],
            [s, c, 0.0, 0.0],
            [0.0, 0.0, c, s],
            [0.0, 0.0, -s, c],
        ];
        let mix = [
            [0.5, 0.5, 0.5, 0.5],
            [0.5, -0.5, 0.5, -0.5],
            [0.5, 0.5, -0.5, -0.5],
            [0.5, -0.5, -0.5, 0.5],
        ];
        let d = [3.0, 1.0, -1.0, -2.0];
        let mut u = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                u[i][j] = (0..4).map(|k| q[i][k] * mix[k][j]).sum();
            }
        }
        let m: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| (0..4).map(|k| u[i][k] * d[k] * u[j][k]).sum()).collect())
            .collect();
        let ev = symmetric_eigenvalues(&m);
        for (a, b) in ev.iter().zip(d) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn degenerate_spectrum() {
        let m = vec![vec![2.0, 0.0], vec![0.0, 2.0]];
        assert_eq!(symmetric_eigenvalues(&m), vec![2.0, 2.0]);
    }

    #[test]
    fn metric_inverse_and_definiteness() {
        let g = Tensor::euclidean(4).scaled(0.25);
        let inv = invert_metric(&g).unwrap();
        assert!((inv.get2(2, 2) - 4.0).abs() < 1e-14);
        assert!(is_positive_definite(&g));
        assert!(!is_positive_definite(&g.scaled(-1.0)));
        assert!(invert_metric(&Tensor::covariant(4, 2)).is_none());
    }
}
