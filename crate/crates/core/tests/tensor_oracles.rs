//! Tensor products against direct loop implementations of their defining
//! formulas, on random inputs.

use proptest::prelude::*;
use tvb_core::tensor::{self, Tensor, Variance};

const COV2: [Variance; 2] = [Variance::Covariant; 2];

fn matrix(d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), d)
}

fn cov2(rows: &[Vec<f64>]) -> Tensor {
    Tensor::from_rows(COV2, rows).unwrap()
}

/// A random almost complex structure `P J0 P⁻¹` for a random invertible `P`,
/// returned with a compatible metric `(P⁻¹)ᵀ P⁻¹`.
fn structure(d: usize) -> impl Strategy<Value = (Tensor, Tensor)> {
    matrix(d).prop_filter_map("ill-conditioned", move |m| {
        // P = I + m/4 keeps P comfortably invertible most of the time.
        let p: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|k| m[i][k] / 4.0 + if i == k { 1.0 } else { 0.0 }).collect())
            .collect();
        let pm = gauss_jordan_inverse(&p)?;
        if pm.iter().flatten().any(|x| x.abs() > 3.0) {
            return None;
        }
        let j0 = Tensor::standard_complex_structure(d);
        let j = Tensor::from_fn(d, &[Variance::Contravariant, Variance::Covariant], |x| {
            let mut acc = 0.0;
            for a in 0..d {
                for b in 0..d {
                    acc += p[x[0]][a] * j0.get2(a, b) * pm[b][x[1]];
                }
            }
            acc
        });
        let g = Tensor::from_fn(d, &COV2, |x| (0..d).map(|a| pm[a][x[0]] * pm[a][x[1]]).sum());
        Some((g, j))
    })
}

/// Gauss-Jordan inverse, `None` when nearly singular.
fn gauss_jordan_inverse(p: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let d = p.len();
    let mut a: Vec<Vec<f64>> = p
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..d).map(|k| if k == i { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..d {
        let piv = (c..d).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[piv][c].abs() < 0.2 {
            return None;
        }
        a.swap(c, piv);
        let inv = 1.0 / a[c][c];
        for x in a[c].iter_mut() {
            *x *= inv;
        }
        for r in 0..d {
            if r != c {
                let f = a[r][c];
                let pivot_row = a[c].clone();
                for (x, y) in a[r].iter_mut().zip(pivot_row) {
                    *x -= f * y;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[d..].to_vec()).collect())
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * scale.max(1.0)
}

fn kulkarni_naive(a: &[Vec<f64>], b: &[Vec<f64>], x: usize, y: usize, z: usize, w: usize) -> f64 {
    a[x][z] * b[y][w] - a[x][w] * b[y][z] + b[x][z] * a[y][w] - b[x][w] * a[y][z]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kulkarni_matches_definition(dim in prop::sample::select(vec![4usize, 6]), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<Vec<f64>> = (0..dim).map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let b: Vec<Vec<f64>> = (0..dim).map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let k = tensor::kulkarni(&cov2(&a), &cov2(&b)).unwrap();
        for x in 0..dim { for y in 0..dim { for z in 0..dim { for w in 0..dim {
            let want = kulkarni_naive(&a, &b, x, y, z, w);
            prop_assert!(close(k.get4(x, y, z, w), want, want.abs()));
        }}}}
    }

    #[test]
    fn triangle_matches_definition(a in matrix(4), b in matrix(4), (g, j) in structure(4)) {
        let _ = g;
        let d = 4;
        let jr = j.rows();
        // ā(x, y) = a(x, J y) = Σ_m a[x][m] J^m_y
        let barred = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            (0..d).map(|x| (0..d).map(|y| (0..d).map(|k| m[x][k] * jr[k][y]).sum()).collect()).collect()
        };
        let (ab, bb) = (barred(&a), barred(&b));
        let t = tensor::triangle(&cov2(&a), &cov2(&b), &j).unwrap();
        for x in 0..d { for y in 0..d { for z in 0..d { for w in 0..d {
            let want = kulkarni_naive(&a, &b, x, y, z, w)
                + kulkarni_naive(&ab, &bb, x, y, z, w)
                + 2.0 * ab[x][y] * bb[z][w]
                + 2.0 * bb[x][y] * ab[z][w];
            prop_assert!(close(t.get4(x, y, z, w), want, want.abs() + 10.0));
        }}}}
        let abar = tensor::bar(&cov2(&a), &j).unwrap();
        for x in 0..d { for y in 0..d {
            prop_assert!(close(abar.get2(x, y), ab[x][y], ab[x][y].abs() + 10.0));
        }}
    }

    #[test]
    fn j_conjugate_and_outer_match_definition(a in matrix(6), b in matrix(6), (g, j) in structure(6)) {
        let _ = g;
        let d = 6;
        let jr = j.rows();
        let c = tensor::j_conjugate(&cov2(&a), &j).unwrap();
        for x in 0..d { for y in 0..d {
            let mut want = 0.0;
            for m in 0..d { for n in 0..d { want += jr[m][x] * jr[n][y] * a[m][n]; } }
            prop_assert!(close(c.get2(x, y), want, want.abs() + 10.0));
        }}
        let o = tensor::outer(&cov2(&a), &cov2(&b)).unwrap();
        for x in 0..d { for y in 0..d { for z in 0..d { for w in 0..d {
            prop_assert_eq!(o.get4(x, y, z, w), a[x][y] * b[z][w]);
        }}}}
    }

    #[test]
    fn contraction_raise_lower_and_norm(a in matrix(4), b in matrix(4), (g, j) in structure(4)) {
        let _ = j;
        let d = 4;
        let g_inv = tvb_core::linalg::invert_metric(&g).unwrap();
        let gi = g_inv.rows();
        let t = tensor::outer(&cov2(&a), &cov2(&b)).unwrap();
        // contraction of slots 1 and 2 with g⁻¹: Σ g^{mn} a[x][m] b[n][w]
        let c = tensor::contract(&t, 1, 2, Some(&g_inv)).unwrap();
        for x in 0..d { for w in 0..d {
            let mut want = 0.0;
            for m in 0..d { for n in 0..d { want += gi[m][n] * a[x][m] * b[n][w]; } }
            prop_assert!(close(c.get2(x, w), want, want.abs() + 100.0));
        }}
        // raise then lower is the identity
        let up = tensor::raise(&cov2(&a), 0, &g_inv).unwrap();
        let back = tensor::lower(&up, 0, &g).unwrap();
        prop_assert!(back.max_abs_diff(&cov2(&a)).unwrap() < 1e-10);
        // norm: Σ g^{xm} g^{yn} a_xy a_mn
        let mut want = 0.0;
        for x in 0..d { for y in 0..d { for m in 0..d { for n in 0..d {
            want += gi[x][m] * gi[y][n] * a[x][y] * a[m][n];
        }}}}
        let got = tensor::norm_sq(&cov2(&a), &g, &g_inv).unwrap();
        prop_assert!(close(got, want, want.abs() + 100.0));
        // pull back to the coordinate basis is the identity
        let basis: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|k| if i == k { 1.0 } else { 0.0 }).collect()).collect();
        prop_assert_eq!(tensor::pull_back(&cov2(&a), &basis).unwrap(), cov2(&a));
    }

    #[test]
    fn kulkarni_of_symmetric_pair_is_curvature_like(a in matrix(4), b in matrix(4)) {
        let d = 4;
        let sym = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            (0..d).map(|x| (0..d).map(|y| 0.5 * (m[x][y] + m[y][x])).collect()).collect()
        };
        let k = tensor::kulkarni(&cov2(&sym(&a)), &cov2(&sym(&b))).unwrap();
        for x in 0..d { for y in 0..d { for z in 0..d { for w in 0..d {
            let v = k.get4(x, y, z, w);
            prop_assert!(close(v, -k.get4(y, x, z, w), v.abs()));
            prop_assert!(close(v, -k.get4(x, y, w, z), v.abs()));
            prop_assert!(close(v, k.get4(z, w, x, y), v.abs()));
            let bianchi = v + k.get4(y, z, x, w) + k.get4(z, x, y, w);
            prop_assert!(bianchi.abs() < 1e-12 * 100.0);
        }}}}
    }
}
