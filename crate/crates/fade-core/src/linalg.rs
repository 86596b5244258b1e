//! Small dense linear algebra for symmetric positive definite systems.
//!
//! Everything here targets matrices of side at most a few dozen (basis
//! dimension plus a handful of constraints), so plain O(k^3) kernels without
//! blocking or pivoting tricks are the right tool. Hand-rolled rather than
//! LAPACK-backed to stay portable to wasm targets.

use ndarray::{Array1, Array2};

use crate::error::{FadeError, Result};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Returns `None` when a pivot drops below `tiny`, i.e. the matrix is not
/// numerically positive definite.
pub fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::<f64>::zeros((n, n));
    // Absolute floor scaled by the largest diagonal entry.
    let scale = (0..n).map(|i| a[[i, i]].abs()).fold(0.0, f64::max).max(1e-300);
    let tiny = 1e-14 * scale;
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > tiny) {
            return None;
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / dj;
        }
    }
    Some(l)
}

/// Solves L Lᵀ x = b given the lower factor L.
pub fn chol_solve_factored(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        for k in 0..i {
            let v = y[k];
            y[i] -= l[[i, k]] * v;
        }
        y[i] /= l[[i, i]];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let v = y[k];
            y[i] -= l[[k, i]] * v;
        }
        y[i] /= l[[i, i]];
    }
    y
}

/// Solves A x = b for symmetric positive definite A.
pub fn solve_spd(a: &Array2<f64>, b: &Array1<f64>, context: &str) -> Result<Array1<f64>> {
    let l = cholesky(a).ok_or_else(|| FadeError::RankDeficient {
        context: context.to_string(),
    })?;
    Ok(chol_solve_factored(&l, b))
}

/// Inverse of a symmetric positive definite matrix, symmetrized on output.
pub fn inverse_spd(a: &Array2<f64>, context: &str) -> Result<Array2<f64>> {
    let n = a.nrows();
    let l = cholesky(a).ok_or_else(|| FadeError::RankDeficient {
        context: context.to_string(),
    })?;
    let mut inv = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut e = Array1::<f64>::zeros(n);
        e[j] = 1.0;
        let col = chol_solve_factored(&l, &e);
        inv.column_mut(j).assign(&col);
    }
    // Symmetrize away the last-bit asymmetry from columnwise solves.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (inv[[i, j]] + inv[[j, i]]);
            inv[[i, j]] = v;
            inv[[j, i]] = v;
        }
    }
    Ok(inv)
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
/// Returns eigenvalues in ascending order with matching eigenvector columns.
pub fn sym_eigen(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    if n <= 1 {
        return (m.diag().to_owned(), v);
    }
    let off = |m: &Array2<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += m[[i, j]] * m[[i, j]];
            }
        }
        s
    };
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().max(1e-300);
    let tol = 1e-28 * scale;
    for _sweep in 0..100 {
        if off(&m) <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap());
    let mut vals = Array1::<f64>::zeros(n);
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (dst, &src) in idx.iter().enumerate() {
        vals[dst] = m[[src, src]];
        vecs.column_mut(dst).assign(&v.column(src));
    }
    (vals, vecs)
}

/// Rank-one symmetric update helper: a - coef * u uᵀ, in place.
pub fn rank_one_downdate(a: &mut Array2<f64>, coef: f64, u: &Array1<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] -= coef * u[i] * u[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let r = Array2::from_shape_fn((k, k), |_| rng.gen_range(-1.0..1.0));
        let mut a = r.t().dot(&r);
        for i in 0..k {
            a[[i, i]] += 0.5;
        }
        a
    }

    #[test]
    fn cholesky_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 1..=8 {
            let a = random_spd(k, &mut rng);
            let l = cholesky(&a).expect("spd");
            let back = l.dot(&l.t());
            for i in 0..k {
                for j in 0..k {
                    assert_abs_diff_eq!(back[[i, j]], a[[i, j]], epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky(&a).is_none());
    }

    #[test]
    fn solve_matches_manual_2x2() {
        // Oracle: direct 2x2 inverse formula.
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let b = array![1.0, 2.0];
        let det = 4.0 * 3.0 - 1.0;
        let expected = array![(3.0 * 1.0 - 1.0 * 2.0) / det, (4.0 * 2.0 - 1.0 * 1.0) / det];
        let x = solve_spd(&a, &b, "test").unwrap();
        assert_abs_diff_eq!(x[0], expected[0], epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], expected[1], epsilon = 1e-12);
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for k in 1..=10 {
            let a = random_spd(k, &mut rng);
            let inv = inverse_spd(&a, "test").unwrap();
            let prod = inv.dot(&a);
            for i in 0..k {
                for j in 0..k {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(prod[[i, j]], want, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn eigen_known_2x2() {
        // Eigenvalues of [[2,1],[1,2]] are 1 and 3.
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = sym_eigen(&a);
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 3.0, epsilon = 1e-12);
        for j in 0..2 {
            let v = vecs.column(j).to_owned();
            let av = a.dot(&v);
            for i in 0..2 {
                assert_abs_diff_eq!(av[i], vals[j] * v[i], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn eigen_reconstructs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..=12 {
            let mut a = Array2::from_shape_fn((k, k), |_| rng.gen_range(-1.0..1.0f64));
            a = &a + &a.t().to_owned();
            let (vals, vecs) = sym_eigen(&a);
            // V diag(vals) Vᵀ = A and VᵀV = I.
            let mut rec = Array2::<f64>::zeros((k, k));
            for j in 0..k {
                let v = vecs.column(j);
                for r in 0..k {
                    for c in 0..k {
                        rec[[r, c]] += vals[j] * v[r] * v[c];
                    }
                }
            }
            for r in 0..k {
                for c in 0..k {
                    assert_abs_diff_eq!(rec[[r, c]], a[[r, c]], epsilon = 1e-9);
                }
            }
            let gram = vecs.t().dot(&vecs);
            for r in 0..k {
                for c in 0..k {
                    let want = if r == c { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(gram[[r, c]], want, epsilon = 1e-10);
                }
            }
            // Ascending order.
            for j in 1..k {
                assert!(vals[j] >= vals[j - 1]);
            }
        }
    }

    #[test]
    fn downdate_matches_explicit() {
        let mut a = array![[2.0, 0.5], [0.5, 1.0]];
        let u = array![1.0, -2.0];
        rank_one_downdate(&mut a, 0.25, &u);
        assert_abs_diff_eq!(a[[0, 0]], 2.0 - 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(a[[0, 1]], 0.5 + 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a[[1, 0]], 0.5 + 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a[[1, 1]], 1.0 - 1.0, epsilon = 1e-15);
    }
}
