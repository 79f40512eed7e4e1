//! Small dense symmetric solves for the local normal equations.

/// Solves `a x = b` for a symmetric positive semi-definite `q x q` matrix
/// stored row-major, using Cholesky with diagonal pivoting. Returns the
/// pivot-ratio condition estimate alongside the solution; when a pivot is
/// not strictly positive the estimate is zero and `x` is `None`.
pub(crate) fn pivoted_cholesky_solve(a: &[f64], b: &[f64], q: usize) -> (Option<Vec<f64>>, f64) {
    debug_assert_eq!(a.len(), q * q);
    debug_assert_eq!(b.len(), q);
    if q == 0 {
        return (Some(Vec::new()), 1.0);
    }
    let mut w = a.to_vec();
    let mut perm: Vec<usize> = (0..q).collect();
    let mut pivots = Vec::with_capacity(q);

    for k in 0..q {
        let mut jmax = k;
        for j in k + 1..q {
            if w[j * q + j] > w[jmax * q + jmax] {
                jmax = j;
            }
        }
        if jmax != k {
            for c in 0..q {
                w.swap(k * q + c, jmax * q + c);
            }
            for r in 0..q {
                w.swap(r * q + k, r * q + jmax);
            }
            perm.swap(k, jmax);
        }
        let d = w[k * q + k];
        if !(d > 0.0) || !d.is_finite() {
            return (None, 0.0);
        }
        pivots.push(d);
        let l = d.sqrt();
        w[k * q + k] = l;
        for i in k + 1..q {
            w[i * q + k] /= l;
        }
        for i in k + 1..q {
            let lik = w[i * q + k];
            for c in k + 1..=i {
                w[i * q + c] -= lik * w[c * q + k];
            }
        }
        // keep the trailing block symmetric for the next pivot search
        for i in k + 1..q {
            for c in k + 1..i {
                w[c * q + i] = w[i * q + c];
            }
        }
    }
    let max = pivots.iter().cloned().fold(f64::MIN, f64::max);
    let min = pivots.iter().cloned().fold(f64::MAX, f64::min);
    let rcond = min / max;

    // forward: L y = P^T b
    let mut y: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..q {
        let mut s = y[i];
        for c in 0..i {
            s -= w[i * q + c] * y[c];
        }
        y[i] = s / w[i * q + i];
    }
    // backward: L^T v = y
    for i in (0..q).rev() {
        let mut s = y[i];
        for r in i + 1..q {
            s -= w[r * q + i] * y[r];
        }
        y[i] = s / w[i * q + i];
    }
    let mut x = vec![0.0; q];
    for (k, &p) in perm.iter().enumerate() {
        x[p] = y[k];
    }
    (Some(x), rcond)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        // A = M^T M for a fixed M, b = A x0
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let x0 = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| a[i * 3 + j] * x0[j]).sum())
            .collect();
        let (x, rcond) = pivoted_cholesky_solve(&a, &b, 3);
        let x = x.unwrap();
        for (u, v) in x.iter().zip(&x0) {
            assert!((u - v).abs() < 1e-13);
        }
        assert!(rcond > 0.1 && rcond <= 1.0);
    }

    #[test]
    fn diagonal_rcond_is_exact() {
        let a = [1e-3, 0.0, 0.0, 10.0];
        let (x, rcond) = pivoted_cholesky_solve(&a, &[1.0, 1.0], 2);
        assert_eq!(rcond, 1e-4);
        let x = x.unwrap();
        assert!((x[0] - 1e3).abs() < 1e-9);
        assert!((x[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn singular_detected() {
        // rank one
        let a = [1.0, 2.0, 2.0, 4.0];
        let (x, rcond) = pivoted_cholesky_solve(&a, &[1.0, 2.0], 2);
        assert!(x.is_none() || rcond < 1e-12);
        let zero = [0.0; 4];
        assert_eq!(pivoted_cholesky_solve(&zero, &[0.0, 0.0], 2).1, 0.0);
    }
}
