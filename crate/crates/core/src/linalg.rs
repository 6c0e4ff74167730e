//! Small dense linear algebra used by the interpolation and simplex code.

/// Row-major square LU factorisation with partial pivoting.
#[derive(Debug, Clone)]
pub(crate) struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Factorises `a` (row-major, `n × n`). Pivots are compared after scaling
    /// each row by its largest magnitude; a scaled pivot below `threshold`
    /// means the matrix is treated as singular.
    pub(crate) fn factor(mut a: Vec<f64>, n: usize, threshold: f64) -> Option<Lu> {
        debug_assert_eq!(a.len(), n * n);
        let scale: Vec<f64> = (0..n)
            .map(|r| a[r * n..(r + 1) * n].iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect();
        if scale.iter().any(|&s| s == 0.0 || !s.is_finite()) {
            return None;
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut best = k;
            let mut best_val = 0.0;
            for r in k..n {
                let v = a[r * n + k].abs() / scale[perm[r]];
                if v > best_val {
                    best_val = v;
                    best = r;
                }
            }
            if best_val < threshold {
                return None;
            }
            if best != k {
                for c in 0..n {
                    a.swap(k * n + c, best * n + c);
                }
                perm.swap(k, best);
            }
            let pivot = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / pivot;
                a[r * n + k] = f;
                if f != 0.0 {
                    for c in k + 1..n {
                        a[r * n + c] -= f * a[k * n + c];
                    }
                }
            }
        }
        Some(Lu { n, lu: a, perm })
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let mut s = x[r];
            for c in 0..r {
                s -= self.lu[r * n + c] * x[c];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for c in r + 1..n {
                s -= self.lu[r * n + c] * x[c];
            }
            x[r] = s / self.lu[r * n + r];
        }
        x
    }
}

/// Orthonormal basis of `{x : r·x = 0 for every row r}` by Householder QR of
/// the transposed rows. Assumes the rows are linearly independent.
pub(crate) fn null_space(rows: &[&[f64]], m: usize) -> Vec<Vec<f64>> {
    let l = rows.len();
    debug_assert!(l <= m);
    // x holds the m × l matrix of rows as columns, column-major
    let mut x: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(l);
    for k in 0..l {
        let norm = x[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = vec![0.0; m];
        v[k..].copy_from_slice(&x[k][k..]);
        v[k] += if x[k][k] >= 0.0 { norm } else { -norm };
        let vv: f64 = v.iter().map(|a| a * a).sum();
        if vv > 0.0 {
            for col in x.iter_mut().skip(k) {
                let f = 2.0 * col.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / vv;
                for (a, b) in col.iter_mut().zip(&v) {
                    *a -= f * b;
                }
            }
        }
        reflectors.push(v);
    }
    (l..m)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            for v in reflectors.iter().rev() {
                let vv: f64 = v.iter().map(|a| a * a).sum();
                if vv > 0.0 {
                    let f = 2.0 * e.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / vv;
                    for (a, b) in e.iter_mut().zip(v) {
                        *a -= f * b;
                    }
                }
            }
            e
        })
        .collect()
}

/// Determinant by partial-pivot elimination (no singularity threshold).
pub(crate) fn determinant(mut a: Vec<f64>, n: usize) -> f64 {
    let mut det = 1.0;
    for k in 0..n {
        let (best, best_val) = (k..n)
            .map(|r| (r, a[r * n + k].abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_val == 0.0 {
            return 0.0;
        }
        if best != k {
            for c in 0..n {
                a.swap(k * n + c, best * n + c);
            }
            det = -det;
        }
        let pivot = a[k * n + k];
        det *= pivot;
        for r in k + 1..n {
            let f = a[r * n + k] / pivot;
            for c in k + 1..n {
                a[r * n + c] -= f * a[k * n + c];
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_is_orthonormal_and_annihilated() {
        let r1 = [1.0, 2.0, 3.0, 4.0];
        let r2 = [0.0, 1.0, -1.0, 2.0];
        let ns = null_space(&[&r1, &r2], 4);
        assert_eq!(ns.len(), 2);
        for (i, v) in ns.iter().enumerate() {
            for r in [&r1[..], &r2[..]] {
                assert!(r.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-12);
            }
            for (j, w) in ns.iter().enumerate() {
                let d: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn solves_small_system() {
        let a = vec![2.0, 1.0, 1.0, 3.0];
        let lu = Lu::factor(a, 2, 1e-12).unwrap();
        let x = lu.solve(&[3.0, 5.0]);
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn singular_is_rejected() {
        assert!(Lu::factor(vec![1.0, 2.0, 2.0, 4.0], 2, 1e-12).is_none());
        assert_eq!(determinant(vec![1.0, 2.0, 2.0, 4.0], 2), 0.0);
        assert!((determinant(vec![1.0, 2.0, 3.0, 4.0], 2) + 2.0).abs() < 1e-14);
    }
}
