//! Small dense symmetric solves for least-squares refits.

use crate::Scalar;

/// Solves `G x = b` for symmetric positive definite `G` (row-major `k × k`)
/// by Cholesky; `None` if a pivot falls below `tol · max diag`.
pub(crate) fn cholesky_solve<T: Scalar>(g: &[T], b: &[T], tol: T) -> Option<Vec<T>> {
    let k = b.len();
    let max_diag = (0..k).map(|i| g[i * k + i]).fold(T::zero(), T::max);
    let mut l = vec![T::zero(); k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = g[i * k + j];
            for p in 0..j {
                s = s - l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if !(s > tol * max_diag) {
                    return None;
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    let mut y = vec![T::zero(); k];
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s = s - l[i * k + p] * y[p];
        }
        y[i] = s / l[i * k + i];
    }
    let mut x = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut s = y[i];
        for p in i + 1..k {
            s = s - l[p * k + i] * x[p];
        }
        x[i] = s / l[i * k + i];
    }
    Some(x)
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix: `(values, vectors)`
/// with eigenvector `i` in column `i` of the row-major `vectors`.
pub(crate) fn symmetric_eigen<T: Scalar>(g: &[T], k: usize) -> (Vec<T>, Vec<T>) {
    let mut a = g.to_vec();
    let mut v = vec![T::zero(); k * k];
    for i in 0..k {
        v[i * k + i] = T::one();
    }
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let off: T = (0..k).flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * k + j] * a[i * k + j]).sum();
        if off <= T::epsilon() * T::epsilon() * (0..k).map(|i| a[i * k + i] * a[i * k + i]).sum::<T>().max(T::min_positive_value()) {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                let apq = a[p * k + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[q * k + q] - a[p * k + p]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for r in 0..k {
                    let (arp, arq) = (a[r * k + p], a[r * k + q]);
                    a[r * k + p] = c * arp - s * arq;
                    a[r * k + q] = s * arp + c * arq;
                }
                for r in 0..k {
                    let (apr, aqr) = (a[p * k + r], a[q * k + r]);
                    a[p * k + r] = c * apr - s * aqr;
                    a[q * k + r] = s * apr + c * aqr;
                }
                for r in 0..k {
                    let (vrp, vrq) = (v[r * k + p], v[r * k + q]);
                    v[r * k + p] = c * vrp - s * vrq;
                    v[r * k + q] = s * vrp + c * vrq;
                }
            }
        }
    }
    ((0..k).map(|i| a[i * k + i]).collect(), v)
}

/// Minimum-norm solution of `G x = b` via the pseudo-inverse of symmetric `G`.
pub(crate) fn pinv_solve<T: Scalar>(g: &[T], b: &[T]) -> Vec<T> {
    let k = b.len();
    let (vals, vecs) = symmetric_eigen(g, k);
    let max = vals.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let cutoff = max * T::lit(k as f64) * T::epsilon() * T::lit(1e3);
    let mut x = vec![T::zero(); k];
    for (i, &lam) in vals.iter().enumerate() {
        if lam.abs() <= cutoff {
            continue;
        }
        let proj: T = (0..k).map(|r| vecs[r * k + i] * b[r]).sum();
        for r in 0..k {
            x[r] = x[r] + vecs[r * k + i] * proj / lam;
        }
    }
    x
}
