//! L-hot orthogonal matching pursuit.

use super::dictionary::{dot, norm, DictionaryModel};
use super::linalg;
use crate::{Error, Result, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseCode<T> {
    /// Atom indices in selection order.
    pub support: Vec<usize>,
    pub coefficients: Vec<T>,
    /// `‖y − D_S α‖` before any selection and after each one.
    pub residual_norms: Vec<T>,
    /// Some refit fell back to the pseudo-inverse.
    pub rank_deficient: bool,
}

impl<T: Scalar> SparseCode<T> {
    /// `α_l · D[support_l]`: the per-source intensity estimates.
    pub fn components(&self, d: &DictionaryModel<T>) -> Vec<Vec<T>> {
        self.support.iter().zip(&self.coefficients).map(|(&k, &c)| d.atom(k).iter().map(|&v| c * v).collect()).collect()
    }
}

/// Least-squares coefficients of `y` over the atoms in `support`.
fn refit<T: Scalar>(d: &DictionaryModel<T>, support: &[usize], y: &[T]) -> (Vec<T>, bool) {
    let k = support.len();
    let mut g = vec![T::zero(); k * k];
    for i in 0..k {
        for j in 0..=i {
            let v = dot(d.atom(support[i]), d.atom(support[j]));
            g[i * k + j] = v;
            g[j * k + i] = v;
        }
    }
    let b: Vec<T> = support.iter().map(|&s| dot(d.atom(s), y)).collect();
    match linalg::cholesky_solve(&g, &b, T::lit(1e3) * T::epsilon()) {
        Some(x) => (x, false),
        None => (linalg::pinv_solve(&g, &b), true),
    }
}

pub fn omp_lhot<T: Scalar>(d: &DictionaryModel<T>, y: &[T], l: usize) -> Result<SparseCode<T>> {
    if y.len() != d.m() {
        return Err(Error::shape(format!("measurement has length {}, dictionary atoms have {}", y.len(), d.m())));
    }
    if l == 0 || l > d.len() {
        return Err(Error::invalid(format!("sparsity {l} must be in 1..={}", d.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("measurement"));
    }
    let mut support = Vec::with_capacity(l);
    let mut coefficients = Vec::new();
    let mut residual = y.to_vec();
    let mut residual_norms = vec![norm(y)];
    let mut rank_deficient = false;
    for _ in 0..l {
        let mut best: Option<(usize, T)> = None;
        for (k, atom) in d.atoms().enumerate() {
            if support.contains(&k) {
                continue;
            }
            let c = dot(atom, &residual).abs();
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((k, c));
            }
        }
        let (k, _) = best.expect("l <= K leaves a candidate");
        support.push(k);
        let (alpha, deficient) = refit(d, &support, y);
        rank_deficient |= deficient;
        residual.copy_from_slice(y);
        for (&s, &a) in support.iter().zip(&alpha) {
            for (r, &v) in residual.iter_mut().zip(d.atom(s)) {
                *r = *r - a * v;
            }
        }
        coefficients = alpha;
        residual_norms.push(norm(&residual));
    }
    Ok(SparseCode { support, coefficients, residual_norms, rank_deficient })
}
