//! Ambiguity-resolved error metrics.
//!
//! Intensity measurements cannot distinguish relabelled sources or a global
//! sign per source, and oversampled Fourier intensities additionally cannot
//! distinguish left-right / up-down flips. Scores are therefore minimized
//! over that group before averaging.

use std::fmt;

use crate::measurement::{MeasurementOperator, OperatorMode};
use crate::ndcore::Image;
use crate::{Error, Result, Scalar};

/// Largest source count the exhaustive search accepts.
pub const MAX_RESOLVED_SOURCES: usize = 4;

/// `‖estimate − truth‖² / ‖truth‖²`.
pub fn nmse<T: Scalar>(estimate: &Image<T>, truth: &Image<T>) -> Result<T> {
    if (estimate.rows(), estimate.cols()) != (truth.rows(), truth.cols()) {
        return Err(Error::shape(format!(
            "estimate {}x{} vs truth {}x{}",
            estimate.rows(),
            estimate.cols(),
            truth.rows(),
            truth.cols()
        )));
    }
    let denom = truth.norm_sq();
    if denom == T::zero() {
        return Err(Error::invalid("truth has zero norm"));
    }
    Ok(sq_dist(estimate.as_slice(), truth.as_slice()) / denom)
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flip {
    Identity,
    LeftRight,
    UpDown,
    Both,
}

impl Flip {
    pub const ALL: [Flip; 4] = [Flip::Identity, Flip::LeftRight, Flip::UpDown, Flip::Both];

    pub fn apply<T: Scalar>(self, img: &Image<T>) -> Image<T> {
        match self {
            Flip::Identity => img.clone(),
            Flip::LeftRight => img.flip_lr(),
            Flip::UpDown => img.flip_ud(),
            Flip::Both => img.flip_lr().flip_ud(),
        }
    }
}

impl fmt::Display for Flip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flip::Identity => "id",
            Flip::LeftRight => "lr",
            Flip::UpDown => "ud",
            Flip::Both => "lrud",
        })
    }
}

/// Group element that best aligns estimates with truths.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching<T> {
    /// `permutation[l]` is the estimate matched to truth `l`.
    pub permutation: Vec<usize>,
    pub signs: Vec<i8>,
    pub flips: Vec<Flip>,
    pub per_source: Vec<T>,
}

impl<T: Scalar> Matching<T> {
    /// Estimates reordered, sign-corrected and flipped onto their truths.
    pub fn align(&self, estimates: &[Image<T>]) -> Vec<Image<T>> {
        self.permutation
            .iter()
            .zip(&self.signs)
            .zip(&self.flips)
            .map(|((&j, &s), &f)| f.apply(&estimates[j]).scaled(T::lit(f64::from(s))))
            .collect()
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Mean per-source NMSE minimized over relabelling, per-source sign and,
/// for Fourier operators, per-source flips. Ties keep the first candidate in
/// lexicographic permutation order, identity sign and identity flip first.
pub fn resolved_nmse<T: Scalar>(estimates: &[Image<T>], truths: &[Image<T>], mode: OperatorMode) -> Result<(T, Matching<T>)> {
    let count = truths.len();
    if estimates.len() != count {
        return Err(Error::invalid(format!("{} estimates for {count} truths", estimates.len())));
    }
    if count == 0 {
        return Err(Error::invalid("no sources to score"));
    }
    if count > MAX_RESOLVED_SOURCES {
        return Err(Error::invalid(format!("exhaustive matching supports at most {MAX_RESOLVED_SOURCES} sources, got {count}")));
    }
    let flips: &[Flip] = if mode == OperatorMode::Fourier { &Flip::ALL } else { &Flip::ALL[..1] };

    // Sign and flip act per source, so they are resolved per (estimate, truth) pair.
    let mut best_pair = vec![vec![(T::infinity(), 1i8, Flip::Identity); count]; count];
    for (j, est) in estimates.iter().enumerate() {
        for &flip in flips {
            let f = flip.apply(est);
            let neg = f.scaled(-T::one());
            for (l, truth) in truths.iter().enumerate() {
                for (sign, cand) in [(1i8, &f), (-1i8, &neg)] {
                    let e = nmse(cand, truth)?;
                    if e < best_pair[j][l].0 {
                        best_pair[j][l] = (e, sign, flip);
                    }
                }
            }
        }
    }

    let mut best: Option<(T, Vec<usize>)> = None;
    for perm in permutations(count) {
        let total: T = perm.iter().enumerate().map(|(l, &j)| best_pair[j][l].0).sum();
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, perm));
        }
    }
    let (total, permutation) = best.expect("at least one permutation");
    let matching = Matching {
        signs: permutation.iter().enumerate().map(|(l, &j)| best_pair[j][l].1).collect(),
        flips: permutation.iter().enumerate().map(|(l, &j)| best_pair[j][l].2).collect(),
        per_source: permutation.iter().enumerate().map(|(l, &j)| best_pair[j][l].0).collect(),
        permutation,
    };
    Ok((total / T::lit(count as f64), matching))
}

/// `‖y − Σ_l |A x̂_l|²‖²`.
pub fn measurement_residual<T: Scalar>(a: &MeasurementOperator<T>, y: &[T], estimates: &[Image<T>]) -> Result<T> {
    if y.len() != a.m() {
        return Err(Error::shape(format!("observation length {} != m = {}", y.len(), a.m())));
    }
    if let Some(x) = estimates.iter().find(|x| x.len() != a.n()) {
        return Err(Error::shape(format!("estimate has {} pixels, operator expects {}", x.len(), a.n())));
    }
    let images: Vec<&[T]> = estimates.iter().map(Image::as_slice).collect();
    Ok(residual_unchecked(a, y, &images))
}

pub(crate) fn residual_unchecked<T: Scalar>(a: &MeasurementOperator<T>, y: &[T], images: &[&[T]]) -> T {
    let mut r = y.to_vec();
    for x in images {
        for (ri, v) in r.iter_mut().zip(a.apply_real_unchecked(x)) {
            *ri = *ri - v.norm_sqr();
        }
    }
    r.iter().map(|&v| v * v).sum()
}
