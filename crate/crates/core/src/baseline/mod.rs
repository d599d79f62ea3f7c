//! Sequential USS+PR: separate the mixed intensities with an L-hot code over
//! a learned measurement-domain dictionary, then phase-retrieve each source.

mod dictionary;
mod linalg;
mod omp;
mod pr;

pub use dictionary::{
    decode_dictionary, encode_dictionary, learn_dictionary_ksvd, load_dictionary, save_dictionary, DictionaryModel, KsvdOptions, KsvdOutcome, Provenance,
    DICT_TAG, DICT_VERSION,
};
pub use omp::{omp_lhot, SparseCode};
pub use pr::{phase_retrieve_from, phase_retrieve_gd, pr_gradient, pr_objective, PrOptions, PrOutcome};

use rayon::prelude::*;

use crate::measurement::MeasurementOperator;
use crate::metrics;
use crate::ndcore::{Image, RngStream};
use crate::{Error, Result, Scalar};

#[derive(Clone, Debug)]
pub struct UssPrResult<T> {
    pub estimates: Vec<Image<T>>,
    pub code: SparseCode<T>,
    /// `α_l D[support_l]`, in support order.
    pub intensities: Vec<Vec<T>>,
    /// Phase-retrieval run per source, same order as `estimates`.
    pub stages: Vec<PrOutcome<T>>,
    /// `‖y − Σ_l |A x̂_l|²‖²` recomputed from `estimates`.
    pub final_residual: T,
}

/// Source `l` phase-retrieves with restarts drawn from `stream.fork(l)`.
pub fn solve_uss_pr<T: Scalar>(
    a: &MeasurementOperator<T>,
    y: &[T],
    d: &DictionaryModel<T>,
    sources: usize,
    opts: &PrOptions,
    stream: &RngStream,
) -> Result<UssPrResult<T>> {
    if d.m() != a.m() {
        return Err(Error::shape(format!("dictionary atoms have length {}, operator output is {}", d.m(), a.m())));
    }
    let code = omp_lhot(d, y, sources)?;
    let intensities = code.components(d);
    let stage = |(l, b): (usize, &Vec<T>)| phase_retrieve_gd(b, a, opts, &stream.fork(l as u64));
    let stages: Vec<PrOutcome<T>> = if opts.parallel {
        intensities.par_iter().enumerate().map(stage).collect::<Result<_>>()?
    } else {
        intensities.iter().enumerate().map(stage).collect::<Result<_>>()?
    };
    let side = a.side();
    let estimates = stages.iter().map(|s| Image::new(side, side, s.estimate.clone())).collect::<Result<Vec<_>>>()?;
    let final_residual = metrics::measurement_residual(a, y, &estimates)?;
    Ok(UssPrResult { estimates, code, intensities, stages, final_residual })
}

#[cfg(test)]
mod tests;
