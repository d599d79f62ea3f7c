//! Intensity-only phase retrieval by ADAM on `‖b − |Ax|²‖²`.

use num_complex::Complex;
use rayon::prelude::*;

use crate::deep_solver::{AdamConfig, AdamState, RestartRecord};
use crate::measurement::MeasurementOperator;
use crate::ndcore::RngStream;
use crate::{Error, Result, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct PrOptions {
    pub iterations: usize,
    pub restarts: usize,
    pub adam: AdamConfig,
    pub parallel: bool,
}

impl Default for PrOptions {
    fn default() -> Self {
        Self { iterations: 2000, restarts: 5, adam: AdamConfig::default(), parallel: false }
    }
}

#[derive(Clone, Debug)]
pub struct PrOutcome<T> {
    pub estimate: Vec<T>,
    /// `‖b − |A x̂|²‖²` at `estimate`.
    pub objective: T,
    /// `residual` holds each restart's final objective.
    pub restarts: Vec<RestartRecord<T>>,
    pub selected_restart: usize,
}

fn check<T: Scalar>(a: &MeasurementOperator<T>, b: &[T], x: &[T]) -> Result<()> {
    if b.len() != a.m() {
        return Err(Error::shape(format!("intensity has length {}, operator output is {}", b.len(), a.m())));
    }
    if x.len() != a.n() {
        return Err(Error::shape(format!("signal has length {}, operator input is {}", x.len(), a.n())));
    }
    Ok(())
}

fn objective_of<T: Scalar>(b: &[T], ax: &[Complex<T>]) -> (Vec<T>, T) {
    let r: Vec<T> = b.iter().zip(ax).map(|(&bi, v)| bi - v.norm_sqr()).collect();
    let loss = r.iter().map(|&v| v * v).sum();
    (r, loss)
}

pub fn pr_objective<T: Scalar>(a: &MeasurementOperator<T>, b: &[T], x: &[T]) -> Result<T> {
    check(a, b, x)?;
    Ok(objective_of(b, &a.apply_real_unchecked(x)).1)
}

/// `−4 Re(Aᴴ((b − |Ax|²) ∘ Ax))`.
pub fn pr_gradient<T: Scalar>(a: &MeasurementOperator<T>, b: &[T], x: &[T]) -> Result<Vec<T>> {
    check(a, b, x)?;
    let ax = a.apply_real_unchecked(x);
    let (r, _) = objective_of(b, &ax);
    Ok(a.intensity_gradient(&r, &ax))
}

fn run<T: Scalar>(a: &MeasurementOperator<T>, b: &[T], mut x: Vec<T>, opts: &PrOptions) -> (RestartRecord<T>, Vec<T>) {
    let mut record = RestartRecord { loss_trace: Vec::with_capacity(opts.iterations + 1), grad_norms: Vec::with_capacity(opts.iterations), residual: None, diagnostic: None };
    let mut adam = AdamState::new(x.len());
    for it in 0..opts.iterations {
        let ax = a.apply_real_unchecked(&x);
        let (r, loss) = objective_of(b, &ax);
        record.loss_trace.push(loss);
        if !loss.is_finite() {
            record.diagnostic = Some(format!("non-finite loss at iteration {it}"));
            return (record, x);
        }
        let g = a.intensity_gradient(&r, &ax);
        if g.iter().any(|v| !v.is_finite()) {
            record.diagnostic = Some(format!("non-finite gradient at iteration {it}"));
            return (record, x);
        }
        record.grad_norms.push(vec![g.iter().map(|&v| v * v).sum::<T>().sqrt()]);
        adam.step(&opts.adam, &mut x, &g);
    }
    let (_, loss) = objective_of(b, &a.apply_real_unchecked(&x));
    record.loss_trace.push(loss);
    if loss.is_finite() {
        record.residual = Some(loss);
    } else {
        record.diagnostic = Some("non-finite final loss".into());
    }
    (record, x)
}

/// Restart `r` starts from `N(0, I)` drawn from `stream.fork(r)`.
pub fn phase_retrieve_gd<T: Scalar>(b: &[T], a: &MeasurementOperator<T>, opts: &PrOptions, stream: &RngStream) -> Result<PrOutcome<T>> {
    let inits = (0..opts.restarts).map(|r| stream.fork(r as u64).randn(a.n())).collect();
    phase_retrieve_from(b, a, inits, opts)
}

/// One restart per initial point; returns the final iterate with the smallest objective.
pub fn phase_retrieve_from<T: Scalar>(b: &[T], a: &MeasurementOperator<T>, inits: Vec<Vec<T>>, opts: &PrOptions) -> Result<PrOutcome<T>> {
    if opts.iterations == 0 || inits.is_empty() {
        return Err(Error::invalid("need at least one iteration and one restart"));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("intensity estimate"));
    }
    for x in &inits {
        check(a, b, x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial point"));
        }
    }
    let runs: Vec<(RestartRecord<T>, Vec<T>)> = if opts.parallel {
        inits.into_par_iter().map(|x| run(a, b, x, opts)).collect()
    } else {
        inits.into_iter().map(|x| run(a, b, x, opts)).collect()
    };
    let mut best: Option<(usize, T)> = None;
    for (i, (rec, _)) in runs.iter().enumerate() {
        if let Some(v) = rec.residual {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    let Some((selected, objective)) = best else {
        let why: Vec<String> = runs.iter().filter_map(|(r, _)| r.diagnostic.clone()).collect();
        return Err(Error::Diverged(why.join("; ")));
    };
    let mut restarts = Vec::with_capacity(runs.len());
    let mut estimate = Vec::new();
    for (i, (rec, x)) in runs.into_iter().enumerate() {
        if i == selected {
            estimate = x;
        }
        restarts.push(rec);
    }
    Ok(PrOutcome { estimate, objective, restarts, selected_restart: selected })
}
