//! Latent-space alternating descent for S³PR.
//!
//! Each outer iteration visits the latents in order `l = 1..L`; for each it
//! recomputes the loss with the current iterates, backpropagates the
//! measurement residual through the generator, and takes one ADAM step on
//! `z_l` alone. Several random restarts run independently and the one with
//! the smallest measurement residual wins.

mod adam;
mod objective;
mod trace;

pub use adam::{AdamConfig, AdamState};
pub use objective::{autocorrelation, autocorrelation_loss, autocorrelation_loss_gradient, loss, loss_gradient};
pub use trace::{write_restart_traces, write_trace_csv};

use num_complex::Complex;
use rayon::prelude::*;

use crate::generator::{ForwardCache, GeneratorNetwork, LatentVector};
use crate::measurement::{MeasurementOperator, OperatorMode};
use crate::metrics;
use crate::ndcore::{Fft2, Image, RngStream};
use crate::{Error, Result, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Outer iterations; each performs one ADAM step per latent.
    pub iterations: usize,
    pub restarts: usize,
    pub adam: AdamConfig,
    /// `None` enables autocorrelation-domain descent exactly for Fourier operators.
    pub precondition_fourier: Option<bool>,
    /// Run restarts on the rayon pool.
    pub parallel: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { iterations: 2000, restarts: 5, adam: AdamConfig::default(), precondition_fourier: None, parallel: false }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        if !(self.adam.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }

    fn objective(&self, mode: OperatorMode) -> Result<Objective> {
        let fourier = mode == OperatorMode::Fourier;
        match self.precondition_fourier {
            Some(true) if !fourier => Err(Error::invalid("autocorrelation preconditioning requires a Fourier operator")),
            Some(true) => Ok(Objective::Autocorrelation),
            Some(false) => Ok(Objective::Direct),
            None if fourier => Ok(Objective::Autocorrelation),
            None => Ok(Objective::Direct),
        }
    }
}

/// Which residual the descent differentiates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// `‖y − Σ|A G(z_l)|²‖²`.
    Direct,
    /// `‖F⁻¹y − Σ G(z_l) ⋆ G(z_l)‖²`.
    Autocorrelation,
}

/// Per-restart record.
#[derive(Clone, Debug, PartialEq)]
pub struct RestartRecord<T> {
    /// Objective at the start of every outer iteration, then once more at the end.
    pub loss_trace: Vec<T>,
    /// `‖∇_{z_l}‖` per outer iteration, one entry per latent.
    pub grad_norms: Vec<Vec<T>>,
    /// Measurement residual of the final iterate, `None` if the restart diverged.
    pub residual: Option<T>,
    pub diagnostic: Option<String>,
}

impl<T: Scalar> RestartRecord<T> {
    /// Best-so-far envelope of the loss trace.
    pub fn envelope(&self) -> Vec<T> {
        let mut best = T::infinity();
        self.loss_trace
            .iter()
            .map(|&v| {
                best = best.min(v);
                best
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult<T> {
    pub estimates: Vec<Image<T>>,
    /// Latents of the selected restart (empty for pipelines without a generator).
    pub latents: Vec<LatentVector<T>>,
    pub restarts: Vec<RestartRecord<T>>,
    pub selected_restart: usize,
    /// `‖y − Σ_l |A x̂_l|²‖²` recomputed from `estimates`.
    pub final_residual: T,
}

struct SourceState<T> {
    z: Vec<T>,
    cache: ForwardCache<T>,
    ax: Vec<Complex<T>>,
    term: Vec<Complex<T>>,
    adam: AdamState<T>,
}

struct Context<'a, T: Scalar> {
    a: &'a MeasurementOperator<T>,
    y: &'a [T],
    g: &'a GeneratorNetwork<T>,
    opts: &'a SolverOptions,
    objective: Objective,
    fft: Option<Fft2<T>>,
    target: Vec<Complex<T>>,
}

impl<T: Scalar> Context<'_, T> {
    fn refresh(&self, s: &mut SourceState<T>) {
        s.cache = self.g.forward_cached(&s.z);
        s.ax = self.a.apply_real_unchecked(s.cache.output());
        s.term = match (&self.objective, &self.fft) {
            (Objective::Autocorrelation, Some(fft)) => {
                objective::autocorrelation(fft, &objective::pad_to(s.cache.output(), self.a.side(), fft.rows()))
            }
            _ => s.ax.iter().map(|v| Complex::new(v.norm_sqr(), T::zero())).collect(),
        };
    }

    fn state(&self, z: Vec<T>) -> SourceState<T> {
        let dim = z.len();
        let mut s = SourceState { z, cache: self.g.forward_cached(&vec![T::zero(); dim]), ax: Vec::new(), term: Vec::new(), adam: AdamState::new(dim) };
        self.refresh(&mut s);
        s
    }

    /// Residual in the objective's domain and its squared norm.
    fn residual(&self, states: &[SourceState<T>]) -> (Vec<Complex<T>>, T) {
        let mut r = self.target.clone();
        for s in states {
            for (ri, t) in r.iter_mut().zip(&s.term) {
                *ri = *ri - t;
            }
        }
        let loss = r.iter().map(|v| v.norm_sqr()).sum();
        (r, loss)
    }

    fn measurement_weights(&self, r: Vec<Complex<T>>) -> Vec<T> {
        match (&self.objective, &self.fft) {
            (Objective::Autocorrelation, Some(fft)) => objective::autocorrelation_residual_to_measurement(fft, r),
            _ => r.into_iter().map(|v| v.re).collect(),
        }
    }

    fn run_restart(&self, init: Vec<LatentVector<T>>) -> (RestartRecord<T>, Vec<SourceState<T>>) {
        let mut states: Vec<SourceState<T>> = init.into_iter().map(|z| self.state(z.into_vec())).collect();
        let mut record = RestartRecord { loss_trace: Vec::with_capacity(self.opts.iterations + 1), grad_norms: Vec::with_capacity(self.opts.iterations), residual: None, diagnostic: None };

        for it in 0..self.opts.iterations {
            let mut norms = Vec::with_capacity(states.len());
            for l in 0..states.len() {
                let (r, loss) = self.residual(&states);
                if l == 0 {
                    record.loss_trace.push(loss);
                }
                if !loss.is_finite() {
                    record.diagnostic = Some(format!("non-finite loss at iteration {it}, latent {l}"));
                    return (record, states);
                }
                let w = self.measurement_weights(r);
                let s = &mut states[l];
                let dx = self.a.intensity_gradient(&w, &s.ax);
                let dz = self.g.vjp_cached(&s.cache, &dx);
                norms.push(dz.iter().map(|&v| v * v).sum::<T>().sqrt());
                if dz.iter().any(|v| !v.is_finite()) {
                    record.diagnostic = Some(format!("non-finite gradient at iteration {it}, latent {l}"));
                    return (record, states);
                }
                s.adam.step(&self.opts.adam, &mut s.z, &dz);
                self.refresh(s);
            }
            record.grad_norms.push(norms);
        }
        let (_, loss) = self.residual(&states);
        record.loss_trace.push(loss);
        if !loss.is_finite() {
            record.diagnostic = Some("non-finite final loss".into());
            return (record, states);
        }
        let images: Vec<&[T]> = states.iter().map(|s| s.cache.output()).collect();
        let residual = metrics::residual_unchecked(self.a, self.y, &images);
        if residual.is_finite() {
            record.residual = Some(residual);
        } else {
            record.diagnostic = Some("non-finite measurement residual".into());
        }
        (record, states)
    }
}

/// Runs `opts.restarts` restarts from i.i.d. `N(0, I)` latents drawn from
/// `stream` (restart `r` uses `stream.fork(r)`).
pub fn solve<T: Scalar>(
    a: &MeasurementOperator<T>,
    y: &[T],
    g: &GeneratorNetwork<T>,
    sources: usize,
    opts: &SolverOptions,
    stream: &RngStream,
) -> Result<ReconstructionResult<T>> {
    if sources == 0 {
        return Err(Error::invalid("need at least one source"));
    }
    let inits = (0..opts.restarts)
        .map(|r| {
            let mut s = stream.fork(r as u64);
            (0..sources).map(|_| LatentVector::random(g.latent_dim(), &mut s)).collect()
        })
        .collect();
    solve_from(a, y, g, inits, opts)
}

/// Runs one restart per entry of `inits`.
pub fn solve_from<T: Scalar>(
    a: &MeasurementOperator<T>,
    y: &[T],
    g: &GeneratorNetwork<T>,
    inits: Vec<Vec<LatentVector<T>>>,
    opts: &SolverOptions,
) -> Result<ReconstructionResult<T>> {
    opts.validate()?;
    let first = inits.first().ok_or_else(|| Error::invalid("no restarts"))?;
    let count = first.len();
    if inits.iter().any(|i| i.len() != count) {
        return Err(Error::invalid("restarts disagree on the number of sources"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observation"));
    }
    objective::check_inputs(a, y, g, first)?;

    let objective = opts.objective(a.mode())?;
    let fft = a.fourier_side().map(|s| Fft2::new(s, s));
    let target = match (&objective, &fft) {
        (Objective::Autocorrelation, Some(f)) => objective::autocorrelation_target(f, y),
        _ => y.iter().map(|&v| Complex::new(v, T::zero())).collect(),
    };
    let ctx = Context { a, y, g, opts, objective, fft, target };

    let runs: Vec<(RestartRecord<T>, Vec<SourceState<T>>)> = if opts.parallel {
        inits.into_par_iter().map(|init| ctx.run_restart(init)).collect()
    } else {
        inits.into_iter().map(|init| ctx.run_restart(init)).collect()
    };

    let mut best: Option<(usize, T)> = None;
    for (i, (rec, _)) in runs.iter().enumerate() {
        if let Some(res) = rec.residual {
            if best.is_none_or(|(_, b)| res < b) {
                best = Some((i, res));
            }
        }
    }
    let Some((selected, _)) = best else {
        let why: Vec<String> = runs.iter().filter_map(|(r, _)| r.diagnostic.clone()).collect();
        return Err(Error::Diverged(why.join("; ")));
    };

    let mut records = Vec::with_capacity(runs.len());
    let mut chosen = None;
    for (i, (rec, states)) in runs.into_iter().enumerate() {
        if i == selected {
            chosen = Some(states);
        }
        records.push(rec);
    }
    let states = chosen.expect("selected restart exists");
    let side = a.side();
    let estimates: Vec<Image<T>> = states
        .iter()
        .map(|s| Image::new(side, side, s.cache.output().to_vec()).expect("generator output shape"))
        .collect();
    let latents = states.into_iter().map(|s| LatentVector::new(s.z)).collect::<Result<Vec<_>>>()?;
    let final_residual = metrics::measurement_residual(a, y, &estimates)?;
    Ok(ReconstructionResult { estimates, latents, restarts: records, selected_restart: selected, final_residual })
}
