//! Fast property checks behind `s3pr check`: small random instances of the
//! invariants the numerical core relies on.

use num_complex::Complex;

use crate::baseline::{learn_dictionary_ksvd, omp_lhot, DictionaryModel, KsvdOptions, Provenance};
use crate::deep_solver::{autocorrelation_loss, loss, loss_gradient};
use crate::generator::{GeneratorArch, GeneratorNetwork, LatentVector};
use crate::measurement::{MeasurementOperator, OperatorMode};
use crate::metrics::{resolved_nmse, Flip};
use crate::ndcore::{Image, RngStream};
use crate::Result;

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn() -> Result<(bool, String)>;

const CHECKS: [(&str, Check); 5] = [
    ("latent gradient vs finite differences", gradients),
    ("operator adjoint and CDP frame identities", operators),
    ("autocorrelation loss ratio", autocorrelation_ratio),
    ("K-SVD monotonicity and OMP support recovery", dictionary),
    ("resolved NMSE invariances", metric_invariance),
];

pub fn run_checks() -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|(name, f)| match f() {
            Ok((passed, detail)) => CheckOutcome { name, passed, detail },
            Err(e) => CheckOutcome { name, passed: false, detail: format!("error: {e}") },
        })
        .collect()
}

fn operators_for(side: usize, seed: u64) -> Result<Vec<MeasurementOperator<f64>>> {
    let n = side * side;
    Ok(vec![MeasurementOperator::gaussian(n, 4 * n, seed)?, MeasurementOperator::cdp(n, seed)?, MeasurementOperator::fourier(n)?])
}

fn planted_y(a: &MeasurementOperator<f64>, g: &GeneratorNetwork<f64>, z: &[LatentVector<f64>]) -> Result<Vec<f64>> {
    let mut y = vec![0.0; a.m()];
    for zl in z {
        for (yi, v) in y.iter_mut().zip(a.intensity(g.forward(zl).as_slice())?) {
            *yi += v;
        }
    }
    Ok(y)
}

fn gradients() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for (k, a) in operators_for(16, 1)?.iter().enumerate() {
        let mut s = RngStream::new(10 + k as u64);
        let g = GeneratorNetwork::random(GeneratorArch::toy(), &mut s);
        let truth: Vec<_> = (0..2).map(|_| LatentVector::random(100, &mut s)).collect();
        let z: Vec<_> = (0..2).map(|_| LatentVector::random(100, &mut s)).collect();
        let y = planted_y(a, &g, &truth)?;
        let grad = loss_gradient(a, &y, &g, &z, 0)?;
        let h = 1e-5;
        let mut diff = 0.0;
        let mut scale = 0.0;
        for (i, &g_i) in grad.iter().enumerate().take(100) {
            let (mut p, mut q) = (z.clone(), z.clone());
            p[0].as_mut_slice()[i] += h;
            q[0].as_mut_slice()[i] -= h;
            let fd = (loss(a, &y, &g, &p)? - loss(a, &y, &g, &q)?) / (2.0 * h);
            diff += (fd - g_i).powi(2);
            scale += fd * fd;
        }
        worst = worst.max((diff / scale).sqrt());
    }
    Ok((worst < 1e-4, format!("max relative error {worst:.2e}")))
}

fn operators() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut frame: f64 = 0.0;
    for a in operators_for(8, 2)? {
        let mut s = RngStream::new(3);
        let x: Vec<Complex<f64>> = s.randn_complex(a.n());
        let v: Vec<Complex<f64>> = s.randn_complex(a.m());
        let lhs: Complex<f64> = a.apply_complex(&x)?.iter().zip(&v).map(|(p, q)| q.conj() * p).sum();
        let rhs: Complex<f64> = a.adjoint_apply(&v)?.iter().zip(&x).map(|(p, q)| p.conj() * q).sum();
        worst = worst.max((lhs - rhs).norm() / lhs.norm());
        if a.mode() == OperatorMode::Cdp {
            let back = a.adjoint_apply(&a.apply_complex(&x)?)?;
            frame = back.iter().zip(&x).map(|(p, q)| (p - q * 4.0).norm()).fold(0.0, f64::max);
        }
    }
    Ok((worst < 1e-10 && frame < 1e-10, format!("adjoint mismatch {worst:.2e}, CDP frame error {frame:.2e}")))
}

fn autocorrelation_ratio() -> Result<(bool, String)> {
    let a = MeasurementOperator::<f64>::fourier(256)?;
    let mut s = RngStream::new(4);
    let g = GeneratorNetwork::random(GeneratorArch::toy(), &mut s);
    let truth: Vec<_> = (0..2).map(|_| LatentVector::random(100, &mut s)).collect();
    let y = planted_y(&a, &g, &truth)?;
    let mut ratios = Vec::new();
    for _ in 0..10 {
        let z: Vec<_> = (0..2).map(|_| LatentVector::random(100, &mut s)).collect();
        ratios.push(autocorrelation_loss(&a, &y, &g, &z)? / loss(&a, &y, &g, &z)?);
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / lo;
    Ok((spread < 1e-8, format!("ratio {lo:.12} spread {spread:.2e}")))
}

fn dictionary() -> Result<(bool, String)> {
    let mut s = RngStream::new(5);
    let training: Vec<Vec<f64>> = (0..80).map(|_| s.randn(16)).collect();
    let out = learn_dictionary_ksvd(&training, &KsvdOptions { atoms: 8, sweeps: 5, ..KsvdOptions::default() }, &mut s, Provenance::default())?;
    let monotone = out.objective_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let d = DictionaryModel::from_atoms((0..100).map(|_| s.randn(400)).collect(), Provenance::default())?;
    let mut hits = 0;
    for t in 0..20 {
        let pick = s.sample_indices(100, 2);
        let y: Vec<f64> = d.atom(pick[0]).iter().zip(d.atom(pick[1])).map(|(p, q)| (1.0 + t as f64) * p - 2.0 * q).collect();
        let mut got = omp_lhot(&d, &y, 2)?.support;
        got.sort_unstable();
        let mut want = pick.clone();
        want.sort_unstable();
        hits += (got == want) as usize;
    }
    Ok((monotone && hits == 20, format!("objective monotone: {monotone}, OMP supports recovered {hits}/20")))
}

fn metric_invariance() -> Result<(bool, String)> {
    let mut s = RngStream::new(6);
    let truths: Vec<Image<f64>> = (0..3).map(|_| Image::new(8, 8, s.randn(64)).expect("shape")).collect();
    let transformed: Vec<Image<f64>> = [2usize, 0, 1].iter().zip([Flip::LeftRight, Flip::Both, Flip::UpDown]).map(|(&i, f)| f.apply(&truths[i]).scaled(-1.0)).collect();
    let (fourier, _) = resolved_nmse(&transformed, &truths, OperatorMode::Fourier)?;
    let (gaussian, _) = resolved_nmse(&transformed, &truths, OperatorMode::Gaussian)?;
    Ok((fourier < 1e-24 && gaussian > 0.0, format!("Fourier {fourier:.1e}, Gaussian {gaussian:.3}")))
}
