use proptest::prelude::*;

use super::dictionary::{dot, norm};
use super::*;
use crate::measurement::MeasurementOperator;
use crate::metrics::{nmse, resolved_nmse};
use crate::ndcore::{Image, RngStream};

fn random_vectors(count: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut s = RngStream::new(seed);
    (0..count).map(|_| s.randn(m)).collect()
}

fn random_dictionary(k: usize, m: usize, seed: u64) -> DictionaryModel<f64> {
    DictionaryModel::from_atoms(random_vectors(k, m, seed), Provenance::default()).unwrap()
}

fn short(iterations: usize, restarts: usize) -> PrOptions {
    PrOptions { iterations, restarts, ..PrOptions::default() }
}

#[test]
fn ksvd_recovers_orthogonal_training_set() {
    let (k, m) = (6, 10);
    let training: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut v = vec![0.0; m];
            v[i + 2] = (i + 1) as f64 * if i % 2 == 0 { 1.0 } else { -1.0 };
            v
        })
        .collect();
    let out = learn_dictionary_ksvd(&training, &KsvdOptions { atoms: k, sweeps: 3, ..KsvdOptions::default() }, &mut RngStream::new(1), Provenance::default()).unwrap();
    assert!(out.objective_history.iter().all(|&v| v.abs() < 1e-20), "{:?}", out.objective_history);
    for y in &training {
        let hit = out.dictionary.atoms().filter(|d| (dot(d, y).abs() - norm(y)).abs() < 1e-12).count();
        assert_eq!(hit, 1);
    }
}

#[test]
fn ksvd_single_vector() {
    let y: Vec<Vec<f64>> = vec![vec![3.0, 0.0, -4.0]];
    let out = learn_dictionary_ksvd(&y, &KsvdOptions { atoms: 1, sweeps: 2, ..KsvdOptions::default() }, &mut RngStream::new(0), Provenance::default()).unwrap();
    let d = out.dictionary.atom(0);
    let sign = d[0].signum();
    for (a, b) in d.iter().zip([0.6, 0.0, -0.8]) {
        assert!((a - sign * b).abs() < 1e-15);
    }
}

#[test]
fn ksvd_rejects_bad_input() {
    let opts = KsvdOptions { atoms: 3, sweeps: 1, ..KsvdOptions::default() };
    let mut s = RngStream::new(0);
    assert!(learn_dictionary_ksvd::<f64>(&[], &opts, &mut s, Provenance::default()).is_err());
    assert!(learn_dictionary_ksvd(&random_vectors(2, 4, 0), &opts, &mut s, Provenance::default()).is_err());
}

#[test]
fn ksvd_handles_empty_atoms() {
    // Four copies of one vector and one other: at most two atoms are ever used.
    let mut training: Vec<Vec<f64>> = vec![vec![1.0, 2.0, 0.0]; 4];
    training.push(vec![0.0, 0.0, 1.0]);
    training.push(vec![0.0, 0.0, 1.0]);
    let out = learn_dictionary_ksvd(&training, &KsvdOptions { atoms: 4, sweeps: 3, ..KsvdOptions::default() }, &mut RngStream::new(3), Provenance::default()).unwrap();
    assert!(out.objective_history.last().unwrap().abs() < 1e-20);
    for d in out.dictionary.atoms() {
        assert!((norm(d) - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn ksvd_objective_monotone_and_atoms_unit(seed in any::<u64>(), k in 2usize..8) {
        let training = random_vectors(60, 12, seed);
        let out = learn_dictionary_ksvd(&training, &KsvdOptions { atoms: k, sweeps: 6, ..KsvdOptions::default() }, &mut RngStream::new(seed ^ 7), Provenance::default()).unwrap();
        let h = &out.objective_history;
        prop_assert_eq!(h.len(), 7);
        for w in h.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", h);
        }
        for d in out.dictionary.atoms() {
            prop_assert!((norm(d) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn omp_residual_non_increasing(seed in any::<u64>(), l in 1usize..6) {
        let d = random_dictionary(12, 20, seed);
        let y = random_vectors(1, 20, seed ^ 1).remove(0);
        let code = omp_lhot(&d, &y, l).unwrap();
        prop_assert_eq!(code.support.len(), l);
        let mut sorted = code.support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), l);
        for w in code.residual_norms.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }
}

#[test]
fn omp_exact_atom() {
    let d = random_dictionary(10, 30, 5);
    let y: Vec<f64> = d.atom(7).iter().map(|v| 3.0 * v).collect();
    let code = omp_lhot(&d, &y, 1).unwrap();
    assert_eq!(code.support, vec![7]);
    assert!((code.coefficients[0] - 3.0).abs() < 1e-12);
    assert!(!code.rank_deficient);
}

/// Least-squares residual of `y` over a pair of atoms, by the 2×2 normal equations.
fn pair_fit(d: &DictionaryModel<f64>, i: usize, j: usize, y: &[f64]) -> (f64, [f64; 2]) {
    let (a, b) = (d.atom(i), d.atom(j));
    let (g11, g12, g22) = (dot(a, a), dot(a, b), dot(b, b));
    let (r1, r2) = (dot(a, y), dot(b, y));
    let det = g11 * g22 - g12 * g12;
    let c = [(g22 * r1 - g12 * r2) / det, (g11 * r2 - g12 * r1) / det];
    let res = y.iter().zip(a.iter().zip(b)).map(|(&yi, (&ai, &bi))| (yi - c[0] * ai - c[1] * bi).powi(2)).sum();
    (res, c)
}

#[test]
fn omp_two_hot_matches_exhaustive_search() {
    let d = random_dictionary(20, 400, 9);
    let y: Vec<f64> = d.atom(1).iter().zip(d.atom(4)).map(|(a, b)| 2.0 * a + 5.0 * b).collect();
    let mut best = (f64::INFINITY, 0, 0, [0.0; 2]);
    for i in 0..d.len() {
        for j in i + 1..d.len() {
            let (res, c) = pair_fit(&d, i, j, &y);
            if res < best.0 {
                best = (res, i, j, c);
            }
        }
    }
    assert_eq!((best.1, best.2), (1, 4));
    let code = omp_lhot(&d, &y, 2).unwrap();
    let mut pairs: Vec<(usize, f64)> = code.support.iter().copied().zip(code.coefficients.iter().copied()).collect();
    pairs.sort_by_key(|p| p.0);
    assert_eq!(pairs[0].0, 1);
    assert_eq!(pairs[1].0, 4);
    assert!((pairs[0].1 - 2.0).abs() < 1e-8 && (pairs[1].1 - 5.0).abs() < 1e-8);
    assert!((pairs[0].1 - best.3[0]).abs() < 1e-8 && (pairs[1].1 - best.3[1]).abs() < 1e-8);
}

#[test]
fn omp_full_support_spans() {
    let d = random_dictionary(5, 8, 2);
    let coef = [0.5, -1.0, 2.0, 0.0, 3.0];
    let y: Vec<f64> = (0..8).map(|i| (0..5).map(|k| coef[k] * d.atom(k)[i]).sum()).collect();
    let code = omp_lhot(&d, &y, 5).unwrap();
    assert!(*code.residual_norms.last().unwrap() < 1e-12);
}

#[test]
fn omp_rank_deficient_falls_back() {
    let d = DictionaryModel::<f64>::from_atoms(vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![0.0, 1.0]], Provenance::default()).unwrap();
    let code = omp_lhot(&d, &[3.0, 0.0], 2).unwrap();
    assert_eq!(code.support, vec![0, 1]);
    assert!(code.rank_deficient);
    assert!((code.coefficients[0] - 1.5).abs() < 1e-12 && (code.coefficients[1] - 1.5).abs() < 1e-12);
    assert!(code.residual_norms[2] < 1e-12);
}

#[test]
fn omp_rejects_bad_sparsity() {
    let d = random_dictionary(3, 4, 0);
    assert!(omp_lhot(&d, &[0.0; 4], 0).is_err());
    assert!(omp_lhot(&d, &[0.0; 4], 4).is_err());
    assert!(omp_lhot(&d, &[0.0; 3], 1).is_err());
}

fn toy_operator() -> MeasurementOperator<f64> {
    MeasurementOperator::gaussian(64, 256, 11).unwrap()
}

#[test]
fn pr_gradient_matches_finite_differences() {
    let a = toy_operator();
    let b = a.intensity(&RngStream::new(1).randn(64)).unwrap();
    let x: Vec<f64> = RngStream::new(2).randn(64);
    let g = pr_gradient(&a, &b, &x).unwrap();
    let h = 1e-5;
    let fd: Vec<f64> = (0..64)
        .map(|i| {
            let (mut p, mut q) = (x.clone(), x.clone());
            p[i] += h;
            q[i] -= h;
            (pr_objective(&a, &b, &p).unwrap() - pr_objective(&a, &b, &q).unwrap()) / (2.0 * h)
        })
        .collect();
    let err = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / norm(&fd);
    assert!(err < 1e-6, "relative error {err}");
}

#[test]
fn pr_warm_start_converges() {
    let a = toy_operator();
    let truth: Vec<f64> = RngStream::new(4).randn(64);
    let b = a.intensity(&truth).unwrap();
    let mut s = RngStream::new(5);
    let init: Vec<f64> = truth.iter().zip(s.randn::<f64>(64)).map(|(t, e)| t + 0.01 * e).collect();
    let out = phase_retrieve_from(&b, &a, vec![init], &short(1000, 1)).unwrap();
    let t = Image::new(8, 8, truth).unwrap();
    let e = Image::new(8, 8, out.estimate).unwrap();
    let err = nmse(&e, &t).unwrap().min(nmse(&e.scaled(-1.0), &t).unwrap());
    assert!(err < 1e-3, "nmse {err}");
}

#[test]
fn pr_zero_intensity_keeps_zero() {
    let a = toy_operator();
    let b = vec![0.0; 256];
    let mut s = RngStream::new(6);
    let inits = vec![s.randn(64), vec![0.0; 64], s.randn(64)];
    let out = phase_retrieve_from(&b, &a, inits, &short(50, 3)).unwrap();
    assert!(out.objective <= pr_objective(&a, &b, &[0.0; 64]).unwrap());
    assert_eq!(out.selected_restart, 1);
}

#[test]
fn pr_selects_smallest_final_objective() {
    let a = toy_operator();
    let b = a.intensity(&RngStream::new(7).randn(64)).unwrap();
    let out = phase_retrieve_gd(&b, &a, &short(40, 4), &RngStream::new(8)).unwrap();
    assert_eq!(out.restarts.len(), 4);
    for r in &out.restarts {
        assert!(out.objective <= r.residual.unwrap());
        assert_eq!(r.loss_trace.len(), 41);
    }
    assert_eq!(out.objective, pr_objective(&a, &b, &out.estimate).unwrap());
}

#[test]
fn pr_abandons_divergent_restarts() {
    let a = toy_operator();
    let b = a.intensity(&RngStream::new(7).randn(64)).unwrap();
    let opts = short(5, 2);
    let inits = vec![vec![f64::MAX.sqrt(); 64], RngStream::new(1).randn(64)];
    let out = phase_retrieve_from(&b, &a, inits, &opts).unwrap();
    assert_eq!(out.selected_restart, 1);
    assert!(out.restarts[0].diagnostic.is_some());
    let err = phase_retrieve_from(&b, &a, vec![vec![f64::MAX.sqrt(); 64]], &opts).unwrap_err();
    assert!(matches!(err, crate::Error::Diverged(_)));
}

#[test]
fn planted_atoms_pipeline() {
    let a = toy_operator();
    let mut s = RngStream::new(12);
    let truths: Vec<Vec<f64>> = (0..2).map(|_| s.randn(64)).collect();
    let intensities: Vec<Vec<f64>> = truths.iter().map(|x| a.intensity(x).unwrap()).collect();
    let d = DictionaryModel::from_atoms(intensities.clone(), Provenance::default()).unwrap();
    let y: Vec<f64> = intensities[0].iter().zip(&intensities[1]).map(|(p, q)| p + q).collect();
    let out = solve_uss_pr(&a, &y, &d, 2, &short(300, 2), &RngStream::new(13)).unwrap();

    for (k, est) in out.code.support.iter().zip(&out.intensities) {
        let err = est.iter().zip(&intensities[*k]).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9 * norm(&intensities[*k]), "atom {k}: {err}");
    }
    let truth_imgs: Vec<Image<f64>> = truths.iter().map(|t| Image::new(8, 8, t.clone()).unwrap()).collect();
    let (total, _) = resolved_nmse(&out.estimates, &truth_imgs, a.mode()).unwrap();
    let stage: f64 = out
        .code
        .support
        .iter()
        .zip(&out.estimates)
        .map(|(&k, e)| nmse(e, &truth_imgs[k]).unwrap().min(nmse(&e.scaled(-1.0), &truth_imgs[k]).unwrap()))
        .sum::<f64>()
        / 2.0;
    assert!(total <= stage + 1e-12, "{total} > {stage}");
    let images: Vec<Image<f64>> = out.estimates.clone();
    assert!((out.final_residual - crate::metrics::measurement_residual(&a, &y, &images).unwrap()).abs() < 1e-10);
}

#[test]
fn single_source_reduces_to_plain_pr() {
    let a = toy_operator();
    let d = DictionaryModel::from_atoms((0..4).map(|i| a.intensity(&RngStream::new(i).randn(64)).unwrap()).collect(), Provenance::default()).unwrap();
    let y: Vec<f64> = d.atom(2).iter().map(|v| 1.7 * v).collect();
    let opts = short(30, 2);
    let stream = RngStream::new(21);
    let out = solve_uss_pr(&a, &y, &d, 1, &opts, &stream).unwrap();
    assert_eq!(out.code.support, vec![2]);
    let direct = phase_retrieve_gd(&out.intensities[0], &a, &opts, &stream.fork(0)).unwrap();
    assert_eq!(out.estimates[0].as_slice(), direct.estimate.as_slice());
}

#[test]
fn uss_pr_rejects_mismatched_dictionary() {
    let a = toy_operator();
    let d = random_dictionary(3, 100, 0);
    assert!(solve_uss_pr(&a, &[0.0; 256], &d, 1, &short(1, 1), &RngStream::new(0)).is_err());
}

#[test]
fn dictionary_round_trip() {
    let mut d = random_dictionary(7, 13, 3);
    d.provenance = Provenance { dataset: "mnist".into(), mode: "gaussian".into(), side: 32, operator_seed: Some(99), train_seed: 4, train_count: 100, sweeps: 5 };
    let bytes = encode_dictionary(&d);
    let back: DictionaryModel<f64> = decode_dictionary(&bytes).unwrap();
    assert_eq!(back, d);
    assert_eq!(encode_dictionary(&back), bytes);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.bin");
    save_dictionary(&d, &path).unwrap();
    assert_eq!(load_dictionary::<f64>(&path).unwrap(), d);
}

#[test]
fn dictionary_format_errors() {
    let bytes = encode_dictionary(&random_dictionary(2, 3, 0));
    assert!(decode_dictionary::<f64>(&bytes[..bytes.len() - 1]).unwrap_err().to_string().contains("EOF"));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(decode_dictionary::<f64>(&bad).unwrap_err().to_string().contains("magic"));
    let mut tag = bytes.clone();
    tag[12] = b'X';
    assert!(decode_dictionary::<f64>(&tag).unwrap_err().to_string().contains("DICT"));
    assert!(crate::generator::decode_weights::<f64>(&bytes, None).is_err());
}
