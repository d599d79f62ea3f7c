//! Config-driven experiment runner: trials, scoring, and output files.
//!
//! A run writes `<output>/<config-hash>/` containing `report.csv`,
//! `summary.csv`, `timings.csv`, `config.txt`, `traces/` and `grids/`.
//! Everything except `timings.csv` is a pure function of the config.

mod config;
mod grid;
mod report;

pub use config::{format_snr, DatasetChoice, ExperimentConfig, GeneratorSource, Method};
pub use grid::{emit_image_grid, encode_pgm, SEPARATOR};
pub use report::{gridplot, parse_report_csv, render_table, report_csv, summarize, summary_csv, timings_csv, Summary, TrialRecord, REPORT_HEADER, SUMMARY_HEADER};

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::baseline::{learn_dictionary_ksvd, load_dictionary, solve_uss_pr, DictionaryModel, KsvdOptions, KsvdOutcome, Provenance};
use crate::datasets::{sample_mixture, ImageDataset, SourceSet, Split};
use crate::deep_solver::{solve, write_restart_traces, write_trace_csv};
use crate::generator::{load_weights_as, GeneratorNetwork, LatentVector};
use crate::measurement::{observe, MeasurementOperator, NoiseSpec, OperatorMode};
use crate::metrics::resolved_nmse;
use crate::ndcore::{splitmix64, Image, RngStream};
use crate::{Error, Result};

const OPERATOR_SALT: u64 = 0x6f70_6572_6174_6f72;
const DICT_SALT: u64 = 0x6469_6374_696f_6e61;

/// Seed of trial `t`; every random draw of the trial derives from it.
pub fn trial_seed(master: u64, t: usize) -> u64 {
    splitmix64(master ^ splitmix64(t as u64 + 1))
}

/// Operator seed used when the operator is not redrawn per trial.
pub fn default_operator_seed(master: u64) -> u64 {
    splitmix64(master ^ OPERATOR_SALT)
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub config_hash: String,
    pub output_dir: PathBuf,
    pub rows: Vec<TrialRecord>,
    pub summaries: Vec<Summary>,
}

pub fn load_generator(cfg: &ExperimentConfig) -> Result<GeneratorNetwork<f64>> {
    match &cfg.generator {
        GeneratorSource::Weights(p) => load_weights_as(p, None),
        GeneratorSource::Random(seed) => Ok(GeneratorNetwork::random(cfg.arch, &mut RngStream::new(*seed))),
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    g: GeneratorNetwork<f64>,
    side: usize,
    dataset: Option<ImageDataset<f64>>,
    dictionary: Option<DictionaryModel<f64>>,
    fixed_operator: Option<MeasurementOperator<f64>>,
    dir: PathBuf,
}

struct Scored {
    estimates: Option<Vec<Image<f64>>>,
    record: TrialRecord,
}

impl Context<'_> {
    fn sources(&self, stream: &mut RngStream) -> Result<SourceSet<f64>> {
        match &self.dataset {
            Some(ds) => sample_mixture(ds, self.cfg.sources, stream),
            None => {
                let sources = (0..self.cfg.sources).map(|_| self.g.forward(&LatentVector::random(self.g.latent_dim(), stream))).collect();
                Ok(SourceSet { sources, indices: Vec::new() })
            }
        }
    }

    fn record(&self, method: Method, t: usize, seed: u64) -> TrialRecord {
        TrialRecord {
            dataset: self.cfg.dataset.as_str().into(),
            mode: self.cfg.mode.as_str().into(),
            sources: self.cfg.sources,
            snr: self.cfg.snr,
            method: method.as_str().into(),
            trial: t,
            seed,
            resolved_nmse: f64::NAN,
            residual: f64::NAN,
            wall_time: 0.0,
            diagnostic: None,
        }
    }

    fn trial(&self, t: usize) -> Result<Vec<TrialRecord>> {
        let cfg = self.cfg;
        let seed = trial_seed(cfg.master_seed, t);
        let root = RngStream::new(seed);
        let truth = self.sources(&mut root.fork(0))?;
        let owned;
        let a = match &self.fixed_operator {
            Some(a) => a,
            None => {
                owned = MeasurementOperator::build(cfg.mode, self.side, root.fork(1).next_u64())?;
                &owned
            }
        };
        let noise = if cfg.snr.is_infinite() { NoiseSpec::noiseless() } else { NoiseSpec::new(cfg.snr, root.fork(2).next_u64())? };
        let obs = observe(a, &truth, noise)?;

        let mut scored = Vec::new();
        if cfg.method.runs_deep() {
            let start = Instant::now();
            let mut rec = self.record(Method::Deep, t, seed);
            let mut estimates = None;
            match solve(a, &obs.y, &self.g, cfg.sources, &cfg.solver, &root.fork(3)) {
                Ok(res) => {
                    let mut w = BufWriter::new(fs::File::create(self.dir.join("traces").join(format!("trial{t:03}_deep.csv")))?);
                    write_trace_csv(&res, &mut w)?;
                    let (nmse, matching) = resolved_nmse(&res.estimates, &truth.sources, cfg.mode)?;
                    rec.resolved_nmse = nmse;
                    rec.residual = res.final_residual;
                    estimates = Some(matching.align(&res.estimates));
                }
                Err(Error::Diverged(why)) => rec.diagnostic = Some(why),
                Err(e) => return Err(e),
            }
            rec.wall_time = start.elapsed().as_secs_f64();
            scored.push(Scored { estimates, record: rec });
        }
        if cfg.method.runs_uss_pr() {
            let start = Instant::now();
            let d = self.dictionary.as_ref().expect("dictionary loaded for uss_pr");
            let mut rec = self.record(Method::UssPr, t, seed);
            let mut estimates = None;
            match solve_uss_pr(a, &obs.y, d, cfg.sources, &cfg.pr, &root.fork(4)) {
                Ok(res) => {
                    for (l, stage) in res.stages.iter().enumerate() {
                        let path = self.dir.join("traces").join(format!("trial{t:03}_uss_pr_source{}.csv", l + 1));
                        write_restart_traces(&stage.restarts, 1, &mut BufWriter::new(fs::File::create(path)?))?;
                    }
                    let (nmse, matching) = resolved_nmse(&res.estimates, &truth.sources, cfg.mode)?;
                    rec.resolved_nmse = nmse;
                    rec.residual = res.final_residual;
                    estimates = Some(matching.align(&res.estimates));
                }
                Err(Error::Diverged(why)) => rec.diagnostic = Some(why),
                Err(e) => return Err(e),
            }
            rec.wall_time = start.elapsed().as_secs_f64();
            scored.push(Scored { estimates, record: rec });
        }

        let mut rows = vec![truth.sources.clone()];
        for s in &scored {
            rows.push(s.estimates.clone().unwrap_or_else(|| vec![Image::zeros(self.side, self.side); cfg.sources]));
        }
        emit_image_grid(&rows, self.dir.join("grids").join(format!("trial{t:03}.pgm")))?;
        Ok(scored.into_iter().map(|s| s.record).collect())
    }
}

fn load_dataset(cfg: &ExperimentConfig, split: Split) -> Result<Option<ImageDataset<f64>>> {
    match cfg.dataset {
        DatasetChoice::Images(name) => {
            let dir = cfg.data_dir.as_deref().ok_or_else(|| Error::Config("image datasets need data_dir".into()))?;
            ImageDataset::load(dir, name, split).map(Some)
        }
        DatasetChoice::Planted => Ok(None),
    }
}

fn check_side(cfg: &ExperimentConfig, g: &GeneratorNetwork<f64>, dataset: &Option<ImageDataset<f64>>) -> Result<usize> {
    let side = g.output_side();
    if let Some(img) = dataset.as_ref().and_then(|d| d.images.first()) {
        if img.rows() != side {
            return Err(Error::Config(format!("generator emits {side}x{side} images but {} images are {}x{}", cfg.dataset.as_str(), img.rows(), img.cols())));
        }
    }
    Ok(side)
}

/// Dictionaries pin the operator they were trained for.
fn fixed_operator_seed(cfg: &ExperimentConfig, dict: Option<&DictionaryModel<f64>>) -> Result<Option<u64>> {
    if cfg.mode == OperatorMode::Fourier {
        return Ok(Some(0));
    }
    if let Some(d) = dict {
        let seed = d.provenance.operator_seed.ok_or_else(|| Error::Config("dictionary provenance lacks an operator seed".into()))?;
        if cfg.operator_seed.is_some_and(|s| s != seed) {
            return Err(Error::Config(format!("operator_seed {} disagrees with the dictionary's {seed}", cfg.operator_seed.unwrap_or_default())));
        }
        return Ok(Some(seed));
    }
    if cfg.operator_redraw {
        Ok(None)
    } else {
        Ok(Some(cfg.operator_seed.unwrap_or_else(|| default_operator_seed(cfg.master_seed))))
    }
}

fn check_provenance(cfg: &ExperimentConfig, d: &DictionaryModel<f64>, side: usize) -> Result<()> {
    let p = &d.provenance;
    if p.mode != cfg.mode.as_str() {
        return Err(Error::Config(format!("dictionary was trained for {} measurements, config uses {}", p.mode, cfg.mode)));
    }
    if p.side != side {
        return Err(Error::Config(format!("dictionary was trained on {0}x{0} images, generator emits {side}x{side}", p.side)));
    }
    if cfg.dataset != DatasetChoice::Planted && p.dataset != cfg.dataset.as_str() {
        return Err(Error::Config(format!("dictionary was trained on {}, config uses {}", p.dataset, cfg.dataset.as_str())));
    }
    Ok(())
}

/// Runs every trial and writes the output tree.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let g = load_generator(cfg)?;
    let dataset = load_dataset(cfg, Split::Test)?;
    let side = check_side(cfg, &g, &dataset)?;
    let dictionary = match (&cfg.dictionary, cfg.method.runs_uss_pr()) {
        (Some(p), true) => {
            let d = load_dictionary(p)?;
            check_provenance(cfg, &d, side)?;
            Some(d)
        }
        _ => None,
    };
    let fixed_operator = fixed_operator_seed(cfg, dictionary.as_ref())?.map(|seed| MeasurementOperator::build(cfg.mode, side, seed)).transpose()?;
    if let (Some(d), Some(a)) = (&dictionary, &fixed_operator) {
        if d.m() != a.m() {
            return Err(Error::Config(format!("dictionary atoms have length {}, operator output is {}", d.m(), a.m())));
        }
    }

    let hash = cfg.hash();
    let dir = cfg.output.join(&hash);
    fs::create_dir_all(dir.join("traces"))?;
    fs::create_dir_all(dir.join("grids"))?;
    fs::write(dir.join("config.txt"), format!("{}hash={hash}\n", cfg.canonical()))?;

    let ctx = Context { cfg, g, side, dataset, dictionary, fixed_operator, dir: dir.clone() };
    let per_trial: Vec<Result<Vec<TrialRecord>>> =
        if cfg.parallel_trials { (0..cfg.trials).into_par_iter().map(|t| ctx.trial(t)).collect() } else { (0..cfg.trials).map(|t| ctx.trial(t)).collect() };
    let mut rows = Vec::new();
    for r in per_trial {
        rows.extend(r?);
    }
    let summaries = summarize(&rows);
    fs::write(dir.join("report.csv"), report_csv(&rows))?;
    fs::write(dir.join("summary.csv"), summary_csv(&summaries))?;
    fs::write(dir.join("timings.csv"), timings_csv(&rows))?;
    Ok(RunReport { config_hash: hash, output_dir: dir, rows, summaries })
}

/// Trains a one-hot K-SVD dictionary on single-source intensities of the
/// training split (or of generator samples for `planted`).
pub fn learn_dictionary(cfg: &ExperimentConfig) -> Result<KsvdOutcome<f64>> {
    let g = match cfg.dataset {
        DatasetChoice::Planted => Some(load_generator(cfg)?),
        DatasetChoice::Images(_) => None,
    };
    let dataset = load_dataset(cfg, Split::Train)?;
    let side = match (&g, &dataset) {
        (Some(g), _) => g.output_side(),
        (None, Some(ds)) => ds.images.first().map(Image::rows).ok_or_else(|| Error::Config("training split is empty".into()))?,
        (None, None) => unreachable!("planted datasets load a generator"),
    };
    let operator_seed = match cfg.mode {
        OperatorMode::Fourier => None,
        _ => Some(cfg.operator_seed.unwrap_or_else(|| default_operator_seed(cfg.master_seed))),
    };
    let a = MeasurementOperator::<f64>::build(cfg.mode, side, operator_seed.unwrap_or(0))?;
    let root = RngStream::new(splitmix64(cfg.master_seed ^ DICT_SALT));
    let images: Vec<Image<f64>> = match (&g, &dataset) {
        (Some(g), _) => {
            let mut s = root.fork(0);
            (0..cfg.dict_train_count).map(|_| g.forward(&LatentVector::random(g.latent_dim(), &mut s))).collect()
        }
        (None, Some(ds)) => {
            let count = cfg.dict_train_count.min(ds.len());
            root.fork(0).sample_indices(ds.len(), count).into_iter().map(|i| ds.images[i].clone()).collect()
        }
        (None, None) => unreachable!(),
    };
    let training = images.iter().map(|x| a.intensity(x.as_slice())).collect::<Result<Vec<_>>>()?;
    let provenance = Provenance {
        dataset: cfg.dataset.as_str().into(),
        mode: cfg.mode.as_str().into(),
        side,
        operator_seed,
        train_seed: cfg.master_seed,
        train_count: training.len(),
        sweeps: cfg.dict_sweeps,
    };
    let opts = KsvdOptions { atoms: cfg.dict_atoms, sweeps: cfg.dict_sweeps, ..KsvdOptions::default() };
    learn_dictionary_ksvd(&training, &opts, &mut root.fork(1), provenance)
}

/// Reads every `report.csv` path given and renders the aggregate table.
pub fn gridplot_table(paths: &[impl AsRef<Path>]) -> Result<String> {
    Ok(render_table(&gridplot(paths)?))
}
