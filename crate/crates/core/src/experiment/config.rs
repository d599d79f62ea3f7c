//! Flat `key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::baseline::PrOptions;
use crate::datasets::DatasetName;
use crate::deep_solver::{AdamConfig, SolverOptions};
use crate::generator::GeneratorArch;
use crate::measurement::OperatorMode;
use crate::metrics::MAX_RESOLVED_SOURCES;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetChoice {
    Images(DatasetName),
    /// Sources drawn as `G(z)` with random latents.
    Planted,
}

impl DatasetChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetChoice::Images(n) => n.as_str(),
            DatasetChoice::Planted => "planted",
        }
    }
}

impl FromStr for DatasetChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "planted" => Ok(DatasetChoice::Planted),
            other => other.parse().map(DatasetChoice::Images),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Deep,
    UssPr,
    Both,
}

impl Method {
    pub fn runs_deep(self) -> bool {
        matches!(self, Method::Deep | Method::Both)
    }

    pub fn runs_uss_pr(self) -> bool {
        matches!(self, Method::UssPr | Method::Both)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Deep => "deep",
            Method::UssPr => "uss_pr",
            Method::Both => "both",
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deep" => Ok(Method::Deep),
            "uss_pr" | "uss+pr" => Ok(Method::UssPr),
            "both" => Ok(Method::Both),
            _ => Err(Error::Config(format!("unknown method {s:?} (expected deep, uss_pr or both)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GeneratorSource {
    Weights(PathBuf),
    /// Random weights drawn from this seed.
    Random(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetChoice,
    pub mode: OperatorMode,
    pub sources: usize,
    /// `f64::INFINITY` disables noise.
    pub snr: f64,
    pub method: Method,
    pub trials: usize,
    pub master_seed: u64,
    pub solver: SolverOptions,
    pub pr: PrOptions,
    pub arch: GeneratorArch,
    pub generator: GeneratorSource,
    pub dictionary: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub output: PathBuf,
    /// Fresh Gaussian/CDP operator per trial; ignored while a dictionary pins the operator.
    pub operator_redraw: bool,
    pub operator_seed: Option<u64>,
    pub parallel_trials: bool,
    pub dict_train_count: usize,
    pub dict_atoms: usize,
    pub dict_sweeps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetChoice::Images(DatasetName::Mnist),
            mode: OperatorMode::Gaussian,
            sources: 2,
            snr: 50.0,
            method: Method::Deep,
            trials: 10,
            master_seed: 0,
            solver: SolverOptions::default(),
            pr: PrOptions::default(),
            arch: GeneratorArch::standard(),
            generator: GeneratorSource::Random(0),
            dictionary: None,
            data_dir: None,
            output: PathBuf::from("out"),
            operator_redraw: true,
            operator_seed: None,
            parallel_trials: false,
            dict_train_count: 10_000,
            dict_atoms: 500,
            dict_sweeps: 20,
        }
    }
}

fn parse_num<N: FromStr>(key: &str, v: &str) -> Result<N> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn parse_snr(v: &str) -> Result<f64> {
    match v {
        "inf" | "infinity" | "∞" | "none" => Ok(f64::INFINITY),
        _ => parse_num("snr", v),
    }
}

impl ExperimentConfig {
    /// Parses config text; `#` starts a comment, later keys override earlier ones.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Config(format!("line {}: {}", lineno + 1, e.to_string().trim_start_matches("config error: "))))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "mode" => self.mode = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "sources" | "L" => self.sources = parse_num(key, v)?,
            "snr" => self.snr = parse_snr(v)?,
            "method" => self.method = v.parse()?,
            "trials" => self.trials = parse_num(key, v)?,
            "master_seed" | "seed" => self.master_seed = parse_num(key, v)?,
            "iterations" => {
                self.solver.iterations = parse_num(key, v)?;
                self.pr.iterations = self.solver.iterations;
            }
            "restarts" => {
                self.solver.restarts = parse_num(key, v)?;
                self.pr.restarts = self.solver.restarts;
            }
            "pr_iterations" => self.pr.iterations = parse_num(key, v)?,
            "pr_restarts" => self.pr.restarts = parse_num(key, v)?,
            "learning_rate" => self.set_adam(|a| &mut a.learning_rate, key, v)?,
            "adam_beta1" => self.set_adam(|a| &mut a.beta1, key, v)?,
            "adam_beta2" => self.set_adam(|a| &mut a.beta2, key, v)?,
            "adam_eps" => self.set_adam(|a| &mut a.eps, key, v)?,
            "precondition_fourier" => {
                self.solver.precondition_fourier = match v {
                    "auto" => None,
                    other => Some(parse_bool(key, other)?),
                }
            }
            "parallel_restarts" => {
                let on = parse_bool(key, v)?;
                self.solver.parallel = on;
                self.pr.parallel = on;
            }
            "parallel_trials" => self.parallel_trials = parse_bool(key, v)?,
            "arch" => {
                self.arch = match v {
                    "standard" => GeneratorArch::standard(),
                    "toy" => GeneratorArch::toy(),
                    _ => return Err(Error::Config(format!("arch: expected standard or toy, got {v:?}"))),
                }
            }
            "generator" => {
                self.generator = match v.strip_prefix("random:") {
                    Some(seed) => GeneratorSource::Random(parse_num(key, seed)?),
                    None => GeneratorSource::Weights(PathBuf::from(v)),
                }
            }
            "weights" => self.generator = GeneratorSource::Weights(PathBuf::from(v)),
            "dictionary" => self.dictionary = Some(PathBuf::from(v)),
            "data_dir" => self.data_dir = Some(PathBuf::from(v)),
            "output" => self.output = PathBuf::from(v),
            "operator_redraw" => self.operator_redraw = parse_bool(key, v)?,
            "operator_seed" => self.operator_seed = Some(parse_num(key, v)?),
            "dict_train_count" => self.dict_train_count = parse_num(key, v)?,
            "dict_atoms" => self.dict_atoms = parse_num(key, v)?,
            "dict_sweeps" => self.dict_sweeps = parse_num(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    fn set_adam(&mut self, field: impl Fn(&mut AdamConfig) -> &mut f64, key: &str, v: &str) -> Result<()> {
        let value = parse_num(key, v)?;
        *field(&mut self.solver.adam) = value;
        *field(&mut self.pr.adam) = value;
        Ok(())
    }

    /// Reads a config file and applies `S3PR_*` environment overrides.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.apply_env(|k| std::env::var(k).ok());
        Ok(cfg)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(v) = lookup("S3PR_DATA_DIR") {
            self.data_dir = Some(v.into());
        }
        if let Some(v) = lookup("S3PR_WEIGHTS") {
            self.generator = GeneratorSource::Weights(v.into());
        }
        if let Some(v) = lookup("S3PR_DICTIONARY") {
            self.dictionary = Some(v.into());
        }
        if let Some(v) = lookup("S3PR_OUTPUT") {
            self.output = v.into();
        }
    }

    /// Checks ranges and that every file the run will read exists.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.sources == 0 || self.sources > MAX_RESOLVED_SOURCES {
            return Err(Error::Config(format!("sources must be in 1..={MAX_RESOLVED_SOURCES}")));
        }
        if !(self.snr > 0.0) {
            return Err(Error::Config("snr must be positive or inf".into()));
        }
        self.solver.validate()?;
        if self.pr.iterations == 0 || self.pr.restarts == 0 {
            return Err(Error::Config("phase-retrieval iterations and restarts must be at least 1".into()));
        }
        if let GeneratorSource::Weights(p) = &self.generator {
            if self.method.runs_deep() || self.dataset == DatasetChoice::Planted {
                require_file("weights", p)?;
            }
        }
        if self.method.runs_uss_pr() {
            match &self.dictionary {
                Some(p) => require_file("dictionary", p)?,
                None => return Err(Error::Config("method uss_pr needs a dictionary (key `dictionary` or S3PR_DICTIONARY)".into())),
            }
        }
        if let DatasetChoice::Images(_) = self.dataset {
            let dir = self.data_dir.as_ref().ok_or_else(|| Error::Config("image datasets need data_dir (or S3PR_DATA_DIR)".into()))?;
            if !dir.is_dir() {
                return Err(Error::Config(format!("data_dir {} does not exist", dir.display())));
            }
        }
        Ok(())
    }

    /// Every setting that influences results, one `key=value` per line.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        put("dataset", self.dataset.as_str().into());
        put("mode", self.mode.as_str().into());
        put("sources", self.sources.to_string());
        put("snr", format_snr(self.snr));
        put("method", self.method.as_str().into());
        put("trials", self.trials.to_string());
        put("master_seed", self.master_seed.to_string());
        put("iterations", self.solver.iterations.to_string());
        put("restarts", self.solver.restarts.to_string());
        put("pr_iterations", self.pr.iterations.to_string());
        put("pr_restarts", self.pr.restarts.to_string());
        let a = &self.solver.adam;
        put("learning_rate", format!("{:e}", a.learning_rate));
        put("adam_beta1", format!("{:e}", a.beta1));
        put("adam_beta2", format!("{:e}", a.beta2));
        put("adam_eps", format!("{:e}", a.eps));
        let p = &self.pr.adam;
        put("pr_adam", format!("{:e},{:e},{:e},{:e}", p.learning_rate, p.beta1, p.beta2, p.eps));
        put(
            "precondition_fourier",
            match self.solver.precondition_fourier {
                None => "auto".into(),
                Some(b) => b.to_string(),
            },
        );
        put("arch", format!("{:?}", self.arch.shape_chain()));
        put(
            "generator",
            match &self.generator {
                GeneratorSource::Weights(p) => p.display().to_string(),
                GeneratorSource::Random(seed) => format!("random:{seed}"),
            },
        );
        put("dictionary", self.dictionary.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        put("data_dir", self.data_dir.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        put("operator_redraw", self.operator_redraw.to_string());
        put("operator_seed", self.operator_seed.map(|s| s.to_string()).unwrap_or_default());
        put("dict", format!("{},{},{}", self.dict_train_count, self.dict_atoms, self.dict_sweeps));
        s
    }

    /// First 16 hex digits of the SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.join(self.hash())
    }
}

pub fn format_snr(snr: f64) -> String {
    if snr.is_infinite() {
        "inf".into()
    } else {
        format!("{snr}")
    }
}

fn require_file(what: &str, p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} file {} does not exist", p.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let cfg = ExperimentConfig::parse(
            "# grid point\ndataset = planted\nmode = cdp\nsources = 3\nsnr = inf   # noiseless\nmethod = both\n\
             trials = 2\nmaster_seed = 9\niterations = 50\nrestarts = 2\nlearning_rate = 0.01\narch = toy\n\
             generator = random:4\nprecondition_fourier = off\n",
        )
        .unwrap();
        assert_eq!(cfg.dataset, DatasetChoice::Planted);
        assert_eq!(cfg.mode, OperatorMode::Cdp);
        assert_eq!(cfg.sources, 3);
        assert!(cfg.snr.is_infinite());
        assert_eq!(cfg.method, Method::Both);
        assert_eq!((cfg.solver.iterations, cfg.pr.iterations, cfg.solver.restarts), (50, 50, 2));
        assert_eq!(cfg.solver.adam.learning_rate, 0.01);
        assert_eq!(cfg.pr.adam.learning_rate, 0.01);
        assert_eq!(cfg.arch, GeneratorArch::toy());
        assert_eq!(cfg.generator, GeneratorSource::Random(4));
        assert_eq!(cfg.solver.precondition_fourier, Some(false));
    }

    #[test]
    fn reports_bad_lines() {
        assert!(ExperimentConfig::parse("nonsense").unwrap_err().to_string().contains("line 1"));
        assert!(ExperimentConfig::parse("trials = 1\ncolour = blue").unwrap_err().to_string().contains("line 2"));
        assert!(ExperimentConfig::parse("snr = loud").is_err());
        assert!(ExperimentConfig::parse("method = magic").is_err());
    }

    #[test]
    fn env_overrides_paths() {
        let mut cfg = ExperimentConfig::parse("weights = a.bin\noutput = x").unwrap();
        cfg.apply_env(|k| match k {
            "S3PR_WEIGHTS" => Some("b.bin".into()),
            "S3PR_OUTPUT" => Some("y".into()),
            _ => None,
        });
        assert_eq!(cfg.generator, GeneratorSource::Weights("b.bin".into()));
        assert_eq!(cfg.output, PathBuf::from("y"));
        assert_eq!(cfg.dictionary, None);
    }

    #[test]
    fn validation_catches_missing_inputs() {
        let planted = "dataset = planted\ngenerator = random:1\n";
        assert!(ExperimentConfig::parse(planted).unwrap().validate().is_ok());
        assert!(ExperimentConfig::parse(&format!("{planted}trials = 0")).unwrap().validate().is_err());
        assert!(ExperimentConfig::parse(&format!("{planted}sources = 5")).unwrap().validate().is_err());
        assert!(ExperimentConfig::parse(&format!("{planted}method = uss_pr")).unwrap().validate().is_err());
        assert!(ExperimentConfig::parse(&format!("{planted}dictionary = /nonexistent")).unwrap().validate().is_ok());
        assert!(ExperimentConfig::parse(&format!("{planted}method = both\ndictionary = /nonexistent")).unwrap().validate().is_err());
        assert!(ExperimentConfig::parse("dataset = mnist\n").unwrap().validate().is_err());
        assert!(ExperimentConfig::parse("dataset = planted\nweights = /nonexistent\n").unwrap().validate().is_err());
    }

    #[test]
    fn hash_tracks_results_not_output_location() {
        let a = ExperimentConfig::parse("dataset = planted\nmaster_seed = 1").unwrap();
        let b = ExperimentConfig::parse("dataset = planted\nmaster_seed = 1\noutput = elsewhere\nparallel_trials = true").unwrap();
        let c = ExperimentConfig::parse("dataset = planted\nmaster_seed = 2").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
