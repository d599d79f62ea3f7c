//! Measurement-domain dictionaries and one-hot K-SVD.

use std::fmt::Write as _;
use std::path::Path;

use crate::generator::WEIGHT_MAGIC;
use crate::ndcore::RngStream;
use crate::{Error, Result, Scalar};

pub const DICT_VERSION: u32 = 1;
pub const DICT_TAG: &[u8; 4] = b"DICT";

/// Where a dictionary came from: enough to refuse pairing it with the wrong operator.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Provenance {
    pub dataset: String,
    pub mode: String,
    pub side: usize,
    pub operator_seed: Option<u64>,
    pub train_seed: u64,
    pub train_count: usize,
    pub sweeps: usize,
}

impl Provenance {
    fn encode(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dataset={}", self.dataset);
        let _ = writeln!(s, "mode={}", self.mode);
        let _ = writeln!(s, "side={}", self.side);
        if let Some(seed) = self.operator_seed {
            let _ = writeln!(s, "operator_seed={seed}");
        }
        let _ = writeln!(s, "train_seed={}", self.train_seed);
        let _ = writeln!(s, "train_count={}", self.train_count);
        let _ = writeln!(s, "sweeps={}", self.sweeps);
        s
    }

    fn decode(text: &str) -> Result<Self> {
        let mut p = Provenance::default();
        for line in text.lines().filter(|l| !l.is_empty()) {
            let (key, value) = line.split_once('=').ok_or_else(|| Error::format(format!("bad provenance line {line:?}")))?;
            let num = |v: &str| v.parse::<u64>().map_err(|_| Error::format(format!("bad provenance value {key}={v}")));
            match key {
                "dataset" => p.dataset = value.to_string(),
                "mode" => p.mode = value.to_string(),
                "side" => p.side = num(value)? as usize,
                "operator_seed" => p.operator_seed = Some(num(value)?),
                "train_seed" => p.train_seed = num(value)?,
                "train_count" => p.train_count = num(value)? as usize,
                "sweeps" => p.sweeps = num(value)? as usize,
                _ => return Err(Error::format(format!("unknown provenance key {key:?}"))),
            }
        }
        Ok(p)
    }
}

/// `K` unit-norm atoms of length `m`, stored atom after atom.
#[derive(Clone, Debug, PartialEq)]
pub struct DictionaryModel<T> {
    m: usize,
    atoms: Vec<T>,
    pub provenance: Provenance,
}

impl<T: Scalar> DictionaryModel<T> {
    /// Normalizes every atom; rejects zero or non-finite atoms.
    pub fn from_atoms(atoms: Vec<Vec<T>>, provenance: Provenance) -> Result<Self> {
        let m = atoms.first().map(Vec::len).ok_or_else(|| Error::invalid("dictionary needs at least one atom"))?;
        if m == 0 {
            return Err(Error::invalid("atoms must be non-empty"));
        }
        let mut flat = Vec::with_capacity(m * atoms.len());
        for (k, atom) in atoms.iter().enumerate() {
            if atom.len() != m {
                return Err(Error::shape(format!("atom {k} has length {}, expected {m}", atom.len())));
            }
            let norm = norm(atom);
            if !(norm > T::zero()) || !norm.is_finite() {
                return Err(Error::invalid(format!("atom {k} has zero or non-finite norm")));
            }
            flat.extend(atom.iter().map(|&v| v / norm));
        }
        Ok(Self { m, atoms: flat, provenance })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.atoms.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom(&self, k: usize) -> &[T] {
        &self.atoms[k * self.m..(k + 1) * self.m]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[T]> {
        self.atoms.chunks_exact(self.m)
    }

    pub fn cast<U: Scalar>(&self) -> DictionaryModel<U> {
        DictionaryModel { m: self.m, atoms: self.atoms.iter().map(|v| U::lit(v.as_f64())).collect(), provenance: self.provenance.clone() }
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct KsvdOptions {
    pub atoms: usize,
    pub sweeps: usize,
    /// Cap on power iterations per rank-1 atom update.
    pub power_iterations: usize,
}

impl Default for KsvdOptions {
    fn default() -> Self {
        Self { atoms: 500, sweeps: 20, power_iterations: 50 }
    }
}

#[derive(Clone, Debug)]
pub struct KsvdOutcome<T> {
    pub dictionary: DictionaryModel<T>,
    /// `Σ‖y_i − D α_i‖²` before the first sweep and after each sweep.
    pub objective_history: Vec<T>,
}

struct Assignment<T> {
    atom: Vec<usize>,
    coef: Vec<T>,
    error: Vec<T>,
}

fn assign<T: Scalar>(atoms: &[Vec<T>], training: &[Vec<T>]) -> (Assignment<T>, T) {
    let mut out = Assignment { atom: Vec::with_capacity(training.len()), coef: Vec::with_capacity(training.len()), error: Vec::with_capacity(training.len()) };
    let mut total = T::zero();
    for y in training {
        let (mut best, mut best_c) = (0, T::zero());
        for (k, d) in atoms.iter().enumerate() {
            let c = dot(d, y);
            if c.abs() > best_c.abs() {
                best = k;
                best_c = c;
            }
        }
        let e: T = y.iter().zip(&atoms[best]).map(|(&yi, &di)| (yi - best_c * di).powi(2)).sum();
        total = total + e;
        out.atom.push(best);
        out.coef.push(best_c);
        out.error.push(e);
    }
    (out, total)
}

/// Leading eigenvector of `Σ_{i∈S} y_i y_iᵀ` by power iteration from `start`.
/// Starting from the current atom makes the Rayleigh quotient, and hence the
/// captured energy, non-decreasing.
fn rank_one_update<T: Scalar>(start: &[T], block: &[&Vec<T>], iterations: usize) -> Vec<T> {
    let mut v = start.to_vec();
    let mut rayleigh = block.iter().map(|y| dot(y, &v).powi(2)).sum::<T>();
    for _ in 0..iterations {
        let mut u = vec![T::zero(); v.len()];
        for y in block {
            let c = dot(y, &v);
            for (ui, &yi) in u.iter_mut().zip(y.iter()) {
                *ui = *ui + c * yi;
            }
        }
        let n = norm(&u);
        if !(n > T::zero()) {
            break;
        }
        u.iter_mut().for_each(|x| *x = *x / n);
        let next = block.iter().map(|y| dot(y, &u).powi(2)).sum::<T>();
        if next < rayleigh {
            break;
        }
        let moved = u.iter().zip(&v).map(|(&a, &b)| (a - b).powi(2)).sum::<T>().sqrt();
        v = u;
        let converged = next - rayleigh <= T::epsilon() * next;
        rayleigh = next;
        if converged || moved < T::lit(1e-12) {
            break;
        }
    }
    v
}

/// One-hot K-SVD: alternate best-atom assignment and rank-1 atom refits.
pub fn learn_dictionary_ksvd<T: Scalar>(
    training: &[Vec<T>],
    opts: &KsvdOptions,
    stream: &mut RngStream,
    provenance: Provenance,
) -> Result<KsvdOutcome<T>> {
    let m = training.first().map(Vec::len).ok_or_else(|| Error::invalid("training set is empty"))?;
    if opts.atoms == 0 {
        return Err(Error::invalid("dictionary needs at least one atom"));
    }
    if opts.atoms > training.len() {
        return Err(Error::invalid(format!("{} atoms requested from {} training vectors", opts.atoms, training.len())));
    }
    if training.iter().any(|y| y.len() != m) {
        return Err(Error::shape("training vectors differ in length"));
    }
    if training.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training measurements"));
    }

    let unit = |y: &[T], s: &mut RngStream| -> Vec<T> {
        let n = norm(y);
        if n > T::zero() {
            y.iter().map(|&v| v / n).collect()
        } else {
            let r: Vec<T> = s.randn(m);
            let n = norm(&r);
            r.into_iter().map(|v| v / n).collect()
        }
    };
    let mut atoms: Vec<Vec<T>> = stream.sample_indices(training.len(), opts.atoms).into_iter().map(|i| unit(&training[i], stream)).collect();

    let (mut current, objective) = assign(&atoms, training);
    let mut history = vec![objective];
    for _ in 0..opts.sweeps {
        let mut members: Vec<Vec<&Vec<T>>> = vec![Vec::new(); atoms.len()];
        for (y, &k) in training.iter().zip(&current.atom) {
            members[k].push(y);
        }
        let mut worst: Vec<usize> = (0..training.len()).collect();
        worst.sort_by(|&a, &b| current.error[b].partial_cmp(&current.error[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        let mut worst = worst.into_iter();
        for (k, block) in members.iter().enumerate() {
            if block.is_empty() {
                if let Some(i) = worst.next() {
                    atoms[k] = unit(&training[i], stream);
                }
            } else {
                atoms[k] = rank_one_update(&atoms[k], block, opts.power_iterations);
            }
        }
        let (next, objective) = assign(&atoms, training);
        current = next;
        history.push(objective);
    }
    Ok(KsvdOutcome { dictionary: DictionaryModel::from_atoms(atoms, provenance)?, objective_history: history })
}

/// Serializes with the weight-file magic and version followed by the `DICT` tag.
pub fn encode_dictionary<T: Scalar>(d: &DictionaryModel<T>) -> Vec<u8> {
    let prov = d.provenance.encode();
    let mut out = Vec::with_capacity(32 + prov.len() + 8 * d.atoms.len());
    out.extend_from_slice(WEIGHT_MAGIC);
    out.extend_from_slice(&DICT_VERSION.to_le_bytes());
    out.extend_from_slice(DICT_TAG);
    out.extend_from_slice(&(prov.len() as u32).to_le_bytes());
    out.extend_from_slice(prov.as_bytes());
    out.push(2);
    out.extend_from_slice(&(d.len() as u32).to_le_bytes());
    out.extend_from_slice(&(d.m as u32).to_le_bytes());
    for v in &d.atoms {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out
}

pub fn decode_dictionary<T: Scalar>(bytes: &[u8]) -> Result<DictionaryModel<T>> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| Error::format("unexpected EOF in dictionary file"))?;
        pos += n;
        Ok(s)
    };
    if take(8)? != WEIGHT_MAGIC {
        return Err(Error::format("bad magic"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
    if version != DICT_VERSION {
        return Err(Error::format(format!("unsupported version {version}")));
    }
    if take(4)? != DICT_TAG {
        return Err(Error::format("not a dictionary file (missing DICT tag)"));
    }
    let plen = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
    let prov = std::str::from_utf8(take(plen)?).map_err(|_| Error::format("provenance is not UTF-8"))?;
    let provenance = Provenance::decode(prov)?;
    if take(1)?[0] != 2 {
        return Err(Error::format("dictionary atoms must be a rank-2 tensor"));
    }
    let k = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
    let m = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
    if k == 0 || m == 0 {
        return Err(Error::format("empty dictionary"));
    }
    let raw = take(k.checked_mul(m).and_then(|n| n.checked_mul(8)).ok_or_else(|| Error::format("dictionary too large"))?)?;
    let atoms: Vec<T> = raw.chunks_exact(8).map(|b| T::lit(f64::from_le_bytes(b.try_into().expect("8 bytes")))).collect();
    if pos != bytes.len() {
        return Err(Error::format("trailing bytes after dictionary"));
    }
    for (k, atom) in atoms.chunks_exact(m).enumerate() {
        let n = norm(atom);
        if !((n - T::one()).abs() < T::lit(1e-9)) {
            return Err(Error::format(format!("atom {k} is not unit-norm (norm {n})")));
        }
    }
    Ok(DictionaryModel { m, atoms, provenance })
}

pub fn save_dictionary<T: Scalar>(d: &DictionaryModel<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_dictionary(d))?;
    Ok(())
}

pub fn load_dictionary<T: Scalar>(path: impl AsRef<Path>) -> Result<DictionaryModel<T>> {
    decode_dictionary(&std::fs::read(path)?)
}
