//! MNIST / Fashion-MNIST ingestion in IDX format, preprocessing to the
//! 32×32 `[-1, 1]` signal domain, and mixture sampling.

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flate2::read::GzDecoder;

use crate::ndcore::{Image, RngStream};
use crate::{Error, Result, Scalar};

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
/// Side of the raw dataset images.
pub const RAW_SIDE: usize = 28;
/// Side of the preprocessed signal.
pub const SIGNAL_SIDE: usize = 32;
const PAD: usize = (SIGNAL_SIDE - RAW_SIDE) / 2;

/// Images decoded from an IDX file, one byte per pixel.
#[derive(Clone, Debug)]
pub struct RawImages {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<u8>>,
}

impl RawImages {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Reads an IDX image file; gzip-compressed files are detected by their
/// magic bytes and decompressed transparently.
pub fn load_idx(path: impl AsRef<Path>) -> Result<RawImages> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let bytes = if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&bytes[..]).read_to_end(&mut out)?;
        out
    } else {
        bytes
    };
    parse_idx(&bytes)
}

pub fn parse_idx(bytes: &[u8]) -> Result<RawImages> {
    if bytes.len() < 16 {
        return Err(Error::Idx(format!("truncated header: {} bytes", bytes.len())));
    }
    let word = |i: usize| u32::from_be_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
    let magic = word(0);
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Idx(format!("bad magic 0x{magic:08X}")));
    }
    let (count, rows, cols) = (word(4) as usize, word(8) as usize, word(12) as usize);
    if rows == 0 || cols == 0 {
        return Err(Error::Idx(format!("dimension mismatch: {rows}x{cols} images")));
    }
    let item = rows * cols;
    let expected = count * item;
    let payload = &bytes[16..];
    if payload.len() < expected {
        return Err(Error::Idx(format!(
            "truncated file: header declares {count} images of {rows}x{cols} ({expected} bytes), found {}",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(Error::Idx(format!(
            "dimension mismatch: {} trailing bytes after {count} images of {rows}x{cols}",
            payload.len() - expected
        )));
    }
    let images = payload.chunks_exact(item).map(<[u8]>::to_vec).collect();
    Ok(RawImages { rows, cols, images })
}

/// Serializes images as an uncompressed IDX file.
pub fn encode_idx(rows: usize, cols: usize, images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for w in [IDX_IMAGE_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&w.to_be_bytes());
    }
    for img in images {
        out.extend_from_slice(img);
    }
    out
}

/// Zero-pads a 28×28 byte image by two pixels on each side and maps
/// `[0, 255]` affinely onto `[-1, 1]`; padding lands on `-1`.
pub fn preprocess<T: Scalar>(raw: &[u8]) -> Result<Image<T>> {
    if raw.len() != RAW_SIDE * RAW_SIDE {
        return Err(Error::shape(format!(
            "expected {RAW_SIDE}x{RAW_SIDE} = {} pixels, got {}",
            RAW_SIDE * RAW_SIDE,
            raw.len()
        )));
    }
    let scale = T::lit(2.0 / 255.0);
    Ok(Image::from_fn(SIGNAL_SIDE, SIGNAL_SIDE, |r, c| {
        let inside = (PAD..PAD + RAW_SIDE).contains(&r) && (PAD..PAD + RAW_SIDE).contains(&c);
        let byte = if inside { raw[(r - PAD) * RAW_SIDE + (c - PAD)] } else { 0 };
        T::lit(f64::from(byte)) * scale - T::one()
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DatasetName {
    Mnist,
    Fashion,
}

impl DatasetName {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::Fashion => "fashion",
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetName::Mnist),
            "fashion" | "fashion_mnist" | "fashion-mnist" => Ok(DatasetName::Fashion),
            other => Err(Error::invalid(format!("unknown dataset {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn file_stem(self) -> &'static str {
        match self {
            Split::Train => "train-images-idx3-ubyte",
            Split::Test => "t10k-images-idx3-ubyte",
        }
    }
}

/// Location of a split under `data_dir/<name>/`, preferring the raw file over `.gz`.
pub fn idx_path(data_dir: &Path, name: DatasetName, split: Split) -> PathBuf {
    let raw = data_dir.join(name.as_str()).join(split.file_stem());
    if raw.exists() {
        return raw;
    }
    let mut gz = raw.clone().into_os_string();
    gz.push(".gz");
    PathBuf::from(gz)
}

/// Preprocessed images of one dataset split.
#[derive(Clone, Debug)]
pub struct ImageDataset<T> {
    pub name: DatasetName,
    pub split: Split,
    pub images: Vec<Image<T>>,
}

impl<T: Scalar> ImageDataset<T> {
    pub fn from_raw(name: DatasetName, split: Split, raw: &RawImages) -> Result<Self> {
        if raw.rows != RAW_SIDE || raw.cols != RAW_SIDE {
            return Err(Error::shape(format!(
                "{name} images are {}x{}, expected {RAW_SIDE}x{RAW_SIDE}",
                raw.rows, raw.cols
            )));
        }
        let images = raw.images.iter().map(|img| preprocess(img)).collect::<Result<_>>()?;
        Ok(Self { name, split, images })
    }

    pub fn load(data_dir: &Path, name: DatasetName, split: Split) -> Result<Self> {
        let raw = load_idx(idx_path(data_dir, name, split))?;
        Self::from_raw(name, split, &raw)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Ground-truth sources of one mixture.
#[derive(Clone, Debug)]
pub struct SourceSet<T> {
    pub sources: Vec<Image<T>>,
    /// Dataset indices the sources were drawn from (empty for synthetic sources).
    pub indices: Vec<usize>,
}

impl<T: Scalar> SourceSet<T> {
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

/// Draws `count` distinct images without replacement.
pub fn sample_mixture<T: Scalar>(
    ds: &ImageDataset<T>,
    count: usize,
    stream: &mut RngStream,
) -> Result<SourceSet<T>> {
    if count == 0 {
        return Err(Error::invalid("mixture needs at least one source"));
    }
    if count > ds.len() {
        return Err(Error::invalid(format!(
            "cannot draw {count} distinct images from a dataset of {}",
            ds.len()
        )));
    }
    let indices = stream.sample_indices(ds.len(), count);
    let sources = indices.iter().map(|&i| ds.images[i].clone()).collect();
    Ok(SourceSet { sources, indices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn fixture(count: usize) -> Vec<Vec<u8>> {
        (0..count).map(|k| (0..RAW_SIDE * RAW_SIDE).map(|i| ((i * 7 + k * 31) % 256) as u8).collect()).collect()
    }

    fn dataset(count: usize) -> ImageDataset<f64> {
        let raw = RawImages { rows: 28, cols: 28, images: fixture(count) };
        ImageDataset::from_raw(DatasetName::Mnist, Split::Test, &raw).unwrap()
    }

    #[test]
    fn parses_synthetic_fixture() {
        let bytes = encode_idx(28, 28, &fixture(4));
        let raw = parse_idx(&bytes).unwrap();
        assert_eq!(raw.len(), 4);
        assert_eq!((raw.rows, raw.cols), (28, 28));
        assert_eq!(raw.images[3], fixture(4)[3]);
    }

    #[test]
    fn reads_gzip_transparently() {
        let bytes = encode_idx(28, 28, &fixture(3));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("imgs.gz");
        let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::fast());
        enc.write_all(&bytes).unwrap();
        fs::write(&path, enc.finish().unwrap()).unwrap();
        let raw = load_idx(&path).unwrap();
        assert_eq!(raw.len(), 3);
    }

    #[test]
    fn header_count_drives_parse() {
        // Same header layout as the t10k file: 10000 images of 28x28.
        let images: Vec<Vec<u8>> = (0..10_000).map(|k| vec![(k % 251) as u8; 784]).collect();
        let raw = parse_idx(&encode_idx(28, 28, &images)).unwrap();
        assert_eq!(raw.len(), 10_000);
        assert_eq!((raw.rows, raw.cols), (28, 28));
        assert_eq!(raw.images[9_999][0], (9_999 % 251) as u8);
    }

    #[test]
    fn real_mnist_test_split_if_present() {
        let Ok(dir) = std::env::var("S3PR_DATA_DIR") else { return };
        let path = idx_path(Path::new(&dir), DatasetName::Mnist, Split::Test);
        if !path.exists() {
            return;
        }
        let raw = load_idx(path).unwrap();
        assert_eq!(raw.len(), 10_000);
        assert_eq!((raw.rows, raw.cols), (28, 28));
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_idx(28, 28, &fixture(1));
        bytes[..4].copy_from_slice(&0xDEAD_BEEFu32.to_be_bytes());
        let err = parse_idx(&bytes).unwrap_err().to_string();
        assert!(err.contains("bad magic"), "{err}");
    }

    #[test]
    fn truncated_and_trailing() {
        let bytes = encode_idx(28, 28, &fixture(2));
        let err = parse_idx(&bytes[..bytes.len() - 10]).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
        assert!(parse_idx(&bytes[..8]).unwrap_err().to_string().contains("truncated"));
        let mut long = bytes.clone();
        long.push(0);
        assert!(parse_idx(&long).unwrap_err().to_string().contains("dimension mismatch"));
    }

    #[test]
    fn preprocess_zero_image() {
        let img: Image<f64> = preprocess(&[0u8; 784]).unwrap();
        assert_eq!((img.rows(), img.cols()), (32, 32));
        assert!(img.as_slice().iter().all(|&v| v == -1.0));
    }

    #[test]
    fn preprocess_full_image_keeps_border() {
        let img: Image<f64> = preprocess(&[255u8; 784]).unwrap();
        for r in 0..32 {
            for c in 0..32 {
                let inside = (2..30).contains(&r) && (2..30).contains(&c);
                assert_eq!(img.get(r, c), if inside { 1.0 } else { -1.0 });
            }
        }
    }

    #[test]
    fn preprocess_pad_offset() {
        let mut raw = [0u8; 784];
        raw[0] = 255;
        let img: Image<f64> = preprocess(&raw).unwrap();
        assert_eq!(img.get(2, 2), 1.0);
        assert_eq!(img.as_slice().iter().filter(|&&v| v == 1.0).count(), 1);
        assert_eq!(img.as_slice().iter().filter(|&&v| v == -1.0).count(), 1023);
    }

    #[test]
    fn preprocess_rejects_wrong_size() {
        assert!(preprocess::<f64>(&[0u8; 32 * 32]).is_err());
    }

    #[test]
    fn preprocess_injective_on_bytes() {
        let vals: Vec<f64> = (0..=255u8)
            .map(|b| {
                let mut raw = [0u8; 784];
                raw[100] = b;
                preprocess::<f64>(&raw).unwrap().get(2 + 100 / 28, 2 + 100 % 28)
            })
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(vals[0], -1.0);
        assert_eq!(vals[255], 1.0);
    }

    #[test]
    fn mixture_of_one() {
        let ds = dataset(5);
        let set = sample_mixture(&ds, 1, &mut RngStream::new(3)).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.sources[0], ds.images[set.indices[0]]);
    }

    #[test]
    fn mixture_is_deterministic() {
        let ds = dataset(50);
        let a = sample_mixture(&ds, 4, &mut RngStream::new(11)).unwrap();
        let b = sample_mixture(&ds, 4, &mut RngStream::new(11)).unwrap();
        assert_eq!(a.indices, b.indices);
        let mut sorted = a.indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 4);
    }

    #[test]
    fn mixture_exhausts_small_dataset() {
        let ds = dataset(2);
        let mut set = sample_mixture(&ds, 2, &mut RngStream::new(1)).unwrap();
        set.indices.sort_unstable();
        assert_eq!(set.indices, vec![0, 1]);
        assert!(sample_mixture(&ds, 3, &mut RngStream::new(1)).is_err());
        assert!(sample_mixture(&ds, 0, &mut RngStream::new(1)).is_err());
    }
}
