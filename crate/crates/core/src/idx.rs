//! MNIST ingestion: IDX parsing, pixel normalization, and seeded training
//! subsets.
//!
//! IDX layout (all integers big-endian u32):
//!
//! ```text
//! images: 0x00000803 count rows cols  then count*rows*cols bytes
//! labels: 0x00000801 count            then count bytes
//! ```
//!
//! Gzip-compressed files are recognised by their magic bytes and inflated
//! before parsing.

use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;

use crate::{rng, Error, Float, Result, Tensor, NUM_CLASSES};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawImageSet {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSet {
    pub labels: Vec<u8>,
}

impl LabelSet {
    pub fn count(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetRole {
    TrainSubset,
    Test,
    Whole,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    /// `(count, 28, 28)` with values in `[0, 1]`.
    pub images: Tensor,
    pub labels: LabelSet,
    pub role: DatasetRole,
    pub subset_seed: Option<u64>,
    pub subset_size: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Sampling {
    /// Per-class quotas as equal as availability allows.
    #[default]
    Stratified,
    /// Plain seeded draw without replacement.
    Uniform,
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::Truncated { expected: offset + 4, found: bytes.len() })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let found = read_u32(bytes, 0)?;
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

fn check_payload(bytes: &[u8], header: usize, payload: usize) -> Result<()> {
    let expected = header + payload;
    match bytes.len() {
        n if n < expected => Err(Error::Truncated { expected, found: n }),
        n if n > expected => Err(Error::TrailingBytes { extra: n - expected }),
        _ => Ok(()),
    }
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<RawImageSet> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let payload =
        count.checked_mul(rows).and_then(|v| v.checked_mul(cols)).ok_or(Error::Truncated { expected: usize::MAX, found: bytes.len() })?;
    check_payload(bytes, 16, payload)?;
    Ok(RawImageSet { count, rows, cols, pixels: bytes[16..].to_vec() })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<LabelSet> {
    check_magic(bytes, LABEL_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    check_payload(bytes, 8, count)?;
    let labels = bytes[8..].to_vec();
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= NUM_CLASSES) {
        return Err(Error::LabelOutOfRange { index, label });
    }
    Ok(LabelSet { labels })
}

impl RawImageSet {
    /// Serialize back to IDX bytes.
    pub fn to_idx_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        for v in [IMAGE_MAGIC, self.count as u32, self.rows as u32, self.cols as u32] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }
}

impl LabelSet {
    pub fn to_idx_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.labels.len());
        out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.labels.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.labels);
        out
    }
}

/// Map every pixel `v` to `v / 255`, shaped `(count, rows, cols)`.
pub fn normalize_pixels(raw: &RawImageSet) -> Tensor {
    let data = raw.pixels.iter().map(|&p| p as Float / 255.0).collect();
    Tensor::from_vec(&[raw.count, raw.rows, raw.cols], data).expect("pixel count checked at parse time")
}

/// Read a file, inflating it first if it carries the gzip magic.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Locate `name` or `name.gz` inside `dir`.
fn find_file(dir: &Path, name: &str) -> Result<PathBuf> {
    let plain = dir.join(name);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(Error::DataMissing(plain))
}

impl Dataset {
    pub fn from_raw(images: &RawImageSet, labels: LabelSet, role: DatasetRole) -> Result<Self> {
        if images.count != labels.count() {
            return Err(Error::shape("Dataset::from_raw", format!("{} images but {} labels", images.count, labels.count())));
        }
        Ok(Dataset { images: normalize_pixels(images), labels, role, subset_seed: None, subset_size: None })
    }

    pub fn count(&self) -> usize {
        self.labels.count()
    }

    pub fn pixels_per_image(&self) -> usize {
        self.images.shape()[1..].iter().product()
    }

    pub fn image(&self, index: usize) -> &[Float] {
        let n = self.pixels_per_image();
        &self.images.data()[index * n..(index + 1) * n]
    }

    /// Copy the listed examples into a new dataset, in the given order.
    pub fn select(&self, indices: &[usize], role: DatasetRole) -> Dataset {
        let n = self.pixels_per_image();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            data.extend_from_slice(self.image(i));
        }
        let mut shape = self.images.shape().to_vec();
        shape[0] = indices.len();
        Dataset {
            images: Tensor::from_vec(&shape, data).expect("selected shape"),
            labels: LabelSet { labels: indices.iter().map(|&i| self.labels.labels[i]).collect() },
            role,
            subset_seed: None,
            subset_size: None,
        }
    }

    pub fn class_histogram(&self) -> [usize; NUM_CLASSES] {
        let mut hist = [0; NUM_CLASSES];
        for &l in &self.labels.labels {
            hist[l as usize] += 1;
        }
        hist
    }
}

/// Training and test splits loaded from one directory.
#[derive(Clone, Debug)]
pub struct Mnist {
    pub train: Dataset,
    pub test: Dataset,
}

pub fn load_split(dir: &Path, images: &str, labels: &str, role: DatasetRole) -> Result<Dataset> {
    let raw = parse_idx_images(&read_maybe_gz(&find_file(dir, images)?)?)?;
    let labels = parse_idx_labels(&read_maybe_gz(&find_file(dir, labels)?)?)?;
    Dataset::from_raw(&raw, labels, role)
}

/// Environment variable naming the MNIST directory.
pub const DATA_DIR_ENV: &str = "EMBODIED_MNIST_DIR";

/// Where to look for MNIST: `explicit` if given, else `$EMBODIED_MNIST_DIR`,
/// else `./data/mnist`, else the `data/mnist` directory of this workspace.
pub fn resolve_data_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(DATA_DIR_ENV) {
        return PathBuf::from(p);
    }
    let local = PathBuf::from("data/mnist");
    if local.is_dir() {
        return local;
    }
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

/// Load the four standard MNIST files (plain or `.gz`) from `dir`.
pub fn load_mnist(dir: &Path) -> Result<Mnist> {
    Ok(Mnist {
        train: load_split(dir, TRAIN_IMAGES, TRAIN_LABELS, DatasetRole::Whole)?,
        test: load_split(dir, TEST_IMAGES, TEST_LABELS, DatasetRole::Test)?,
    })
}

/// Per-class quotas summing to `size`, as equal as availability allows.
/// Classes earlier in `order` absorb the remainder first.
fn class_quotas(available: &[usize; NUM_CLASSES], size: usize, order: &[usize]) -> [usize; NUM_CLASSES] {
    let mut quota = [0; NUM_CLASSES];
    let mut open: Vec<usize> = order.to_vec();
    let mut remaining = size;
    // Water-filling: cap classes that cannot meet the fair share, then
    // re-split what is left among the rest.
    loop {
        if open.is_empty() || remaining == 0 {
            break;
        }
        let share = remaining / open.len();
        let extra = remaining % open.len();
        let capped: Vec<usize> =
            open.iter().enumerate().filter(|&(pos, &c)| available[c] < share + usize::from(pos < extra)).map(|(_, &c)| c).collect();
        if capped.is_empty() {
            for (pos, &c) in open.iter().enumerate() {
                quota[c] = share + usize::from(pos < extra);
            }
            break;
        }
        for &c in &capped {
            quota[c] = available[c];
            remaining -= available[c];
        }
        open.retain(|c| !capped.contains(c));
    }
    quota
}

/// Draw a seeded training subset of exactly `size` examples.
///
/// With [`Sampling::Stratified`] each class contributes `size / 10`
/// examples, the remainder going to classes picked by a seeded shuffle;
/// classes short of examples hand their deficit to the others. The result is
/// shuffled and is identical for identical `(full, size, seed)`.
pub fn stratified_subset(full: &Dataset, size: usize, seed: u64) -> Result<Dataset> {
    subset(full, size, seed, Sampling::Stratified)
}

pub fn subset(full: &Dataset, size: usize, seed: u64, sampling: Sampling) -> Result<Dataset> {
    if size == 0 || size > full.count() {
        return Err(Error::SizeTooLarge { requested: size, available: full.count() });
    }
    let mut r = rng::stream(seed, rng::SUBSET);
    let mut chosen = match sampling {
        Sampling::Uniform => {
            let mut all: Vec<usize> = (0..full.count()).collect();
            all.shuffle(&mut r);
            all.truncate(size);
            all
        }
        Sampling::Stratified => {
            let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
            for (i, &l) in full.labels.labels.iter().enumerate() {
                by_class[l as usize].push(i);
            }
            let mut order: Vec<usize> = (0..NUM_CLASSES).collect();
            order.shuffle(&mut r);
            let available: [usize; NUM_CLASSES] = std::array::from_fn(|c| by_class[c].len());
            let quota = class_quotas(&available, size, &order);
            let mut picked = Vec::with_capacity(size);
            for (class, members) in by_class.iter_mut().enumerate() {
                members.shuffle(&mut r);
                picked.extend_from_slice(&members[..quota[class]]);
            }
            picked
        }
    };
    chosen.shuffle(&mut r);
    let mut out = full.select(&chosen, DatasetRole::TrainSubset);
    out.subset_seed = Some(seed);
    out.subset_size = Some(size);
    Ok(out)
}
