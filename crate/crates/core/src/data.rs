//! MNIST-family datasets in IDX format.
//!
//! IDX images: magic `00 00 08 03`, big-endian `u32` count, rows, cols, then
//! `count·rows·cols` pixel bytes. IDX labels: magic `00 00 08 01`, a `u32`
//! count, then one byte per label. Gzip-wrapped files (`1f 8b`) are
//! decompressed transparently.

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flate2::read::MultiGzDecoder;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::activation::Labels;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::seed::{self, Purpose};

pub const IMAGES_MAGIC: [u8; 4] = [0x00, 0x00, 0x08, 0x03];
pub const LABELS_MAGIC: [u8; 4] = [0x00, 0x00, 0x08, 0x01];
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Raw pixel bytes as stored in an IDX image file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.image_len();
        &self.pixels[i * n..(i + 1) * n]
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        MultiGzDecoder::new(bytes.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> usize {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]) as usize
}

fn check_header(path: &Path, bytes: &[u8], magic: [u8; 4], header_len: usize) -> Result<()> {
    if bytes.len() < 4 || bytes[..4] != magic {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: magic,
            found: bytes.iter().take(4).copied().collect(),
        });
    }
    if bytes.len() < header_len {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: header_len as u64,
            found: bytes.len() as u64,
        });
    }
    Ok(())
}

fn check_payload(path: &Path, bytes: &[u8], expected: usize) -> Result<()> {
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: expected as u64,
            found: bytes.len() as u64,
        });
    }
    Ok(())
}

/// Parses an in-memory IDX image file. `path` is only used in errors.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<IdxImages> {
    check_header(path, bytes, IMAGES_MAGIC, 16)?;
    let (count, rows, cols) = (be_u32(bytes, 4), be_u32(bytes, 8), be_u32(bytes, 12));
    let end = 16 + count * rows * cols;
    check_payload(path, bytes, end)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..end].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    check_header(path, bytes, LABELS_MAGIC, 8)?;
    let count = be_u32(bytes, 4);
    check_payload(path, bytes, 8 + count)?;
    Ok(bytes[8..8 + count].to_vec())
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    parse_idx_images(&read_file(path)?, path)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Labels> {
    let path = path.as_ref();
    let raw = parse_idx_labels(&read_file(path)?, path)?;
    Ok(Labels::new(raw.into_iter().map(usize::from).collect()))
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGES_MAGIC);
    for d in [images.count, images.rows, images.cols] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC);
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Flattens each image row-major, scales by 1/255 and stores images as columns.
pub fn normalize<T: Scalar>(images: &IdxImages) -> Matrix<T> {
    normalize_selected(images, &(0..images.count).collect::<Vec<_>>())
}

fn normalize_selected<T: Scalar>(images: &IdxImages, indices: &[usize]) -> Matrix<T> {
    let d = images.image_len();
    let n = indices.len();
    let scale = T::lit(255.0);
    let mut m = Matrix::zeros(d, n);
    let data = m.as_mut_slice();
    for (col, &i) in indices.iter().enumerate() {
        for (p, &px) in images.image(i).iter().enumerate() {
            data[p * n + col] = T::lit(f64::from(px)) / scale;
        }
    }
    m
}

/// First `n` indices of a seeded uniform permutation of `0..total`.
pub fn subset_indices(total: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > total {
        return Err(Error::InvalidArgument(format!(
            "subset of {n} requested from {total} samples"
        )));
    }
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(&mut seed::stream(seed, Purpose::Subset, 0));
    idx.truncate(n);
    Ok(idx)
}

/// Images as columns of a `d × N` feature matrix with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub features: Matrix<T>,
    pub labels: Labels,
    pub num_classes: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: Matrix<T>, labels: Labels, num_classes: usize) -> Result<Self> {
        if features.cols() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature columns but {} labels",
                features.cols(),
                labels.len()
            )));
        }
        labels.validate(num_classes)?;
        if let Some(v) = features
            .as_slice()
            .iter()
            .find(|&&v| !(v >= T::zero() && v <= T::one()))
        {
            return Err(Error::InvalidArgument(format!(
                "feature value {v} outside [0, 1]"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
        })
    }

    /// Normalises raw IDX content, optionally keeping only a seeded subset
    /// (same selection as [`Dataset::subset`] on the full set).
    pub fn from_idx(
        images: &IdxImages,
        labels: &Labels,
        num_classes: usize,
        subset: Option<(usize, u64)>,
    ) -> Result<Self> {
        if images.count != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} images but {} labels",
                images.count,
                labels.len()
            )));
        }
        let indices = match subset {
            Some((n, seed)) => subset_indices(images.count, n, seed)?,
            None => (0..images.count).collect(),
        };
        Dataset::new(
            normalize_selected(images, &indices),
            labels.select(&indices),
            num_classes,
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_width(&self) -> usize {
        self.features.rows()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Dataset {
            features: self.features.select_columns(indices),
            labels: self.labels.select(indices),
            num_classes: self.num_classes,
        }
    }

    pub fn subset(&self, n: usize, seed: u64) -> Result<Self> {
        Ok(self.select(&subset_indices(self.len(), n, seed)?))
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.num_classes];
        for &y in self.labels.as_slice() {
            h[y] += 1;
        }
        h
    }

    pub fn batches(&self, plan: &BatchPlan, epoch: u64) -> Vec<(Matrix<T>, Labels)> {
        plan.indices(self.len(), epoch)
            .iter()
            .map(|idx| (self.features.select_columns(idx), self.labels.select(idx)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub drop_last: bool,
}

impl BatchPlan {
    pub fn new(batch_size: usize, seed: u64) -> Self {
        BatchPlan {
            batch_size,
            seed,
            drop_last: false,
        }
    }

    /// Index lists of each batch for `epoch`, reshuffled per (seed, epoch).
    pub fn indices(&self, n: usize, epoch: u64) -> Vec<Vec<usize>> {
        assert!(self.batch_size >= 1, "batch size must be at least 1");
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::stream(self.seed, Purpose::Shuffle, epoch));
        order
            .chunks(self.batch_size)
            .filter(|c| !self.drop_last || c.len() == self.batch_size)
            .map(<[usize]>::to_vec)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Mnist,
    Fmnist,
    Emnist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl DatasetName {
    pub const ALL: [DatasetName; 3] =
        [DatasetName::Mnist, DatasetName::Fmnist, DatasetName::Emnist];

    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::Fmnist => "fmnist",
            DatasetName::Emnist => "emnist",
        }
    }

    /// EMNIST means the ByClass split.
    pub fn num_classes(&self) -> usize {
        match self {
            DatasetName::Mnist | DatasetName::Fmnist => 10,
            DatasetName::Emnist => 62,
        }
    }

    pub fn input_width(&self) -> usize {
        784
    }

    /// File stems (without an optional `.gz`) for images and labels.
    pub fn file_stems(&self, split: Split) -> (String, String) {
        match (self, split) {
            (DatasetName::Emnist, Split::Train) => (
                "emnist-byclass-train-images-idx3-ubyte".into(),
                "emnist-byclass-train-labels-idx1-ubyte".into(),
            ),
            (DatasetName::Emnist, Split::Test) => (
                "emnist-byclass-test-images-idx3-ubyte".into(),
                "emnist-byclass-test-labels-idx1-ubyte".into(),
            ),
            (_, Split::Train) => (
                "train-images-idx3-ubyte".into(),
                "train-labels-idx1-ubyte".into(),
            ),
            (_, Split::Test) => (
                "t10k-images-idx3-ubyte".into(),
                "t10k-labels-idx1-ubyte".into(),
            ),
        }
    }

    /// Resolves `<data_dir>/<name>/<stem>` or `<stem>.gz`. Returns the
    /// uncompressed candidate path in the error when neither exists.
    pub fn locate(&self, data_dir: &Path, split: Split) -> Result<(PathBuf, PathBuf)> {
        let dir = data_dir.join(self.as_str());
        let find = |stem: &str| -> Result<PathBuf> {
            let plain = dir.join(stem);
            let gz = dir.join(format!("{stem}.gz"));
            if plain.is_file() {
                Ok(plain)
            } else if gz.is_file() {
                Ok(gz)
            } else {
                Err(Error::io(
                    plain,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
                ))
            }
        };
        let (img, lab) = self.file_stems(split);
        Ok((find(&img)?, find(&lab)?))
    }

    pub fn load_raw(&self, data_dir: &Path, split: Split) -> Result<(IdxImages, Labels)> {
        let (img, lab) = self.locate(data_dir, split)?;
        let images = load_idx_images(img)?;
        let labels = load_idx_labels(lab)?;
        labels.validate(self.num_classes())?;
        Ok((images, labels))
    }

    pub fn load<T: Scalar>(
        &self,
        data_dir: &Path,
        split: Split,
        subset: Option<(usize, u64)>,
    ) -> Result<Dataset<T>> {
        let (images, labels) = self.load_raw(data_dir, split)?;
        Dataset::from_idx(&images, &labels, self.num_classes(), subset)
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
        match s.to_ascii_lowercase().as_str() {
            "mnist" => Ok(DatasetName::Mnist),
            "fmnist" | "fashion-mnist" | "fashion_mnist" => Ok(DatasetName::Fmnist),
            "emnist" => Ok(DatasetName::Emnist),
            other => Err(Error::InvalidArgument(format!("unknown dataset {other:?}"))),
        }
    }
}
