//! CIFAR binary records.
//!
//! CIFAR-10 records are `label, 3072 pixels`; CIFAR-100 records are
//! `coarse label, fine label, 3072 pixels`. Pixels are channel-major
//! 3×32×32 bytes and load as `byte / 255`. The fine label is used for CIFAR-100.

use std::path::Path;
use std::str::FromStr;

use super::dataset::LabeledDataset;
use crate::error::{Error, Result};

pub const IMAGE_SHAPE: [usize; 3] = [3, 32, 32];
pub const PIXELS: usize = 3 * 32 * 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CifarLayout {
    Cifar10,
    Cifar100,
}

impl CifarLayout {
    pub fn label_bytes(self) -> usize {
        match self {
            CifarLayout::Cifar10 => 1,
            CifarLayout::Cifar100 => 2,
        }
    }

    pub fn record_len(self) -> usize {
        self.label_bytes() + PIXELS
    }

    pub fn num_classes(self) -> usize {
        match self {
            CifarLayout::Cifar10 => 10,
            CifarLayout::Cifar100 => 100,
        }
    }
}

impl FromStr for CifarLayout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cifar10" => Ok(CifarLayout::Cifar10),
            "cifar100" => Ok(CifarLayout::Cifar100),
            other => Err(Error::Config(format!("unknown CIFAR layout `{other}`"))),
        }
    }
}

pub fn decode_cifar(bytes: &[u8], layout: CifarLayout) -> Result<LabeledDataset> {
    let rec = layout.record_len();
    if bytes.len() % rec != 0 {
        return Err(Error::Format(format!(
            "{} bytes is not a whole number of {rec}-byte records",
            bytes.len()
        )));
    }
    let n = bytes.len() / rec;
    let mut features = Vec::with_capacity(n * PIXELS);
    let mut labels = Vec::with_capacity(n);
    let mut coarse = Vec::with_capacity(n);
    for r in bytes.chunks_exact(rec) {
        let label = r[layout.label_bytes() - 1] as usize;
        if label >= layout.num_classes() {
            return Err(Error::Format(format!(
                "label {label} out of range for {} classes",
                layout.num_classes()
            )));
        }
        labels.push(label);
        if layout == CifarLayout::Cifar100 {
            coarse.push(r[0]);
        }
        features.extend(r[layout.label_bytes()..].iter().map(|&b| b as f32 / 255.0));
    }
    let ds = LabeledDataset::new(&IMAGE_SHAPE, features, labels, layout.num_classes())?;
    Ok(match layout {
        CifarLayout::Cifar100 => ds.with_coarse_labels(coarse),
        CifarLayout::Cifar10 => ds,
    })
}

/// Encodes a dataset as CIFAR records. Pixel values are rounded back to bytes;
/// CIFAR-100 coarse labels are written as 0 when the dataset carries none.
pub fn encode_cifar(dataset: &LabeledDataset, layout: CifarLayout) -> Result<Vec<u8>> {
    if dataset.feature_shape() != IMAGE_SHAPE {
        return Err(Error::Shape(format!(
            "CIFAR records need 3x32x32 features, got {:?}",
            dataset.feature_shape()
        )));
    }
    if dataset.num_classes() > layout.num_classes() {
        return Err(Error::invalid(format!(
            "{} classes do not fit the {:?} layout",
            dataset.num_classes(),
            layout
        )));
    }
    let mut out = Vec::with_capacity(dataset.len() * layout.record_len());
    for i in 0..dataset.len() {
        let (x, y) = dataset.item(i);
        if layout == CifarLayout::Cifar100 {
            out.push(dataset.coarse_labels().map_or(0, |c| c[i]));
        }
        out.push(y as u8);
        out.extend(x.iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    }
    Ok(out)
}

pub fn load_cifar_binary(path: &Path, layout: CifarLayout) -> Result<LabeledDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cifar(&bytes, layout)
}

pub fn write_cifar_binary(dataset: &LabeledDataset, path: &Path, layout: CifarLayout) -> Result<()> {
    let bytes = encode_cifar(dataset, layout)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
