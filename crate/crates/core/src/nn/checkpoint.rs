//! Little-endian binary checkpoints.
//!
//! Layout:
//!
//! | field          | encoding                                            |
//! |----------------|-----------------------------------------------------|
//! | magic          | 8 bytes, `SOSRCKPT`                                 |
//! | version        | u32 (currently 1)                                   |
//! | input rank     | u32, followed by that many u32 dimensions           |
//! | layer count    | u32                                                 |
//! | each layer     | u8 tag, then u32 arguments (see below)              |
//! | value count    | u64, total number of parameter values that follow   |
//! | parameters     | f32 values, per layer weight then bias, row-major   |
//!
//! Tags: 0 `dense(in, out)`, 1 `conv2d(in, out, kernel, stride, pad)`,
//! 2 `relu`, 3 `maxpool(size)`, 4 `flatten`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::layer::LayerSpec;
use super::model::{build_model, Model, ModelSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"SOSRCKPT";
pub const VERSION: u32 = 1;

pub fn encode_checkpoint<T: Scalar>(model: &Model<T>) -> Vec<u8> {
    let spec = model.spec();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let u32s = |out: &mut Vec<u8>, vals: &[usize]| {
        for &v in vals {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
    };
    u32s(&mut out, &[spec.input_shape.len()]);
    u32s(&mut out, &spec.input_shape);
    u32s(&mut out, &[spec.layers.len()]);
    for layer in &spec.layers {
        match *layer {
            LayerSpec::Dense { input, output } => {
                out.push(0);
                u32s(&mut out, &[input, output]);
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                out.push(1);
                u32s(&mut out, &[in_channels, out_channels, kernel, stride, padding]);
            }
            LayerSpec::Relu => out.push(2),
            LayerSpec::MaxPool2d { size } => {
                out.push(3);
                u32s(&mut out, &[size]);
            }
            LayerSpec::Flatten => out.push(4),
        }
    }
    out.extend_from_slice(&(model.num_params() as u64).to_le_bytes());
    for p in model.params() {
        for &v in p.value.data() {
            out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Format(format!("checkpoint truncated at byte {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<Model<T>> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::Format("not a checkpoint file (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != VERSION as usize {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let rank = c.u32()?;
    let input_shape = (0..rank).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
    let n_layers = c.u32()?;
    let mut layers = Vec::with_capacity(n_layers.min(1024));
    for _ in 0..n_layers {
        let layer = match c.u8()? {
            0 => LayerSpec::Dense {
                input: c.u32()?,
                output: c.u32()?,
            },
            1 => LayerSpec::Conv2d {
                in_channels: c.u32()?,
                out_channels: c.u32()?,
                kernel: c.u32()?,
                stride: c.u32()?,
                padding: c.u32()?,
            },
            2 => LayerSpec::Relu,
            3 => LayerSpec::MaxPool2d { size: c.u32()? },
            4 => LayerSpec::Flatten,
            tag => return Err(Error::Format(format!("unknown layer tag {tag}"))),
        };
        layers.push(layer);
    }
    let spec = ModelSpec::new(&input_shape, layers);
    let mut model: Model<T> = build_model(&spec, 0)?;
    let count = c.u64()?;
    if count != model.num_params() as u64 {
        return Err(Error::Format(format!(
            "checkpoint declares {count} parameters, layer spec needs {}",
            model.num_params()
        )));
    }
    for p in model.params_mut() {
        for v in p.value.data_mut() {
            let raw = f32::from_le_bytes(c.take(4)?.try_into().expect("4 bytes"));
            *v = T::lit(raw as f64);
        }
    }
    if c.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after parameters",
            bytes.len() - c.pos
        )));
    }
    Ok(model)
}

pub fn save_checkpoint<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_checkpoint(model))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Model<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
