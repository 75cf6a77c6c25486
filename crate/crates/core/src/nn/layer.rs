use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// One layer of a feed-forward model. Shapes are per sample (no batch axis).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    /// Non-overlapping `size × size` max pooling.
    MaxPool2d {
        size: usize,
    },
    Flatten,
}

impl LayerSpec {
    /// Per-sample output shape for a given per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        match *self {
            LayerSpec::Dense { input: n_in, output } => match input {
                [n] if *n == n_in => Ok(vec![output]),
                _ => Err(format!("dense layer expects input [{n_in}], got {input:?}")),
            },
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let [c, h, w] = input else {
                    return Err(format!("conv2d expects a [C, H, W] input, got {input:?}"));
                };
                if *c != in_channels {
                    return Err(format!("conv2d expects {in_channels} channels, got {c}"));
                }
                if kernel == 0 || stride == 0 {
                    return Err("conv2d kernel and stride must be positive".into());
                }
                if h + 2 * padding < kernel || w + 2 * padding < kernel {
                    return Err(format!("kernel {kernel} larger than padded input {input:?}"));
                }
                Ok(vec![
                    out_channels,
                    (h + 2 * padding - kernel) / stride + 1,
                    (w + 2 * padding - kernel) / stride + 1,
                ])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::MaxPool2d { size } => {
                let [c, h, w] = input else {
                    return Err(format!("max pool expects a [C, H, W] input, got {input:?}"));
                };
                if size == 0 || *h < size || *w < size {
                    return Err(format!("pool size {size} does not fit input {input:?}"));
                }
                Ok(vec![*c, h / size, w / size])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        }
    }

    /// Shapes of (weight, bias), if the layer has parameters.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Dense { input, output } => Some((vec![output, input], vec![output])),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some((vec![out_channels, in_channels, kernel, kernel], vec![out_channels])),
            _ => None,
        }
    }

    pub fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Dense { input, .. } => input,
            LayerSpec::Conv2d {
                in_channels, kernel, ..
            } => in_channels * kernel * kernel,
            _ => 0,
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Dense { input, output } => write!(f, "dense:{input}:{output}"),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => write!(f, "conv2d:{in_channels}:{out_channels}:{kernel}:{stride}:{padding}"),
            LayerSpec::Relu => write!(f, "relu"),
            LayerSpec::MaxPool2d { size } => write!(f, "maxpool:{size}"),
            LayerSpec::Flatten => write!(f, "flatten"),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    /// Parses `dense:IN:OUT`, `conv2d:IN:OUT:K:STRIDE:PAD`, `relu`, `maxpool:S` or `flatten`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').map(str::trim).collect();
        let nums = |expected: usize| -> Result<Vec<usize>> {
            if parts.len() != expected + 1 {
                return Err(Error::Config(format!(
                    "layer `{s}` needs {expected} numeric arguments"
                )));
            }
            parts[1..]
                .iter()
                .map(|p| {
                    p.parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad number `{p}` in layer `{s}`")))
                })
                .collect()
        };
        match parts[0] {
            "dense" => {
                let n = nums(2)?;
                Ok(LayerSpec::Dense {
                    input: n[0],
                    output: n[1],
                })
            }
            "conv2d" => {
                let n = nums(5)?;
                Ok(LayerSpec::Conv2d {
                    in_channels: n[0],
                    out_channels: n[1],
                    kernel: n[2],
                    stride: n[3],
                    padding: n[4],
                })
            }
            "relu" => nums(0).map(|_| LayerSpec::Relu),
            "maxpool" => Ok(LayerSpec::MaxPool2d { size: nums(1)?[0] }),
            "flatten" => nums(0).map(|_| LayerSpec::Flatten),
            other => Err(Error::Config(format!("unknown layer kind `{other}`"))),
        }
    }
}
