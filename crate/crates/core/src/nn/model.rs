//! Feed-forward model: parameter storage, forward pass with optional
//! activation recording, and reverse-mode gradients seeded from the logits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::LayerSpec;
use super::tensor::Tensor;
use crate::batch::{LogitBatch, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-sample input shape plus the ordered layer list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn new(input_shape: &[usize], layers: Vec<LayerSpec>) -> Self {
        ModelSpec {
            input_shape: input_shape.to_vec(),
            layers,
        }
    }

    /// Per-sample input shape of every layer, followed by the output shape.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shapes = vec![self.input_shape.clone()];
        for (i, layer) in self.layers.iter().enumerate() {
            let prev = shapes.last().expect("non-empty");
            let next = layer.output_shape(prev).map_err(|reason| Error::Build {
                from: if i == 0 {
                    format!("input {prev:?}")
                } else {
                    format!("layer {} ({})", i - 1, self.layers[i - 1])
                },
                to: format!("layer {i} ({layer})"),
                reason,
            })?;
            shapes.push(next);
        }
        Ok(shapes)
    }
}

/// A parameter tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    fn new(value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param { value, grad }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LayerParams<T> {
    weight: Param<T>,
    bias: Param<T>,
}

#[derive(Debug, Clone, Default)]
struct Record<T> {
    /// Input activation of each layer.
    inputs: Vec<Tensor<T>>,
    /// Flat argmax positions for max-pool layers.
    pool_argmax: Vec<Vec<usize>>,
    output_shape: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Model<T> {
    spec: ModelSpec,
    shapes: Vec<Vec<usize>>,
    params: Vec<Option<LayerParams<T>>>,
    record: Option<Record<T>>,
}

/// Builds a model with He-uniform weights (bound `√(6/fan_in)`) and zero biases.
///
/// Weights are drawn in `f64` from a seeded ChaCha stream and then cast, so the
/// `f32` and `f64` builds of one seed hold the same values up to rounding.
pub fn build_model<T: Scalar>(spec: &ModelSpec, seed: u64) -> Result<Model<T>> {
    let shapes = spec.shapes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = spec
        .layers
        .iter()
        .map(|layer| {
            layer.param_shapes().map(|(w_shape, b_shape)| {
                let bound = (6.0 / layer.fan_in() as f64).sqrt();
                let n: usize = w_shape.iter().product();
                let w: Vec<T> = (0..n).map(|_| T::lit(rng.random_range(-bound..=bound))).collect();
                LayerParams {
                    weight: Param::new(Tensor::from_vec(&w_shape, w).expect("shape")),
                    bias: Param::new(Tensor::zeros(&b_shape)),
                }
            })
        })
        .collect();
    Ok(Model {
        spec: spec.clone(),
        shapes,
        params,
        record: None,
    })
}

impl<T: Scalar> Model<T> {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Per-sample output shape of the final layer.
    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().expect("non-empty")
    }

    /// Per-sample input shape of layer `i` (or of the output when `i == layers.len()`).
    pub fn shape_before(&self, i: usize) -> &[usize] {
        &self.shapes[i]
    }

    pub fn params(&self) -> impl Iterator<Item = &Param<T>> {
        self.params
            .iter()
            .flatten()
            .flat_map(|p| [&p.weight, &p.bias])
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params
            .iter_mut()
            .flatten()
            .flat_map(|p| [&mut p.weight, &mut p.bias])
    }

    pub fn num_params(&self) -> usize {
        self.params().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.grad.fill_zero();
        }
    }

    /// Same model with parameters converted to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        let cast_param = |p: &Param<T>| Param {
            value: p.value.cast(),
            grad: p.grad.cast(),
        };
        Model {
            spec: self.spec.clone(),
            shapes: self.shapes.clone(),
            params: self
                .params
                .iter()
                .map(|lp| {
                    lp.as_ref().map(|lp| LayerParams {
                        weight: cast_param(&lp.weight),
                        bias: cast_param(&lp.bias),
                    })
                })
                .collect(),
            record: None,
        }
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        if input.shape().len() != self.spec.input_shape.len() + 1 || input.shape()[1..] != self.spec.input_shape[..] {
            return Err(Error::Shape(format!(
                "model expects inputs of shape [M, {}], got {:?}",
                self.spec
                    .input_shape
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(", "),
                input.shape()
            )));
        }
        if input.batch() == 0 {
            return Err(Error::invalid("empty input batch"));
        }
        Ok(())
    }

    /// Runs the first `n_layers` layers without recording.
    pub fn forward_prefix(&self, input: &Tensor<T>, n_layers: usize) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let mut x = input.clone();
        for i in 0..n_layers.min(self.spec.layers.len()) {
            x = self.apply(i, &x, None);
        }
        Ok(x)
    }

    /// Inference-only forward pass; leaves any recorded activations alone.
    pub fn predict(&self, input: &Tensor<T>) -> Result<LogitBatch<T>> {
        LogitBatch::new(self.forward_prefix(input, self.spec.layers.len())?.into_matrix()?)
    }

    /// Full forward pass. With `record`, activations are kept for [`Model::backward`].
    pub fn forward(&mut self, input: &Tensor<T>, record: bool) -> Result<LogitBatch<T>> {
        LogitBatch::new(self.forward_tensor(input, record)?.into_matrix()?)
    }

    /// Forward pass returning the raw `[M, K]` output without logit validation.
    pub fn forward_tensor(&mut self, input: &Tensor<T>, record: bool) -> Result<Tensor<T>> {
        self.check_input(input)?;
        if self.output_shape().len() != 1 {
            return Err(Error::Shape(format!(
                "model output {:?} is not a flat logit vector",
                self.output_shape()
            )));
        }
        let mut rec = record.then(Record::default);
        let mut x = input.clone();
        for i in 0..self.spec.layers.len() {
            let next = self.apply(i, &x, rec.as_mut());
            if let Some(r) = rec.as_mut() {
                r.inputs.push(x);
            }
            x = next;
        }
        if let Some(r) = rec.as_mut() {
            r.output_shape = x.shape().to_vec();
        }
        self.record = rec;
        Ok(x)
    }

    fn apply(&self, i: usize, x: &Tensor<T>, rec: Option<&mut Record<T>>) -> Tensor<T> {
        let m = x.batch();
        let out_shape: Vec<usize> = std::iter::once(m).chain(self.shapes[i + 1].iter().copied()).collect();
        match self.spec.layers[i] {
            LayerSpec::Dense { input, output } => {
                let p = self.params[i].as_ref().expect("dense params");
                let (w, b) = (p.weight.value.data(), p.bias.value.data());
                let mut y = Tensor::zeros(&out_shape);
                for (xs, ys) in x.data().chunks_exact(input).zip(y.data_mut().chunks_exact_mut(output)) {
                    for (o, yv) in ys.iter_mut().enumerate() {
                        let wr = &w[o * input..(o + 1) * input];
                        *yv = b[o] + wr.iter().zip(xs).map(|(&a, &c)| a * c).sum::<T>();
                    }
                }
                y
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let p = self.params[i].as_ref().expect("conv params");
                let (w, b) = (p.weight.value.data(), p.bias.value.data());
                let (h, wd) = (self.shapes[i][1], self.shapes[i][2]);
                let (oh, ow) = (out_shape[2], out_shape[3]);
                let mut y = Tensor::zeros(&out_shape);
                let yd = y.data_mut();
                let xd = x.data();
                for n in 0..m {
                    for oc in 0..out_channels {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let mut acc = b[oc];
                                for ic in 0..in_channels {
                                    for ky in 0..kernel {
                                        let iy = (oy * stride + ky) as isize - padding as isize;
                                        if iy < 0 || iy >= h as isize {
                                            continue;
                                        }
                                        for kx in 0..kernel {
                                            let ix = (ox * stride + kx) as isize - padding as isize;
                                            if ix < 0 || ix >= wd as isize {
                                                continue;
                                            }
                                            let xi = ((n * in_channels + ic) * h + iy as usize) * wd + ix as usize;
                                            let wi = ((oc * in_channels + ic) * kernel + ky) * kernel + kx;
                                            acc += w[wi] * xd[xi];
                                        }
                                    }
                                }
                                yd[((n * out_channels + oc) * oh + oy) * ow + ox] = acc;
                            }
                        }
                    }
                }
                y
            }
            LayerSpec::Relu => {
                let data = x.data().iter().map(|&v| v.max(T::zero())).collect();
                Tensor::from_vec(&out_shape, data).expect("shape")
            }
            LayerSpec::MaxPool2d { size } => {
                let [c, h, wd] = self.shapes[i][..] else { unreachable!() };
                let (oh, ow) = (h / size, wd / size);
                let mut y = Tensor::zeros(&out_shape);
                let mut arg = vec![0usize; y.len()];
                let xd = x.data();
                for n in 0..m {
                    for ch in 0..c {
                        let base = (n * c + ch) * h * wd;
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let mut best = base + oy * size * wd + ox * size;
                                for dy in 0..size {
                                    for dx in 0..size {
                                        let idx = base + (oy * size + dy) * wd + ox * size + dx;
                                        if xd[idx] > xd[best] {
                                            best = idx;
                                        }
                                    }
                                }
                                let o = ((n * c + ch) * oh + oy) * ow + ox;
                                y.data_mut()[o] = xd[best];
                                arg[o] = best;
                            }
                        }
                    }
                }
                if let Some(r) = rec {
                    r.pool_argmax.push(arg);
                }
                y
            }
            LayerSpec::Flatten => x.clone().reshape(&out_shape).expect("flatten"),
        }
    }

    /// Fills parameter gradients for the loss whose logit gradient is `grad_logits`.
    ///
    /// Consumes the activations recorded by the last `forward(.., true)`.
    pub fn backward(&mut self, grad_logits: &Matrix<T>) -> Result<()> {
        let rec = self
            .record
            .take()
            .ok_or_else(|| Error::State("backward called without a recorded forward pass".into()))?;
        if [grad_logits.rows(), grad_logits.cols()] != rec.output_shape[..] {
            let shape = rec.output_shape.clone();
            self.record = Some(rec);
            return Err(Error::Shape(format!(
                "logit gradient is {}x{}, recorded output is {shape:?}",
                grad_logits.rows(),
                grad_logits.cols()
            )));
        }
        self.zero_grads();

        let mut pools = rec.pool_argmax.into_iter().rev();
        let mut dy: Tensor<T> = grad_logits.clone().into();
        for i in (0..self.spec.layers.len()).rev() {
            let x = &rec.inputs[i];
            let m = x.batch();
            dy = match self.spec.layers[i] {
                LayerSpec::Dense { input, output } => {
                    let p = self.params[i].as_mut().expect("dense params");
                    let w = p.weight.value.data();
                    let mut dx = Tensor::zeros(x.shape());
                    {
                        let dw = p.weight.grad.data_mut();
                        for (xs, gs) in x.data().chunks_exact(input).zip(dy.data().chunks_exact(output)) {
                            for (o, &g) in gs.iter().enumerate() {
                                for (d, &xv) in dw[o * input..(o + 1) * input].iter_mut().zip(xs) {
                                    *d += g * xv;
                                }
                            }
                        }
                    }
                    for gs in dy.data().chunks_exact(output) {
                        for (b, &g) in p.bias.grad.data_mut().iter_mut().zip(gs) {
                            *b += g;
                        }
                    }
                    for (gs, dxs) in dy.data().chunks_exact(output).zip(dx.data_mut().chunks_exact_mut(input)) {
                        for (o, &g) in gs.iter().enumerate() {
                            for (d, &wv) in dxs.iter_mut().zip(&w[o * input..(o + 1) * input]) {
                                *d += g * wv;
                            }
                        }
                    }
                    dx
                }
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                } => {
                    let (h, wd) = (self.shapes[i][1], self.shapes[i][2]);
                    let (oh, ow) = (self.shapes[i + 1][1], self.shapes[i + 1][2]);
                    let p = self.params[i].as_mut().expect("conv params");
                    let w = p.weight.value.data().to_vec();
                    let dw = p.weight.grad.data_mut();
                    let mut dx = Tensor::zeros(x.shape());
                    let dxd = dx.data_mut();
                    let (xd, gd) = (x.data(), dy.data());
                    for n in 0..m {
                        for oc in 0..out_channels {
                            for oy in 0..oh {
                                for ox in 0..ow {
                                    let g = gd[((n * out_channels + oc) * oh + oy) * ow + ox];
                                    if g == T::zero() {
                                        continue;
                                    }
                                    p.bias.grad.data_mut()[oc] += g;
                                    for ic in 0..in_channels {
                                        for ky in 0..kernel {
                                            let iy = (oy * stride + ky) as isize - padding as isize;
                                            if iy < 0 || iy >= h as isize {
                                                continue;
                                            }
                                            for kx in 0..kernel {
                                                let ix = (ox * stride + kx) as isize - padding as isize;
                                                if ix < 0 || ix >= wd as isize {
                                                    continue;
                                                }
                                                let xi = ((n * in_channels + ic) * h + iy as usize) * wd + ix as usize;
                                                let wi = ((oc * in_channels + ic) * kernel + ky) * kernel + kx;
                                                dw[wi] += g * xd[xi];
                                                dxd[xi] += g * w[wi];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                    dx
                }
                LayerSpec::Relu => {
                    let data = x
                        .data()
                        .iter()
                        .zip(dy.data())
                        .map(|(&xv, &g)| if xv > T::zero() { g } else { T::zero() })
                        .collect();
                    Tensor::from_vec(x.shape(), data)?
                }
                LayerSpec::MaxPool2d { .. } => {
                    let arg = pools.next().expect("recorded pool indices");
                    let mut dx = Tensor::zeros(x.shape());
                    for (&src, &g) in arg.iter().zip(dy.data()) {
                        dx.data_mut()[src] += g;
                    }
                    dx
                }
                LayerSpec::Flatten => dy.reshape(x.shape())?,
            };
        }
        Ok(())
    }
}
