//! Central finite differences, used as an independent oracle for backprop.

use super::model::Model;
use super::tensor::Tensor;
use crate::batch::LogitBatch;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `(f(x + h·e_i) − f(x − h·e_i)) / 2h` for every coordinate of `x`.
pub fn central_difference<T, F>(x: &[T], h: T, mut f: F) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<T>,
{
    if !(h > T::zero()) {
        return Err(Error::invalid(format!("finite-difference step {h} must be positive")));
    }
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe)?;
        probe[i] = orig - h;
        let down = f(&probe)?;
        probe[i] = orig;
        out.push((up - down) / (h + h));
    }
    Ok(out)
}

/// Finite-difference gradient of `loss_fn(model(input))` with respect to every parameter.
///
/// Targets and any loss settings are captured by `loss_fn`.
pub fn finite_diff_grad<T, F>(model: &mut Model<T>, input: &Tensor<T>, h: T, mut loss_fn: F) -> Result<Vec<Tensor<T>>>
where
    T: Scalar,
    F: FnMut(&LogitBatch<T>) -> Result<T>,
{
    if !(h > T::zero()) {
        return Err(Error::invalid(format!("finite-difference step {h} must be positive")));
    }
    let n_params = model.params().count();
    let mut grads = Vec::with_capacity(n_params);
    for pi in 0..n_params {
        let shape = model.params().nth(pi).expect("param").value.shape().to_vec();
        let len: usize = shape.iter().product();
        let mut g = Tensor::zeros(&shape);
        for j in 0..len {
            let orig = model.params().nth(pi).expect("param").value.data()[j];
            let mut eval = |model: &mut Model<T>, v: T| -> Result<T> {
                model.params_mut().nth(pi).expect("param").value.data_mut()[j] = v;
                let logits = model.forward(input, false)?;
                loss_fn(&logits)
            };
            let up = eval(model, orig + h)?;
            let down = eval(model, orig - h)?;
            model.params_mut().nth(pi).expect("param").value.data_mut()[j] = orig;
            g.data_mut()[j] = (up - down) / (h + h);
        }
        grads.push(g);
    }
    Ok(grads)
}

/// `|a − b| / max(|a|, |b|, floor)`; the floor keeps near-zero entries from dominating.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest [`relative_error`] over paired entries.
pub fn max_relative_error<T: Scalar>(analytic: &[T], numeric: &[T], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &b)| relative_error(a.to_f64_lossy(), b.to_f64_lossy(), floor))
        .fold(0.0, f64::max)
}
