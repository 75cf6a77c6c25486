use super::cross_entropy::{cross_entropy, LossGrad};
use super::softmax::{log_softmax_row, softmax_row};
use super::targets::Target;
use crate::batch::LogitBatch;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cross-entropy minus `lambda_cp` times the batch-mean prediction entropy.
///
/// With `H = -Σ p log p`, `∂H/∂o_j = -p_j (log p_j + H)`.
pub fn confidence_penalty_loss<T: Scalar>(
    logits: &LogitBatch<T>,
    targets: &[Target<T>],
    lambda_cp: T,
) -> Result<LossGrad<T>> {
    if !(lambda_cp >= T::zero()) {
        return Err(Error::invalid(format!(
            "confidence penalty weight {lambda_cp} must be nonnegative"
        )));
    }
    let LossGrad { loss, mut grad } = cross_entropy(logits, targets)?;
    if lambda_cp == T::zero() {
        return Ok(LossGrad { loss, grad });
    }

    let (m, k) = (logits.batch_size(), logits.num_classes());
    let scale = lambda_cp / T::from_usize_lossy(m);
    let mut p = vec![T::zero(); k];
    let mut log_p = vec![T::zero(); k];
    let mut entropy_sum = T::zero();

    for (i, row) in logits.row_iter().enumerate() {
        softmax_row(row, &mut p);
        log_softmax_row(row, &mut log_p);
        let h: T = p.iter().zip(&log_p).map(|(&pk, &lk)| -pk * lk).sum();
        entropy_sum += h;
        for ((g, &pk), &lk) in grad.row_mut(i).iter_mut().zip(&p).zip(&log_p) {
            *g += scale * pk * (lk + h);
        }
    }

    Ok(LossGrad {
        loss: loss - scale * entropy_sum,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(row: &[f64]) -> LogitBatch<f64> {
        LogitBatch::from_rows(&[row]).unwrap()
    }

    #[test]
    fn uniform_logits() {
        let r = confidence_penalty_loss(&batch(&[0.0; 4]), &[Target::Hard(0)], 0.1).unwrap();
        assert!((r.loss - 0.9 * 4f64.ln()).abs() < 1e-12);
        assert!((r.loss - 1.247_66).abs() < 1e-5);
    }

    #[test]
    fn zero_weight_is_plain_cross_entropy() {
        let logits = batch(&[0.3, -0.2, 1.5]);
        let targets = [Target::Hard(2)];
        let a = confidence_penalty_loss(&logits, &targets, 0.0).unwrap();
        let b = cross_entropy(&logits, &targets).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn peaked_limit_is_near_zero() {
        let r = confidence_penalty_loss(&batch(&[40.0, 0.0, 0.0, 0.0]), &[Target::Hard(0)], 0.1).unwrap();
        assert!(r.loss.abs() < 1e-14);
    }

    #[test]
    fn negative_weight_rejected() {
        assert!(confidence_penalty_loss(&batch(&[0.0, 1.0]), &[Target::Hard(0)], -0.1).is_err());
    }
}
