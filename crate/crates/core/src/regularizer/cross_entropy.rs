use super::softmax::{log_softmax_row, softmax_row};
use super::targets::{validate_all, Target};
use crate::batch::{LogitBatch, Matrix};
use crate::error::Result;
use crate::scalar::Scalar;

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// A batch-mean loss value and its gradient with respect to the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<T> {
    pub loss: T,
    pub grad: Matrix<T>,
}

/// Batch-mean cross-entropy `Σ_k -q_k log p_k` with gradient `(p - q) / M`.
///
/// Pair targets expand to `λ·CE(a) + (1-λ)·CE(b)`.
pub fn cross_entropy<T: Scalar>(logits: &LogitBatch<T>, targets: &[Target<T>]) -> Result<LossGrad<T>> {
    let (m, k) = (logits.batch_size(), logits.num_classes());
    validate_all(targets, m, k)?;

    let inv_m = T::one() / T::from_usize_lossy(m);
    let log_floor = T::lit(PROB_FLOOR).ln();
    let mut grad = Matrix::zeros(m, k);
    let mut log_p = vec![T::zero(); k];
    let mut total = T::zero();

    for (i, (row, target)) in logits.row_iter().zip(targets).enumerate() {
        log_softmax_row(row, &mut log_p);
        let q = target.distribution(k);
        let sample_loss: T = q
            .iter()
            .zip(&log_p)
            .filter(|(&qk, _)| qk != T::zero())
            .map(|(&qk, &lp)| -qk * lp.max(log_floor))
            .sum();
        total += sample_loss;

        let g = grad.row_mut(i);
        softmax_row(row, g);
        for (gk, &qk) in g.iter_mut().zip(&q) {
            *gk = (*gk - qk) * inv_m;
        }
    }

    Ok(LossGrad {
        loss: total * inv_m,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ce(row: &[f64], y: usize) -> f64 {
        let logits = LogitBatch::from_rows(&[row]).unwrap();
        cross_entropy(&logits, &[Target::Hard(y)]).unwrap().loss
    }

    #[test]
    fn confident_correct_is_near_zero() {
        assert!(ce(&[40.0, 0.0, 0.0], 0) < 1e-16);
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        for y in 0..4 {
            assert!((ce(&[0.7; 4], y) - 4f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_computed_value() {
        // p_0 = e^2 / (e^2 + 2e + 1) ≈ 0.5344466
        assert!((ce(&[2.0, 1.0, 1.0, 0.0], 0) - 0.626_523_375_036_445_8).abs() < 1e-12);
    }

    #[test]
    fn underflowing_probability_is_clamped() {
        let loss = ce(&[0.0, 2000.0], 0);
        assert!((loss - (-(PROB_FLOOR.ln()))).abs() < 1e-9);
    }

    #[test]
    fn gradient_is_p_minus_q_over_m() {
        let logits = LogitBatch::from_rows(&[[2f64.ln(), 0.0], [0.0, 0.0]]).unwrap();
        let r = cross_entropy(&logits, &[Target::Hard(0), Target::Hard(1)]).unwrap();
        let expect = [(2.0 / 3.0 - 1.0) / 2.0, (1.0 / 3.0) / 2.0, 0.25, -0.25];
        for (g, e) in r.grad.as_slice().iter().zip(expect) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn pair_target_is_weighted_sum() {
        let row = [0.4, -1.0, 2.0, 0.3];
        let logits = LogitBatch::from_rows(&[row]).unwrap();
        let mixed = cross_entropy(&logits, &[Target::Pair { a: 2, b: 0, lambda: 0.3 }]).unwrap();
        let expect = 0.3 * ce(&row, 2) + 0.7 * ce(&row, 0);
        assert!((mixed.loss - expect).abs() < 1e-12);
    }

    #[test]
    fn class_count_mismatch_is_an_error() {
        let logits = LogitBatch::from_rows(&[[0.0, 1.0, 2.0]]).unwrap();
        assert!(cross_entropy(&logits, &[Target::Smoothed(vec![0.5, 0.5])]).is_err());
        assert!(cross_entropy(&logits, &[Target::Hard(0), Target::Hard(1)]).is_err());
    }
}
