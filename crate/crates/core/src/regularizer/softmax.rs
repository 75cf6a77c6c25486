use crate::batch::{LogitBatch, Matrix, ProbBatch};
use crate::scalar::Scalar;

/// Row-wise softmax with max subtraction, so large logits never overflow.
pub fn softmax<T: Scalar>(logits: &LogitBatch<T>) -> ProbBatch<T> {
    let mut out = Matrix::zeros(logits.batch_size(), logits.num_classes());
    for (i, row) in logits.row_iter().enumerate() {
        softmax_row(row, out.row_mut(i));
    }
    ProbBatch(out)
}

pub(crate) fn softmax_row<T: Scalar>(row: &[T], out: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// `log p_k` for one row, computed as `o_k - max - ln Σ exp(o_l - max)`.
pub(crate) fn log_softmax_row<T: Scalar>(row: &[T], out: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let log_total = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
    for (o, &v) in out.iter_mut().zip(row) {
        *o = v - max - log_total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn probs(row: &[f64]) -> Vec<f64> {
        let logits = LogitBatch::from_rows(&[row]).unwrap();
        softmax(&logits).row(0).to_vec()
    }

    #[test]
    fn symmetric_logits_split_evenly() {
        assert_eq!(probs(&[0.0, 0.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn ln2_gives_two_thirds() {
        let p = probs(&[2f64.ln(), 0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn huge_logit_does_not_overflow() {
        let p = probs(&[1000.0, 0.0]);
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn log_softmax_matches_log_of_softmax() {
        let row = [0.3, -1.2, 2.5, 0.0];
        let mut lp = [0.0; 4];
        log_softmax_row(&row, &mut lp);
        for (l, p) in lp.iter().zip(probs(&row)) {
            assert!((l - p.ln()).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn rows_are_stochastic_and_shift_invariant(
            row in prop::collection::vec(-50.0f64..50.0, 2..12),
            shift in -100.0f64..100.0,
        ) {
            let p = probs(&row);
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
            let shifted: Vec<f64> = row.iter().map(|v| v + shift).collect();
            for (a, b) in p.iter().zip(probs(&shifted)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
