//! Evaluation-mode passes over a dataset: accuracy, mean cross-entropy and
//! the over-confidence census.

use crate::batch::{argmax, LogitBatch};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::regularizer::{cross_entropy, softmax_row, Target};
use crate::scalar::Scalar;

const EVAL_CHUNK: usize = 512;

/// Accuracy, mean CE and census counts from one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub accuracy: f64,
    pub mean_ce: f64,
    pub census: Vec<usize>,
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    match thresholds.iter().find(|&&t| !(0.0..1.0).contains(&t)) {
        Some(t) => Err(Error::invalid(format!("census threshold {t} outside [0, 1)"))),
        None => Ok(()),
    }
}

/// Runs `f` on the logits of consecutive chunks together with their labels.
pub(crate) fn for_each_chunk<T: Scalar>(
    model: &Model<T>,
    dataset: &LabeledDataset,
    mut f: impl FnMut(&LogitBatch<T>, &[usize]) -> Result<()>,
) -> Result<()> {
    let indices: Vec<usize> = (0..dataset.len()).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let logits = model.predict(&dataset.batch_tensor(chunk))?;
        let labels: Vec<usize> = chunk.iter().map(|&i| dataset.labels()[i]).collect();
        f(&logits, &labels)?;
    }
    Ok(())
}

/// Accuracy, mean CE and, for every threshold, the number of samples whose
/// argmax is the label with probability strictly above it.
pub fn evaluate_with_census<T: Scalar>(
    model: &Model<T>,
    dataset: &LabeledDataset,
    thresholds: &[f64],
) -> Result<EvalSummary> {
    check_thresholds(thresholds)?;
    let mut census = vec![0usize; thresholds.len()];
    let (mut correct, mut ce_sum) = (0usize, 0.0f64);
    for_each_chunk(model, dataset, |logits, labels| {
        let targets: Vec<Target<T>> = labels.iter().map(|&y| Target::Hard(y)).collect();
        ce_sum += cross_entropy(logits, &targets)?.loss.to_f64_lossy() * labels.len() as f64;
        let mut p = vec![T::zero(); logits.num_classes()];
        for (row, &y) in logits.row_iter().zip(labels) {
            if argmax(row) != y {
                continue;
            }
            correct += 1;
            softmax_row(row, &mut p);
            let py = p[y].to_f64_lossy();
            for (c, &t) in census.iter_mut().zip(thresholds) {
                if py > t {
                    *c += 1;
                }
            }
        }
        Ok(())
    })?;
    let n = dataset.len().max(1) as f64;
    Ok(EvalSummary {
        accuracy: correct as f64 / n,
        mean_ce: ce_sum / n,
        census,
    })
}

/// Top-1 accuracy (ties to the lowest index) and mean cross-entropy.
pub fn evaluate<T: Scalar>(model: &Model<T>, dataset: &LabeledDataset) -> Result<(f64, f64)> {
    let s = evaluate_with_census(model, dataset, &[])?;
    Ok((s.accuracy, s.mean_ce))
}

/// Per-threshold over-confident counts, computed without augmentation.
pub fn census_overconfident<T: Scalar>(
    model: &Model<T>,
    dataset: &LabeledDataset,
    thresholds: &[f64],
) -> Result<Vec<usize>> {
    Ok(evaluate_with_census(model, dataset, thresholds)?.census)
}

/// Mean over over-confident samples of the population standard deviation of
/// their non-target logits. `None` when no sample is over-confident.
pub fn nontarget_logit_spread<T: Scalar>(
    model: &Model<T>,
    dataset: &LabeledDataset,
    threshold_p: f64,
) -> Result<Option<f64>> {
    check_thresholds(&[threshold_p])?;
    let (mut sum, mut count) = (0.0f64, 0usize);
    for_each_chunk(model, dataset, |logits, labels| {
        let mut p = vec![T::zero(); logits.num_classes()];
        for (row, &y) in logits.row_iter().zip(labels) {
            softmax_row(row, &mut p);
            if argmax(row) != y || !(p[y].to_f64_lossy() > threshold_p) {
                continue;
            }
            let others: Vec<f64> = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != y)
                .map(|(_, v)| v.to_f64_lossy())
                .collect();
            let mean = others.iter().sum::<f64>() / others.len() as f64;
            let var = others.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / others.len() as f64;
            sum += var.sqrt();
            count += 1;
        }
        Ok(())
    })?;
    Ok((count > 0).then(|| sum / count as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{build_model, LayerSpec, ModelSpec};

    /// Dense identity model: logits equal the input features.
    fn echo_model(k: usize, scale: f32) -> Model<f32> {
        let spec = ModelSpec::new(&[k], vec![LayerSpec::Dense { input: k, output: k }]);
        let mut m = build_model::<f32>(&spec, 0).unwrap();
        {
            let mut params = m.params_mut();
            let w = params.next().unwrap();
            w.value.fill_zero();
            for i in 0..k {
                w.value.data_mut()[i * k + i] = scale;
            }
            params.next().unwrap().value.fill_zero();
        }
        m
    }

    fn one_hot_dataset(labels: &[usize], k: usize) -> LabeledDataset {
        let features = labels
            .iter()
            .flat_map(|&y| (0..k).map(move |j| if j == y { 1.0 } else { 0.0 }))
            .collect();
        LabeledDataset::new(&[k], features, labels.to_vec(), k).unwrap()
    }

    #[test]
    fn echo_of_true_label_is_fully_accurate() {
        let ds = one_hot_dataset(&[0, 1, 2, 1], 3);
        let (acc, _) = evaluate(&echo_model(3, 10.0), &ds).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn constant_logits_give_chance_accuracy() {
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let ds = one_hot_dataset(&labels, 4);
        let (acc, ce) = evaluate(&echo_model(4, 0.0), &ds).unwrap();
        assert_eq!(acc, 0.25);
        assert!((ce - 4f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn two_of_three_correct() {
        // Third sample claims class 0 but its features point at class 1.
        let features = vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let ds = LabeledDataset::new(&[2], features, vec![0, 1, 0], 2).unwrap();
        let (acc, _) = evaluate(&echo_model(2, 1.0), &ds).unwrap();
        assert!((acc - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn census_is_monotone_and_zero_threshold_counts_correct() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let ds = one_hot_dataset(&labels, 3);
        for scale in [0.5f32, 2.0, 5.0, 8.0] {
            let m = echo_model(3, scale);
            let s = evaluate_with_census(&m, &ds, &[0.0, 0.7, 0.9, 0.99]).unwrap();
            assert!(s.census.windows(2).all(|w| w[0] >= w[1]), "{:?}", s.census);
            assert_eq!(s.census[0], (s.accuracy * 30.0).round() as usize);
        }
        assert!(census_overconfident(&echo_model(3, 1.0), &ds, &[1.5]).is_err());
    }

    #[test]
    fn untrained_model_has_no_overconfident_samples() {
        let k = 100;
        let labels: Vec<usize> = (0..200).map(|i| i % k).collect();
        let ds = one_hot_dataset(&labels, k);
        let spec = ModelSpec::new(&[k], vec![LayerSpec::Dense { input: k, output: k }]);
        let m = build_model::<f32>(&spec, 3).unwrap();
        assert_eq!(census_overconfident(&m, &ds, &[0.99]).unwrap(), vec![0]);
    }

    #[test]
    fn spread_is_zero_for_flat_non_targets() {
        let ds = one_hot_dataset(&[0, 1, 2], 3);
        let spread = nontarget_logit_spread(&echo_model(3, 10.0), &ds, 0.99).unwrap();
        assert_eq!(spread, Some(0.0));
        assert_eq!(nontarget_logit_spread(&echo_model(3, 0.1), &ds, 0.99).unwrap(), None);
    }
}
