use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::scalar::Scalar;

/// Immutable set of `(features, label)` items sharing one feature shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    feature_shape: Vec<usize>,
    features: Vec<f32>,
    labels: Vec<usize>,
    num_classes: usize,
    /// CIFAR-100 superclass byte, carried only so binary files round-trip.
    coarse_labels: Option<Vec<u8>>,
}

impl LabeledDataset {
    pub fn new(feature_shape: &[usize], features: Vec<f32>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let width: usize = feature_shape.iter().product();
        if width == 0 {
            return Err(Error::invalid(format!("empty feature shape {feature_shape:?}")));
        }
        if features.len() != width * labels.len() {
            return Err(Error::Shape(format!(
                "{} feature values for {} items of shape {feature_shape:?}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(LabeledDataset {
            feature_shape: feature_shape.to_vec(),
            features,
            labels,
            num_classes,
            coarse_labels: None,
        })
    }

    pub(crate) fn with_coarse_labels(mut self, coarse: Vec<u8>) -> Self {
        debug_assert_eq!(coarse.len(), self.labels.len());
        self.coarse_labels = Some(coarse);
        self
    }

    pub(crate) fn coarse_labels(&self) -> Option<&[u8]> {
        self.coarse_labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_shape(&self) -> &[usize] {
        &self.feature_shape
    }

    pub fn feature_len(&self) -> usize {
        self.feature_shape.iter().product()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self, i: usize) -> &[f32] {
        let w = self.feature_len();
        &self.features[i * w..(i + 1) * w]
    }

    pub fn item(&self, i: usize) -> (&[f32], usize) {
        (self.features(i), self.labels[i])
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Item indices grouped by class, each list in ascending order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.num_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            by_class[y].push(i);
        }
        by_class
    }

    /// New dataset made of the given items, in the given order.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        let mut features = Vec::with_capacity(indices.len() * self.feature_len());
        for &i in indices {
            features.extend_from_slice(self.features(i));
        }
        LabeledDataset {
            feature_shape: self.feature_shape.clone(),
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            coarse_labels: self
                .coarse_labels
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }

    /// Stacks the given items into a `[M, ...feature_shape]` tensor.
    pub fn batch_tensor<T: Scalar>(&self, indices: &[usize]) -> Tensor<T> {
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(&self.feature_shape);
        let data = indices
            .iter()
            .flat_map(|&i| self.features(i).iter().map(|&v| T::lit(v as f64)))
            .collect();
        Tensor::from_vec(&shape, data).expect("consistent shape")
    }

    /// Per-channel mean and standard deviation over all items (channel = first feature axis).
    pub fn channel_stats(&self) -> (Vec<f32>, Vec<f32>) {
        let channels = if self.feature_shape.len() > 1 { self.feature_shape[0] } else { 1 };
        let per = self.feature_len() / channels;
        let mut sum = vec![0f64; channels];
        let mut sq = vec![0f64; channels];
        for i in 0..self.len() {
            for (c, chunk) in self.features(i).chunks_exact(per).enumerate() {
                for &v in chunk {
                    sum[c] += v as f64;
                    sq[c] += (v as f64) * (v as f64);
                }
            }
        }
        let n = (self.len() * per).max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| ((s / n - m * m).max(0.0).sqrt().max(1e-6)) as f32)
            .collect();
        (mean.into_iter().map(|m| m as f32).collect(), std)
    }

    /// Applies `(x - mean[c]) / std[c]` per channel.
    pub fn normalized(&self, mean: &[f32], std: &[f32]) -> LabeledDataset {
        let channels = mean.len();
        let per = self.feature_len() / channels;
        let mut out = self.clone();
        for item in out.features.chunks_exact_mut(self.feature_len()) {
            for (c, chunk) in item.chunks_exact_mut(per).enumerate() {
                for v in chunk {
                    *v = (*v - mean[c]) / std[c];
                }
            }
        }
        out
    }
}
