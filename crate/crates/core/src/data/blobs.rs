use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Isotropic Gaussian clusters with centers on a sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub num_classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// Radius of the sphere the class centers sit on.
    pub separation: f64,
    pub noise_sigma: f64,
}

impl BlobSpec {
    fn validate(&self) -> Result<()> {
        if !(self.separation > 0.0) || !(self.noise_sigma > 0.0) {
            return Err(Error::invalid(format!(
                "blob separation ({}) and noise sigma ({}) must be positive",
                self.separation, self.noise_sigma
            )));
        }
        if self.num_classes == 0 || self.dim == 0 {
            return Err(Error::invalid("blobs need at least one class and one dimension"));
        }
        Ok(())
    }
}

fn centers(spec: &BlobSpec, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..spec.num_classes)
        .map(|_| loop {
            let v: Vec<f64> = (0..spec.dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.iter().map(|x| x / norm * spec.separation).collect();
            }
        })
        .collect()
}

fn draw(spec: &BlobSpec, centers: &[Vec<f64>], per_class: usize, rng: &mut impl Rng) -> LabeledDataset {
    let noise = Normal::new(0.0, spec.noise_sigma).expect("positive sigma");
    let mut features = Vec::with_capacity(per_class * spec.num_classes * spec.dim);
    let mut labels = Vec::with_capacity(per_class * spec.num_classes);
    for _ in 0..per_class {
        for (y, c) in centers.iter().enumerate() {
            features.extend(c.iter().map(|&m| (m + noise.sample(rng)) as f32));
            labels.push(y);
        }
    }
    LabeledDataset::new(&[spec.dim], features, labels, spec.num_classes).expect("consistent blobs")
}

/// `per_class` samples around each of `num_classes` seeded centers.
pub fn gaussian_blobs(spec: &BlobSpec, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = centers(spec, &mut rng);
    Ok(draw(spec, &c, spec.per_class, &mut rng))
}

/// Training set identical to [`gaussian_blobs`] plus a held-out set from the same centers.
pub fn gaussian_blobs_split(spec: &BlobSpec, test_per_class: usize, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = centers(spec, &mut rng);
    let train = draw(spec, &c, spec.per_class, &mut rng);
    let test = draw(spec, &c, test_per_class, &mut rng);
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> BlobSpec {
        BlobSpec {
            num_classes: 10,
            per_class: 500,
            dim: 8,
            separation: 3.0,
            noise_sigma: 1.0,
        }
    }

    #[test]
    fn counts() {
        let d = gaussian_blobs(&spec(), 1).unwrap();
        assert_eq!(d.len(), 5000);
        assert_eq!(d.class_counts(), vec![500; 10]);
    }

    #[test]
    fn deterministic() {
        assert_eq!(gaussian_blobs(&spec(), 4).unwrap(), gaussian_blobs(&spec(), 4).unwrap());
        assert_ne!(gaussian_blobs(&spec(), 4).unwrap(), gaussian_blobs(&spec(), 5).unwrap());
    }

    #[test]
    fn split_shares_the_training_set() {
        let (train, test) = gaussian_blobs_split(&spec(), 20, 4).unwrap();
        assert_eq!(train, gaussian_blobs(&spec(), 4).unwrap());
        assert_eq!(test.class_counts(), vec![20; 10]);
    }

    #[test]
    fn rejects_nonpositive_noise() {
        let mut s = spec();
        s.noise_sigma = 0.0;
        assert!(gaussian_blobs(&s, 0).is_err());
    }
}
