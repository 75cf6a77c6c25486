use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-sample supervision.
#[derive(Debug, Clone, PartialEq)]
pub enum Target<T> {
    /// One-hot on a class index.
    Hard(usize),
    /// Arbitrary target distribution over the K classes.
    Smoothed(Vec<T>),
    /// CutMix label pair; `lambda` is the weight on `a`.
    Pair { a: usize, b: usize, lambda: T },
}

impl<T: Scalar> Target<T> {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        match self {
            Target::Hard(y) if *y >= num_classes => Err(Error::invalid(format!(
                "label {y} out of range for {num_classes} classes"
            ))),
            Target::Hard(_) => Ok(()),
            Target::Smoothed(q) => {
                if q.len() != num_classes {
                    return Err(Error::invalid(format!(
                        "target distribution has {} entries, logits have {num_classes} classes",
                        q.len()
                    )));
                }
                if q.iter().any(|&v| !(v >= T::zero())) {
                    return Err(Error::invalid("target distribution has a negative entry"));
                }
                let total: T = q.iter().copied().sum();
                if (total - T::one()).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(16.0)) {
                    return Err(Error::invalid(format!(
                        "target distribution sums to {total}, not 1"
                    )));
                }
                Ok(())
            }
            Target::Pair { a, b, lambda } => {
                if *a >= num_classes || *b >= num_classes {
                    return Err(Error::invalid(format!(
                        "label pair ({a}, {b}) out of range for {num_classes} classes"
                    )));
                }
                if !(*lambda >= T::zero() && *lambda <= T::one()) {
                    return Err(Error::invalid(format!("mix coefficient {lambda} outside [0, 1]")));
                }
                Ok(())
            }
        }
    }

    /// Dense target distribution `q`.
    pub fn distribution(&self, num_classes: usize) -> Vec<T> {
        match self {
            Target::Hard(y) => {
                let mut q = vec![T::zero(); num_classes];
                q[*y] = T::one();
                q
            }
            Target::Smoothed(q) => q.clone(),
            Target::Pair { a, b, .. } if a == b => Target::Hard(*a).distribution(num_classes),
            Target::Pair { a, b, lambda } => {
                let mut q = vec![T::zero(); num_classes];
                q[*a] += *lambda;
                q[*b] += T::one() - *lambda;
                q
            }
        }
    }

    /// The class treated as "correct" when checking for over-confidence.
    ///
    /// Pair targets have no single class; they return `None`.
    pub fn primary_label(&self) -> Option<usize> {
        match self {
            Target::Hard(y) => Some(*y),
            Target::Smoothed(q) => Some(crate::batch::argmax(q)),
            Target::Pair { .. } => None,
        }
    }
}

pub(crate) fn validate_all<T: Scalar>(targets: &[Target<T>], batch: usize, k: usize) -> Result<()> {
    if targets.len() != batch {
        return Err(Error::invalid(format!(
            "{} targets supplied for a batch of {batch}",
            targets.len()
        )));
    }
    targets.iter().try_for_each(|t| t.validate(k))
}

/// Label smoothing: `q_y = 1 - ε + ε/K`, every other class `ε/K`.
pub fn label_smoothing_targets<T: Scalar>(y: usize, epsilon: T, num_classes: usize) -> Result<Target<T>> {
    if !(epsilon >= T::zero() && epsilon < T::one()) {
        return Err(Error::invalid(format!("smoothing epsilon {epsilon} outside [0, 1)")));
    }
    if y >= num_classes {
        return Err(Error::invalid(format!(
            "label {y} out of range for {num_classes} classes"
        )));
    }
    let off = epsilon / T::from_usize_lossy(num_classes);
    let mut q = vec![off; num_classes];
    q[y] = T::one() - epsilon + off;
    Ok(Target::Smoothed(q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothing_ten_classes() {
        let Target::Smoothed(q) = label_smoothing_targets(3, 0.1f64, 10).unwrap() else {
            unreachable!()
        };
        assert!((q[3] - 0.91).abs() < 1e-15);
        for (k, v) in q.iter().enumerate().filter(|(k, _)| *k != 3) {
            assert!((v - 0.01).abs() < 1e-15, "class {k}");
        }
        assert!(Target::Smoothed(q).validate(10).is_ok());
    }

    #[test]
    fn smoothing_zero_is_one_hot() {
        let t = label_smoothing_targets(2, 0.0f64, 5).unwrap();
        assert_eq!(t.distribution(5), Target::<f64>::Hard(2).distribution(5));
    }

    #[test]
    fn smoothing_binary() {
        let t = label_smoothing_targets(0, 0.1f64, 2).unwrap();
        let q = t.distribution(2);
        assert!((q[0] - 0.95).abs() < 1e-15 && (q[1] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn smoothing_rejects_bad_epsilon() {
        assert!(label_smoothing_targets(0, 1.0f64, 3).is_err());
        assert!(label_smoothing_targets(0, -0.1f64, 3).is_err());
        assert!(label_smoothing_targets(3, 0.1f64, 3).is_err());
    }

    #[test]
    fn validation_catches_bad_targets() {
        assert!(Target::<f64>::Hard(4).validate(4).is_err());
        assert!(Target::Smoothed(vec![0.5, 0.6]).validate(2).is_err());
        assert!(Target::Smoothed(vec![1.5, -0.5]).validate(2).is_err());
        assert!(Target::Smoothed(vec![0.5, 0.5]).validate(3).is_err());
        assert!(Target::Pair { a: 0, b: 3, lambda: 0.5 }.validate(3).is_err());
        assert!(Target::Pair { a: 0, b: 1, lambda: 1.5 }.validate(3).is_err());
        assert!(Target::Pair { a: 0, b: 1, lambda: 0.25 }.validate(3).is_ok());
    }

    #[test]
    fn pair_with_equal_labels_is_one_hot() {
        let q = Target::Pair { a: 1, b: 1, lambda: 0.3f64 }.distribution(3);
        assert_eq!(q, vec![0.0, 1.0, 0.0]);
    }
}
