//! Selective output smoothing: over-confidence detection, desired-output
//! construction and the joint cross-entropy + smoothing loss.
//!
//! A sample is over-confident when the model already classifies it correctly
//! with softmax probability strictly above the threshold `P`. For those rows a
//! desired output is built that keeps the maximum logit and replaces every
//! other logit by their mean. The penalty is the mean squared difference
//! between logits and desired output over all `M·K` entries, with the desired
//! output held fixed (no gradient flows through its construction).

use rand::Rng;

use super::cross_entropy::cross_entropy;
use super::schedule::BetaSchedule;
use super::softmax::softmax;
use super::targets::{validate_all, Target};
use crate::batch::{argmax, LogitBatch, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which samples get their desired output rewritten.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Variant {
    /// Only over-confident samples.
    #[default]
    Standard,
    /// Every sample, without checking confidence.
    Complete,
    /// An independent Bernoulli(`fraction`) draw per sample, redrawn every batch.
    RandomSampled { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SosrConfig {
    pub threshold_p: f64,
    pub beta: f64,
    pub variant: Variant,
    pub schedule: BetaSchedule,
}

impl Default for SosrConfig {
    fn default() -> Self {
        SosrConfig {
            threshold_p: 0.99,
            beta: 1.0,
            variant: Variant::Standard,
            schedule: BetaSchedule::Constant,
        }
    }
}

impl SosrConfig {
    pub fn new(threshold_p: f64, beta: f64) -> Result<Self> {
        let cfg = SosrConfig {
            threshold_p,
            beta,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_variant(mut self, variant: Variant) -> Result<Self> {
        self.variant = variant;
        self.validate()?;
        Ok(self)
    }

    pub fn with_schedule(mut self, schedule: BetaSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_p > 0.0 && self.threshold_p <= 1.0) {
            return Err(Error::invalid(format!(
                "threshold P = {} outside (0, 1]",
                self.threshold_p
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta = {} must be nonnegative", self.beta)));
        }
        if let Variant::RandomSampled { fraction } = self.variant {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::invalid(format!(
                    "random-sampled fraction {fraction} outside (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Desired output `Õ` together with the rows that were rewritten.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredOutput<T> {
    pub values: Matrix<T>,
    pub modified_mask: Vec<bool>,
}

/// Output of [`sosr_loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult<T> {
    pub total: T,
    pub ce_part: T,
    /// Unweighted `(1/MK) Σ (õ - o)²`.
    pub sosr_part: T,
    pub grad_logits: Matrix<T>,
    pub mask: Vec<bool>,
}

/// The smoothing term on its own, already scaled by the effective weight in `grad`.
#[derive(Debug, Clone, PartialEq)]
pub struct SosrTerm<T> {
    pub value: T,
    pub grad: Matrix<T>,
    pub desired: DesiredOutput<T>,
}

/// Flags samples whose argmax equals the label with probability strictly above `threshold_p`.
pub fn detect_overconfident<T: Scalar>(
    logits: &LogitBatch<T>,
    labels: &[usize],
    threshold_p: f64,
) -> Result<Vec<bool>> {
    let targets: Vec<Target<T>> = labels.iter().map(|&y| Target::Hard(y)).collect();
    detect_for_targets(logits, &targets, threshold_p)
}

/// CutMix detection: flags samples where `p[a] + p[b]` strictly exceeds `threshold_p`.
///
/// Equal labels are counted once. No argmax condition is applied.
pub fn detect_overconfident_cutmix<T: Scalar>(
    logits: &LogitBatch<T>,
    pairs: &[(usize, usize)],
    threshold_p: f64,
) -> Result<Vec<bool>> {
    let targets: Vec<Target<T>> = pairs
        .iter()
        .map(|&(a, b)| Target::Pair { a, b, lambda: T::one() })
        .collect();
    detect_for_targets(logits, &targets, threshold_p)
}

/// Per-row detection dispatching on the target kind. Smoothed targets use the argmax of `q`.
pub fn detect_for_targets<T: Scalar>(
    logits: &LogitBatch<T>,
    targets: &[Target<T>],
    threshold_p: f64,
) -> Result<Vec<bool>> {
    validate_all(targets, logits.batch_size(), logits.num_classes())?;
    let probs = softmax(logits);
    let p = T::lit(threshold_p);
    Ok(probs
        .row_iter()
        .zip(targets)
        .map(|(row, target)| match *target {
            Target::Pair { a, b, .. } => {
                let mass = if a == b { row[a] } else { row[a] + row[b] };
                mass > p
            }
            _ => {
                let y = target.primary_label().expect("single-label target");
                let top = argmax(row);
                top == y && row[top] > p
            }
        })
        .collect())
}

fn check_mask<T: Scalar>(logits: &LogitBatch<T>, mask: &[bool]) -> Result<()> {
    if mask.len() != logits.batch_size() {
        return Err(Error::invalid(format!(
            "mask has {} entries for a batch of {}",
            mask.len(),
            logits.batch_size()
        )));
    }
    Ok(())
}

/// Keeps the maximum logit of each row and sets the rest to `(sum - max)/(K - 1)`.
/// With two classes the single other logit is its own mean and is kept as is,
/// since `(a + b) - a` need not round back to `b`.
fn smooth_keep_max<T: Scalar>(row: &mut [T]) {
    let k = row.len();
    if k == 2 {
        return;
    }
    let index = argmax(row);
    let value = row[index];
    let sum: T = row.iter().copied().sum();
    let mean = (sum - value) / T::from_usize_lossy(k - 1);
    row.fill(mean);
    row[index] = value;
}

/// Keeps entries `a` and `b` and sets the remaining entries to their own mean.
fn smooth_keep_pair<T: Scalar>(row: &mut [T], a: usize, b: usize) {
    if a == b {
        let k = row.len();
        let sum: T = row.iter().enumerate().filter(|(i, _)| *i != a).map(|(_, &v)| v).sum();
        let mean = sum / T::from_usize_lossy(k - 1);
        for (i, v) in row.iter_mut().enumerate() {
            if i != a {
                *v = mean;
            }
        }
        return;
    }
    let rest = row.len() - 2;
    if rest == 0 {
        return;
    }
    let sum: T = row
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != a && *i != b)
        .map(|(_, &v)| v)
        .sum();
    let mean = sum / T::from_usize_lossy(rest);
    for (i, v) in row.iter_mut().enumerate() {
        if i != a && i != b {
            *v = mean;
        }
    }
}

/// Builds `Õ`: unmasked rows are copied verbatim, masked rows keep their maximum logit.
pub fn build_desired_output<T: Scalar>(logits: &LogitBatch<T>, mask: &[bool]) -> Result<DesiredOutput<T>> {
    check_mask(logits, mask)?;
    if logits.num_classes() < 2 {
        return Err(Error::invalid("desired output needs at least 2 classes"));
    }
    let mut values = logits.matrix().clone();
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        smooth_keep_max(values.row_mut(i));
    }
    Ok(DesiredOutput {
        values,
        modified_mask: mask.to_vec(),
    })
}

/// CutMix form of [`build_desired_output`]: masked rows keep both label logits.
pub fn build_desired_output_cutmix<T: Scalar>(
    logits: &LogitBatch<T>,
    mask: &[bool],
    pairs: &[(usize, usize)],
) -> Result<DesiredOutput<T>> {
    let targets: Vec<Target<T>> = pairs
        .iter()
        .map(|&(a, b)| Target::Pair { a, b, lambda: T::one() })
        .collect();
    build_desired_for_targets(logits, mask, &targets)
}

/// Per-row construction: pair targets keep both labels, everything else keeps the argmax.
pub fn build_desired_for_targets<T: Scalar>(
    logits: &LogitBatch<T>,
    mask: &[bool],
    targets: &[Target<T>],
) -> Result<DesiredOutput<T>> {
    check_mask(logits, mask)?;
    validate_all(targets, logits.batch_size(), logits.num_classes())?;
    let mut values = logits.matrix().clone();
    for (i, target) in targets.iter().enumerate().filter(|(i, _)| mask[*i]) {
        match *target {
            Target::Pair { a, b, .. } => smooth_keep_pair(values.row_mut(i), a, b),
            _ => smooth_keep_max(values.row_mut(i)),
        }
    }
    Ok(DesiredOutput {
        values,
        modified_mask: mask.to_vec(),
    })
}

/// Adjusts the detection mask for the chosen variant.
pub fn apply_variant_mask<R: Rng + ?Sized>(variant: Variant, base_mask: &[bool], rng: &mut R) -> Vec<bool> {
    match variant {
        Variant::Standard => base_mask.to_vec(),
        Variant::Complete => vec![true; base_mask.len()],
        Variant::RandomSampled { fraction } => {
            let f = fraction.clamp(0.0, 1.0);
            base_mask.iter().map(|_| rng.random_bool(f)).collect()
        }
    }
}

/// The smoothing penalty `(1/MK) Σ (õ - o)²` and its logit gradient `β·2/(MK)·(o - õ)`.
///
/// Gradient rows of unmodified samples are exactly zero.
pub fn sosr_penalty<T: Scalar, R: Rng + ?Sized>(
    logits: &LogitBatch<T>,
    targets: &[Target<T>],
    config: &SosrConfig,
    effective_beta: T,
    rng: &mut R,
) -> Result<SosrTerm<T>> {
    config.validate()?;
    if !(effective_beta >= T::zero()) {
        return Err(Error::invalid(format!(
            "effective beta {effective_beta} must be nonnegative"
        )));
    }
    let base = match config.variant {
        Variant::Standard => detect_for_targets(logits, targets, config.threshold_p)?,
        _ => {
            validate_all(targets, logits.batch_size(), logits.num_classes())?;
            vec![false; logits.batch_size()]
        }
    };
    let mask = apply_variant_mask(config.variant, &base, rng);
    let desired = build_desired_for_targets(logits, &mask, targets)?;

    let (m, k) = (logits.batch_size(), logits.num_classes());
    let mk = T::from_usize_lossy(m * k);
    let grad_scale = effective_beta * T::lit(2.0) / mk;
    let mut grad = Matrix::zeros(m, k);
    let mut sq_sum = T::zero();
    for i in (0..m).filter(|&i| mask[i]) {
        let (o, d) = (logits.row(i), desired.values.row(i));
        for ((g, &ov), &dv) in grad.row_mut(i).iter_mut().zip(o).zip(d) {
            let diff = ov - dv;
            sq_sum += diff * diff;
            *g = grad_scale * diff;
        }
    }

    Ok(SosrTerm {
        value: sq_sum / mk,
        grad,
        desired,
    })
}

/// Joint loss `CE + β·(1/MK) Σ (õ - o)²` and its gradient with respect to the logits.
///
/// `effective_beta` is the schedule-resolved weight for the current epoch.
pub fn sosr_loss<T: Scalar, R: Rng + ?Sized>(
    logits: &LogitBatch<T>,
    targets: &[Target<T>],
    config: &SosrConfig,
    effective_beta: T,
    rng: &mut R,
) -> Result<LossResult<T>> {
    let ce = cross_entropy(logits, targets)?;
    let term = sosr_penalty(logits, targets, config, effective_beta, rng)?;
    Ok(combine(ce.loss, ce.grad, term, effective_beta))
}

/// Adds a smoothing term onto a base loss. Unmodified rows of the base
/// gradient are left untouched; a zero weight leaves the whole gradient untouched.
pub(crate) fn combine<T: Scalar>(
    base_loss: T,
    mut base_grad: Matrix<T>,
    term: SosrTerm<T>,
    effective_beta: T,
) -> LossResult<T> {
    let mask = term.desired.modified_mask;
    if effective_beta != T::zero() {
        for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            for (g, &s) in base_grad.row_mut(i).iter_mut().zip(term.grad.row(i)) {
                *g += s;
            }
        }
    }
    LossResult {
        total: base_loss + effective_beta * term.value,
        ce_part: base_loss,
        sosr_part: term.value,
        grad_logits: base_grad,
        mask,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch(rows: &[&[f64]]) -> LogitBatch<f64> {
        LogitBatch::from_rows(rows).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn detection_examples() {
        let l = batch(&[&[10.0, 0.0, 0.0]]);
        assert_eq!(detect_overconfident(&l, &[0], 0.99).unwrap(), vec![true]);
        assert_eq!(detect_overconfident(&l, &[1], 0.99).unwrap(), vec![false]);
        let l = batch(&[&[1.0, 0.9, 0.0]]);
        assert_eq!(detect_overconfident(&l, &[0], 0.99).unwrap(), vec![false]);
    }

    #[test]
    fn detection_is_strict() {
        // p_0 = 0.5 exactly
        let l = batch(&[&[0.0, 0.0]]);
        assert_eq!(detect_overconfident(&l, &[0], 0.5).unwrap(), vec![false]);
    }

    #[test]
    fn desired_output_examples() {
        let l = batch(&[&[2.0, 1.0, 1.0, 0.0], &[2.0, 1.0, 1.0, 0.0]]);
        let d = build_desired_output(&l, &[true, false]).unwrap();
        let third = 2.0 / 3.0;
        assert_eq!(d.values.row(0), &[2.0, third, third, third]);
        assert_eq!(d.values.row(1), &[2.0, 1.0, 1.0, 0.0]);

        let l = batch(&[&[3.0, 1.0]]);
        assert_eq!(build_desired_output(&l, &[true]).unwrap().values.row(0), &[3.0, 1.0]);
    }

    #[test]
    fn mask_length_must_match() {
        let l = batch(&[&[3.0, 1.0]]);
        assert!(build_desired_output(&l, &[true, true]).is_err());
    }

    #[test]
    fn cutmix_desired_output_examples() {
        let l = batch(&[&[3.0, 2.0, 1.0, 0.0]]);
        let d = build_desired_output_cutmix(&l, &[true], &[(0, 1)]).unwrap();
        assert_eq!(d.values.row(0), &[3.0, 2.0, 0.5, 0.5]);
        let d = build_desired_output_cutmix(&l, &[false], &[(0, 1)]).unwrap();
        assert_eq!(d.values.row(0), l.row(0));
        let l = batch(&[&[3.0, 2.0, 1.0, 1.0]]);
        let d = build_desired_output_cutmix(&l, &[true], &[(0, 1)]).unwrap();
        assert_eq!(d.values.row(0), &[3.0, 2.0, 1.0, 1.0]);
        let l = batch(&[&[3.0, 2.0]]);
        let d = build_desired_output_cutmix(&l, &[true], &[(1, 0)]).unwrap();
        assert_eq!(d.values.row(0), &[3.0, 2.0]);
    }

    #[test]
    fn cutmix_equal_labels_act_as_single_label() {
        let l = batch(&[&[1.0, 4.0, 0.0, 2.0]]);
        let d = build_desired_output_cutmix(&l, &[true], &[(1, 1)]).unwrap();
        assert_eq!(d.values.row(0), &[1.0, 4.0, 1.0, 1.0]);
        let p = softmax(&l);
        let flags = detect_overconfident_cutmix(&l, &[(1, 1)], p.row(0)[1] - 1e-9).unwrap();
        assert_eq!(flags, vec![true]);
        let flags = detect_overconfident_cutmix(&l, &[(1, 1)], (p.row(0)[1] + 1e-9).min(1.0)).unwrap();
        assert_eq!(flags, vec![false]);
    }

    #[test]
    fn cutmix_detection_uniform_boundary() {
        let l = batch(&[&[0.0; 4]]);
        assert_eq!(detect_overconfident_cutmix(&l, &[(0, 1)], 0.5).unwrap(), vec![false]);
    }

    #[test]
    fn joint_loss_hand_value() {
        let l = batch(&[&[2.0, 1.0, 1.0, 0.0]]);
        let cfg = SosrConfig::new(0.5, 1.0).unwrap();
        let r = sosr_loss(&l, &[Target::Hard(0)], &cfg, 1.0, &mut rng()).unwrap();
        assert!((r.sosr_part - 1.0 / 6.0).abs() < 1e-15);
        assert!((r.total - 0.793_19).abs() < 1e-5);
        assert_eq!(r.mask, vec![true]);

        let cfg = SosrConfig::new(0.99, 1.0).unwrap();
        let r = sosr_loss(&l, &[Target::Hard(0)], &cfg, 1.0, &mut rng()).unwrap();
        assert_eq!(r.mask, vec![false]);
        assert_eq!(r.total, r.ce_part);
        assert!((r.total - 0.626_52).abs() < 1e-5);
    }

    #[test]
    fn zero_beta_is_cross_entropy() {
        let l = batch(&[&[5.0, -1.0, 0.5], &[0.0, 7.0, 1.0]]);
        let t = [Target::Hard(0), Target::Hard(1)];
        let cfg = SosrConfig::new(0.5, 0.0).unwrap();
        let r = sosr_loss(&l, &t, &cfg, 0.0, &mut rng()).unwrap();
        let ce = cross_entropy(&l, &t).unwrap();
        assert_eq!(r.total, ce.loss);
        assert_eq!(r.grad_logits, ce.grad);
        assert!(r.sosr_part > 0.0);
    }

    #[test]
    fn variants() {
        let base = vec![false, true, false];
        let mut r = rng();
        assert_eq!(apply_variant_mask(Variant::Standard, &base, &mut r), base);
        assert_eq!(apply_variant_mask(Variant::Complete, &base, &mut r), vec![true; 3]);
        assert_eq!(
            apply_variant_mask(Variant::RandomSampled { fraction: 1.0 }, &base, &mut r),
            vec![true; 3]
        );
    }

    #[test]
    fn random_sampled_fraction_concentrates() {
        let base = vec![false; 10_000];
        let flags = apply_variant_mask(Variant::RandomSampled { fraction: 0.1 }, &base, &mut rng());
        let n = flags.iter().filter(|&&f| f).count();
        assert!((900..=1100).contains(&n), "{n}");
    }

    #[test]
    fn complete_variant_keeps_argmax_even_when_wrong() {
        let l = batch(&[&[0.0, 3.0, 1.0]]);
        let cfg = SosrConfig::new(0.99, 1.0)
            .unwrap()
            .with_variant(Variant::Complete)
            .unwrap();
        let term = sosr_penalty(&l, &[Target::Hard(0)], &cfg, 1.0, &mut rng()).unwrap();
        assert_eq!(term.desired.values.row(0), &[0.5, 3.0, 0.5]);
    }

    #[test]
    fn config_validation() {
        assert!(SosrConfig::new(0.0, 1.0).is_err());
        assert!(SosrConfig::new(1.0, 1.0).is_ok());
        assert!(SosrConfig::new(0.5, -1.0).is_err());
        let bad = SosrConfig::default().with_variant(Variant::RandomSampled { fraction: 0.0 });
        assert!(bad.is_err());
    }
}
