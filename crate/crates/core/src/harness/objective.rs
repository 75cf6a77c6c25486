//! Per-batch training objective: base loss plus the optional smoothing term.

use rand::Rng;

use super::config::{BaseLoss, Regularizer};
use crate::batch::{LogitBatch, Matrix};
use crate::error::Result;
use crate::regularizer::{
    combine, confidence_penalty_loss, cross_entropy, label_smoothing_targets, sosr_penalty, LossGrad, Target,
};
use crate::scalar::Scalar;

/// Loss pieces for one minibatch. `sosr_part` here is the weighted contribution,
/// so `total == ce_part + sosr_part` up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss<T> {
    pub total: T,
    pub ce_part: T,
    pub sosr_part: T,
    pub grad_logits: Matrix<T>,
    pub flagged: usize,
}

/// Builds per-sample targets: pairs when a mix is given, smoothed
/// distributions under label smoothing, hard labels otherwise.
pub fn build_targets<T: Scalar>(
    labels: &[usize],
    pairs: Option<&[(usize, usize, f64)]>,
    base: BaseLoss,
    num_classes: usize,
) -> Result<Vec<Target<T>>> {
    if let Some(pairs) = pairs {
        return Ok(pairs
            .iter()
            .map(|&(a, b, lambda)| Target::Pair { a, b, lambda: T::lit(lambda) })
            .collect());
    }
    match base {
        BaseLoss::LabelSmoothing { epsilon } => labels
            .iter()
            .map(|&y| label_smoothing_targets(y, T::lit(epsilon), num_classes))
            .collect(),
        _ => Ok(labels.iter().map(|&y| Target::Hard(y)).collect()),
    }
}

/// Loss and logit gradient for one batch under `reg` at weight `effective_beta`.
pub fn batch_objective<T: Scalar, R: Rng + ?Sized>(
    logits: &LogitBatch<T>,
    targets: &[Target<T>],
    reg: &Regularizer,
    effective_beta: T,
    rng: &mut R,
) -> Result<BatchLoss<T>> {
    let LossGrad { loss, grad } = match reg.base {
        BaseLoss::ConfidencePenalty { lambda } => confidence_penalty_loss(logits, targets, T::lit(lambda))?,
        _ => cross_entropy(logits, targets)?,
    };
    match &reg.sosr {
        None => Ok(BatchLoss {
            total: loss,
            ce_part: loss,
            sosr_part: T::zero(),
            grad_logits: grad,
            flagged: 0,
        }),
        Some(cfg) => {
            let term = sosr_penalty(logits, targets, cfg, effective_beta, rng)?;
            let r = combine(loss, grad, term, effective_beta);
            Ok(BatchLoss {
                total: r.total,
                ce_part: r.ce_part,
                sosr_part: effective_beta * r.sosr_part,
                grad_logits: r.grad_logits,
                flagged: r.mask.iter().filter(|&&m| m).count(),
            })
        }
    }
}
