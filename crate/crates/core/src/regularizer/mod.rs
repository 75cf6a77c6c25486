//! Pure batched loss math: softmax, cross-entropy, label smoothing,
//! confidence penalty and selective output smoothing, each with analytic
//! gradients with respect to the logits.

mod confidence_penalty;
mod cross_entropy;
mod schedule;
mod softmax;
mod sosr;
mod targets;

pub use confidence_penalty::confidence_penalty_loss;
pub use cross_entropy::{cross_entropy, LossGrad, PROB_FLOOR};
pub use schedule::{beta_at_epoch, BetaSchedule};
pub use softmax::softmax;
pub use sosr::{
    apply_variant_mask, build_desired_for_targets, build_desired_output, build_desired_output_cutmix,
    detect_for_targets, detect_overconfident, detect_overconfident_cutmix, sosr_loss, sosr_penalty,
    DesiredOutput, LossResult, SosrConfig, SosrTerm, Variant,
};
pub use targets::{label_smoothing_targets, Target};

pub(crate) use softmax::softmax_row;
pub(crate) use sosr::combine;
