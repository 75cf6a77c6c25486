use crate::error::{Error, Result};

/// How the SOSR weight evolves over training.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BetaSchedule {
    #[default]
    Constant,
    /// 0 at the first epoch, `base` at the last.
    LinearUp,
    /// `base` at the first epoch, 0 at the last.
    LinearDown,
    /// 0 → `base` on `[0, peak_epoch]`, then `base` → 0 on `[peak_epoch, last]`.
    WarmUp { peak_epoch: usize },
}

/// Resolves the SOSR weight for `epoch` (0-based) of a run lasting `total_epochs`.
pub fn beta_at_epoch(schedule: BetaSchedule, epoch: usize, total_epochs: usize, base_beta: f64) -> Result<f64> {
    if schedule == BetaSchedule::Constant {
        return Ok(base_beta);
    }
    if total_epochs < 2 {
        return Err(Error::invalid(format!(
            "a varying beta schedule needs at least 2 epochs, got {total_epochs}"
        )));
    }
    if epoch >= total_epochs {
        return Err(Error::invalid(format!(
            "epoch {epoch} outside a run of {total_epochs} epochs"
        )));
    }
    let last = (total_epochs - 1) as f64;
    let e = epoch as f64;
    Ok(match schedule {
        BetaSchedule::Constant => base_beta,
        BetaSchedule::LinearUp => base_beta * e / last,
        BetaSchedule::LinearDown => base_beta * (1.0 - e / last),
        BetaSchedule::WarmUp { peak_epoch } => {
            if peak_epoch >= total_epochs {
                return Err(Error::invalid(format!(
                    "warm-up peak epoch {peak_epoch} outside a run of {total_epochs} epochs"
                )));
            }
            let peak = peak_epoch as f64;
            if epoch <= peak_epoch {
                if peak_epoch == 0 {
                    base_beta
                } else {
                    base_beta * e / peak
                }
            } else {
                base_beta * (last - e) / (last - peak)
            }
        }
    })
}
