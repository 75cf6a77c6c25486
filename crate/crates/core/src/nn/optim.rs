use super::model::Model;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient.
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    pub velocity: Vec<Tensor<T>>,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(model: &Model<T>, lr: f64, momentum: f64, weight_decay: f64) -> Result<Self> {
        if !(lr >= 0.0) || !(momentum >= 0.0) || !(weight_decay >= 0.0) {
            return Err(Error::invalid(format!(
                "optimizer settings must be nonnegative (lr {lr}, momentum {momentum}, weight decay {weight_decay})"
            )));
        }
        Ok(OptimizerState {
            velocity: model.params().map(|p| Tensor::zeros(p.value.shape())).collect(),
            lr,
            momentum,
            weight_decay,
        })
    }
}

/// `g' = grad + wd·param; v ← μ·v + g'; param ← param − lr·v`.
pub fn sgd_step<T: Scalar>(model: &mut Model<T>, opt: &mut OptimizerState<T>) {
    let (lr, mu, wd) = (T::lit(opt.lr), T::lit(opt.momentum), T::lit(opt.weight_decay));
    for (p, v) in model.params_mut().zip(opt.velocity.iter_mut()) {
        let grads = p.grad.data();
        for ((w, &g), vel) in p.value.data_mut().iter_mut().zip(grads).zip(v.data_mut()) {
            let g = g + wd * *w;
            *vel = mu * *vel + g;
            *w = *w - lr * *vel;
        }
    }
}

/// Step decay: the learning rate is multiplied by `factor` at each milestone epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub initial_lr: f64,
    pub milestones: Vec<usize>,
    pub factor: f64,
}

impl LrSchedule {
    pub fn new(initial_lr: f64, milestones: Vec<usize>, factor: f64) -> Result<Self> {
        if !(initial_lr > 0.0) {
            return Err(Error::invalid(format!("initial learning rate {initial_lr} must be positive")));
        }
        if milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "milestones {milestones:?} must be strictly increasing"
            )));
        }
        if !(factor > 0.0 && factor < 1.0) {
            return Err(Error::invalid(format!("decay factor {factor} outside (0, 1)")));
        }
        Ok(LrSchedule {
            initial_lr,
            milestones,
            factor,
        })
    }

    pub fn constant(lr: f64) -> Self {
        LrSchedule {
            initial_lr: lr,
            milestones: Vec::new(),
            factor: 0.1,
        }
    }
}

pub fn lr_at_epoch(schedule: &LrSchedule, epoch: usize) -> f64 {
    let passed = schedule.milestones.iter().filter(|&&m| m <= epoch).count();
    schedule.initial_lr * schedule.factor.powi(passed as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{build_model, LayerSpec, ModelSpec};

    fn scalar_model() -> Model<f64> {
        let spec = ModelSpec::new(&[1], vec![LayerSpec::Dense { input: 1, output: 1 }]);
        let mut m = build_model(&spec, 0).unwrap();
        for p in m.params_mut() {
            p.value.data_mut()[0] = 1.0;
            p.grad.data_mut()[0] = 0.5;
        }
        m
    }

    #[test]
    fn momentum_steps_by_hand() {
        let mut m = scalar_model();
        let mut opt = OptimizerState::new(&m, 0.1, 0.9, 0.0).unwrap();
        sgd_step(&mut m, &mut opt);
        assert!((opt.velocity[0].data()[0] - 0.5).abs() < 1e-15);
        assert!((m.params().next().unwrap().value.data()[0] - 0.95).abs() < 1e-15);
        sgd_step(&mut m, &mut opt);
        assert!((opt.velocity[0].data()[0] - 0.95).abs() < 1e-15);
        assert!((m.params().next().unwrap().value.data()[0] - 0.855).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_is_added_to_the_gradient() {
        let mut m = scalar_model();
        let mut opt = OptimizerState::new(&m, 0.1, 0.0, 0.5).unwrap();
        sgd_step(&mut m, &mut opt);
        // g' = 0.5 + 0.5 * 1.0
        assert!((m.params().next().unwrap().value.data()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_lr_leaves_params_unchanged() {
        let mut m = scalar_model();
        let before: Vec<u64> = m.params().map(|p| p.value.data()[0].to_bits()).collect();
        let mut opt = OptimizerState::new(&m, 0.0, 0.9, 1e-4).unwrap();
        sgd_step(&mut m, &mut opt);
        let after: Vec<u64> = m.params().map(|p| p.value.data()[0].to_bits()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn step_schedule() {
        let s = LrSchedule::new(0.1, vec![150, 225], 0.1).unwrap();
        assert_eq!(lr_at_epoch(&s, 0), 0.1);
        assert_eq!(lr_at_epoch(&s, 149), 0.1);
        assert!((lr_at_epoch(&s, 150) - 0.01).abs() < 1e-15);
        assert!((lr_at_epoch(&s, 225) - 0.001).abs() < 1e-15);
        let flat = LrSchedule::new(0.05, vec![], 0.1).unwrap();
        assert_eq!(lr_at_epoch(&flat, 10_000), 0.05);
    }

    #[test]
    fn schedule_validation() {
        assert!(LrSchedule::new(0.1, vec![225, 150], 0.1).is_err());
        assert!(LrSchedule::new(0.1, vec![150, 150], 0.1).is_err());
        assert!(LrSchedule::new(0.1, vec![150], 1.0).is_err());
        assert!(LrSchedule::new(0.0, vec![150], 0.1).is_err());
    }
}
