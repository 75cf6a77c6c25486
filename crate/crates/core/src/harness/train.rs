//! The training loop.
//!
//! Each run draws from independent seeded streams: one for weight init, one
//! for batch order and crop/flip, one for CutMix/cutout, and one for the
//! regularizer. Changing the loss therefore never changes which samples a
//! batch holds or how they were augmented.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::census::evaluate_with_census;
use super::config::{DataConfig, DatasetRecipe, Mixing, RunConfig};
use super::metrics::EpochMetrics;
use super::objective::{batch_objective, build_targets};
use crate::batch::LogitBatch;
use crate::data::{
    augment_standard, cutmix_mix, cutout, gaussian_blobs_split, load_cifar_binary, make_long_tailed, subset_per_class,
    LabeledDataset,
};
use crate::error::{Error, Result};
use crate::nn::{build_model, lr_at_epoch, sgd_step, LrSchedule, Model, ModelSpec, OptimizerState, Tensor};
use crate::regularizer::beta_at_epoch;

const STREAM_DATA: u64 = 1;
const STREAM_MIX: u64 = 2;
const STREAM_REG: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Training set and optional held-out set, after subsetting, long-tail
/// sampling and normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub train: LabeledDataset,
    pub test: Option<LabeledDataset>,
}

pub fn prepare_data(config: &DataConfig) -> Result<PreparedData> {
    let (mut train, mut test) = match &config.recipe {
        DatasetRecipe::Blobs {
            spec,
            test_per_class,
            seed,
        } => {
            let (tr, te) = gaussian_blobs_split(spec, *test_per_class, *seed)?;
            (tr, (*test_per_class > 0).then_some(te))
        }
        DatasetRecipe::Cifar { train, test, layout } => (
            load_cifar_binary(train, *layout)?,
            test.as_deref().map(|p| load_cifar_binary(p, *layout)).transpose()?,
        ),
    };
    if let Some(n) = config.subset_per_class {
        train = subset_per_class(&train, n, config.data_seed)?;
    }
    if let Some(rho) = config.imbalance_rho {
        let (lt, profile) = make_long_tailed(&train, rho, config.data_seed)?;
        log::info!(
            "long-tailed training set: {} items, class counts {}..{}",
            lt.len(),
            profile.min_count(),
            profile.max_count()
        );
        train = lt;
    }
    if config.normalize {
        let (mean, std) = train.channel_stats();
        train = train.normalized(&mean, &std);
        test = test.map(|t| t.normalized(&mean, &std));
    }
    Ok(PreparedData { train, test })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    pub metrics: Vec<EpochMetrics>,
}

/// A failed run together with the metrics of every completed epoch.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: Error,
    pub metrics: Vec<EpochMetrics>,
}

impl From<Error> for TrainFailure {
    fn from(error: Error) -> Self {
        TrainFailure {
            error,
            metrics: Vec::new(),
        }
    }
}

/// Prepares the configured data and trains one model with `seed`.
pub fn train_run(config: &RunConfig, seed: u64) -> std::result::Result<TrainOutcome, TrainFailure> {
    let data = prepare_data(&config.data)?;
    train_on(config, &data.train, data.test.as_ref(), seed)
}

/// Trains on an already prepared dataset; the data section of `config` is ignored.
pub fn train_on(
    config: &RunConfig,
    train: &LabeledDataset,
    val: Option<&LabeledDataset>,
    seed: u64,
) -> std::result::Result<TrainOutcome, TrainFailure> {
    config.validate()?;
    let shape = train.feature_shape().to_vec();
    let needs_image = config.augment.is_some() || config.regularizer.mixing != Mixing::None;
    if needs_image && shape.len() != 3 {
        return Err(Error::Config(format!(
            "augmentation, cutmix and cutout need [C, H, W] features, got {shape:?}"
        ))
        .into());
    }
    if train.is_empty() {
        return Err(Error::invalid("training set is empty").into());
    }
    let spec = ModelSpec::new(&shape, config.layers.clone());
    let mut model = build_model::<f32>(&spec, seed)?;
    if model.output_shape() != [train.num_classes()] {
        return Err(Error::Config(format!(
            "model outputs {:?} but the data has {} classes",
            model.output_shape(),
            train.num_classes()
        ))
        .into());
    }
    let lr_schedule = LrSchedule::new(config.lr, config.lr_milestones.clone(), config.lr_factor)?;
    let mut opt = OptimizerState::new(&model, config.lr, config.momentum, config.weight_decay)?;
    let mut data_rng = stream(seed, STREAM_DATA);
    let mut mix_rng = stream(seed, STREAM_MIX);
    let mut reg_rng = stream(seed, STREAM_REG);
    let k = train.num_classes();
    let reg = config.regularizer;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut metrics = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let result = (|| -> Result<EpochMetrics> {
            opt.lr = lr_at_epoch(&lr_schedule, epoch);
            let beta = match &reg.sosr {
                Some(s) => beta_at_epoch(s.schedule, epoch, config.epochs, s.beta)?,
                None => 0.0,
            };
            order.shuffle(&mut data_rng);
            let (mut loss_sum, mut ce_sum, mut sosr_sum) = (0.0f64, 0.0f64, 0.0f64);

            for (b, idx) in order.chunks(config.batch_size).enumerate() {
                let mut inputs: Tensor<f32> = train.batch_tensor(idx);
                if let Some(aug) = config.augment {
                    let per = train.feature_len();
                    let crop = shape[1];
                    for i in 0..idx.len() {
                        let img = &mut inputs.data_mut()[i * per..(i + 1) * per];
                        let out = augment_standard(img, &shape, aug.pad, crop, aug.flip_prob, &mut data_rng)?;
                        img.copy_from_slice(&out);
                    }
                }
                let labels: Vec<usize> = idx.iter().map(|&i| train.labels()[i]).collect();
                let mut pairs = None;
                match reg.mixing {
                    Mixing::None => {}
                    Mixing::Cutout { size } => {
                        let per = train.feature_len();
                        for i in 0..idx.len() {
                            cutout(&mut inputs.data_mut()[i * per..(i + 1) * per], &shape, size, &mut mix_rng)?;
                        }
                    }
                    Mixing::CutMix { alpha } => {
                        let mixed = cutmix_mix(&inputs, &labels, alpha, &mut mix_rng)?;
                        inputs = mixed.mixed_inputs;
                        pairs = Some(mixed.pairs);
                    }
                }
                let targets = build_targets::<f32>(&labels, pairs.as_deref(), reg.base, k)?;

                let out = model.forward_tensor(&inputs, true)?;
                if out.data().iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric {
                        epoch,
                        batch: b,
                        detail: "non-finite logits".into(),
                    });
                }
                let logits = LogitBatch::new(out.into_matrix()?)?;
                let loss = batch_objective(&logits, &targets, &reg, beta as f32, &mut reg_rng)?;
                if !loss.total.is_finite() {
                    return Err(Error::Numeric {
                        epoch,
                        batch: b,
                        detail: format!("loss is {}", loss.total),
                    });
                }
                model.backward(&loss.grad_logits)?;
                sgd_step(&mut model, &mut opt);

                let w = idx.len() as f64;
                loss_sum += loss.total as f64 * w;
                ce_sum += loss.ce_part as f64 * w;
                sosr_sum += loss.sosr_part as f64 * w;
            }

            let n = train.len() as f64;
            let train_eval = evaluate_with_census(&model, train, &config.census_thresholds)?;
            let val_acc = val.map(|v| evaluate_with_census(&model, v, &[])).transpose()?.map(|s| s.accuracy);
            Ok(EpochMetrics {
                epoch,
                train_loss: loss_sum / n,
                ce_part: ce_sum / n,
                sosr_part: sosr_sum / n,
                effective_beta: beta,
                train_acc: train_eval.accuracy,
                val_acc,
                census: train_eval.census,
                wall_time_s: if config.record_wall_time {
                    started.elapsed().as_secs_f64()
                } else {
                    0.0
                },
            })
        })();

        match result {
            Ok(m) => {
                log::info!(
                    "epoch {epoch}: loss {:.4} train_acc {:.4} val_acc {} census {:?}",
                    m.train_loss,
                    m.train_acc,
                    m.val_acc.map_or("-".to_string(), |v| format!("{v:.4}")),
                    m.census
                );
                metrics.push(m);
            }
            Err(error) => return Err(TrainFailure { error, metrics }),
        }
    }
    Ok(TrainOutcome { model, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs_config(extra: &str) -> RunConfig {
        RunConfig::parse(&format!(
            "dataset = blobs
             blobs.classes = 3
             blobs.per_class = 40
             blobs.test_per_class = 10
             blobs.dim = 2
             blobs.separation = 6
             blobs.noise_sigma = 0.5
             model = dense:2:3
             epochs = 30
             batch_size = 16
             lr = 0.05
             record_wall_time = false
             {extra}"
        ))
        .unwrap()
    }

    #[test]
    fn linear_model_fits_separable_blobs() {
        let out = train_run(&blobs_config(""), 0).unwrap();
        assert_eq!(out.metrics.len(), 30);
        assert!(out.metrics.last().unwrap().train_acc >= 0.99);
    }

    #[test]
    fn zero_beta_reproduces_baseline_bitwise() {
        let base = train_run(&blobs_config(""), 4).unwrap();
        let sosr = train_run(&blobs_config("regularizer = sosr\nsosr.beta = 0\nsosr.p = 0.5"), 4).unwrap();
        assert_eq!(base.metrics, sosr.metrics);
        assert_eq!(
            base.model.params().map(|p| p.value.clone()).collect::<Vec<_>>(),
            sosr.model.params().map(|p| p.value.clone()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn diverging_run_reports_epoch_and_batch() {
        let mut cfg = blobs_config("");
        cfg.lr = 1e30;
        let failure = train_run(&cfg, 0).unwrap_err();
        assert!(matches!(failure.error, Error::Numeric { .. }), "{}", failure.error);
        assert!(failure.metrics.len() < 30);
    }

    #[test]
    fn image_only_options_need_image_data() {
        let err = train_run(&blobs_config("regularizer = cutmix"), 0).unwrap_err();
        assert!(matches!(err.error, Error::Config(_)));
    }

    #[test]
    fn class_count_mismatch_is_config_error() {
        let cfg = RunConfig {
            layers: vec!["dense:2:4".parse().unwrap()],
            ..blobs_config("")
        };
        assert!(matches!(train_run(&cfg, 0).unwrap_err().error, Error::Config(_)));
    }
}
