//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are an error.
//!
//! | key                         | meaning                                               | default       |
//! |-----------------------------|-------------------------------------------------------|---------------|
//! | `dataset`                   | `blobs` or `cifar`                                    | required      |
//! | `blobs.classes`             | number of classes                                     | 10            |
//! | `blobs.per_class`           | training items per class                              | 500           |
//! | `blobs.test_per_class`      | held-out items per class                              | 100           |
//! | `blobs.dim`                 | feature dimension                                     | 2             |
//! | `blobs.separation`          | radius of the center sphere                           | 4.0           |
//! | `blobs.noise_sigma`         | per-coordinate noise std                              | 1.0           |
//! | `blobs.seed`                | generator seed                                        | 0             |
//! | `cifar.train`, `cifar.test` | paths to binary record files                          | required / none |
//! | `cifar.layout`              | `cifar10` or `cifar100`                               | `cifar100`    |
//! | `subset_per_class`          | keep this many training items per class               | all           |
//! | `imbalance_rho`             | long-tailed training set with this ratio              | none          |
//! | `data_seed`                 | seed for subsetting / long-tail sampling              | 0             |
//! | `normalize`                 | `none` or `channel` (mean/std from the training set)  | `none`        |
//! | `model`                     | comma-separated layers, e.g. `dense:2:16,relu,dense:16:10` | required |
//! | `epochs`, `batch_size`      | training length and minibatch size                    | 30, 128       |
//! | `lr`, `momentum`, `weight_decay` | SGD settings                                     | 0.1, 0.9, 1e-4 |
//! | `lr_milestones`, `lr_factor`| step decay epochs and factor                          | none, 0.1     |
//! | `regularizer`               | `+`-joined from `none`, `sosr`, `label_smoothing`, `confidence_penalty`, `cutmix`, `cutout` | `none` |
//! | `sosr.p`, `sosr.beta`       | threshold and weight                                  | 0.99, 1.0     |
//! | `sosr.variant`              | `standard`, `complete`, `random_sampled`              | `standard`    |
//! | `sosr.fraction`             | random-sampled fraction                               | 0.1           |
//! | `sosr.schedule`             | `constant`, `linear_up`, `linear_down`, `warm_up`     | `constant`    |
//! | `sosr.peak_epoch`           | warm-up peak                                          | epochs / 4    |
//! | `label_smoothing.epsilon`   |                                                       | 0.1           |
//! | `confidence_penalty.lambda` |                                                       | 0.1           |
//! | `cutmix.alpha`              | Beta(α, α) parameter                                  | 1.0           |
//! | `cutout.size`               | square side in pixels                                 | 8             |
//! | `augment`                   | `true` enables pad/crop/flip on image data            | `false`       |
//! | `augment.pad`, `augment.flip_prob` |                                                | 4, 0.5        |
//! | `census`                    | comma-separated thresholds                            | `0.7,0.9,0.99`|
//! | `seeds`                     | comma-separated training seeds                        | `0`           |
//! | `out`                       | output directory                                      | none          |
//! | `record_wall_time`          | `false` writes 0 so metrics files are reproducible    | `true`        |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{BlobSpec, CifarLayout};
use crate::error::{Error, Result};
use crate::nn::LayerSpec;
use crate::regularizer::{BetaSchedule, SosrConfig, Variant};

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetRecipe {
    Blobs {
        spec: BlobSpec,
        test_per_class: usize,
        seed: u64,
    },
    Cifar {
        train: PathBuf,
        test: Option<PathBuf>,
        layout: CifarLayout,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub recipe: DatasetRecipe,
    pub subset_per_class: Option<usize>,
    pub imbalance_rho: Option<f64>,
    pub data_seed: u64,
    pub normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseLoss {
    CrossEntropy,
    LabelSmoothing { epsilon: f64 },
    ConfidencePenalty { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mixing {
    None,
    CutMix { alpha: f64 },
    Cutout { size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularizer {
    pub base: BaseLoss,
    pub sosr: Option<SosrConfig>,
    pub mixing: Mixing,
}

impl Regularizer {
    pub fn none() -> Self {
        Regularizer {
            base: BaseLoss::CrossEntropy,
            sosr: None,
            mixing: Mixing::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub pad: usize,
    pub flip_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataConfig,
    pub layers: Vec<LayerSpec>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr_milestones: Vec<usize>,
    pub lr_factor: f64,
    pub regularizer: Regularizer,
    pub augment: Option<AugmentConfig>,
    pub census_thresholds: Vec<f64>,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
    pub record_wall_time: bool,
}

const KEYS: &[&str] = &[
    "dataset",
    "blobs.classes",
    "blobs.per_class",
    "blobs.test_per_class",
    "blobs.dim",
    "blobs.separation",
    "blobs.noise_sigma",
    "blobs.seed",
    "cifar.train",
    "cifar.test",
    "cifar.layout",
    "subset_per_class",
    "imbalance_rho",
    "data_seed",
    "normalize",
    "model",
    "epochs",
    "batch_size",
    "lr",
    "momentum",
    "weight_decay",
    "lr_milestones",
    "lr_factor",
    "regularizer",
    "sosr.p",
    "sosr.beta",
    "sosr.variant",
    "sosr.fraction",
    "sosr.schedule",
    "sosr.peak_epoch",
    "label_smoothing.epsilon",
    "confidence_penalty.lambda",
    "cutmix.alpha",
    "cutout.size",
    "augment",
    "augment.pad",
    "augment.flip_prob",
    "census",
    "seeds",
    "out",
    "record_wall_time",
];

/// Raw key/value pairs; values are consumed as they are read.
struct Entries {
    map: BTreeMap<String, String>,
    base_dir: Option<PathBuf>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", n + 1)));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        Ok(Entries { map, base_dir: None })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`"))),
        }
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| v.parse().map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`"))))
            .transpose()
    }

    fn list<T: FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => parse_list(v).map_err(|_| Error::Config(format!("bad list `{v}` for `{key}`"))),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(|p| {
            let p = PathBuf::from(p);
            match &self.base_dir {
                Some(base) if p.is_relative() => base.join(p),
                _ => p,
            }
        })
    }
}

/// Parses `a,b,c` (empty string gives an empty list).
pub fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, T::Err> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect()
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl RunConfig {
    /// Parses the text form. Relative paths are taken as-is.
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_entries(Entries::parse(text)?)
    }

    /// Loads a file; relative data paths resolve against the file's directory.
    /// `preset:<name>` loads a built-in preset instead.
    pub fn load(path: &Path) -> Result<Self> {
        if let Some(name) = path.to_str().and_then(|s| s.strip_prefix("preset:")) {
            let text = super::presets::preset(name)
                .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?;
            return Self::parse(text);
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Entries::parse(&text)?;
        entries.base_dir = path.parent().map(Path::to_path_buf);
        Self::from_entries(entries)
    }

    fn from_entries(e: Entries) -> Result<Self> {
        let recipe = match e.raw("dataset") {
            Some("blobs") => DatasetRecipe::Blobs {
                spec: BlobSpec {
                    num_classes: e.get("blobs.classes", 10)?,
                    per_class: e.get("blobs.per_class", 500)?,
                    dim: e.get("blobs.dim", 2)?,
                    separation: e.get("blobs.separation", 4.0)?,
                    noise_sigma: e.get("blobs.noise_sigma", 1.0)?,
                },
                test_per_class: e.get("blobs.test_per_class", 100)?,
                seed: e.get("blobs.seed", 0)?,
            },
            Some("cifar") => DatasetRecipe::Cifar {
                train: e
                    .path("cifar.train")
                    .ok_or_else(|| Error::Config("`cifar.train` is required for dataset = cifar".into()))?,
                test: e.path("cifar.test"),
                layout: e.get("cifar.layout", CifarLayout::Cifar100).map_err(config_err)?,
            },
            Some(other) => return Err(Error::Config(format!("unknown dataset `{other}`"))),
            None => return Err(Error::Config("`dataset` is required".into())),
        };
        let normalize = match e.raw("normalize").unwrap_or("none") {
            "none" => false,
            "channel" => true,
            other => return Err(Error::Config(format!("unknown normalization `{other}`"))),
        };
        let data = DataConfig {
            recipe,
            subset_per_class: e.opt("subset_per_class")?,
            imbalance_rho: e.opt("imbalance_rho")?,
            data_seed: e.get("data_seed", 0)?,
            normalize,
        };

        let layers = match e.raw("model") {
            Some(m) => m
                .split(',')
                .map(|l| l.parse::<LayerSpec>().map_err(config_err))
                .collect::<Result<Vec<_>>>()?,
            None => return Err(Error::Config("`model` is required".into())),
        };
        let epochs: usize = e.get("epochs", 30)?;

        let mut regularizer = Regularizer::none();
        let reg_text = e.raw("regularizer").unwrap_or("none");
        for part in reg_text.split('+').map(str::trim) {
            match part {
                "none" => {}
                "sosr" => {
                    let variant = match e.raw("sosr.variant").unwrap_or("standard") {
                        "standard" => Variant::Standard,
                        "complete" => Variant::Complete,
                        "random_sampled" => Variant::RandomSampled {
                            fraction: e.get("sosr.fraction", 0.1)?,
                        },
                        other => return Err(Error::Config(format!("unknown SOSR variant `{other}`"))),
                    };
                    let schedule = match e.raw("sosr.schedule").unwrap_or("constant") {
                        "constant" => BetaSchedule::Constant,
                        "linear_up" => BetaSchedule::LinearUp,
                        "linear_down" => BetaSchedule::LinearDown,
                        "warm_up" => BetaSchedule::WarmUp {
                            peak_epoch: e.get("sosr.peak_epoch", epochs / 4)?,
                        },
                        other => return Err(Error::Config(format!("unknown beta schedule `{other}`"))),
                    };
                    let cfg = SosrConfig::new(e.get("sosr.p", 0.99)?, e.get("sosr.beta", 1.0)?)
                        .and_then(|c| c.with_variant(variant))
                        .map_err(config_err)?
                        .with_schedule(schedule);
                    regularizer.sosr = Some(cfg);
                }
                "label_smoothing" | "confidence_penalty" => {
                    if regularizer.base != BaseLoss::CrossEntropy {
                        return Err(Error::Config(
                            "label smoothing and confidence penalty cannot be combined".into(),
                        ));
                    }
                    regularizer.base = if part == "label_smoothing" {
                        BaseLoss::LabelSmoothing {
                            epsilon: e.get("label_smoothing.epsilon", 0.1)?,
                        }
                    } else {
                        BaseLoss::ConfidencePenalty {
                            lambda: e.get("confidence_penalty.lambda", 0.1)?,
                        }
                    };
                }
                "cutmix" | "cutout" => {
                    if regularizer.mixing != Mixing::None {
                        return Err(Error::Config("cutmix and cutout cannot be combined".into()));
                    }
                    regularizer.mixing = if part == "cutmix" {
                        Mixing::CutMix {
                            alpha: e.get("cutmix.alpha", 1.0)?,
                        }
                    } else {
                        Mixing::Cutout {
                            size: e.get("cutout.size", 8)?,
                        }
                    };
                }
                other => return Err(Error::Config(format!("unknown regularizer `{other}`"))),
            }
        }

        let augment = e.get("augment", false)?.then_some(()).map(|_| -> Result<AugmentConfig> {
            Ok(AugmentConfig {
                pad: e.get("augment.pad", 4)?,
                flip_prob: e.get("augment.flip_prob", 0.5)?,
            })
        });

        let cfg = RunConfig {
            data,
            layers,
            epochs,
            batch_size: e.get("batch_size", 128)?,
            lr: e.get("lr", 0.1)?,
            momentum: e.get("momentum", 0.9)?,
            weight_decay: e.get("weight_decay", 1e-4)?,
            lr_milestones: e.list("lr_milestones", Vec::new())?,
            lr_factor: e.get("lr_factor", 0.1)?,
            regularizer,
            augment: augment.transpose()?,
            census_thresholds: e.list("census", vec![0.7, 0.9, 0.99])?,
            seeds: e.list("seeds", vec![0])?,
            out_dir: e.path("out"),
            record_wall_time: e.get("record_wall_time", true)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.epochs < 1 {
            return fail("epochs must be at least 1".into());
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.census_thresholds.iter().any(|&t| !(t >= 0.0 && t < 1.0)) {
            return fail(format!("census thresholds {:?} must lie in [0, 1)", self.census_thresholds));
        }
        crate::nn::LrSchedule::new(self.lr, self.lr_milestones.clone(), self.lr_factor).map_err(config_err)?;
        if !(self.momentum >= 0.0) || !(self.weight_decay >= 0.0) {
            return fail("momentum and weight_decay must be nonnegative".into());
        }
        if let Some(rho) = self.data.imbalance_rho {
            if !(rho >= 1.0) {
                return fail(format!("imbalance_rho {rho} must be at least 1"));
            }
        }
        if let Some(s) = &self.regularizer.sosr {
            s.validate().map_err(config_err)?;
            if let BetaSchedule::WarmUp { peak_epoch } = s.schedule {
                if peak_epoch >= self.epochs {
                    return fail(format!("sosr.peak_epoch {peak_epoch} must be below epochs {}", self.epochs));
                }
            }
            if s.schedule != BetaSchedule::Constant && self.epochs < 2 {
                return fail("a varying beta schedule needs at least 2 epochs".into());
            }
        }
        match self.regularizer.base {
            BaseLoss::LabelSmoothing { epsilon } if !(0.0..1.0).contains(&epsilon) => {
                return fail(format!("label_smoothing.epsilon {epsilon} outside [0, 1)"));
            }
            BaseLoss::ConfidencePenalty { lambda } if !(lambda >= 0.0) => {
                return fail(format!("confidence_penalty.lambda {lambda} must be nonnegative"));
            }
            _ => {}
        }
        match self.regularizer.mixing {
            Mixing::CutMix { alpha } => {
                if !(alpha > 0.0) {
                    return fail(format!("cutmix.alpha {alpha} must be positive"));
                }
                if matches!(self.regularizer.base, BaseLoss::LabelSmoothing { .. }) {
                    return fail("cutmix cannot be combined with label smoothing".into());
                }
            }
            Mixing::Cutout { size } if size == 0 => return fail("cutout.size must be positive".into()),
            _ => {}
        }
        Ok(())
    }

    /// Same configuration with a single training seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        RunConfig {
            seeds: vec![seed],
            ..self.clone()
        }
    }
}
