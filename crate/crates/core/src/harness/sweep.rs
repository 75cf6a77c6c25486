//! One-axis ablation sweeps over the threshold or the weight.

use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use super::config::RunConfig;
use super::metrics::write_metrics;
use super::train::{prepare_data, train_on};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    ThresholdP,
    Beta,
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" => Ok(SweepAxis::ThresholdP),
            "beta" => Ok(SweepAxis::Beta),
            other => Err(Error::Config(format!("unknown sweep axis `{other}` (expected p or beta)"))),
        }
    }
}

impl SweepAxis {
    fn name(self) -> &'static str {
        match self {
            SweepAxis::ThresholdP => "p",
            SweepAxis::Beta => "beta",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// Final-epoch validation accuracy per seed, in `config.seeds` order.
    pub per_seed: Vec<f64>,
    pub mean_val_acc: f64,
}

/// Config with the swept parameter set to `value`.
pub fn config_for(config: &RunConfig, axis: SweepAxis, value: f64) -> Result<RunConfig> {
    let mut c = config.clone();
    let sosr = c
        .regularizer
        .sosr
        .as_mut()
        .ok_or_else(|| Error::Config("sweeping p or beta needs `sosr` in the regularizer".into()))?;
    match axis {
        SweepAxis::ThresholdP => sosr.threshold_p = value,
        SweepAxis::Beta => sosr.beta = value,
    }
    c.validate()?;
    Ok(c)
}

/// Trains every `(value, seed)` pair, in parallel, on data prepared once.
/// When the config names an output directory each run's metrics land there.
pub fn sweep(config: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|&v| config_for(config, axis, v))
        .collect::<Result<Vec<_>>>()?;
    let data = prepare_data(&config.data)?;
    let val = data
        .test
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a held-out set".into()))?;
    let jobs: Vec<(usize, u64)> = (0..values.len())
        .flat_map(|i| config.seeds.iter().map(move |&s| (i, s)))
        .collect();

    let results = jobs
        .par_iter()
        .map(|&(i, seed)| -> Result<f64> {
            let out = train_on(&configs[i], &data.train, Some(val), seed).map_err(|f| f.error)?;
            if let Some(dir) = &config.out_dir {
                let path = dir.join(format!("sweep_{}_{}_seed{seed}.csv", axis.name(), values[i]));
                write_metrics(&out.metrics, &config.census_thresholds, &path)?;
            }
            Ok(out.metrics.last().and_then(|m| m.val_acc).unwrap_or(f64::NAN))
        })
        .collect::<Result<Vec<f64>>>()?;

    let n_seeds = config.seeds.len();
    Ok(values
        .iter()
        .zip(results.chunks(n_seeds))
        .map(|(&value, accs)| SweepRow {
            value,
            per_seed: accs.to_vec(),
            mean_val_acc: accs.iter().sum::<f64>() / n_seeds as f64,
        })
        .collect())
}

/// Writes the table as CSV: `<axis>,mean_val_acc,seed_<s>...`.
pub fn write_sweep(rows: &[SweepRow], axis: SweepAxis, seeds: &[u64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![axis.name().to_string(), "mean_val_acc".into()];
    header.extend(seeds.iter().map(|s| format!("seed_{s}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.value.to_string(), r.mean_val_acc.to_string()];
        rec.extend(r.per_seed.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
