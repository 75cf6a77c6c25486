use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sosr::data::{load_cifar_binary, make_long_tailed, write_cifar_binary, CifarLayout, LabeledDataset};
use sosr::harness::config::parse_list;
use sosr::harness::{
    census_overconfident, evaluate, export_features_2d, prepare_data, sweep, train_run, write_metrics, write_sweep,
    RunConfig, SweepAxis,
};
use sosr::nn::{load_checkpoint, save_checkpoint};
use sosr::{Error, Model32, Result};

#[derive(Parser)]
#[command(name = "sosr", version, about = "Selective output smoothing regularization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per seed; writes metrics and a checkpoint per seed.
    Train {
        /// Config file, or `preset:<name>`.
        #[arg(long)]
        config: PathBuf,
        /// Train only this seed instead of the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count training samples classified correctly above each threshold.
    Census {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Config file (its training set is used), or `cifar10:PATH` / `cifar100:PATH`.
        #[arg(long)]
        data: String,
        #[arg(long, default_value = "0.7,0.9,0.99")]
        thresholds: String,
    },
    /// Train across values of the threshold or the weight and tabulate mean accuracy.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: String,
        #[arg(long)]
        values: String,
        /// Table path; defaults to `sweep_<axis>.csv` in the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a long-tailed copy of a CIFAR binary file.
    MakeImbalanced {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "cifar100")]
        layout: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dump the 2-D features that feed the final layer, as CSV plus an SVG scatter.
    ExportFeatures {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Same forms as for `census`; the held-out set is used when the config has one.
        #[arg(long)]
        data: String,
    },
}

fn thresholds(s: &str) -> Result<Vec<f64>> {
    parse_list(s).map_err(|_| Error::Config(format!("bad threshold list `{s}`")))
}

/// Resolves a data recipe. Returns the training set and, for configs, the held-out set.
fn load_recipe(recipe: &str) -> Result<(LabeledDataset, Option<LabeledDataset>)> {
    if let Some((kind, path)) = recipe.split_once(':') {
        if let Ok(layout) = kind.parse::<CifarLayout>() {
            return Ok((load_cifar_binary(Path::new(path), layout)?, None));
        }
    }
    let data = prepare_data(&RunConfig::load(Path::new(recipe))?.data)?;
    Ok((data.train, data.test))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let cfg = RunConfig::load(&config)?;
            let out = out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("runs"));
            create_dir(&out)?;
            let seeds = seed.map_or_else(|| cfg.seeds.clone(), |s| vec![s]);
            for s in seeds {
                let metrics_path = out.join(format!("metrics_seed{s}.csv"));
                match train_run(&cfg, s) {
                    Ok(outcome) => {
                        write_metrics(&outcome.metrics, &cfg.census_thresholds, &metrics_path)?;
                        save_checkpoint(&outcome.model, &out.join(format!("model_seed{s}.ckpt")))?;
                        if let Some(m) = outcome.metrics.last() {
                            println!(
                                "seed {s}: train_acc {:.4} val_acc {}",
                                m.train_acc,
                                m.val_acc.map_or("-".into(), |v| format!("{v:.4}"))
                            );
                        }
                    }
                    Err(failure) => {
                        write_metrics(&failure.metrics, &cfg.census_thresholds, &metrics_path)?;
                        return Err(failure.error);
                    }
                }
            }
        }
        Command::Census {
            checkpoint,
            data,
            thresholds: t,
        } => {
            let t = thresholds(&t)?;
            if t.iter().any(|&p| !(0.0..1.0).contains(&p)) {
                return Err(Error::Config(format!("thresholds {t:?} must lie in [0, 1)")));
            }
            let model: Model32 = load_checkpoint(&checkpoint)?;
            let (train, _) = load_recipe(&data)?;
            let counts = census_overconfident(&model, &train, &t)?;
            let (acc, ce) = evaluate(&model, &train)?;
            println!("threshold,count");
            for (p, c) in t.iter().zip(&counts) {
                println!("{p},{c}");
            }
            eprintln!("{} samples, accuracy {acc:.4}, mean CE {ce:.4}", train.len());
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let axis: SweepAxis = axis.parse()?;
            let values: Vec<f64> = parse_list(&values).map_err(|_| Error::Config(format!("bad value list `{values}`")))?;
            if let Some(dir) = &cfg.out_dir {
                create_dir(dir)?;
            }
            let rows = sweep(&cfg, axis, &values)?;
            let path = out.unwrap_or_else(|| {
                let name = format!("sweep_{}.csv", if axis == SweepAxis::Beta { "beta" } else { "p" });
                cfg.out_dir.as_ref().map_or_else(|| PathBuf::from(&name), |d| d.join(&name))
            });
            write_sweep(&rows, axis, &cfg.seeds, &path)?;
            for r in &rows {
                println!("{}\t{:.4}", r.value, r.mean_val_acc);
            }
        }
        Command::MakeImbalanced {
            input,
            rho,
            out,
            layout,
            seed,
        } => {
            let layout: CifarLayout = layout.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
            if !(rho >= 1.0) {
                return Err(Error::Config(format!("rho {rho} must be at least 1")));
            }
            let ds = load_cifar_binary(&input, layout)?;
            let (lt, profile) = make_long_tailed(&ds, rho, seed)?;
            write_cifar_binary(&lt, &out, layout)?;
            println!(
                "{} of {} records kept; class counts {}..{}",
                lt.len(),
                ds.len(),
                profile.min_count(),
                profile.max_count()
            );
        }
        Command::ExportFeatures { checkpoint, out, data } => {
            let model: Model32 = load_checkpoint(&checkpoint)?;
            let (train, test) = load_recipe(&data)?;
            let ds = test.unwrap_or(train);
            let dump = export_features_2d(&model, &ds, &out)?;
            let (inter, intra) = dump.separation();
            println!("{} rows; centroid distance {inter:.4}, intra-class spread {intra:.4}", dump.rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Numeric { .. } => 3,
                _ => 1,
            })
        }
    }
}
