//! Per-epoch metrics and their CSV/JSON persistence.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub ce_part: f64,
    pub sosr_part: f64,
    pub effective_beta: f64,
    pub train_acc: f64,
    /// `None` when the run has no held-out set.
    pub val_acc: Option<f64>,
    /// Over-confident counts, one per census threshold.
    pub census: Vec<usize>,
    pub wall_time_s: f64,
}

/// JSON companion of a metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub epochs: usize,
    pub final_train_loss: Option<f64>,
    pub final_train_acc: Option<f64>,
    pub final_val_acc: Option<f64>,
    pub best_val_acc: Option<f64>,
    pub best_val_epoch: Option<usize>,
    pub census_thresholds: Vec<f64>,
}

impl MetricsSummary {
    pub fn from_metrics(metrics: &[EpochMetrics], thresholds: &[f64]) -> Self {
        let last = metrics.last();
        let best = metrics
            .iter()
            .filter_map(|m| m.val_acc.map(|v| (m.epoch, v)))
            .fold(None, |best: Option<(usize, f64)>, (e, v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((e, v)),
            });
        MetricsSummary {
            epochs: metrics.len(),
            final_train_loss: last.map(|m| m.train_loss),
            final_train_acc: last.map(|m| m.train_acc),
            final_val_acc: last.and_then(|m| m.val_acc),
            best_val_acc: best.map(|b| b.1),
            best_val_epoch: best.map(|b| b.0),
            census_thresholds: thresholds.to_vec(),
        }
    }
}

pub fn metrics_header(thresholds: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = ["epoch", "train_loss", "ce_part", "sosr_part", "effective_beta", "train_acc", "val_acc"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(thresholds.iter().map(|t| format!("census_{t}")));
    h.push("wall_time_s".into());
    h
}

/// Writes the metrics CSV at `path` and the summary JSON next to it
/// (same stem, `.json` extension).
pub fn write_metrics(metrics: &[EpochMetrics], thresholds: &[f64], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(metrics_header(thresholds))?;
    for m in metrics {
        if m.census.len() != thresholds.len() {
            return Err(Error::invalid(format!(
                "epoch {} has {} census counts for {} thresholds",
                m.epoch,
                m.census.len(),
                thresholds.len()
            )));
        }
        let mut row = vec![
            m.epoch.to_string(),
            m.train_loss.to_string(),
            m.ce_part.to_string(),
            m.sosr_part.to_string(),
            m.effective_beta.to_string(),
            m.train_acc.to_string(),
            m.val_acc.map(|v| v.to_string()).unwrap_or_default(),
        ];
        row.extend(m.census.iter().map(|c| c.to_string()));
        row.push(m.wall_time_s.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let json_path = path.with_extension("json");
    let summary = MetricsSummary::from_metrics(metrics, thresholds);
    let mut out = BufWriter::new(File::create(&json_path).map_err(|e| Error::io(&json_path, e))?);
    serde_json::to_writer_pretty(&mut out, &summary)?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| Error::io(&json_path, e))?;
    Ok(())
}

/// Reads a metrics CSV back; returns the census thresholds and the rows.
pub fn read_metrics(path: &Path) -> Result<(Vec<f64>, Vec<EpochMetrics>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers()?.clone();
    let bad = |what: &str| Error::Format(format!("{}: {what}", path.display()));
    let n = header.len();
    if n < 8 || header.get(n - 1) != Some("wall_time_s") {
        return Err(bad("unexpected header"));
    }
    let thresholds = header
        .iter()
        .skip(7)
        .take(n - 8)
        .map(|h| h.strip_prefix("census_").and_then(|t| t.parse().ok()).ok_or_else(|| bad(h)))
        .collect::<Result<Vec<f64>>>()?;
    let expected = metrics_header(&thresholds);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(bad("unexpected header"));
    }

    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| bad(&rec[i])) };
        rows.push(EpochMetrics {
            epoch: rec[0].parse().map_err(|_| bad(&rec[0]))?,
            train_loss: f(1)?,
            ce_part: f(2)?,
            sosr_part: f(3)?,
            effective_beta: f(4)?,
            train_acc: f(5)?,
            val_acc: if rec[6].is_empty() { None } else { Some(f(6)?) },
            census: (7..n - 1)
                .map(|i| rec[i].parse().map_err(|_| bad(&rec[i])))
                .collect::<Result<_>>()?,
            wall_time_s: f(n - 1)?,
        });
    }
    Ok((thresholds, rows))
}

/// Reads the JSON summary written by [`write_metrics`].
pub fn read_summary(path: &Path) -> Result<MetricsSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(epoch: usize, val: Option<f64>) -> EpochMetrics {
        EpochMetrics {
            epoch,
            train_loss: 0.1 + epoch as f64 / 3.0,
            ce_part: 0.1,
            sosr_part: 1.0 / 7.0,
            effective_beta: 0.5,
            train_acc: 0.875,
            val_acc: val,
            census: vec![9, 4, 1],
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn empty_metrics_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_metrics(&[], &[0.7, 0.9, 0.99], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "epoch,train_loss,ce_part,sosr_part,effective_beta,train_acc,val_acc,census_0.7,census_0.9,census_0.99,wall_time_s\n"
        );
        let (t, rows) = read_metrics(&path).unwrap();
        assert_eq!(t, vec![0.7, 0.9, 0.99]);
        assert!(rows.is_empty());
    }

    #[test]
    fn round_trip_and_best_accuracy() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let metrics = vec![sample(0, Some(0.5)), sample(1, Some(0.8125)), sample(2, Some(0.75))];
        write_metrics(&metrics, &[0.7, 0.9, 0.99], &path).unwrap();
        let (_, back) = read_metrics(&path).unwrap();
        assert_eq!(back, metrics);
        let summary = read_summary(&path.with_extension("json")).unwrap();
        let max = back.iter().filter_map(|m| m.val_acc).fold(f64::MIN, f64::max);
        assert_eq!(summary.best_val_acc, Some(max));
        assert_eq!(summary.best_val_epoch, Some(1));
        assert_eq!(summary.final_val_acc, Some(0.75));
    }

    #[test]
    fn missing_validation_is_an_empty_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_metrics(&[sample(0, None)], &[0.7, 0.9, 0.99], &path).unwrap();
        let (_, back) = read_metrics(&path).unwrap();
        assert_eq!(back[0].val_acc, None);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = write_metrics(&[], &[], Path::new("/nonexistent/dir/m.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
