//! 2-D feature export for models whose last layer reads a width-2 feature.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{LayerSpec, Model};
use crate::scalar::Scalar;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
const VIEW: f64 = 600.0;
const MARGIN: f64 = 20.0;

/// One `(x, y, label)` row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDump {
    pub rows: Vec<(f64, f64, usize)>,
}

impl FeatureDump {
    /// Mean pairwise distance between class centroids and mean distance of
    /// samples to their own centroid.
    pub fn separation(&self) -> (f64, f64) {
        let k = self.rows.iter().map(|r| r.2 + 1).max().unwrap_or(0);
        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for &(x, y, l) in &self.rows {
            sums[l].0 += x;
            sums[l].1 += y;
            sums[l].2 += 1;
        }
        let cents: Vec<Option<(f64, f64)>> = sums
            .iter()
            .map(|&(sx, sy, n)| (n > 0).then(|| (sx / n as f64, sy / n as f64)))
            .collect();
        let present: Vec<(f64, f64)> = cents.iter().flatten().copied().collect();
        let (mut inter, mut pairs) = (0.0, 0usize);
        for i in 0..present.len() {
            for j in i + 1..present.len() {
                inter += (present[i].0 - present[j].0).hypot(present[i].1 - present[j].1);
                pairs += 1;
            }
        }
        let intra = self
            .rows
            .iter()
            .map(|&(x, y, l)| {
                let c = cents[l].expect("label present");
                (x - c.0).hypot(y - c.1)
            })
            .sum::<f64>()
            / self.rows.len().max(1) as f64;
        (inter / pairs.max(1) as f64, intra)
    }
}

/// Features feeding the final dense layer, which must read exactly 2 inputs.
pub fn extract_features_2d<T: Scalar>(model: &Model<T>, dataset: &LabeledDataset) -> Result<FeatureDump> {
    let n_layers = model.spec().layers.len();
    match model.spec().layers.last() {
        Some(LayerSpec::Dense { input: 2, .. }) => {}
        other => {
            return Err(Error::invalid(format!(
                "feature export needs a final dense layer with 2 inputs, found {}",
                other.map_or("no layers".to_string(), |l| l.to_string())
            )))
        }
    }
    let mut rows = Vec::with_capacity(dataset.len());
    let indices: Vec<usize> = (0..dataset.len()).collect();
    for chunk in indices.chunks(512) {
        let feats = model.forward_prefix(&dataset.batch_tensor(chunk), n_layers - 1)?;
        for (f, &i) in feats.data().chunks_exact(2).zip(chunk) {
            rows.push((f[0].to_f64_lossy(), f[1].to_f64_lossy(), dataset.labels()[i]));
        }
    }
    Ok(FeatureDump { rows })
}

/// Writes `path` as CSV `x,y,label` and a scatter plot at the same stem with `.svg`.
pub fn export_features_2d<T: Scalar>(model: &Model<T>, dataset: &LabeledDataset, path: &Path) -> Result<FeatureDump> {
    let dump = extract_features_2d(model, dataset)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?));
    w.write_record(["x", "y", "label"])?;
    for &(x, y, l) in &dump.rows {
        w.write_record([x.to_string(), y.to_string(), l.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let svg_path = path.with_extension("svg");
    std::fs::write(&svg_path, render_svg(&dump)).map_err(|e| Error::io(&svg_path, e))?;
    Ok(dump)
}

fn render_svg(dump: &FeatureDump) -> String {
    let finite = dump.rows.iter().filter(|r| r.0.is_finite() && r.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y, _) in finite.clone() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let scale = (VIEW - 2.0 * MARGIN) / span;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{VIEW}" height="{VIEW}" viewBox="0 0 {VIEW} {VIEW}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for &(x, y, l) in finite {
        let px = MARGIN + (x - x0) * scale;
        let py = VIEW - MARGIN - (y - y0) * scale;
        let _ = writeln!(
            s,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="2" fill="{}" fill-opacity="0.7"/>"#,
            PALETTE[l % PALETTE.len()]
        );
    }
    s.push_str("</svg>\n");
    s
}
