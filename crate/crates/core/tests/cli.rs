use std::path::Path;
use std::process::{Command, Output};

use sosr::data::{load_cifar_binary, CifarLayout, IMAGE_SHAPE};
use sosr::harness::read_metrics;

fn sosr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sosr"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const BLOBS: &str = "dataset = blobs
blobs.classes = 3
blobs.per_class = 40
blobs.test_per_class = 10
blobs.dim = 4
blobs.separation = 5
blobs.noise_sigma = 0.5
model = dense:4:8,relu,dense:8:3
epochs = 5
batch_size = 16
lr = 0.05
regularizer = sosr
sosr.p = 0.7
seeds = 0,1
record_wall_time = false
";

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, format!("{BLOBS}{extra}")).unwrap();
    path.display().to_string()
}

#[test]
fn train_writes_metrics_and_checkpoints_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = sosr(&["train", "--config", &cfg, "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for s in [0, 1] {
        let out = dir.path().join("out");
        let (thresholds, rows) = read_metrics(&out.join(format!("metrics_seed{s}.csv"))).unwrap();
        assert_eq!(thresholds, vec![0.7, 0.9, 0.99]);
        assert_eq!(rows.len(), 5);
        assert!(out.join(format!("metrics_seed{s}.json")).exists());
        assert!(out.join(format!("model_seed{s}.ckpt")).exists());
    }
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn bad_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "no_such_key = 1\n");
    let o = sosr(&["train", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_key"));
}

#[test]
fn divergence_exits_with_3_and_keeps_partial_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let cfg_text = std::fs::read_to_string(&cfg).unwrap().replace("lr = 0.05", "lr = 1e30");
    std::fs::write(&cfg, cfg_text).unwrap();
    let o = sosr(&["train", "--config", &cfg, "--seed", "0", "--out", "."], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("metrics_seed0.csv").exists());
}

#[test]
fn census_counts_are_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    assert!(sosr(&["train", "--config", &cfg, "--seed", "1", "--out", "."], dir.path()).status.success());
    let o = sosr(
        &["census", "--checkpoint", "model_seed1.ckpt", "--data", &cfg, "--thresholds", "0.5,0.9"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let counts: Vec<usize> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(text.lines().next(), Some("threshold,count"));
    assert_eq!(counts.len(), 2);
    assert!(counts[0] >= counts[1]);

    let bad = sosr(&["census", "--checkpoint", "model_seed1.ckpt", "--data", &cfg, "--thresholds", "1.5"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = sosr(
        &["sweep", "--config", &cfg, "--axis", "beta", "--values", "0,0.5", "--out", "s.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("beta,mean_val_acc,seed_0,seed_1"));
    assert_eq!(lines.count(), 2);

    let bad = sosr(&["sweep", "--config", &cfg, "--axis", "gamma", "--values", "1"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn make_imbalanced_writes_a_long_tailed_file() {
    let dir = tempfile::tempdir().unwrap();
    let per: usize = IMAGE_SHAPE.iter().product();
    let mut bytes = Vec::new();
    for i in 0..100 * 5 {
        bytes.extend([0u8, (i % 100) as u8]);
        bytes.extend(std::iter::repeat_n((i % 251) as u8, per));
    }
    let input = dir.path().join("in.bin");
    std::fs::write(&input, &bytes).unwrap();
    let o = sosr(
        &["make-imbalanced", "--in", "in.bin", "--rho", "5", "--out", "lt.bin", "--layout", "cifar100"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lt = load_cifar_binary(&dir.path().join("lt.bin"), CifarLayout::Cifar100).unwrap();
    let counts = lt.class_counts();
    assert_eq!(counts[0], 5);
    assert_eq!(counts[99], 1);
    assert!(counts.windows(2).all(|w| w[0] >= w[1]));

    let bad = sosr(&["make-imbalanced", "--in", "in.bin", "--rho", "0.5", "--out", "x.bin"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn exported_features_separate_classes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("features.cfg");
    std::fs::write(
        &cfg_path,
        "dataset = blobs
         blobs.classes = 4
         blobs.per_class = 100
         blobs.test_per_class = 30
         blobs.dim = 6
         blobs.separation = 6
         blobs.noise_sigma = 1.0
         model = dense:6:32,relu,dense:32:2,dense:2:4
         epochs = 20
         batch_size = 32
         lr = 0.01
         weight_decay = 0
         regularizer = sosr",
    )
    .unwrap();
    let cfg = cfg_path.display().to_string();
    assert!(sosr(&["train", "--config", &cfg, "--out", "."], dir.path()).status.success());
    let o = sosr(
        &["export-features", "--checkpoint", "model_seed0.ckpt", "--out", "feat.csv", "--data", &cfg],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("feat.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,y,label"));
    assert_eq!(csv.lines().count(), 1 + 4 * 30);
    assert!(dir.path().join("feat.svg").exists());

    // "N rows; centroid distance D, intra-class spread S"
    let line = stdout(&o);
    let nums: Vec<f64> = line
        .split(|c: char| !(c.is_ascii_digit() || c == '.'))
        .filter_map(|t| t.parse().ok())
        .collect();
    let (inter, intra) = (nums[1], nums[2]);
    assert!(inter > intra, "{line}");
}

#[test]
fn presets_load_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let o = sosr(&["train", "--config", "preset:nope"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
