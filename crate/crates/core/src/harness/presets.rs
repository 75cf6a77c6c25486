//! Built-in run configurations, loadable as `preset:<name>`.

pub const PRESETS: &[(&str, &str)] = &[
    ("blobs", include_str!("../../presets/blobs.cfg")),
    ("blobs_features", include_str!("../../presets/blobs_features.cfg")),
    ("cifar100_resnet", include_str!("../../presets/cifar100_resnet.cfg")),
    ("cifar100_warm_up", include_str!("../../presets/cifar100_warm_up.cfg")),
    ("small_sample", include_str!("../../presets/small_sample.cfg")),
    ("imbalanced", include_str!("../../presets/imbalanced.cfg")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
