//! Dataset construction, resampling and augmentation.

mod augment;
mod blobs;
mod cifar;
mod cutmix;
mod dataset;
mod sampling;

pub use augment::{augment_standard, cutout, CropFlip, CropFlipDraw};
pub use blobs::{gaussian_blobs, gaussian_blobs_split, BlobSpec};
pub use cifar::{decode_cifar, encode_cifar, load_cifar_binary, write_cifar_binary, CifarLayout, IMAGE_SHAPE};
pub use cutmix::{cut_box, cutmix_mix, cutmix_with, CutBox, CutMixBatch};
pub use dataset::LabeledDataset;
pub use sampling::{
    long_tailed_indices, make_long_tailed, subset_per_class, subset_per_class_indices, ImbalanceProfile,
};
