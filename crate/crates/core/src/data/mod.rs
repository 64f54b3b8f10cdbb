//! Image ingestion, augmentation, splits and the synthetic generator.

mod augment;
mod batch;
mod manifest;
mod preprocess;
mod split;
mod synth;

pub use augment::{augment, AugmentParams};
pub use batch::{batch_iter, Batch, Dataset};
pub use manifest::{DatasetManifest, Record, CLASS_NAMES, MANIFEST_HEADER};
pub use preprocess::{
    decode_image, denormalize, load_and_preprocess, normalize, resize_bilinear, IMAGE_SIZE, MEAN, STD,
};
pub use split::{stratified_split, Split};
pub use synth::{synth_dataset, HotSpot, SynthOutput};
