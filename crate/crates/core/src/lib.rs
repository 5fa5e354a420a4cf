//! Synthetic fisheye generation for urban-driving segmentation datasets.
//!
//! A rectilinear image is viewed through a virtual equidistant (`r = f·θ`)
//! fisheye camera with seven degrees of freedom: three rotations, three
//! translations and the fisheye focal length. The warp is compiled once into a
//! [`RemapTable`] and applied to color images (bilinear) and label maps
//! (nearest neighbour) so both stay aligned.
//!
//! Module map:
//!
//! - [`geometry`]: the scalar projection chain, fisheye pixel to source pixel.
//! - [`remap`]: lookup-table construction, application and binary serialization.
//! - [`policy`]: the eight augmentation presets, seeded sampling, online pipeline.
//! - [`dataset`]: Cityscapes-layout scanning, label encoding, test-set generation
//!   and training streams.
//! - [`metrics`]: confusion matrices, IoU/mIoU and per-focal-length reports.
//! - [`preview`]: the per-DoF tile inventory used by the `preview` command.

pub mod dataset;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod policy;
pub mod preview;
pub mod raster;
pub mod remap;
pub mod rng;

pub use dataset::{DatasetManifest, LabelEncoding, Record, Split};
pub use error::{Error, Result};
pub use geometry::{FisheyeIntrinsics, PinholeIntrinsics, RigPose, WarpParams};
pub use metrics::{ConfusionMatrix, EvalReport};
pub use policy::{AugPolicy, Preset, Range, SampleDecisions};
pub use raster::{ColorImage, LabelImage, IGNORE_LABEL, NUM_CLASSES};
pub use remap::RemapTable;
pub use rng::SampleRng;

/// Tool version recorded in generated manifests and sidecars.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(feature = "test-fixtures")]
pub mod fixtures;
