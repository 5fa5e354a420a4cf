//! Synthetic inputs shared by the benchmarks.

use fisheye_synth::{ColorImage, LabelImage};

/// Cityscapes-sized color gradient.
pub fn source_image(width: usize, height: usize) -> ColorImage {
    ColorImage::from_fn(width, height, |x, y| {
        [(x % 256) as u8, (y % 256) as u8, ((x ^ y) % 256) as u8]
    })
}

/// Blocky train-ID label map matching [`source_image`].
pub fn source_labels(width: usize, height: usize) -> LabelImage {
    LabelImage::from_fn(width, height, |x, y| ((x / 64 + y / 64) % 19) as u8)
}
