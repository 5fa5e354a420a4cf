//! Synthetic Cityscapes-layout trees for tests.

use std::path::Path;

use crate::dataset::{Split, IMAGE_DIR, IMAGE_SUFFIX, LABEL_DIR, RAW_LABEL_SUFFIX};
use crate::error::Result;
use crate::raster::{ColorImage, LabelImage};

/// Raw label IDs used by the fixture; 0 and 4 are unmapped in the Cityscapes table.
pub const RAW_IDS: [u8; 8] = [7, 8, 11, 21, 23, 26, 0, 4];

/// Writes `count` pairs of `width x height` under `root`, spread over two cities.
pub fn write_cityscapes_tree(root: &Path, split: Split, count: usize, width: usize, height: usize) -> Result<()> {
    for i in 0..count {
        let city = if i % 2 == 0 { "aachen" } else { "bremen" };
        let stem = format!("{city}_{i:06}_000019");
        let (img, lbl) = pair(i, width, height);
        let dir = |top: &str| root.join(top).join(split.as_str()).join(city);
        img.write_png(&dir(IMAGE_DIR).join(format!("{stem}{IMAGE_SUFFIX}")))?;
        lbl.write_png(&dir(LABEL_DIR).join(format!("{stem}{RAW_LABEL_SUFFIX}")))?;
    }
    Ok(())
}

/// Blocky scene `i`: the label picks a raw ID per block, the image paints it.
pub fn pair(i: usize, width: usize, height: usize) -> (ColorImage, LabelImage) {
    let block = (width / 16).max(1);
    let raw = |x: usize, y: usize| RAW_IDS[(x / block + 3 * (y / block) + i) % RAW_IDS.len()];
    let lbl = LabelImage::from_fn(width, height, raw);
    let img = ColorImage::from_fn(width, height, |x, y| {
        let v = raw(x, y);
        [v.wrapping_mul(9), (x % 256) as u8, (y % 256) as u8]
    });
    (img, lbl)
}
