//! Tile inventory for visualizing each degree of freedom.
//!
//! The grid has twelve pose tiles at the fixed focal length (± translation
//! and ± rotation per axis) followed by a focal sweep at 200, 250, 300 and
//! 350 px with identity pose.

use serde::Serialize;

use crate::error::Result;
use crate::geometry::{RigPose, WarpParams};
use crate::policy::{AugPolicy, Range, FIXED_FOCAL};
use crate::raster::{ColorImage, LabelImage};
use crate::remap::{RemapTable, COLOR_FILL, LABEL_FILL};

pub const FOCAL_SWEEP: [f64; 4] = [200.0, 250.0, 300.0, 350.0];
/// In-plane rotation shown by the z-rotation tiles, degrees.
pub const ROLL_DEG: f64 = 15.0;
pub const GRID_COLUMNS: usize = 4;
const GUTTER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TileKind {
    Pose,
    Focal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreviewTile {
    pub caption: String,
    pub kind: TileKind,
    pub f_fish: f64,
    pub pose: RigPose,
}

impl PreviewTile {
    pub fn warp(&self, policy: &AugPolicy, src_cols: u32, src_rows: u32) -> Result<WarpParams> {
        policy.warp(self.f_fish, self.pose, src_cols, src_rows)
    }
}

fn extent(range: Range, fallback: f64) -> f64 {
    if range.is_degenerate() {
        fallback
    } else {
        range.lo.abs().max(range.hi.abs())
    }
}

/// The 16-tile inventory. Perturbation sizes are the policy's range extents,
/// falling back to the seven-DoF defaults for ranges the policy pins.
pub fn dof_tiles(policy: &AugPolicy) -> Vec<PreviewTile> {
    let defaults = AugPolicy::default();
    let tx = extent(policy.t_x_range, defaults.t_x_range.hi);
    let ty = extent(policy.t_y_range, defaults.t_y_range.hi);
    let tz = extent(policy.t_z_range, defaults.t_z_range.hi);
    let rx = extent(policy.rot_x_range, defaults.rot_x_range.hi);
    let ry = extent(policy.rot_y_range, defaults.rot_y_range.hi);

    let pose_tile = |caption: &str, pose: RigPose| PreviewTile {
        caption: caption.to_owned(),
        kind: TileKind::Pose,
        f_fish: FIXED_FOCAL,
        pose: policy.orient(pose),
    };
    let p = RigPose::identity;
    let mut tiles = vec![
        pose_tile("camera moves left (X)", RigPose { t_x: -tx, ..p() }),
        pose_tile("camera moves right (X)", RigPose { t_x: tx, ..p() }),
        pose_tile("camera moves up (Y)", RigPose { t_y: -ty, ..p() }),
        pose_tile("camera moves down (Y)", RigPose { t_y: ty, ..p() }),
        pose_tile("camera moves forward (Z)", RigPose { t_z: tz, ..p() }),
        pose_tile("camera moves back (Z)", RigPose { t_z: -tz, ..p() }),
        pose_tile("camera turns left (Y)", RigPose { rot_y: -ry, ..p() }),
        pose_tile("camera turns right (Y)", RigPose { rot_y: ry, ..p() }),
        pose_tile("camera turns up (X)", RigPose { rot_x: rx, ..p() }),
        pose_tile("camera turns down (X)", RigPose { rot_x: -rx, ..p() }),
        pose_tile("camera rotates 15 degrees (Z)", RigPose { rot_z: ROLL_DEG, ..p() }),
        pose_tile("camera rotates -15 degrees (Z)", RigPose { rot_z: -ROLL_DEG, ..p() }),
    ];
    tiles.extend(FOCAL_SWEEP.iter().map(|&f| PreviewTile {
        caption: format!("f={f}"),
        kind: TileKind::Focal,
        f_fish: f,
        pose: RigPose::identity(),
    }));
    tiles
}

/// Warps `img` (and `lbl`) through one tile's configuration.
pub fn render_tile(
    tile: &PreviewTile,
    policy: &AugPolicy,
    img: &ColorImage,
    lbl: Option<&LabelImage>,
) -> Result<(ColorImage, Option<LabelImage>)> {
    let (w, h) = img.dims();
    let table = RemapTable::build(&tile.warp(policy, w as u32, h as u32)?, w, h)?;
    let color = table.apply_bilinear(img, COLOR_FILL)?;
    let label = lbl.map(|l| table.apply_nearest(l, LABEL_FILL)).transpose()?;
    Ok((color, label))
}

/// Lays equally sized tiles out row-major with a white gutter.
pub fn compose_grid(tiles: &[ColorImage], columns: usize) -> ColorImage {
    let Some(first) = tiles.first() else {
        return ColorImage::filled(0, 0, [0; 3]);
    };
    let (tw, th) = first.dims();
    let rows = tiles.len().div_ceil(columns);
    let width = columns * tw + (columns + 1) * GUTTER;
    let height = rows * th + (rows + 1) * GUTTER;
    let mut grid = ColorImage::filled(width, height, [255; 3]);
    let stride = width * 3;
    let buf = grid.as_bytes_mut();
    for (i, tile) in tiles.iter().enumerate() {
        let x0 = GUTTER + (i % columns) * (tw + GUTTER);
        let y0 = GUTTER + (i / columns) * (th + GUTTER);
        for (y, line) in tile.as_bytes().chunks_exact(tw * 3).enumerate() {
            let start = (y0 + y) * stride + x0 * 3;
            buf[start..start + tw * 3].copy_from_slice(line);
        }
    }
    grid
}
