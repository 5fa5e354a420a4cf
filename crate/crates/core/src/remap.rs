//! Per-pixel remap tables compiled from a [`WarpParams`].
//!
//! Construction runs in double precision and stores single precision source
//! coordinates. Construction and application are split by output row over the
//! rayon pool; results do not depend on the number of threads.
//!
//! # Binary format
//!
//! All integers and floats little-endian:
//!
//! ```text
//! magic     4 bytes  "FRMP"
//! version   u32      1
//! out_w     u32
//! out_h     u32
//! src_cols  u32
//! src_rows  u32
//! src_x     f32 × out_w·out_h   row-major
//! src_y     f32 × out_w·out_h   row-major
//! valid     ceil(out_w·out_h / 8) bytes, bit i of the mask is bit (i % 8) of byte i / 8
//! ```
//!
//! Invalid entries carry source coordinates `(0, 0)`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::WarpParams;
pub use crate::raster::{ColorImage, LabelImage};
use crate::raster::IGNORE_LABEL;

pub const MAGIC: &[u8; 4] = b"FRMP";
pub const FORMAT_VERSION: u32 = 1;

/// Fill for color pixels whose ray misses the source.
pub const COLOR_FILL: [u8; 3] = [0, 0, 0];
/// Fill for label pixels whose ray misses the source.
pub const LABEL_FILL: u8 = IGNORE_LABEL;

/// Source coordinates and validity for every output pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct RemapTable {
    out_width: usize,
    out_height: usize,
    src_cols: usize,
    src_rows: usize,
    src_x: Vec<f32>,
    src_y: Vec<f32>,
    valid: Vec<bool>,
}

/// Summary statistics over the valid entries of a table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemapStats {
    pub valid: usize,
    pub total: usize,
    pub min_x: f32,
    pub max_x: f32,
    pub min_y: f32,
    pub max_y: f32,
}

impl RemapTable {
    /// Compiles `params` against a `src_cols x src_rows` source.
    ///
    /// The pinhole raster size inside `params` is replaced by the given
    /// source dimensions.
    pub fn build(params: &WarpParams, src_cols: usize, src_rows: usize) -> Result<Self> {
        let mut params = *params;
        if src_cols == 0 || src_rows == 0 {
            return Err(Error::Config(format!(
                "source size must be non-zero, got {src_cols}x{src_rows}"
            )));
        }
        params.pinhole.cols = src_cols as u32;
        params.pinhole.rows = src_rows as u32;
        params.validate()?;

        let out_width = params.fisheye.out_width as usize;
        let out_height = params.fisheye.out_height as usize;
        let n = out_width * out_height;
        let warp = params.compile();

        let mut src_x = vec![0f32; n];
        let mut src_y = vec![0f32; n];
        let mut valid = vec![false; n];
        src_x
            .par_chunks_mut(out_width)
            .zip(src_y.par_chunks_mut(out_width))
            .zip(valid.par_chunks_mut(out_width))
            .enumerate()
            .for_each(|(row, ((xs, ys), vs))| {
                for col in 0..out_width {
                    if let Some(p) = warp.map(col as f64, row as f64) {
                        xs[col] = p.x as f32;
                        ys[col] = p.y as f32;
                        vs[col] = true;
                    }
                }
            });

        Ok(Self {
            out_width,
            out_height,
            src_cols,
            src_rows,
            src_x,
            src_y,
            valid,
        })
    }

    /// Assembles a table from raw arrays, checking every invariant.
    pub fn from_parts(
        out_width: usize,
        out_height: usize,
        src_cols: usize,
        src_rows: usize,
        src_x: Vec<f32>,
        src_y: Vec<f32>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let n = out_width * out_height;
        if n == 0 || src_cols == 0 || src_rows == 0 {
            return Err(Error::Config("remap table dimensions must be non-zero".into()));
        }
        if src_x.len() != n || src_y.len() != n || valid.len() != n {
            return Err(Error::Config(format!(
                "remap arrays must have {n} entries, got {}/{}/{}",
                src_x.len(),
                src_y.len(),
                valid.len()
            )));
        }
        let max_x = (src_cols - 1) as f32;
        let max_y = (src_rows - 1) as f32;
        for i in (0..n).filter(|&i| valid[i]) {
            if !((0.0..=max_x).contains(&src_x[i]) && (0.0..=max_y).contains(&src_y[i])) {
                return Err(Error::Config(format!(
                    "valid entry {i} at ({}, {}) lies outside the {src_cols}x{src_rows} source",
                    src_x[i], src_y[i]
                )));
            }
        }
        Ok(Self {
            out_width,
            out_height,
            src_cols,
            src_rows,
            src_x,
            src_y,
            valid,
        })
    }

    pub fn out_dims(&self) -> (usize, usize) {
        (self.out_width, self.out_height)
    }

    pub fn src_dims(&self) -> (usize, usize) {
        (self.src_cols, self.src_rows)
    }

    pub fn src_x(&self) -> &[f32] {
        &self.src_x
    }

    pub fn src_y(&self) -> &[f32] {
        &self.src_y
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    /// Source coordinate of output pixel `(col, row)` if valid.
    pub fn lookup(&self, col: usize, row: usize) -> Option<(f32, f32)> {
        let i = row * self.out_width + col;
        self.valid[i].then(|| (self.src_x[i], self.src_y[i]))
    }

    /// Fraction of output pixels whose ray lands inside the source.
    pub fn coverage_ratio(&self) -> f64 {
        let count = self.valid.iter().filter(|&&v| v).count();
        count as f64 / self.valid.len() as f64
    }

    pub fn stats(&self) -> RemapStats {
        let mut stats = RemapStats {
            valid: 0,
            total: self.valid.len(),
            min_x: f32::INFINITY,
            max_x: f32::NEG_INFINITY,
            min_y: f32::INFINITY,
            max_y: f32::NEG_INFINITY,
        };
        for i in (0..self.valid.len()).filter(|&i| self.valid[i]) {
            stats.valid += 1;
            stats.min_x = stats.min_x.min(self.src_x[i]);
            stats.max_x = stats.max_x.max(self.src_x[i]);
            stats.min_y = stats.min_y.min(self.src_y[i]);
            stats.max_y = stats.max_y.max(self.src_y[i]);
        }
        stats
    }

    fn check_source(&self, dims: (usize, usize)) -> Result<()> {
        if dims != (self.src_cols, self.src_rows) {
            return Err(Error::DimensionMismatch {
                expected: (self.src_cols, self.src_rows),
                actual: dims,
            });
        }
        Ok(())
    }

    /// Bilinear resampling of a color image; invalid pixels get `fill`.
    pub fn apply_bilinear(&self, src: &ColorImage, fill: [u8; 3]) -> Result<ColorImage> {
        self.check_source(src.dims())?;
        let w = self.out_width;
        let cols = self.src_cols;
        let max_col = cols - 1;
        let max_row = self.src_rows - 1;
        let pixels = src.as_bytes();
        let mut out = vec![0u8; w * self.out_height * 3];
        out.par_chunks_mut(w * 3).enumerate().for_each(|(row, line)| {
            for col in 0..w {
                let i = row * w + col;
                let dst = &mut line[col * 3..col * 3 + 3];
                if !self.valid[i] {
                    dst.copy_from_slice(&fill);
                    continue;
                }
                let x = self.src_x[i];
                let y = self.src_y[i];
                let x0 = x.floor() as usize;
                let y0 = y.floor() as usize;
                let x1 = (x0 + 1).min(max_col);
                let y1 = (y0 + 1).min(max_row);
                let wx = x - x0 as f32;
                let wy = y - y0 as f32;
                let a = (y0 * cols + x0) * 3;
                let b = (y0 * cols + x1) * 3;
                let c = (y1 * cols + x0) * 3;
                let d = (y1 * cols + x1) * 3;
                for ch in 0..3 {
                    let top = pixels[a + ch] as f32 * (1.0 - wx) + pixels[b + ch] as f32 * wx;
                    let bottom = pixels[c + ch] as f32 * (1.0 - wx) + pixels[d + ch] as f32 * wx;
                    let v = top * (1.0 - wy) + bottom * wy;
                    dst[ch] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
                }
            }
        });
        ColorImage::new(w, self.out_height, out)
    }

    /// Nearest-neighbour resampling with round-half-up; invalid pixels get `fill`.
    pub fn apply_nearest(&self, src: &LabelImage, fill: u8) -> Result<LabelImage> {
        self.check_source(src.dims())?;
        let w = self.out_width;
        let cols = self.src_cols;
        let labels = src.as_bytes();
        let mut out = vec![0u8; w * self.out_height];
        out.par_chunks_mut(w).enumerate().for_each(|(row, line)| {
            for (col, dst) in line.iter_mut().enumerate() {
                let i = row * w + col;
                *dst = if self.valid[i] {
                    let x = round_half_up(self.src_x[i]);
                    let y = round_half_up(self.src_y[i]);
                    labels[y * cols + x]
                } else {
                    fill
                };
            }
        });
        LabelImage::new(w, self.out_height, out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.valid.len();
        let mut buf = Vec::with_capacity(24 + n * 8 + n.div_ceil(8));
        buf.extend_from_slice(MAGIC);
        for v in [
            FORMAT_VERSION,
            self.out_width as u32,
            self.out_height as u32,
            self.src_cols as u32,
            self.src_rows as u32,
        ] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.src_x.iter().chain(&self.src_y) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut packed = vec![0u8; n.div_ceil(8)];
        for (i, _) in self.valid.iter().enumerate().filter(|(_, v)| **v) {
            packed[i / 8] |= 1 << (i % 8);
        }
        buf.extend_from_slice(&packed);
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = bytes
            .get(..24)
            .ok_or_else(|| Error::Format("truncated header".into()))?;
        if &header[..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let word = |k: usize| u32::from_le_bytes(header[4 + 4 * k..8 + 4 * k].try_into().unwrap());
        if word(0) != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {}", word(0))));
        }
        let (out_w, out_h, cols, rows) = (
            word(1) as usize,
            word(2) as usize,
            word(3) as usize,
            word(4) as usize,
        );
        let n = out_w * out_h;
        let expected = 24 + n * 8 + n.div_ceil(8);
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "expected {expected} bytes, found {}",
                bytes.len()
            )));
        }
        let floats = |start: usize| -> Vec<f32> {
            bytes[start..start + n * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect()
        };
        let src_x = floats(24);
        let src_y = floats(24 + n * 4);
        let packed = &bytes[24 + n * 8..];
        let valid = (0..n).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
        Self::from_parts(out_w, out_h, cols, rows, src_x, src_y, valid)
            .map_err(|e| Error::Format(e.to_string()))
    }
}

fn round_half_up(v: f32) -> usize {
    (v as f64 + 0.5).floor() as usize
}

/// Memoizes remap tables by their warp and source size and counts real builds.
#[derive(Debug, Default)]
pub struct RemapCache {
    tables: Mutex<HashMap<CacheKey, Arc<RemapTable>>>,
    builds: AtomicUsize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    params: [u64; 10],
    src: (usize, usize),
}

impl CacheKey {
    fn new(p: &WarpParams, src_cols: usize, src_rows: usize) -> Self {
        let pose = &p.pose;
        let params = [
            p.fisheye.f_fish.to_bits(),
            ((p.fisheye.out_width as u64) << 32) | p.fisheye.out_height as u64,
            p.pinhole.focal.to_bits(),
            pose.rot_x.to_bits(),
            pose.rot_y.to_bits(),
            pose.rot_z.to_bits(),
            pose.t_x.to_bits(),
            pose.t_y.to_bits(),
            pose.t_z.to_bits(),
            0,
        ];
        Self {
            params,
            src: (src_cols, src_rows),
        }
    }
}

impl RemapCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_build(
        &self,
        params: &WarpParams,
        src_cols: usize,
        src_rows: usize,
    ) -> Result<Arc<RemapTable>> {
        let key = CacheKey::new(params, src_cols, src_rows);
        let mut tables = self.tables.lock().expect("remap cache poisoned");
        if let Some(t) = tables.get(&key) {
            return Ok(Arc::clone(t));
        }
        let table = Arc::new(RemapTable::build(params, src_cols, src_rows)?);
        self.builds.fetch_add(1, Ordering::Relaxed);
        tables.insert(key, Arc::clone(&table));
        Ok(table)
    }

    /// Number of tables actually constructed so far.
    pub fn builds(&self) -> usize {
        self.builds.load(Ordering::Relaxed)
    }
}
