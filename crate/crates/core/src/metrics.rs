//! Confusion matrices, per-class IoU and mIoU, and per-focal-length reports.
//!
//! Rows are ground truth, columns predictions. Ground-truth ignore pixels are
//! skipped. A prediction of the ignore label against a real class lands in an
//! extra void column: it counts against that class's IoU but never forms a
//! class of its own.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{FileFailure, TRAIN_LABEL_SUFFIX};
use crate::error::{Error, Result};
use crate::raster::{LabelImage, IGNORE_LABEL, NUM_CLASSES};

pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "road",
    "sidewalk",
    "building",
    "wall",
    "fence",
    "pole",
    "traffic_light",
    "traffic_sign",
    "vegetation",
    "terrain",
    "sky",
    "person",
    "rider",
    "car",
    "truck",
    "bus",
    "train",
    "motorcycle",
    "bicycle",
];

const COLS: usize = NUM_CLASSES + 1;
const VOID: usize = NUM_CLASSES;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<u64>,
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        Self::new()
    }
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self {
            counts: vec![0; NUM_CLASSES * COLS],
        }
    }

    /// Count for ground truth `gt` predicted as `pred`; `pred == 255` reads the void column.
    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        let col = if pred == IGNORE_LABEL as usize { VOID } else { pred };
        self.counts[gt * COLS + col]
    }

    pub fn void_count(&self, gt: usize) -> u64 {
        self.counts[gt * COLS + VOID]
    }

    /// Number of non-ignored ground-truth pixels accumulated.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn update(&mut self, pred: &LabelImage, gt: &LabelImage) -> Result<()> {
        if pred.dims() != gt.dims() {
            return Err(Error::DimensionMismatch {
                expected: gt.dims(),
                actual: pred.dims(),
            });
        }
        pred.check_train_ids()?;
        gt.check_train_ids()?;
        for (&p, &g) in pred.as_bytes().iter().zip(gt.as_bytes()) {
            if g == IGNORE_LABEL {
                continue;
            }
            let col = if p == IGNORE_LABEL { VOID } else { p as usize };
            self.counts[g as usize * COLS + col] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// `IoU_k = tp / (row_k + col_k - tp)`; `None` when the class is absent from both.
    pub fn iou_per_class(&self) -> Vec<Option<f64>> {
        (0..NUM_CLASSES)
            .map(|k| {
                let tp = self.counts[k * COLS + k];
                let row: u64 = self.counts[k * COLS..(k + 1) * COLS].iter().sum();
                let col: u64 = (0..NUM_CLASSES).map(|g| self.counts[g * COLS + k]).sum();
                let denom = row + col - tp;
                (denom > 0).then(|| tp as f64 / denom as f64)
            })
            .collect()
    }

    pub fn mean_iou(&self) -> Result<f64> {
        mean_defined(&self.iou_per_class())
    }
}

fn mean_defined(ious: &[Option<f64>]) -> Result<f64> {
    let defined: Vec<f64> = ious.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::NoDefinedClasses);
    }
    Ok(defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Scores for one focal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocalResult {
    pub f: f64,
    pub images: usize,
    pub pixels: u64,
    pub iou: Vec<Option<f64>>,
    pub miou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub per_focal: Vec<FocalResult>,
    /// Per-class IoU over all focal lengths pooled.
    pub iou: Vec<Option<f64>>,
    pub miou: Option<f64>,
    pub pixels: u64,
    #[serde(skip)]
    pub failures: Vec<FileFailure>,
}

impl EvalReport {
    pub fn miou_at(&self, f: f64) -> Option<f64> {
        self.per_focal.iter().find(|r| r.f == f).and_then(|r| r.miou)
    }

    pub fn to_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("report is serializable");
        value["classes"] = serde_json::json!(CLASS_NAMES);
        value["failures"] = self
            .failures
            .iter()
            .map(|f| serde_json::json!({ "path": f.path, "message": f.message }))
            .collect();
        serde_json::to_string_pretty(&value).expect("report is serializable")
    }

    /// One row per method, one `mIoU (f=…)` column per focal length.
    pub fn to_table(&self) -> String {
        let header: Vec<String> = std::iter::once("Data augmentation".to_owned())
            .chain(self.per_focal.iter().map(|r| format!("mIoU (f={})", r.f)))
            .collect();
        let row: Vec<String> = std::iter::once(self.method.clone())
            .chain(self.per_focal.iter().map(|r| match r.miou {
                Some(v) => format!("{v:.4}"),
                None => "-".to_owned(),
            }))
            .collect();
        let widths: Vec<usize> = header
            .iter()
            .zip(&row)
            .map(|(h, r)| h.len().max(r.len()))
            .collect();
        let mut out = String::new();
        for line in [&header, &row] {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
        }
        out
    }
}

/// One prediction/ground-truth directory pair evaluated at focal length `f`.
#[derive(Debug, Clone)]
pub struct TestsetDirs {
    pub f: f64,
    pub pred: PathBuf,
    pub gt: PathBuf,
}

/// Ground-truth files are every `*_gtFine_labelTrainIds.png` below `gt`; the
/// matching prediction lives at the same relative path below `pred`.
pub fn evaluate_testsets(method: &str, sets: &[TestsetDirs]) -> Result<EvalReport> {
    for set in sets {
        for dir in [&set.pred, &set.gt] {
            if !dir.is_dir() {
                return Err(Error::MissingFocal {
                    f: set.f,
                    path: dir.clone(),
                });
            }
        }
    }
    let mut per_focal = Vec::new();
    let mut failures = Vec::new();
    let mut pooled = ConfusionMatrix::new();
    for set in sets {
        let gt_files = label_files(&set.gt)?;
        let partials: Vec<std::result::Result<ConfusionMatrix, FileFailure>> = gt_files
            .par_iter()
            .map(|rel| {
                let pred_path = set.pred.join(rel);
                let gt_path = set.gt.join(rel);
                let fail = |e: Error| FileFailure {
                    path: pred_path.clone(),
                    message: e.to_string(),
                };
                let gt = LabelImage::read_png(&gt_path).map_err(fail)?;
                let pred = LabelImage::read_png(&pred_path).map_err(fail)?;
                let mut cm = ConfusionMatrix::new();
                cm.update(&pred, &gt).map_err(fail)?;
                Ok(cm)
            })
            .collect();
        let mut cm = ConfusionMatrix::new();
        let mut images = 0;
        for partial in partials {
            match partial {
                Ok(p) => {
                    cm.merge(&p);
                    images += 1;
                }
                Err(f) => failures.push(f),
            }
        }
        pooled.merge(&cm);
        per_focal.push(FocalResult {
            f: set.f,
            images,
            pixels: cm.total(),
            iou: cm.iou_per_class(),
            miou: cm.mean_iou().ok(),
        });
    }
    Ok(EvalReport {
        method: method.to_owned(),
        per_focal,
        iou: pooled.iou_per_class(),
        miou: pooled.mean_iou().ok(),
        pixels: pooled.total(),
        failures,
    })
}

/// Relative paths of ground-truth label files below `root`, sorted.
pub fn label_files(root: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_owned();
            Error::io(path, e.into())
        })?;
        let is_label = entry
            .file_name()
            .to_str()
            .is_some_and(|n| n.ends_with(TRAIN_LABEL_SUFFIX));
        if entry.file_type().is_file() && is_label {
            let rel = entry.path().strip_prefix(root).expect("walk stays below root");
            files.push(rel.to_owned());
        }
    }
    Ok(files)
}
