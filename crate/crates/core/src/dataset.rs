//! Cityscapes-layout datasets: scanning, label encoding, fixed-focal test sets
//! and deterministic online training streams.
//!
//! Input layout:
//!
//! ```text
//! <root>/leftImg8bit/<split>/<city>/<stem>_leftImg8bit.png
//! <root>/gtFine/<split>/<city>/<stem>_gtFine_labelIds.png
//! ```
//!
//! Generated test sets mirror it, with labels re-encoded to train IDs:
//!
//! ```text
//! <out>/leftImg8bit/<split>/<city>/<stem>_leftImg8bit.png
//! <out>/gtFine/<split>/<city>/<stem>_gtFine_labelTrainIds.png
//! <out>/testset.toml
//! <out>/remap_<cols>x<rows>.frmp
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::WarpParams;
use crate::policy::{augment_sample, AugPolicy, Augmented};
use crate::raster::{write_atomic, ColorImage, LabelImage, IGNORE_LABEL, NUM_CLASSES};
use crate::remap::{RemapCache, COLOR_FILL, LABEL_FILL};
use crate::rng::SampleRng;

pub const IMAGE_DIR: &str = "leftImg8bit";
pub const LABEL_DIR: &str = "gtFine";
pub const IMAGE_SUFFIX: &str = "_leftImg8bit.png";
pub const RAW_LABEL_SUFFIX: &str = "_gtFine_labelIds.png";
pub const TRAIN_LABEL_SUFFIX: &str = "_gtFine_labelTrainIds.png";
pub const TESTSET_MANIFEST: &str = "testset.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!(
                "unknown split `{other}` (expected train, val or test)"
            ))),
        }
    }
}

/// One image/label pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub image: PathBuf,
    pub label: PathBuf,
    pub city: String,
    /// File name without the `_leftImg8bit.png` suffix.
    pub stem: String,
    pub split: Split,
}

impl Record {
    /// Relative image path inside a mirrored tree.
    pub fn image_rel(&self) -> PathBuf {
        Path::new(IMAGE_DIR)
            .join(self.split.as_str())
            .join(&self.city)
            .join(format!("{}{IMAGE_SUFFIX}", self.stem))
    }

    /// Relative train-ID label path inside a mirrored tree.
    pub fn train_label_rel(&self) -> PathBuf {
        Path::new(LABEL_DIR)
            .join(self.split.as_str())
            .join(&self.city)
            .join(format!("{}{TRAIN_LABEL_SUFFIX}", self.stem))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub records: Vec<Record>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Lists every image/label pair of `split`, sorted by path.
pub fn scan_dataset(root: &Path, split: Split) -> Result<DatasetManifest> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root not found"),
        ));
    }
    let empty = || Error::EmptySplit {
        root: root.to_owned(),
        split: split.to_string(),
    };
    let image_root = root.join(IMAGE_DIR).join(split.as_str());
    if !image_root.is_dir() {
        return Err(empty());
    }
    let label_root = root.join(LABEL_DIR).join(split.as_str());

    let mut records = Vec::new();
    for city_dir in sorted_entries(&image_root)? {
        if !city_dir.is_dir() {
            continue;
        }
        let city = city_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        for image in sorted_entries(&city_dir)? {
            let Some(name) = image.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let Some(stem) = name.strip_suffix(IMAGE_SUFFIX) else {
                continue;
            };
            let label = label_root.join(&city).join(format!("{stem}{RAW_LABEL_SUFFIX}"));
            if !label.is_file() {
                return Err(Error::MissingLabel {
                    image,
                    expected: label,
                });
            }
            records.push(Record {
                stem: stem.to_owned(),
                image,
                label,
                city: city.clone(),
                split,
            });
        }
    }
    if records.is_empty() {
        return Err(empty());
    }
    Ok(DatasetManifest {
        root: root.to_owned(),
        records,
    })
}

/// Total map from raw label IDs to train IDs.
#[derive(Clone, PartialEq, Eq)]
pub struct LabelEncoding {
    map: [u8; 256],
}

impl fmt::Debug for LabelEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mapped: Vec<_> = (0..256)
            .filter(|&i| self.map[i] != IGNORE_LABEL)
            .map(|i| (i, self.map[i]))
            .collect();
        f.debug_struct("LabelEncoding").field("mapped", &mapped).finish()
    }
}

const CITYSCAPES_TABLE: &str = include_str!("../data/cityscapes_train_ids.txt");

impl Default for LabelEncoding {
    fn default() -> Self {
        Self::cityscapes()
    }
}

impl LabelEncoding {
    /// The standard 19-class Cityscapes encoding.
    pub fn cityscapes() -> Self {
        Self::parse(CITYSCAPES_TABLE).expect("bundled table is well formed")
    }

    /// Parses `raw train [name]` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = [IGNORE_LABEL; 256];
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Config(format!("label table line {}: {msg}", n + 1));
            let mut fields = line.split_whitespace();
            let raw: u8 = fields
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err("bad raw id"))?;
            let train: u8 = fields
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err("bad train id"))?;
            if !LabelImage::is_train_id(train) {
                return Err(err("train id must be 0..18 or 255"));
            }
            map[raw as usize] = train;
        }
        Ok(Self { map })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn get(&self, raw: u8) -> u8 {
        self.map[raw as usize]
    }

    /// Number of raw IDs that map to a class.
    pub fn mapped_count(&self) -> usize {
        self.map.iter().filter(|&&v| (v as usize) < NUM_CLASSES).count()
    }
}

pub fn encode_labels(raw: &LabelImage, enc: &LabelEncoding) -> LabelImage {
    let data = raw.as_bytes().iter().map(|&v| enc.get(v)).collect();
    LabelImage::new(raw.width(), raw.height(), data).expect("dimensions preserved")
}

/// Directory name of the test set generated at focal length `f`, e.g. `f200`.
pub fn focal_dir_name(f: f64) -> String {
    format!("f{f}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestsetOptions {
    pub f: f64,
    pub z1: f64,
    pub out_size: u32,
}

impl TestsetOptions {
    pub fn new(f: f64) -> Self {
        Self {
            f,
            z1: 500.0,
            out_size: 640,
        }
    }
}

/// Written next to every generated test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestsetManifest {
    pub tool: String,
    pub version: String,
    pub f: f64,
    pub z1: f64,
    pub out_size: u32,
    pub pose: String,
    pub pre_resize: String,
    pub label_encoding: String,
    pub pairs_written: usize,
    pub failures: usize,
    pub coverage: f64,
    pub source_sizes: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileFailure {
    pub path: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestsetReport {
    pub written: usize,
    pub failures: Vec<FileFailure>,
    /// Tables built by this run (cache misses).
    pub tables_built: usize,
    /// Valid-pixel fraction of the table of the first record, if any.
    pub coverage: Option<f64>,
}

impl TestsetReport {
    pub fn is_success(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Generates a pure-zoom fisheye test set at focal length `opts.f`.
///
/// Failures are collected per file and the run continues. Tables come from
/// `cache`, so a full set over same-sized sources builds exactly one table.
pub fn generate_testset(
    manifest: &DatasetManifest,
    opts: &TestsetOptions,
    out_dir: &Path,
    encoding: &LabelEncoding,
    cache: &RemapCache,
) -> Result<TestsetReport> {
    // validate before touching any file
    let probe = WarpParams::zoom(opts.f, opts.out_size, opts.z1, 1, 1)?;
    let builds_before = cache.builds();

    let results: Vec<Result<(usize, usize, f64)>> = manifest
        .records
        .par_iter()
        .map(|rec| {
            let img = ColorImage::read_png(&rec.image)?;
            let raw = LabelImage::read_png(&rec.label)?;
            if img.dims() != raw.dims() {
                return Err(Error::DimensionMismatch {
                    expected: img.dims(),
                    actual: raw.dims(),
                });
            }
            let (cols, rows) = img.dims();
            let table = cache.get_or_build(&probe, cols, rows)?;
            let labels = encode_labels(&raw, encoding);
            table
                .apply_bilinear(&img, COLOR_FILL)?
                .write_png(&out_dir.join(rec.image_rel()))?;
            table
                .apply_nearest(&labels, LABEL_FILL)?
                .write_png(&out_dir.join(rec.train_label_rel()))?;
            Ok((cols, rows, table.coverage_ratio()))
        })
        .collect();

    let mut report = TestsetReport {
        written: 0,
        failures: Vec::new(),
        tables_built: 0,
        coverage: None,
    };
    let mut sizes = BTreeSet::new();
    for (rec, result) in manifest.records.iter().zip(results) {
        match result {
            Ok((cols, rows, coverage)) => {
                report.written += 1;
                report.coverage.get_or_insert(coverage);
                sizes.insert([cols, rows]);
            }
            Err(e) => report.failures.push(FileFailure {
                path: rec.image.clone(),
                message: e.to_string(),
            }),
        }
    }

    for &[cols, rows] in &sizes {
        let table = cache.get_or_build(&probe, cols, rows)?;
        write_atomic(&out_dir.join(format!("remap_{cols}x{rows}.frmp")), &table.to_bytes())?;
    }
    report.tables_built = cache.builds() - builds_before;

    if !manifest.is_empty() {
        let meta = TestsetManifest {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: crate::VERSION.to_owned(),
            f: opts.f,
            z1: opts.z1,
            out_size: opts.out_size,
            pose: "identity".to_owned(),
            pre_resize: "none".to_owned(),
            label_encoding: format!("{} raw ids mapped", encoding.mapped_count()),
            pairs_written: report.written,
            failures: report.failures.len(),
            coverage: report.coverage.unwrap_or(0.0),
            source_sizes: sizes.into_iter().collect(),
        };
        let text = toml::to_string(&meta).expect("manifest is serializable");
        write_atomic(&out_dir.join(TESTSET_MANIFEST), text.as_bytes())?;
    }
    Ok(report)
}

/// One augmented training sample and where it came from.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    /// Position in the epoch.
    pub index: usize,
    /// Index into the manifest's records.
    pub record: usize,
    pub augmented: Augmented,
}

/// Reproducible augmented samples for one epoch.
///
/// The order is a shuffle keyed by `(seed, epoch)`; sample `i` draws from
/// generator stream `(seed, epoch, i)`. [`TrainingStream::sample`] is pure, so
/// consumers may produce samples in any order or in parallel.
#[derive(Debug, Clone)]
pub struct TrainingStream<'a> {
    manifest: &'a DatasetManifest,
    policy: AugPolicy,
    encoding: LabelEncoding,
    seed: u64,
    epoch: u64,
    order: Vec<usize>,
}

impl<'a> TrainingStream<'a> {
    pub fn new(manifest: &'a DatasetManifest, policy: &AugPolicy, seed: u64, epoch: u64) -> Result<Self> {
        policy.validate()?;
        Ok(Self {
            manifest,
            policy: policy.clone(),
            encoding: LabelEncoding::cityscapes(),
            seed,
            epoch,
            order: epoch_order(manifest.len(), seed, epoch),
        })
    }

    pub fn with_encoding(mut self, encoding: LabelEncoding) -> Self {
        self.encoding = encoding;
        self
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Record indices in epoch order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn sample(&self, index: usize) -> Result<TrainingSample> {
        let record = self.order[index];
        let rec = &self.manifest.records[record];
        let img = ColorImage::read_png(&rec.image)?;
        let raw = LabelImage::read_png(&rec.label)?;
        let labels = encode_labels(&raw, &self.encoding);
        let mut rng = SampleRng::for_sample(self.seed, self.epoch, index as u64);
        let augmented = augment_sample(&img, &labels, &self.policy, &mut rng).map_err(|e| match e {
            Error::DimensionMismatch { .. } => Error::Config(format!("{}: {e}", rec.image.display())),
            other => other,
        })?;
        Ok(TrainingSample {
            index,
            record,
            augmented,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<TrainingSample>> + '_ {
        (0..self.len()).map(move |i| self.sample(i))
    }
}

/// Shuffled record order of `epoch`.
pub fn epoch_order(len: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    SampleRng::for_shuffle(seed, epoch).shuffle(&mut order);
    order
}

/// Convenience wrapper over [`TrainingStream`].
pub fn stream_training_samples<'a>(
    manifest: &'a DatasetManifest,
    policy: &AugPolicy,
    seed: u64,
    epoch: u64,
) -> Result<TrainingStream<'a>> {
    TrainingStream::new(manifest, policy, seed, epoch)
}
