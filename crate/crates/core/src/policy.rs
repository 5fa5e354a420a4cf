//! Augmentation presets, seeded parameter sampling and the online pipeline.
//!
//! Every augmentation starts from the rectilinear source: random crop (resized
//! back to the source size), horizontal flip and color jitter run first, then
//! the sampled seven-DoF warp produces the fisheye pair. Geometric changes are
//! never applied to the finished fisheye image.
//!
//! Policies are stored as flat TOML files:
//!
//! ```toml
//! generator = "chacha8"
//! seed = 0
//! out_size = 640
//! z1 = 500.0
//! f_range = [200.0, 400.0]
//! rot_x_range = [-25.0, 25.0]   # degrees
//! rot_y_range = [-25.0, 25.0]
//! rot_z_range = [-25.0, 25.0]
//! t_x_range = [-0.5, 0.5]       # fraction of out_size
//! t_y_range = [-0.1, 0.1]
//! t_z_range = [-0.4, 0.4]       # fraction of z1
//! flip_prob = 0.5
//! crop_scale = [0.7, 1.0]
//! brightness = 0.2
//! contrast = 0.2
//! saturation = 0.2
//! sign_flips = []               # e.g. ["t_y"] negates sampled t_y
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FisheyeIntrinsics, PinholeIntrinsics, RigPose, WarpParams};
use crate::raster::{ColorImage, LabelImage};
use crate::remap::{RemapTable, COLOR_FILL, LABEL_FILL};
use crate::rng::{SampleRng, GENERATOR_NAME};

/// Closed interval; `lo == hi` pins the value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::Config(format!("invalid range [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub const fn fixed(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub const fn symmetric(half: f64) -> Self {
        Self { lo: -half, hi: half }
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn sample(&self, rng: &mut SampleRng) -> f64 {
        rng.uniform(self.lo, self.hi)
    }
}

impl TryFrom<[f64; 2]> for Range {
    type Error = String;

    fn try_from([lo, hi]: [f64; 2]) -> Result<Self, String> {
        Range::new(lo, hi).map_err(|e| e.to_string())
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.lo, r.hi]
    }
}

/// The six pose degrees of freedom, used to name sign flips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseDof {
    RotX,
    RotY,
    RotZ,
    TX,
    TY,
    TZ,
}

/// Randomizable parameter groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DofGroup {
    Focal,
    Rotation,
    Translation,
}

/// The eight shipped augmentation methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Base,
    RandF,
    RandR,
    RandT,
    RandFR,
    RandFT,
    SixDof,
    SevenDof,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::Base,
        Preset::RandF,
        Preset::RandR,
        Preset::RandT,
        Preset::RandFR,
        Preset::RandFT,
        Preset::SixDof,
        Preset::SevenDof,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Base => "base",
            Preset::RandF => "rand_f",
            Preset::RandR => "rand_r",
            Preset::RandT => "rand_t",
            Preset::RandFR => "rand_fr",
            Preset::RandFT => "rand_ft",
            Preset::SixDof => "six_dof",
            Preset::SevenDof => "seven_dof",
        }
    }

    /// Which groups this preset randomizes on top of the base augmentations.
    pub fn groups(self) -> &'static [DofGroup] {
        use DofGroup::*;
        match self {
            Preset::Base => &[],
            Preset::RandF => &[Focal],
            Preset::RandR => &[Rotation],
            Preset::RandT => &[Translation],
            Preset::RandFR => &[Focal, Rotation],
            Preset::RandFT => &[Focal, Translation],
            Preset::SixDof => &[Rotation, Translation],
            Preset::SevenDof => &[Focal, Rotation, Translation],
        }
    }

    pub fn policy(self) -> AugPolicy {
        let groups = self.groups();
        let on = |g| groups.contains(&g);
        let mut p = AugPolicy::default();
        if !on(DofGroup::Focal) {
            p.f_range = Range::fixed(FIXED_FOCAL);
        }
        if !on(DofGroup::Rotation) {
            p.rot_x_range = Range::fixed(0.0);
            p.rot_y_range = Range::fixed(0.0);
            p.rot_z_range = Range::fixed(0.0);
        }
        if !on(DofGroup::Translation) {
            p.t_x_range = Range::fixed(0.0);
            p.t_y_range = Range::fixed(0.0);
            p.t_z_range = Range::fixed(0.0);
        }
        p
    }

    /// Bundled TOML text for this preset.
    pub fn bundled_file(self) -> &'static str {
        match self {
            Preset::Base => include_str!("../presets/base.toml"),
            Preset::RandF => include_str!("../presets/rand_f.toml"),
            Preset::RandR => include_str!("../presets/rand_r.toml"),
            Preset::RandT => include_str!("../presets/rand_t.toml"),
            Preset::RandFR => include_str!("../presets/rand_fr.toml"),
            Preset::RandFT => include_str!("../presets/rand_ft.toml"),
            Preset::SixDof => include_str!("../presets/six_dof.toml"),
            Preset::SevenDof => include_str!("../presets/seven_dof.toml"),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_owned()))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Looks up a preset policy by name.
pub fn preset(name: &str) -> Result<AugPolicy> {
    Ok(name.parse::<Preset>()?.policy())
}

/// Fisheye focal length used by presets without random focal length.
pub const FIXED_FOCAL: f64 = 300.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugPolicy {
    pub generator: String,
    pub seed: u64,
    pub out_size: u32,
    pub z1: f64,
    pub f_range: Range,
    pub rot_x_range: Range,
    pub rot_y_range: Range,
    pub rot_z_range: Range,
    pub t_x_range: Range,
    pub t_y_range: Range,
    pub t_z_range: Range,
    pub flip_prob: f64,
    pub crop_scale: Range,
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    #[serde(default)]
    pub sign_flips: Vec<PoseDof>,
}

impl Default for AugPolicy {
    /// Seven-DoF ranges with the default base augmentations.
    fn default() -> Self {
        Self {
            generator: GENERATOR_NAME.to_owned(),
            seed: 0,
            out_size: 640,
            z1: 500.0,
            f_range: Range { lo: 200.0, hi: 400.0 },
            rot_x_range: Range::symmetric(25.0),
            rot_y_range: Range::symmetric(25.0),
            rot_z_range: Range::symmetric(25.0),
            t_x_range: Range::symmetric(0.5),
            t_y_range: Range::symmetric(0.1),
            t_z_range: Range::symmetric(0.4),
            flip_prob: 0.5,
            crop_scale: Range { lo: 0.7, hi: 1.0 },
            brightness: 0.2,
            contrast: 0.2,
            saturation: 0.2,
            sign_flips: Vec::new(),
        }
    }
}

impl AugPolicy {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.generator != GENERATOR_NAME {
            return bad(format!(
                "unsupported generator `{}` (only `{GENERATOR_NAME}`)",
                self.generator
            ));
        }
        if self.out_size == 0 {
            return bad("out_size must be positive".into());
        }
        if !(self.z1.is_finite() && self.z1 > 0.0) {
            return bad(format!("z1 must be positive, got {}", self.z1));
        }
        if self.f_range.lo <= 0.0 {
            return bad(format!("f_range must be positive, got {:?}", self.f_range));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return bad(format!("flip_prob must lie in [0, 1], got {}", self.flip_prob));
        }
        if self.crop_scale.lo <= 0.0 || self.crop_scale.hi > 1.0 {
            return bad(format!("crop_scale must lie in (0, 1], got {:?}", self.crop_scale));
        }
        for (name, v) in [
            ("brightness", self.brightness),
            ("contrast", self.contrast),
            ("saturation", self.saturation),
        ] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} half-width must lie in [0, 1), got {v}"));
            }
        }
        Ok(())
    }

    /// Parses and validates a policy. Syntax errors carry line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let policy: Self = toml::from_str(text).map_err(|e| Error::PolicyParse(e.to_string()))?;
        policy.validate()?;
        Ok(policy)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::PolicyParse(msg) => Error::PolicyParse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("policy is always serializable")
    }

    /// Groups whose ranges are non-degenerate.
    pub fn randomized_groups(&self) -> Vec<DofGroup> {
        let mut groups = Vec::new();
        if !self.f_range.is_degenerate() {
            groups.push(DofGroup::Focal);
        }
        if [self.rot_x_range, self.rot_y_range, self.rot_z_range]
            .iter()
            .any(|r| !r.is_degenerate())
        {
            groups.push(DofGroup::Rotation);
        }
        if [self.t_x_range, self.t_y_range, self.t_z_range]
            .iter()
            .any(|r| !r.is_degenerate())
        {
            groups.push(DofGroup::Translation);
        }
        groups
    }

    /// Disables crop, flip and jitter, leaving only the warp.
    pub fn without_base_augs(mut self) -> Self {
        self.flip_prob = 0.0;
        self.crop_scale = Range::fixed(1.0);
        self.brightness = 0.0;
        self.contrast = 0.0;
        self.saturation = 0.0;
        self
    }

    /// Applies the configured sign flips to a pose.
    pub fn orient(&self, mut pose: RigPose) -> RigPose {
        for dof in &self.sign_flips {
            let v = match dof {
                PoseDof::RotX => &mut pose.rot_x,
                PoseDof::RotY => &mut pose.rot_y,
                PoseDof::RotZ => &mut pose.rot_z,
                PoseDof::TX => &mut pose.t_x,
                PoseDof::TY => &mut pose.t_y,
                PoseDof::TZ => &mut pose.t_z,
            };
            *v = -*v;
        }
        pose
    }

    /// Warp with every range at its midpoint (identity pose for symmetric ranges).
    pub fn central_warp(&self, src_cols: u32, src_rows: u32) -> Result<WarpParams> {
        let pose = RigPose {
            rot_x: self.rot_x_range.midpoint(),
            rot_y: self.rot_y_range.midpoint(),
            rot_z: self.rot_z_range.midpoint(),
            t_x: self.t_x_range.midpoint(),
            t_y: self.t_y_range.midpoint(),
            t_z: self.t_z_range.midpoint(),
        };
        self.warp(self.f_range.midpoint(), self.orient(pose), src_cols, src_rows)
    }

    pub fn warp(&self, f_fish: f64, pose: RigPose, src_cols: u32, src_rows: u32) -> Result<WarpParams> {
        WarpParams::new(
            FisheyeIntrinsics::new(f_fish, self.out_size, self.out_size)?,
            PinholeIntrinsics::new(self.z1, src_cols, src_rows)?,
            pose,
        )
    }
}

/// Source-space crop rectangle in whole pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl CropRect {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            x: 0,
            y: 0,
            width,
            height,
        }
    }
}

/// Multiplicative color factors; all 1.0 means no change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterFactors {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
}

impl JitterFactors {
    pub const UNIT: Self = Self {
        brightness: 1.0,
        contrast: 1.0,
        saturation: 1.0,
    };

    pub fn is_unit(&self) -> bool {
        *self == Self::UNIT
    }
}

/// Everything drawn at random for one training sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleDecisions {
    pub warp: WarpParams,
    pub do_flip: bool,
    pub crop_rect: CropRect,
    pub jitter: JitterFactors,
}

/// Draws one sample's decisions for a `src_cols x src_rows` source.
///
/// The draw order is fixed and every draw happens even for degenerate ranges,
/// so the stream position never depends on the policy.
pub fn sample_params(
    policy: &AugPolicy,
    src_cols: usize,
    src_rows: usize,
    rng: &mut SampleRng,
) -> Result<SampleDecisions> {
    policy.validate()?;
    let f_fish = policy.f_range.sample(rng);
    let pose = RigPose {
        rot_x: policy.rot_x_range.sample(rng),
        rot_y: policy.rot_y_range.sample(rng),
        rot_z: policy.rot_z_range.sample(rng),
        t_x: policy.t_x_range.sample(rng),
        t_y: policy.t_y_range.sample(rng),
        t_z: policy.t_z_range.sample(rng),
    };
    let do_flip = rng.bernoulli(policy.flip_prob);

    let scale = policy.crop_scale.sample(rng);
    let width = ((src_cols as f64 * scale).round() as usize).clamp(1, src_cols);
    let height = ((src_rows as f64 * scale).round() as usize).clamp(1, src_rows);
    let x = rng.below((src_cols - width + 1) as u64) as usize;
    let y = rng.below((src_rows - height + 1) as u64) as usize;

    let jitter = JitterFactors {
        brightness: 1.0 + rng.uniform(-policy.brightness, policy.brightness),
        contrast: 1.0 + rng.uniform(-policy.contrast, policy.contrast),
        saturation: 1.0 + rng.uniform(-policy.saturation, policy.saturation),
    };

    Ok(SampleDecisions {
        warp: policy.warp(f_fish, policy.orient(pose), src_cols as u32, src_rows as u32)?,
        do_flip,
        crop_rect: CropRect {
            x,
            y,
            width,
            height,
        },
        jitter,
    })
}

/// Crop (resized back to the source size), flip and color jitter.
pub fn apply_base_augs(
    img: &ColorImage,
    lbl: &LabelImage,
    d: &SampleDecisions,
) -> Result<(ColorImage, LabelImage)> {
    if img.dims() != lbl.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            actual: lbl.dims(),
        });
    }
    let (w, h) = img.dims();
    let rect = d.crop_rect;
    if rect.width == 0 || rect.height == 0 || rect.x + rect.width > w || rect.y + rect.height > h {
        return Err(Error::Config(format!(
            "crop {rect:?} does not fit a {w}x{h} source"
        )));
    }
    let (mut img, mut lbl) = if rect == CropRect::full(w, h) {
        (img.clone(), lbl.clone())
    } else {
        (crop_resize_color(img, rect), crop_resize_label(lbl, rect))
    };
    if d.do_flip {
        flip_color(&mut img);
        flip_label(&mut lbl);
    }
    if !d.jitter.is_unit() {
        color_jitter(&mut img, &d.jitter);
    }
    Ok((img, lbl))
}

/// Result of [`augment_sample`], with the decisions that produced it.
#[derive(Debug, Clone)]
pub struct Augmented {
    pub image: ColorImage,
    pub label: LabelImage,
    pub decisions: SampleDecisions,
}

/// Full online augmentation of one image/label pair.
pub fn augment_sample(
    img: &ColorImage,
    lbl: &LabelImage,
    policy: &AugPolicy,
    rng: &mut SampleRng,
) -> Result<Augmented> {
    let (w, h) = img.dims();
    let decisions = sample_params(policy, w, h, rng)?;
    augment_with(img, lbl, &decisions)
}

/// Replays a recorded set of decisions.
pub fn augment_with(img: &ColorImage, lbl: &LabelImage, decisions: &SampleDecisions) -> Result<Augmented> {
    let (img, lbl) = apply_base_augs(img, lbl, decisions)?;
    let (w, h) = img.dims();
    let table = RemapTable::build(&decisions.warp, w, h)?;
    Ok(Augmented {
        image: table.apply_bilinear(&img, COLOR_FILL)?,
        label: table.apply_nearest(&lbl, LABEL_FILL)?,
        decisions: *decisions,
    })
}

/// Pixel-center aligned source coordinate of output index `i` when stretching
/// `len` crop pixels over `out` output pixels.
fn stretch(i: usize, len: usize, out: usize) -> f64 {
    ((i as f64 + 0.5) * len as f64 / out as f64 - 0.5).clamp(0.0, (len - 1) as f64)
}

fn crop_resize_color(img: &ColorImage, rect: CropRect) -> ColorImage {
    let (w, h) = img.dims();
    let src = img.as_bytes();
    let xs: Vec<(usize, usize, f32)> = (0..w)
        .map(|i| {
            let x = stretch(i, rect.width, w);
            let x0 = x.floor() as usize;
            (rect.x + x0, rect.x + (x0 + 1).min(rect.width - 1), (x - x0 as f64) as f32)
        })
        .collect();
    let mut out = vec![0u8; w * h * 3];
    use rayon::prelude::*;
    out.par_chunks_mut(w * 3).enumerate().for_each(|(row, line)| {
        let y = stretch(row, rect.height, h);
        let y0 = y.floor() as usize;
        let wy = (y - y0 as f64) as f32;
        let r0 = (rect.y + y0) * w;
        let r1 = (rect.y + (y0 + 1).min(rect.height - 1)) * w;
        for (col, &(x0, x1, wx)) in xs.iter().enumerate() {
            for ch in 0..3 {
                let a = src[(r0 + x0) * 3 + ch] as f32;
                let b = src[(r0 + x1) * 3 + ch] as f32;
                let c = src[(r1 + x0) * 3 + ch] as f32;
                let d = src[(r1 + x1) * 3 + ch] as f32;
                let top = a * (1.0 - wx) + b * wx;
                let bottom = c * (1.0 - wx) + d * wx;
                line[col * 3 + ch] = (top * (1.0 - wy) + bottom * wy + 0.5).floor().clamp(0.0, 255.0) as u8;
            }
        }
    });
    ColorImage::new(w, h, out).expect("dimensions preserved")
}

fn crop_resize_label(lbl: &LabelImage, rect: CropRect) -> LabelImage {
    let (w, h) = lbl.dims();
    let src = lbl.as_bytes();
    let nearest = |i: usize, len: usize, out: usize| ((i * len + len / 2) / out).min(len - 1);
    let xs: Vec<usize> = (0..w).map(|i| rect.x + nearest(i, rect.width, w)).collect();
    let mut out = Vec::with_capacity(w * h);
    for row in 0..h {
        let r = (rect.y + nearest(row, rect.height, h)) * w;
        out.extend(xs.iter().map(|&x| src[r + x]));
    }
    LabelImage::new(w, h, out).expect("dimensions preserved")
}

fn flip_color(img: &mut ColorImage) {
    let w = img.width();
    for line in img.as_bytes_mut().chunks_exact_mut(w * 3) {
        for i in 0..w / 2 {
            let j = w - 1 - i;
            for ch in 0..3 {
                line.swap(i * 3 + ch, j * 3 + ch);
            }
        }
    }
}

fn flip_label(lbl: &mut LabelImage) {
    let w = lbl.width();
    for line in lbl.as_bytes_mut().chunks_exact_mut(w) {
        line.reverse();
    }
}

fn luma(r: f32, g: f32, b: f32) -> f32 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Brightness, then contrast about the mean luma, then saturation about the
/// per-pixel luma; rounded once at the end.
fn color_jitter(img: &mut ColorImage, j: &JitterFactors) {
    let b = j.brightness as f32;
    let c = j.contrast as f32;
    let s = j.saturation as f32;
    let data = img.as_bytes_mut();
    let count = (data.len() / 3).max(1);
    let mut sum = 0f64;
    for px in data.chunks_exact(3) {
        let (r, g, bl) = (px[0] as f32 * b, px[1] as f32 * b, px[2] as f32 * b);
        sum += luma(r.min(255.0), g.min(255.0), bl.min(255.0)) as f64;
    }
    let mean = (sum / count as f64) as f32;
    for px in data.chunks_exact_mut(3) {
        let mut v = [0f32; 3];
        for ch in 0..3 {
            let bright = (px[ch] as f32 * b).min(255.0);
            v[ch] = ((bright - mean) * c + mean).clamp(0.0, 255.0);
        }
        let gray = luma(v[0], v[1], v[2]);
        for ch in 0..3 {
            let out = (v[ch] - gray) * s + gray;
            px[ch] = (out + 0.5).floor().clamp(0.0, 255.0) as u8;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: usize, h: usize) -> (ColorImage, LabelImage) {
        let img = ColorImage::from_fn(w, h, |x, y| [(x * 7 % 256) as u8, (y * 5 % 256) as u8, ((x + y) % 256) as u8]);
        let lbl = LabelImage::from_fn(w, h, |x, y| ((x / 8 + y / 8) % 19) as u8);
        (img, lbl)
    }

    fn decisions(policy: &AugPolicy, w: usize, h: usize) -> SampleDecisions {
        SampleDecisions {
            warp: policy.central_warp(w as u32, h as u32).unwrap(),
            do_flip: false,
            crop_rect: CropRect::full(w, h),
            jitter: JitterFactors::UNIT,
        }
    }

    #[test]
    fn preset_groups_match_inventory() {
        use DofGroup::*;
        let expected: [(&str, Vec<DofGroup>); 8] = [
            ("base", vec![]),
            ("rand_f", vec![Focal]),
            ("rand_r", vec![Rotation]),
            ("rand_t", vec![Translation]),
            ("rand_fr", vec![Focal, Rotation]),
            ("rand_ft", vec![Focal, Translation]),
            ("six_dof", vec![Rotation, Translation]),
            ("seven_dof", vec![Focal, Rotation, Translation]),
        ];
        for (name, groups) in expected {
            assert_eq!(preset(name).unwrap().randomized_groups(), groups, "{name}");
        }
    }

    #[test]
    fn base_preset_values() {
        let p = preset("base").unwrap();
        assert_eq!(p.f_range, Range::fixed(300.0));
        for r in [p.rot_x_range, p.rot_y_range, p.rot_z_range, p.t_x_range, p.t_y_range, p.t_z_range] {
            assert_eq!(r, Range::fixed(0.0));
        }
        assert!(p.flip_prob > 0.0);
        assert!(!p.crop_scale.is_degenerate());
        assert!(p.brightness > 0.0 && p.contrast > 0.0 && p.saturation > 0.0);
    }

    #[test]
    fn unknown_preset_rejected() {
        assert!(matches!(preset("eight_dof"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn bundled_files_match_presets() {
        for p in Preset::ALL {
            let parsed = AugPolicy::from_toml_str(p.bundled_file()).unwrap();
            assert_eq!(parsed, p.policy(), "{p}");
        }
    }

    #[test]
    fn policy_toml_round_trip() {
        let mut p = preset("rand_ft").unwrap();
        p.sign_flips = vec![PoseDof::TY];
        p.seed = 99;
        assert_eq!(AugPolicy::from_toml_str(&p.to_toml_string()).unwrap(), p);
    }

    #[test]
    fn malformed_policy_reports_line() {
        let text = preset("base").unwrap().to_toml_string();
        let broken = text.replacen("flip_prob = ", "flip_prob == ", 1);
        let line = broken.lines().position(|l| l.starts_with("flip_prob")).unwrap() + 1;
        let err = AugPolicy::from_toml_str(&broken).unwrap_err().to_string();
        assert!(err.contains(&format!("line {line}")), "{err}");
    }

    #[test]
    fn invalid_values_rejected() {
        let mut p = AugPolicy::default();
        p.flip_prob = 1.5;
        assert!(p.validate().is_err());
        let mut p = AugPolicy::default();
        p.crop_scale = Range::fixed(0.0);
        assert!(p.validate().is_err());
        let mut p = AugPolicy::default();
        p.f_range = Range { lo: 0.0, hi: 10.0 };
        assert!(p.validate().is_err());
        let text = AugPolicy::default().to_toml_string().replace("f_range = [200.0, 400.0]", "f_range = [400.0, 200.0]");
        assert!(AugPolicy::from_toml_str(&text).is_err());
        let text = format!("{}\nbogus = 1\n", AugPolicy::default().to_toml_string());
        assert!(AugPolicy::from_toml_str(&text).is_err());
    }

    #[test]
    fn degenerate_ranges_give_fixed_values() {
        let p = preset("base").unwrap().without_base_augs();
        for seed in [0, 1, 42, 1 << 40] {
            let d = sample_params(&p, 2048, 1024, &mut SampleRng::for_sample(seed, 0, 0)).unwrap();
            assert_eq!(d.warp.fisheye.f_fish, 300.0);
            assert!(d.warp.pose.is_identity());
            assert!(!d.do_flip);
            assert_eq!(d.crop_rect, CropRect::full(2048, 1024));
            assert!(d.jitter.is_unit());
        }
    }

    #[test]
    fn sampling_is_deterministic_and_in_bounds() {
        let p = preset("seven_dof").unwrap();
        for i in 0..200 {
            let a = sample_params(&p, 2048, 1024, &mut SampleRng::for_sample(42, 0, i)).unwrap();
            let b = sample_params(&p, 2048, 1024, &mut SampleRng::for_sample(42, 0, i)).unwrap();
            assert_eq!(a, b);
            assert!(p.f_range.contains(a.warp.fisheye.f_fish));
            assert!(p.rot_z_range.contains(a.warp.pose.rot_z));
            assert!(p.t_z_range.contains(a.warp.pose.t_z));
            let r = a.crop_rect;
            assert!(r.x + r.width <= 2048 && r.y + r.height <= 1024);
            assert!(r.width as f64 >= 0.7 * 2048.0 - 1.0);
        }
    }

    #[test]
    fn sign_flips_negate_pose() {
        let mut p = preset("rand_t").unwrap();
        let plain = sample_params(&p, 100, 50, &mut SampleRng::for_sample(3, 0, 0)).unwrap();
        p.sign_flips = vec![PoseDof::TY, PoseDof::TZ];
        let flipped = sample_params(&p, 100, 50, &mut SampleRng::for_sample(3, 0, 0)).unwrap();
        assert_eq!(flipped.warp.pose.t_x, plain.warp.pose.t_x);
        assert_eq!(flipped.warp.pose.t_y, -plain.warp.pose.t_y);
        assert_eq!(flipped.warp.pose.t_z, -plain.warp.pose.t_z);
    }

    #[test]
    fn double_flip_is_identity_on_crop() {
        let (img, lbl) = gradient(64, 32);
        let policy = preset("base").unwrap();
        let mut d = decisions(&policy, 64, 32);
        d.crop_rect = CropRect { x: 5, y: 3, width: 40, height: 20 };
        let (ci, cl) = apply_base_augs(&img, &lbl, &d).unwrap();
        d.do_flip = true;
        let (fi, fl) = apply_base_augs(&img, &lbl, &d).unwrap();
        let (mut back_i, mut back_l) = (fi, fl);
        flip_color(&mut back_i);
        flip_label(&mut back_l);
        assert_eq!((back_i, back_l), (ci, cl));
    }

    #[test]
    fn unit_jitter_leaves_image_unchanged() {
        let (img, lbl) = gradient(33, 17);
        let mut copy = img.clone();
        color_jitter(&mut copy, &JitterFactors::UNIT);
        assert_eq!(copy, img);
        let d = decisions(&preset("base").unwrap(), 33, 17);
        assert_eq!(apply_base_augs(&img, &lbl, &d).unwrap(), (img, lbl));
    }

    #[test]
    fn jitter_never_touches_labels() {
        let (img, lbl) = gradient(40, 20);
        let mut d = decisions(&preset("base").unwrap(), 40, 20);
        d.jitter = JitterFactors { brightness: 1.15, contrast: 0.85, saturation: 1.1 };
        let (ji, jl) = apply_base_augs(&img, &lbl, &d).unwrap();
        assert_eq!(jl, lbl);
        assert_ne!(ji, img);
    }

    #[test]
    fn base_augs_reject_mismatched_pair() {
        let (img, _) = gradient(40, 20);
        let lbl = LabelImage::filled(40, 21, 0);
        let d = decisions(&preset("base").unwrap(), 40, 20);
        assert!(matches!(apply_base_augs(&img, &lbl, &d), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn crop_resize_of_full_rect_is_identity() {
        let (img, lbl) = gradient(31, 13);
        let rect = CropRect::full(31, 13);
        assert_eq!(crop_resize_color(&img, rect), img);
        assert_eq!(crop_resize_label(&lbl, rect), lbl);
    }

    #[test]
    fn crop_resize_of_half_doubles_pixels() {
        let lbl = LabelImage::from_fn(8, 4, |x, y| (x + 8 * y) as u8);
        let out = crop_resize_label(&lbl, CropRect { x: 2, y: 1, width: 4, height: 2 });
        assert_eq!(out.get(0, 0), lbl.get(2, 1));
        assert_eq!(out.get(1, 0), lbl.get(2, 1));
        assert_eq!(out.get(7, 3), lbl.get(5, 2));
    }

    #[test]
    fn pure_zoom_when_base_augs_disabled() {
        let (img, lbl) = gradient(256, 128);
        let mut policy = preset("base").unwrap().without_base_augs();
        policy.out_size = 96;
        let out = augment_sample(&img, &lbl, &policy, &mut SampleRng::for_sample(0, 0, 0)).unwrap();
        let table = RemapTable::build(&WarpParams::zoom(300.0, 96, 500.0, 256, 128).unwrap(), 256, 128).unwrap();
        assert_eq!(out.image, table.apply_bilinear(&img, COLOR_FILL).unwrap());
        assert_eq!(out.label, table.apply_nearest(&lbl, LABEL_FILL).unwrap());
    }
}
