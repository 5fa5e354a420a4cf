use std::path::{Path, PathBuf};

use anyhow::Context;
use fisheye_synth::dataset::{
    focal_dir_name, generate_testset, scan_dataset, LabelEncoding, TestsetOptions, TrainingStream,
};
use fisheye_synth::geometry::{FisheyeIntrinsics, PinholeIntrinsics};
use fisheye_synth::metrics::{evaluate_testsets, TestsetDirs};
use fisheye_synth::policy::{augment_with, preset, sample_params, SampleDecisions};
use fisheye_synth::preview::{compose_grid, dof_tiles, render_tile, TileKind, GRID_COLUMNS};
use fisheye_synth::raster::write_atomic;
use fisheye_synth::remap::RemapCache;
use fisheye_synth::{
    AugPolicy, ColorImage, DatasetManifest, LabelImage, RemapTable, RigPose, SampleRng, Split,
    WarpParams,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::{
    usage, AugmentArgs, CliError, CliResult, DatasetArgs, EvalArgs, GenTestsetArgs, GridKind,
    InspectArgs, PolicyArgs, PreviewArgs,
};

const DEFAULT_PRESET: &str = "seven_dof";

fn load_dataset(args: &DatasetArgs) -> CliResult<(DatasetManifest, LabelEncoding)> {
    if !args.root.is_dir() {
        return Err(usage(format!("dataset root {} is not a directory", args.root.display())));
    }
    let split: Split = args.split.parse()?;
    let encoding = match &args.label_map {
        Some(path) => LabelEncoding::from_file(path)?,
        None => LabelEncoding::cityscapes(),
    };
    let manifest = scan_dataset(&args.root, split).map_err(|e| match e {
        fisheye_synth::Error::EmptySplit { .. } => CliError::Usage(e.into()),
        other => other.into(),
    })?;
    Ok((manifest, encoding))
}

/// Resolves `--preset`/`--policy` and the seed override. Returns the policy
/// and a name for provenance records.
fn load_policy(args: &PolicyArgs) -> CliResult<(AugPolicy, String)> {
    let (mut policy, name) = match (&args.preset, &args.policy) {
        (_, Some(path)) => (AugPolicy::from_file(path)?, path.display().to_string()),
        (Some(name), None) => (preset(name)?, name.clone()),
        (None, None) => (preset(DEFAULT_PRESET)?, DEFAULT_PRESET.to_owned()),
    };
    if let Some(seed) = args.seed {
        policy.seed = seed;
    }
    Ok((policy, name))
}

fn check_focals(fs: &[f64]) -> CliResult {
    if fs.is_empty() {
        return Err(usage("at least one focal length is required"));
    }
    if let Some(f) = fs.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
        return Err(usage(format!("focal length must be positive, got {f}")));
    }
    Ok(())
}

fn create_dir(path: &Path) -> CliResult {
    std::fs::create_dir_all(path)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(CliError::Failure)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    Ok(write_atomic(path, bytes)?)
}

fn slash_path(path: &Path) -> String {
    path.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn failed(count: usize, what: &str) -> CliError {
    CliError::Failure(anyhow::anyhow!("{count} {what} failed"))
}

pub fn gen_testset(args: GenTestsetArgs, quiet: bool) -> CliResult {
    check_focals(&args.f)?;
    WarpParams::zoom(args.f[0], args.out_size, args.z1, 1, 1)?;
    let (manifest, encoding) = load_dataset(&args.dataset)?;

    let cache = RemapCache::new();
    let mut failures = 0;
    for &f in &args.f {
        let out = args.out.join(focal_dir_name(f));
        let opts = TestsetOptions {
            f,
            z1: args.z1,
            out_size: args.out_size,
        };
        let report = generate_testset(&manifest, &opts, &out, &encoding, &cache)?;
        for fail in &report.failures {
            eprintln!("{}: {}", fail.path.display(), fail.message);
        }
        failures += report.failures.len();
        if !quiet {
            let coverage = report
                .coverage
                .map_or_else(|| "-".to_owned(), |c| format!("{c:.4}"));
            println!(
                "f={f}: {} written, {} failed, coverage {coverage}, {} table(s) built -> {}",
                report.written,
                report.failures.len(),
                report.tables_built,
                out.display()
            );
        }
    }
    if failures > 0 {
        return Err(failed(failures, "pair(s)"));
    }
    Ok(())
}

/// Provenance written next to every augmented sample.
#[derive(Serialize)]
struct Sidecar<'a> {
    index: usize,
    epoch: u64,
    position: usize,
    seed: u64,
    policy: &'a str,
    source_image: String,
    source_label: String,
    decisions: SampleDecisions,
}

pub fn augment(args: AugmentArgs, quiet: bool) -> CliResult {
    let (policy, policy_name) = load_policy(&args.policy)?;
    let (manifest, encoding) = load_dataset(&args.dataset)?;
    let count = args.count.unwrap_or(manifest.len());
    create_dir(&args.out)?;
    write_file(&args.out.join("policy.toml"), policy.to_toml_string().as_bytes())?;

    // sample i is position i % n of epoch i / n
    let n = manifest.len();
    let epochs = count.div_ceil(n) as u64;
    let streams = (0..epochs)
        .map(|e| {
            TrainingStream::new(&manifest, &policy, policy.seed, e)
                .map(|s| s.with_encoding(encoding.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let failures: Vec<String> = (0..count)
        .into_par_iter()
        .filter_map(|i| {
            let (epoch, position) = ((i / n) as u64, i % n);
            let write = || -> CliResult {
                let sample = streams[epoch as usize].sample(position)?;
                let rec = &manifest.records[sample.record];
                let sidecar = Sidecar {
                    index: i,
                    epoch,
                    position,
                    seed: policy.seed,
                    policy: &policy_name,
                    source_image: slash_path(&rec.image_rel()),
                    source_label: slash_path(rec.label.strip_prefix(&manifest.root).unwrap_or(&rec.label)),
                    decisions: sample.augmented.decisions,
                };
                let toml = toml::to_string(&sidecar).context("serializing sidecar")?;
                write_file(&args.out.join(format!("{i:06}.png")), &sample.augmented.image.encode_png())?;
                write_file(&args.out.join(format!("{i:06}_label.png")), &sample.augmented.label.encode_png())?;
                write_file(&args.out.join(format!("{i:06}.toml")), toml.as_bytes())?;
                Ok(())
            };
            write().err().map(|e| match e {
                CliError::Usage(e) | CliError::Failure(e) => format!("sample {i}: {e:#}"),
            })
        })
        .collect();
    for f in &failures {
        eprintln!("{f}");
    }
    if !quiet {
        println!(
            "{} of {count} samples written to {} ({policy_name}, seed {})",
            count - failures.len(),
            args.out.display(),
            policy.seed
        );
    }
    if !failures.is_empty() {
        return Err(failed(failures.len(), "sample(s)"));
    }
    Ok(())
}

#[derive(Serialize)]
struct TileRecord {
    index: usize,
    caption: String,
    kind: TileKind,
    f_fish: f64,
    pose: RigPose,
}

#[derive(Serialize)]
struct PreviewManifest<'a> {
    image: String,
    policy: &'a str,
    seed: u64,
    columns: usize,
    tile: Vec<TileRecord>,
}

pub fn preview(args: PreviewArgs, quiet: bool) -> CliResult {
    let (policy, policy_name) = load_policy(&args.policy)?;
    let img = ColorImage::read_png(&args.image)?;
    let lbl = args.label.as_deref().map(LabelImage::read_png).transpose()?;
    if let Some(l) = &lbl {
        if l.dims() != img.dims() {
            return Err(usage(format!(
                "label is {}x{} but image is {}x{}",
                l.width(),
                l.height(),
                img.width(),
                img.height()
            )));
        }
    }
    let (w, h) = img.dims();

    let rendered: Vec<(TileRecord, ColorImage, Option<LabelImage>)> = match args.grid {
        GridKind::Dof => dof_tiles(&policy)
            .into_par_iter()
            .enumerate()
            .map(|(index, tile)| {
                let (color, label) = render_tile(&tile, &policy, &img, lbl.as_ref())?;
                let record = TileRecord {
                    index,
                    caption: tile.caption,
                    kind: tile.kind,
                    f_fish: tile.f_fish,
                    pose: tile.pose,
                };
                Ok((record, color, label))
            })
            .collect::<fisheye_synth::Result<_>>()?,
        GridKind::Samples => {
            if args.tiles == 0 {
                return Err(usage("--tiles must be at least 1"));
            }
            let blank = LabelImage::filled(w, h, 0);
            (0..args.tiles)
                .into_par_iter()
                .map(|index| {
                    let mut rng = SampleRng::for_sample(policy.seed, 0, index as u64);
                    let d = sample_params(&policy, w, h, &mut rng)?;
                    let out = augment_with(&img, lbl.as_ref().unwrap_or(&blank), &d)?;
                    let record = TileRecord {
                        index,
                        caption: format!("sample {index}, f={:.1}", d.warp.fisheye.f_fish),
                        kind: TileKind::Pose,
                        f_fish: d.warp.fisheye.f_fish,
                        pose: d.warp.pose,
                    };
                    Ok((record, out.image, lbl.is_some().then_some(out.label)))
                })
                .collect::<fisheye_synth::Result<_>>()?
        }
    };

    create_dir(&args.out)?;
    let colors: Vec<ColorImage> = rendered.iter().map(|(_, c, _)| c.clone()).collect();
    write_file(&args.out.join("grid.png"), &compose_grid(&colors, GRID_COLUMNS).encode_png())?;
    if lbl.is_some() {
        let labels: Vec<ColorImage> = rendered
            .iter()
            .filter_map(|(_, _, l)| l.as_ref().map(LabelImage::colorize))
            .collect();
        write_file(&args.out.join("label_grid.png"), &compose_grid(&labels, GRID_COLUMNS).encode_png())?;
    }
    let manifest = PreviewManifest {
        image: args.image.display().to_string(),
        policy: &policy_name,
        seed: policy.seed,
        columns: GRID_COLUMNS,
        tile: rendered.into_iter().map(|(r, _, _)| r).collect(),
    };
    let text = toml::to_string(&manifest).context("serializing tile captions")?;
    write_file(&args.out.join("tiles.toml"), text.as_bytes())?;
    if !quiet {
        println!("{} tiles written to {}", manifest.tile.len(), args.out.display());
    }
    Ok(())
}

pub fn eval(args: EvalArgs, quiet: bool) -> CliResult {
    check_focals(&args.f)?;
    let sets: Vec<TestsetDirs> = args
        .f
        .iter()
        .map(|&f| TestsetDirs {
            f,
            pred: args.pred.join(focal_dir_name(f)),
            gt: args.gt.join(focal_dir_name(f)),
        })
        .collect();
    let report = evaluate_testsets(&args.method, &sets)?;
    let path: PathBuf = args.report.unwrap_or_else(|| args.pred.join("eval.json"));
    write_file(&path, report.to_json().as_bytes())?;
    if !quiet {
        print!("{}", report.to_table());
        println!("report written to {}", path.display());
    }
    for f in &report.failures {
        eprintln!("{}: {}", f.path.display(), f.message);
    }
    if !report.failures.is_empty() {
        return Err(failed(report.failures.len(), "file(s)"));
    }
    Ok(())
}

fn parse_size(s: &str) -> CliResult<(u32, u32)> {
    let bad = || usage(format!("expected COLSxROWS, got `{s}`"));
    let (c, r) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((c.trim().parse().map_err(|_| bad())?, r.trim().parse().map_err(|_| bad())?))
}

pub fn inspect(args: InspectArgs) -> CliResult {
    let (cols, rows) = parse_size(&args.src)?;
    let params = match &args.policy {
        Some(path) => AugPolicy::from_file(path)?.central_warp(cols, rows)?,
        None => WarpParams::new(
            FisheyeIntrinsics::new(args.f, args.out_size, args.out_size)?,
            PinholeIntrinsics::new(args.z1, cols, rows)?,
            RigPose {
                rot_x: args.rot_x,
                rot_y: args.rot_y,
                rot_z: args.rot_z,
                t_x: args.t_x,
                t_y: args.t_y,
                t_z: args.t_z,
            },
        )?,
    };
    let table = RemapTable::build(&params, cols as usize, rows as usize)?;
    let stats = table.stats();
    let theta = params.fisheye.max_incidence();
    let p = params.pose;

    println!("f_fish      {}", params.fisheye.f_fish);
    println!("output      {}x{}", params.fisheye.out_width, params.fisheye.out_height);
    println!("source      {cols}x{rows} (focal {})", params.pinhole.focal);
    println!(
        "pose        rot ({}, {}, {}) deg, t ({}, {}, {})",
        p.rot_x, p.rot_y, p.rot_z, p.t_x, p.t_y, p.t_z
    );
    println!("theta_max   {theta:.4} rad ({:.2} deg)", theta.to_degrees());
    println!("coverage    {:.4} ({} of {} pixels)", table.coverage_ratio(), stats.valid, stats.total);
    if stats.valid > 0 {
        println!("source x    [{:.3}, {:.3}]", stats.min_x, stats.max_x);
        println!("source y    [{:.3}, {:.3}]", stats.min_y, stats.max_y);
    }
    if let Some(path) = &args.dump {
        write_file(path, &table.to_bytes())?;
        println!("table       {}", path.display());
    }
    Ok(())
}
