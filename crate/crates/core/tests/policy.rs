use std::collections::BTreeSet;

use fisheye_synth::policy::{augment_sample, preset, sample_params, AugPolicy, Preset, Range};
use fisheye_synth::raster::IGNORE_LABEL;
use fisheye_synth::{ColorImage, LabelImage, SampleRng};

const DRAWS: usize = 10_000;

/// Kolmogorov-Smirnov distance of `samples` to Uniform(range).
fn ks_uniform(mut samples: Vec<f64>, range: Range) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = (x - range.lo) / (range.hi - range.lo);
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn focal_draws_are_uniform() {
    let policy = preset("seven_dof").unwrap();
    let draws: Vec<_> = (0..DRAWS as u64)
        .map(|i| sample_params(&policy, 2048, 1024, &mut SampleRng::for_sample(42, 0, i)).unwrap())
        .collect();
    let fs: Vec<f64> = draws.iter().map(|d| d.warp.fisheye.f_fish).collect();
    let mean = fs.iter().sum::<f64>() / DRAWS as f64;
    assert!((295.0..=305.0).contains(&mean), "mean {mean}");
    assert!(fs.iter().all(|&f| (200.0..=400.0).contains(&f)));

    // 1% critical value of the one-sample KS statistic
    let critical = 1.628 / (DRAWS as f64).sqrt();
    let columns: [(&str, Vec<f64>, Range); 7] = [
        ("f", fs.clone(), policy.f_range),
        ("rot_x", draws.iter().map(|d| d.warp.pose.rot_x).collect(), policy.rot_x_range),
        ("rot_y", draws.iter().map(|d| d.warp.pose.rot_y).collect(), policy.rot_y_range),
        ("rot_z", draws.iter().map(|d| d.warp.pose.rot_z).collect(), policy.rot_z_range),
        ("t_x", draws.iter().map(|d| d.warp.pose.t_x).collect(), policy.t_x_range),
        ("t_y", draws.iter().map(|d| d.warp.pose.t_y).collect(), policy.t_y_range),
        ("t_z", draws.iter().map(|d| d.warp.pose.t_z).collect(), policy.t_z_range),
    ];
    for (name, samples, range) in columns {
        let d = ks_uniform(samples, range);
        assert!(d < critical, "{name}: D={d} >= {critical}");
    }
    let flips = draws.iter().filter(|d| d.do_flip).count() as f64 / DRAWS as f64;
    assert!((flips - 0.5).abs() < 0.03, "{flips}");
}

#[test]
fn fresh_runs_repeat_decisions() {
    let policy = preset("seven_dof").unwrap();
    let run = || -> Vec<_> {
        (0..20)
            .map(|i| sample_params(&policy, 2048, 1024, &mut SampleRng::for_sample(42, 0, i)).unwrap())
            .collect()
    };
    assert_eq!(run(), run());
}

fn scene(w: usize, h: usize) -> (ColorImage, LabelImage) {
    let class = |x: usize, y: usize| ((x / 24 + 5 * (y / 24)) % 19) as u8;
    let img = ColorImage::from_fn(w, h, |x, y| {
        let c = class(x, y);
        [c * 13, c.wrapping_mul(97), c.wrapping_mul(53).wrapping_add(7)]
    });
    (img, LabelImage::from_fn(w, h, class))
}

#[test]
fn augmented_pairs_are_reproducible_and_closed() {
    let (img, lbl) = scene(512, 256);
    let mut policy = preset("seven_dof").unwrap();
    policy.out_size = 160;
    let input: BTreeSet<u8> = lbl.as_bytes().iter().copied().collect();
    for i in 0..6 {
        let a = augment_sample(&img, &lbl, &policy, &mut SampleRng::for_sample(7, 0, i)).unwrap();
        let b = augment_sample(&img, &lbl, &policy, &mut SampleRng::for_sample(7, 0, i)).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.label, b.label);
        assert_eq!(a.image.dims(), (160, 160));
        assert_eq!(a.label.dims(), (160, 160));
        assert!(a.label.as_bytes().iter().all(|v| *v == IGNORE_LABEL || input.contains(v)));
    }
}

#[test]
fn cityscapes_scale_output_is_square() {
    let (img, lbl) = scene(2048, 1024);
    let policy = preset("base").unwrap().without_base_augs();
    let out = augment_sample(&img, &lbl, &policy, &mut SampleRng::for_sample(0, 0, 0)).unwrap();
    assert_eq!(out.image.dims(), (640, 640));
    assert_eq!(out.decisions.warp.fisheye.f_fish, 300.0);
}

/// The image encodes its class in its color; after crop, flip and warp
/// the image-derived class must match the label away from class boundaries.
#[test]
fn image_and_label_stay_aligned() {
    let (img, lbl) = scene(512, 256);
    let mut policy = preset("seven_dof").unwrap();
    policy.out_size = 200;
    policy.brightness = 0.0;
    policy.contrast = 0.0;
    policy.saturation = 0.0;
    policy.flip_prob = 1.0;
    let decode = |px: [u8; 3]| -> Option<u8> {
        let c = (px[0] as f64 / 13.0).round() as u8;
        (c < 19 && px == [c * 13, c.wrapping_mul(97), c.wrapping_mul(53).wrapping_add(7)]).then_some(c)
    };
    for i in 0..5 {
        let out = augment_sample(&img, &lbl, &policy, &mut SampleRng::for_sample(11, 0, i)).unwrap();
        let (mut checked, mut agree) = (0, 0);
        for y in 0..200 {
            for x in 0..200 {
                let Some(c) = decode(out.image.pixel(x, y)) else { continue };
                checked += 1;
                agree += (out.label.get(x, y) == c) as usize;
            }
        }
        assert!(checked > 1000, "sample {i}: {checked}");
        assert!(agree as f64 / checked as f64 > 0.99, "sample {i}: {agree}/{checked}");
    }
}

/// Every bound listed for the presets.
#[test]
fn preset_config_dump() {
    for p in Preset::ALL {
        let policy = p.policy();
        let text = policy.to_toml_string();
        let back = AugPolicy::from_toml_str(&text).unwrap();
        assert_eq!(back, policy);
        assert_eq!(policy.z1, 500.0);
        assert_eq!(policy.out_size, 640);
    }
    let seven = preset("seven_dof").unwrap();
    assert_eq!(seven.f_range, Range::new(200.0, 400.0).unwrap());
    assert_eq!(seven.t_x_range, Range::new(-0.5, 0.5).unwrap());
    assert_eq!(seven.t_y_range, Range::new(-0.1, 0.1).unwrap());
    assert_eq!(seven.t_z_range, Range::new(-0.4, 0.4).unwrap());
    for r in [seven.rot_x_range, seven.rot_y_range, seven.rot_z_range] {
        assert_eq!(r, Range::new(-25.0, 25.0).unwrap());
    }
    let six = preset("six_dof").unwrap();
    assert_eq!(six.f_range, Range::fixed(300.0));
    assert_eq!(six.rot_y_range, seven.rot_y_range);
    assert_eq!(six.t_z_range, seven.t_z_range);
}
