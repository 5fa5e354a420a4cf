use fisheye_synth::geometry::{
    fisheye_to_source, rotate_about_center, rotation_from_euler, FisheyeIntrinsics,
    PinholeIntrinsics, RigPose, WarpParams,
};
use nalgebra::{Matrix3, Point2};
use proptest::prelude::*;
use proptest::strategy::ValueTree;

fn warp(f: f64, pose: RigPose) -> WarpParams {
    WarpParams::new(
        FisheyeIntrinsics::new(f, 640, 640).unwrap(),
        PinholeIntrinsics::new(500.0, 2048, 1024).unwrap(),
        pose,
    )
    .unwrap()
}

/// Source -> fisheye for identity pose, written directly from the model:
/// unproject onto z = z1, θ = atan(ρ / z1), r = f·θ.
fn forward_oracle(u: f64, v: f64, f: f64) -> (f64, f64) {
    let (z1, focal, cx, cy, c) = (500.0, 500.0, 1024.0, 512.0, 320.0);
    let (x, y) = ((u - cx) * z1 / focal, (v - cy) * z1 / focal);
    let rho = (x * x + y * y).sqrt();
    if rho == 0.0 {
        return (c, c);
    }
    let r = f * (rho / z1).atan();
    (c + r * x / rho, c + r * y / rho)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rotations_are_orthonormal(a in -180.0..180.0f64, b in -180.0..180.0f64, c in -180.0..180.0f64) {
        let r = rotation_from_euler(a, b, c);
        prop_assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn center_is_fixed_for_every_focal(f in 50.0..1000.0f64) {
        let p = fisheye_to_source(320.0, 320.0, &warp(f, RigPose::identity())).unwrap();
        prop_assert_eq!(p, Point2::new(1024.0, 512.0));
    }
}

#[test]
fn inverse_then_forward_round_trip() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strategy = (0.0..640.0f64, 0.0..640.0f64, 200.0..400.0f64);
    let mut checked = 0;
    let mut worst = 0f64;
    while checked < 1000 {
        let (col, row, f) = strategy.new_tree(&mut runner).unwrap().current();
        let Some(src) = fisheye_to_source(col, row, &warp(f, RigPose::identity())) else {
            continue;
        };
        let (c, r) = forward_oracle(src.x, src.y, f);
        worst = worst.max((c - col).abs()).max((r - row).abs());
        checked += 1;
    }
    assert!(worst < 1e-9, "worst round-trip error {worst}");
}

#[test]
fn radius_scales_linearly_with_focal() {
    // a fixed source point is a fixed world ray
    for (u, v) in [(1500.0, 700.0), (100.0, 20.0), (1024.0, 1000.0)] {
        let radius = |f: f64| {
            let (c, r) = forward_oracle(u, v, f);
            ((c - 320.0).powi(2) + (r - 320.0).powi(2)).sqrt()
        };
        let ratio = radius(440.0) / radius(220.0);
        assert!((ratio - 2.0).abs() < 1e-12, "{ratio}");
        let w = warp(220.0, RigPose::identity()).compile();
        let p = w.unproject(u, v).unwrap();
        let p2 = warp(440.0, RigPose::identity()).compile().unproject(u, v).unwrap();
        let r1 = (p - Point2::new(320.0, 320.0)).norm();
        let r2 = (p2 - Point2::new(320.0, 320.0)).norm();
        assert!((r2 / r1 - 2.0).abs() < 1e-12);
    }
}

#[test]
fn roll_equals_rotated_lookup() {
    let center = Point2::new(320.0, 320.0);
    for phi in [-25.0, -15.0, -5.0, 5.0, 15.0, 25.0] {
        let rolled = warp(300.0, RigPose { rot_z: phi, ..Default::default() });
        let plain = warp(300.0, RigPose::identity());
        let mut co_valid = 0;
        for row in (0..640).step_by(7) {
            for col in (0..640).step_by(7) {
                let p = Point2::new(col as f64, row as f64);
                let q = rotate_about_center(p, center, phi);
                let (Some(a), Some(b)) = (
                    fisheye_to_source(p.x, p.y, &rolled),
                    fisheye_to_source(q.x, q.y, &plain),
                ) else {
                    continue;
                };
                assert!((a - b).norm() < 1e-9, "phi={phi} p={p:?}");
                co_valid += 1;
            }
        }
        assert!(co_valid > 1000);
    }
}

#[test]
fn forward_translation_magnifies_center() {
    let spacing = |pose: RigPose| {
        let w = warp(300.0, pose);
        let a = fisheye_to_source(320.0, 320.0, &w).unwrap();
        let b = fisheye_to_source(321.0, 320.0, &w).unwrap();
        let c = fisheye_to_source(320.0, 321.0, &w).unwrap();
        ((b - a).norm(), (c - a).norm())
    };
    let (ix, iy) = spacing(RigPose::identity());
    for tz in [0.05, 0.2, 0.4] {
        let (fx, fy) = spacing(RigPose { t_z: tz, ..Default::default() });
        assert!(fx < ix && fy < iy, "t_z={tz}");
    }
}

#[test]
fn unproject_inverts_project_under_general_pose() {
    let pose = RigPose {
        rot_x: 12.0,
        rot_y: -20.0,
        rot_z: 7.0,
        t_x: 0.2,
        t_y: -0.05,
        t_z: 0.3,
    };
    let w = warp(260.0, pose).compile();
    for (col, row) in [(320.0, 320.0), (100.0, 400.0), (500.0, 90.0), (333.3, 222.2)] {
        let src = w.project(col, row).unwrap();
        let back = w.unproject(src.x, src.y).unwrap();
        assert!((back - Point2::new(col, row)).norm() < 1e-8);
    }
}
