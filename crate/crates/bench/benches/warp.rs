use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fisheye_synth::policy::{augment_sample, preset};
use fisheye_synth::remap::{COLOR_FILL, LABEL_FILL};
use fisheye_synth::{RemapTable, RigPose, SampleRng, WarpParams};
use fisheye_synth_bench::{source_image, source_labels};

const SRC: (usize, usize) = (2048, 1024);

fn params(f: f64, pose: RigPose) -> WarpParams {
    let mut p = WarpParams::zoom(f, 640, 500.0, SRC.0 as u32, SRC.1 as u32).unwrap();
    p.pose = pose;
    p
}

fn build(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_remap");
    for f in [200.0, 300.0, 400.0] {
        let p = params(f, RigPose::identity());
        group.bench_with_input(BenchmarkId::from_parameter(f), &p, |b, p| {
            b.iter(|| RemapTable::build(p, SRC.0, SRC.1).unwrap())
        });
    }
    let posed = params(
        300.0,
        RigPose {
            rot_x: 10.0,
            rot_y: -15.0,
            rot_z: 5.0,
            t_x: 0.2,
            t_y: 0.05,
            t_z: 0.3,
        },
    );
    group.bench_function("posed", |b| b.iter(|| RemapTable::build(&posed, SRC.0, SRC.1).unwrap()));
    group.finish();
}

fn apply(c: &mut Criterion) {
    let img = source_image(SRC.0, SRC.1);
    let lbl = source_labels(SRC.0, SRC.1);
    let table = RemapTable::build(&params(300.0, RigPose::identity()), SRC.0, SRC.1).unwrap();
    c.bench_function("apply_bilinear", |b| b.iter(|| table.apply_bilinear(&img, COLOR_FILL).unwrap()));
    c.bench_function("apply_nearest", |b| b.iter(|| table.apply_nearest(&lbl, LABEL_FILL).unwrap()));
}

fn single_thread(c: &mut Criterion) {
    let img = source_image(SRC.0, SRC.1);
    let p = params(300.0, RigPose::identity());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    c.bench_function("build_and_bilinear_1_thread", |b| {
        b.iter(|| {
            pool.install(|| {
                let t = RemapTable::build(&p, SRC.0, SRC.1).unwrap();
                t.apply_bilinear(&img, COLOR_FILL).unwrap()
            })
        })
    });
}

fn augment(c: &mut Criterion) {
    let img = source_image(SRC.0, SRC.1);
    let lbl = source_labels(SRC.0, SRC.1);
    let policy = preset("seven_dof").unwrap();
    let mut i = 0;
    c.bench_function("augment_sample_seven_dof", |b| {
        b.iter(|| {
            i += 1;
            augment_sample(&img, &lbl, &policy, &mut SampleRng::for_sample(0, 0, i)).unwrap()
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = build, apply, single_thread, augment
}
criterion_main!(benches);
