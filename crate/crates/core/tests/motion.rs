use mphys::motion::{
    ecms, encode_motion_features, flow_from_snapshots, lmd_loss, read_tensor, render_frame,
    render_trajectory, write_ppm, write_tensor, FeatureVolume, FlowField, LmdConfig,
    MotionExtractor, ECMS_GUARD,
};
use mphys::mpm::{simulate, Snapshot, SolverOptions};
use mphys::scene::bundled::bundled;
use mphys::scene::{Camera, RenderSettings};
use proptest::prelude::*;

fn volume(frames: usize, channels: usize, h: usize, w: usize, data: Vec<f64>) -> FeatureVolume {
    let mut v = FeatureVolume::zeros(frames, channels, h, w);
    let n = v.data.len();
    v.data.copy_from_slice(&data[..n]);
    v
}

fn flows(data: &[f64], frames: usize, w: usize, h: usize) -> Vec<FlowField> {
    (0..frames)
        .map(|l| FlowField {
            width: w,
            height: h,
            data: (0..w * h)
                .map(|p| {
                    let o = 2 * (l * w * h + p);
                    [data[o], data[o + 1]]
                })
                .collect(),
        })
        .collect()
}

/// The score written out term by term over a dense `[l][y][x][c]` array.
fn naive_ecms(f: &[FlowField]) -> f64 {
    let (w, h) = (f[0].width, f[0].height);
    let at = |l: usize, x: i64, y: i64, c: usize| {
        let x = x.clamp(0, w as i64 - 1) as usize;
        let y = y.clamp(0, h as i64 - 1) as usize;
        f[l].data[y * w + x][c]
    };
    let mut magnitude = 0.0;
    for l in 0..f.len() {
        let mut s = 0.0;
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                s += at(l, x, y, 0).powi(2) + at(l, x, y, 1).powi(2);
            }
        }
        magnitude += s.sqrt();
    }
    let mut temporal = 0.0;
    for l in 1..f.len() {
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                for c in 0..2 {
                    temporal += (at(l, x, y, c) - at(l - 1, x, y, c)).powi(2);
                }
            }
        }
    }
    let mut spatial = 0.0;
    for l in 0..f.len() {
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                for c in 0..2 {
                    let lap = at(l, x + 1, y, c) + at(l, x - 1, y, c) + at(l, x, y + 1, c)
                        + at(l, x, y - 1, c)
                        - 4.0 * at(l, x, y, c);
                    spatial += lap * lap;
                }
            }
        }
    }
    1.0 / magnitude.max(ECMS_GUARD) + temporal + spatial
}

proptest! {
    #[test]
    fn identity_extractor_is_the_identity(
        data in prop::collection::vec(-5.0f64..5.0, 2 * 3 * 4 * 5),
    ) {
        let z = volume(2, 3, 4, 5, data);
        let m = MotionExtractor::identity(3);
        prop_assert_eq!(&m.forward(&z).unwrap(), &z);
        prop_assert_eq!(&m.forward_ema(&z).unwrap(), &z);
    }

    #[test]
    fn charbonnier_lies_between_its_limits(
        data in prop::collection::vec(-1.0f64..1.0, 24),
    ) {
        let cfg = LmdConfig::default();
        let zero = FeatureVolume::zeros(2, 3, 2, 2);
        let d = volume(2, 3, 2, 2, data);
        let norm = d.data.iter().map(|x| x * x).sum::<f64>().sqrt();
        let loss = lmd_loss(&d, &zero, &cfg).unwrap();
        prop_assert!(loss >= cfg.weight * norm);
        prop_assert!(loss >= cfg.weight * cfg.beta);
        prop_assert!(loss <= cfg.weight * (norm + cfg.beta) + 1e-15);
    }

    #[test]
    fn ecms_matches_the_naive_sum(
        data in prop::collection::vec(-3.0f64..3.0, 3 * 5 * 4 * 2),
    ) {
        let f = flows(&data, 3, 5, 4);
        let (a, b) = (ecms(&f, ECMS_GUARD), naive_ecms(&f));
        prop_assert!((a - b).abs() <= 1e-10 * b.abs());
    }

    #[test]
    fn tensors_round_trip_at_f32(
        data in prop::collection::vec(-1e3f64..1e3, 12),
    ) {
        let mut buf = Vec::new();
        write_tensor(&mut buf, &[2, 2, 3], &data).unwrap();
        let (dims, back) = read_tensor(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(dims, vec![2, 2, 3]);
        for (a, b) in data.iter().zip(&back) {
            prop_assert_eq!(*a as f32, *b);
        }
    }
}

#[test]
fn static_stack_hits_the_guard() {
    let f = vec![FlowField::zeros(4, 4); 3];
    assert_eq!(ecms(&f, ECMS_GUARD), 1e6);
}

#[test]
fn identical_volumes_sit_on_the_floor() {
    let cfg = LmdConfig::default();
    let z = volume(1, 3, 2, 2, (0..12).map(|i| i as f64 * 0.1).collect());
    assert_eq!(lmd_loss(&z, &z, &cfg).unwrap(), 1e-3);
    let m = MotionExtractor::identity(3);
    assert_eq!(m.loss(&z, &z, &cfg).unwrap(), 1e-3);
}

#[test]
fn recolored_twin_encodes_identically() {
    let mut scene = bundled("elastic_drop").unwrap();
    scene.step.frames = 6;
    let params = scene.material.clone().unwrap();
    let sim = simulate(&scene, &params, SolverOptions::default()).unwrap();
    let twin: Vec<Snapshot> = sim
        .trajectory
        .snapshots
        .iter()
        .map(|s| s.recolored(|i, _| if i % 2 == 0 { [0.1, 0.9, 0.2] } else { [1.0, 1.0, 0.0] }))
        .collect();
    let encode = |snaps: &[Snapshot]| {
        let frames = render_trajectory(snaps, &scene.camera, &scene.render);
        encode_motion_features(&frames, scene.render.velocity_scale).unwrap()
    };
    let (a, b) = (encode(&sim.trajectory.snapshots), encode(&twin));
    assert_eq!(a, b);
    assert_eq!(lmd_loss(&a, &b, &LmdConfig::default()).unwrap(), 1e-3);
    assert!(a.data.iter().any(|x| *x != 0.0));
}

#[test]
fn rendering_is_reproducible() {
    let snap = Snapshot {
        positions: vec![[0.5, 0.5, 0.5], [0.52, 0.4, 0.48], [0.3, 0.6, 0.7]],
        velocities: vec![[1.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.0, 0.0, -1.0]],
        colors: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };
    let (cam, settings) = (Camera::default(), RenderSettings::default());
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_ppm(&mut a, &render_frame(&snap, &cam, &settings)).unwrap();
    write_ppm(&mut b, &render_frame(&snap, &cam, &settings)).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with(b"P6\n64 64\n255\n"));
    assert_eq!(a.len(), "P6\n64 64\n255\n".len() + 64 * 64 * 3);
}

#[test]
fn bouncing_block_has_finite_positive_score() {
    let mut scene = bundled("elastic_drop").unwrap();
    scene.step.frames = 20;
    let params = scene.material.clone().unwrap();
    let sim = simulate(&scene, &params, SolverOptions::default()).unwrap();
    let f = flow_from_snapshots(&sim.trajectory.snapshots, &scene.camera, &scene.render);
    assert_eq!(f.len(), 19);
    let score = ecms(&f, ECMS_GUARD);
    assert!(score.is_finite() && score > 0.0 && score < 1e6, "{score}");
}
