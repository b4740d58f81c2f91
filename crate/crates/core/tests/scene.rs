use mphys::constitutive::Vec3;
use mphys::mpm::{Snapshot, Solver, SolverOptions};
use mphys::scene::bundled::{bundled, names, FORCE_SCENES};
use mphys::scene::{
    parse_scene, perturb_particles, serialize_scene, ForceModule, PerturbConfig, SceneConfig,
};
use proptest::prelude::*;

fn solver(scene: &SceneConfig) -> Solver {
    let params = scene.material.clone().expect("bundled scenes carry a material");
    Solver::new(scene, &params, SolverOptions::default()).unwrap()
}

fn ranges(scene: &SceneConfig) -> Vec<(u64, u64)> {
    let total = scene.step.total_substeps();
    scene
        .forces
        .iter()
        .map(|f| f.step_range(scene.step.dt(), total))
        .collect()
}

/// Weightless, force-free copy restricted to the domain walls.
fn isolated(mut scene: SceneConfig) -> SceneConfig {
    scene.step.gravity = [0.0; 3];
    scene.boundary_conditions.truncate(1);
    scene
}

#[test]
fn bundled_scenes_round_trip() {
    for name in names() {
        let scene = bundled(name).unwrap();
        let again = parse_scene(&serialize_scene(&scene)).unwrap();
        assert_eq!(scene, again, "{name}");
    }
}

#[test]
fn force_scenes_follow_the_capture_schedules() {
    let steps = |name: &str| {
        let s = bundled(name).unwrap();
        let per_second = (1.0 / s.step.dt()).round() as u64;
        (ranges(&s), per_second)
    };
    let (r, _) = steps("alocasia");
    assert_eq!(r, vec![(0, 2)]);
    let (r, _) = steps("carnation");
    assert_eq!(r, vec![(0, 1)]);
    let (r, hz) = steps("hat");
    assert_eq!(r, vec![(0, hz)]);
    let (r, hz) = steps("telephone");
    assert_eq!(r, vec![(0, hz * 3 / 4)]);
    let (r, _) = steps("fox");
    assert_eq!(r.len(), 3);
    assert!(r.iter().all(|(a, b)| b - a == 1));
    assert!(r.windows(2).all(|w| w[0].1 <= w[1].0));
    let (r, hz) = steps("plane");
    assert_eq!(r, vec![(0, hz * 4 / 5), (hz * 4 / 5, hz * 9 / 5)]);
    let (r, hz) = steps("kitchen");
    assert_eq!(r, vec![(0, 5 * hz)]);
    let (r, hz) = steps("jam");
    assert_eq!(r, vec![(0, hz * 27 / 10), (hz * 27 / 10, 5 * hz)]);
    let (r, hz) = steps("sandcastle");
    assert_eq!(r, vec![(0, 5 * hz)]);
    assert_eq!(FORCE_SCENES.len(), 9);
}

#[test]
fn two_substep_impulse_adds_twice_its_velocity() {
    let mut scene = isolated(bundled("alocasia").unwrap());
    scene.objects.truncate(1);
    if let ForceModule::AddImpulse { select, .. } = &mut scene.forces[0] {
        select.groups = None;
    }
    let mut s = solver(&scene);
    for _ in 0..4 {
        s.substep().unwrap();
    }
    for p in &s.particles {
        assert!((p.v - Vec3::new(0.88, 0.0, 0.0)).norm() < 1e-12, "{:?}", p.v);
    }
}

#[test]
fn constant_force_acts_only_inside_its_window() {
    let mut scene = isolated(bundled("telephone").unwrap());
    scene.step.substeps_per_frame = 8;
    scene.step.frame_duration = 0.01;
    scene.step.frames = 2;
    scene.forces[0] = ForceModule::AddConstantForce {
        select: Default::default(),
        force: [15.0, 15.0, -15.0],
        window: Some([0.0, 0.005]),
    };
    let dt = scene.step.dt();
    let mut s = solver(&scene);
    for _ in 0..16 {
        s.substep().unwrap();
    }
    let expected = Vec3::new(15.0, 15.0, -15.0) * (4.0 * dt);
    for p in &s.particles {
        assert!((p.v - expected).norm() < 1e-12, "{:?}", p.v);
    }
}

#[test]
fn propeller_moves_tangentially_at_omega_r() {
    let scene = isolated(bundled("plane").unwrap());
    let ForceModule::ForceParticlesRotation {
        axis_point, axis, ..
    } = scene.forces[0].clone()
    else {
        panic!("plane scene starts with a rotation");
    };
    let (origin, axis) = (Vec3::from(axis_point), Vec3::from(axis).normalize());
    for (module, omega) in [(0, 50.0), (1, 5.0)] {
        let mut scene = scene.clone();
        let mut f = scene.forces[module].clone();
        if let ForceModule::ForceParticlesRotation { window, .. } = &mut f {
            *window = Some([0.0, 0.1]);
        }
        scene.forces = vec![f];
        let mut s = solver(&scene);
        let before: Vec<Vec3> = s.particles.iter().map(|p| p.x).collect();
        s.substep().unwrap();
        let mut moved = 0;
        for (p, x) in s.particles.iter().zip(&before) {
            if p.group != 1 {
                continue;
            }
            let r = x - origin;
            let r_perp = r - axis * r.dot(&axis);
            assert!(p.v.dot(&axis).abs() < 1e-12);
            assert!(p.v.dot(&r_perp).abs() < 1e-12 * omega);
            assert!((p.v.norm() - omega * r_perp.norm()).abs() < 1e-12 * omega);
            moved += 1;
        }
        assert!(moved > 0);
    }
}

#[test]
fn release_unfreezes_one_layer_per_tick() {
    let mut scene = isolated(bundled("sandcastle").unwrap());
    scene.step.substeps_per_frame = 10;
    scene.step.frame_duration = 0.01;
    scene.step.frames = 1;
    scene.forces[0] = ForceModule::ReleaseParticles {
        select: Default::default(),
        layer_size: 200,
        window: Some([0.0, 0.01]),
    };
    let mut s = solver(&scene);
    let frozen = |s: &Solver| s.particles.iter().filter(|p| p.frozen).count();
    let mut count = frozen(&s);
    assert!(count > 200);
    let mut drops = Vec::new();
    for _ in 0..10 {
        s.substep().unwrap();
        let now = frozen(&s);
        if now != count {
            drops.push(count - now);
        }
        count = now;
    }
    assert_eq!(count, 0);
    let (last, full) = drops.split_last().unwrap();
    assert!(full.iter().all(|&d| d == 200), "{drops:?}");
    assert!(*last > 0 && *last <= 200);
}

fn snapshot(points: &[[f32; 3]]) -> Snapshot {
    Snapshot {
        positions: points.to_vec(),
        velocities: vec![[0.0; 3]; points.len()],
        colors: vec![[0.5; 3]; points.len()],
    }
}

proptest! {
    #[test]
    fn perturbation_offsets_are_shared_across_snapshots(
        seed in any::<u64>(),
        shift in -0.1f32..0.1,
    ) {
        let a = snapshot(&[[0.5, 0.5, 0.5], [0.25, 0.5, 0.75]]);
        let b = snapshot(&[[0.5 + shift, 0.5, 0.5], [0.25 + shift, 0.5, 0.75]]);
        let cfg = PerturbConfig { epsilon: 0.01, seed };
        let (pa, pb) = (perturb_particles(&a, &cfg), perturb_particles(&b, &cfg));
        for i in 0..2 {
            for ax in 0..3 {
                let da = pa.positions[i][ax] - a.positions[i][ax];
                let db = pb.positions[i][ax] - b.positions[i][ax];
                prop_assert!((da - db).abs() < 1e-6);
            }
        }
        prop_assert_eq!(pa, perturb_particles(&a, &cfg));
    }
}
