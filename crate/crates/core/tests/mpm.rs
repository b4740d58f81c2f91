use approx::assert_relative_eq;
use mphys::constitutive::{Mat3, Vec3};
use mphys::material::{MaterialClass, MaterialParams, Param};
use mphys::mpm::{
    g2p, grid_update, p2g, ExecutionMode, Grid, GridSpec, MaterialModel, ParticleState, Solver,
    SolverOptions, Stencil, StepConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

fn elastic(e: f64) -> MaterialModel {
    let p = MaterialParams::new(MaterialClass::Elastic, 1000.0)
        .with(Param::YoungsModulus, e)
        .with(Param::PoissonRatio, 0.3);
    MaterialModel::new(&p, 1.0).unwrap()
}

/// `n³` particles on a lattice of spacing `h/2` centred at `center`.
fn blob(n: usize, center: Vec3, h: f64) -> Vec<ParticleState> {
    let d = 0.5 * h;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let off = Vec3::new(i as f64, j as f64, k as f64) - Vec3::repeat((n - 1) as f64 / 2.0);
                let vol = d * d * d;
                out.push(ParticleState::new(center + off * d, 1000.0 * vol, vol));
            }
        }
    }
    out
}

fn step(spf: u32, frame_duration: f64, gravity: [f64; 3]) -> StepConfig {
    StepConfig {
        substeps_per_frame: spf,
        frames: 1,
        frame_duration,
        gravity,
    }
}

#[test]
fn node_aligned_particle_scatter() {
    let spec = GridSpec::cube(16, 1.0);
    let h = spec.cell_width;
    let mut grid = Grid::new(spec);
    let mut p = ParticleState::new(Vec3::new(8.0 * h, 8.0 * h, 8.0 * h), 1.0, 1e-3);
    p.v = Vec3::zeros();
    p2g(&[p], &mut grid, 1e-3, ExecutionMode::Deterministic).unwrap();
    let touched = grid.nodes.iter().filter(|n| n.mass > 0.0).count();
    assert_eq!(touched, 27);
    assert_relative_eq!(grid.total_mass(), 1.0, max_relative = 1e-14);
    assert_eq!(grid.nodes[grid.index(8, 8, 8)].mass, 0.421875);
    assert!(grid.nodes.iter().all(|n| n.momentum == Vec3::zeros()));
}

#[test]
fn particle_too_close_to_the_wall_is_rejected() {
    let mut grid = Grid::new(GridSpec::cube(16, 1.0));
    let p = ParticleState::new(Vec3::new(0.02, 0.5, 0.5), 1.0, 1e-3);
    let err = p2g(&[p], &mut grid, 1e-3, ExecutionMode::Deterministic).unwrap_err();
    assert_eq!(err.particle, 0);
}

#[test]
fn uniform_grid_velocity_translates_rigidly() {
    let spec = GridSpec::cube(16, 1.0);
    let mut grid = Grid::new(spec.clone());
    let mut ps = blob(3, Vec3::repeat(0.5), spec.cell_width);
    p2g(&ps, &mut grid, 1e-3, ExecutionMode::Deterministic).unwrap();
    let u = Vec3::new(0.3, -0.2, 0.1);
    grid.for_each_active(|_, _, n| n.velocity = u);
    let before: Vec<Vec3> = ps.iter().map(|p| p.x).collect();
    g2p(&grid, &mut ps, 1e-3);
    for (p, x0) in ps.iter().zip(before) {
        assert_relative_eq!(p.v, u, epsilon = 1e-14);
        assert!(p.c.norm() < 1e-12);
        assert_relative_eq!(p.x, x0 + u * 1e-3, epsilon = 1e-15);
        assert_relative_eq!(p.fe, Mat3::identity(), epsilon = 1e-14);
    }
}

#[test]
fn linear_velocity_field_recovers_gradient() {
    let spec = GridSpec::cube(32, 1.0);
    let mut grid = Grid::new(spec.clone());
    let mut ps = blob(4, Vec3::repeat(0.5), spec.cell_width);
    p2g(&ps, &mut grid, 1e-3, ExecutionMode::Deterministic).unwrap();
    let a = Mat3::new(0.1, 0.4, -0.2, 0.3, -0.5, 0.0, 0.2, 0.1, 0.6);
    let x0 = Vec3::repeat(0.5);
    grid.for_each_active(|_, pos, n| n.velocity = a * (pos - x0));
    g2p(&grid, &mut ps, 1e-3);
    for p in &ps {
        assert!((p.c - a).norm() <= 0.05 * a.norm(), "{}", p.c);
    }
}

#[test]
fn gravity_only_grid_update() {
    let spec = GridSpec::cube(16, 1.0);
    let mut grid = Grid::new(spec.clone());
    let ps = blob(2, Vec3::repeat(0.5), spec.cell_width);
    p2g(&ps, &mut grid, 1e-3, ExecutionMode::Deterministic).unwrap();
    grid_update(&mut grid, &[], Vec3::new(0.0, 0.0, -9.8), 1e-3, 0);
    let eps = grid.spec.mass_epsilon;
    grid.for_each_active(|_, _, n| {
        if n.mass > eps {
            assert_eq!(n.velocity, Vec3::new(0.0, 0.0, -9.8) * 1e-3);
        }
    });
}

#[test]
fn free_fall_matches_discrete_kinematics() {
    let spec = GridSpec::cube(32, 1.0);
    let spf = 256;
    let frame = 1.0 / 30.0;
    let g = -9.8;
    let x0 = Vec3::new(0.5, 0.5, 0.8);
    let p = ParticleState::new(x0, 1e-3, 1e-6);
    let mut s = Solver::from_parts(
        vec![p],
        vec![elastic(1e5)],
        spec,
        step(spf, frame, [0.0, 0.0, g]),
        vec![],
        vec![],
        SolverOptions::default(),
    );
    s.advance_frame().unwrap();
    let n = spf as f64;
    let dt = frame / n;
    let drop = s.particles[0].x[2] - x0[2];
    let discrete = 0.5 * g * dt * dt * n * (n + 1.0);
    assert_relative_eq!(drop, discrete, max_relative = 1e-6);
    let continuous = 0.5 * g * frame * frame;
    assert!((drop - continuous).abs() <= 0.5 * g.abs() * dt * frame * (1.0 + 1e-9));
    assert_relative_eq!(s.particles[0].fe, Mat3::identity(), epsilon = 1e-12);
}

#[test]
fn rest_state_is_a_fixed_point_for_every_class() {
    for class in MaterialClass::ALL {
        let mut p = MaterialParams::new(class, 1000.0);
        for r in mphys::material::range_catalog(class) {
            if r.param != Param::Density {
                p.set(r.param, Some(0.5 * (r.lower + r.upper).min(r.lower * 10.0)));
            }
        }
        let model = MaterialModel::new(&p, 1e-6).unwrap();
        let spec = GridSpec::cube(16, 1.0);
        let mut s = Solver::from_parts(
            blob(4, Vec3::repeat(0.5), spec.cell_width),
            vec![model],
            spec,
            step(100, 0.01, [0.0; 3]),
            vec![],
            vec![],
            SolverOptions::default(),
        );
        let x0: Vec<Vec3> = s.particles.iter().map(|p| p.x).collect();
        s.advance_frame().unwrap();
        let vmax = s.particles.iter().map(|p| p.v.norm()).fold(0.0, f64::max);
        assert!(vmax < 1e-12, "{class:?}: {vmax}");
        for (p, x) in s.particles.iter().zip(x0) {
            assert!((p.x - x).norm() < 1e-12);
        }
    }
}

fn stretched_blob(seed: u64) -> Solver {
    let spec = GridSpec::cube(32, 1.0);
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut ps = blob(5, Vec3::repeat(0.5), spec.cell_width);
    for p in &mut ps {
        p.v = Vec3::new(0.05, -0.02, 0.01)
            + Vec3::from_fn(|_, _| rng.random_range(-0.05..0.05));
        p.fe = Mat3::new(1.05, 0.02, 0.0, 0.0, 0.97, 0.01, 0.0, 0.0, 1.02);
    }
    let mut opts = SolverOptions::default();
    opts.record_conservation = true;
    Solver::from_parts(
        ps,
        vec![elastic(2e4)],
        spec,
        step(50, 0.01, [0.0; 3]),
        vec![],
        vec![],
        opts,
    )
}

#[test]
fn transfers_conserve_mass_and_momentum() {
    let mut s = stretched_blob(1);
    s.advance_frame().unwrap();
    for r in &s.diagnostics.conservation {
        assert_relative_eq!(r.grid_mass, r.particle_mass, max_relative = 1e-10);
        let scale = r.particle_momentum.norm();
        assert!((r.grid_momentum - r.particle_momentum).norm() <= 1e-8 * scale);
    }
}

#[test]
fn parallel_scatter_agrees_with_serial() {
    let s = stretched_blob(2);
    let mut a = Grid::new(s.grid.spec.clone());
    let mut b = Grid::new(s.grid.spec.clone());
    let mut ps = s.particles.clone();
    for _ in 0..4 {
        ps.extend(s.particles.iter().cloned());
    }
    p2g(&ps, &mut a, 1e-3, ExecutionMode::Deterministic).unwrap();
    p2g(&ps, &mut b, 1e-3, ExecutionMode::Parallel).unwrap();
    for (x, y) in a.nodes.iter().zip(&b.nodes) {
        assert_relative_eq!(x.mass, y.mass, max_relative = 1e-12, epsilon = 1e-300);
        assert!((x.momentum - y.momentum).norm() <= 1e-8 * x.momentum.norm().max(1e-30));
    }
}

#[test]
fn deterministic_runs_are_bit_identical() {
    let mut a = stretched_blob(3);
    let mut b = stretched_blob(3);
    a.advance_frame().unwrap();
    b.advance_frame().unwrap();
    assert_eq!(a.particles, b.particles);
}

#[test]
fn galilean_shift_by_whole_cells() {
    let spec = GridSpec::cube(64, 1.0);
    let spf = 20;
    let frame = 0.02;
    let dt = frame / spf as f64;
    let u = Vec3::new(spec.cell_width / dt, 0.0, 0.0);
    let base = blob(4, Vec3::new(0.3, 0.5, 0.5), spec.cell_width);
    let build = |shift: bool| {
        let mut ps = base.clone();
        for p in &mut ps {
            p.v = Vec3::new(0.01, 0.02, -0.01) + if shift { u } else { Vec3::zeros() };
            p.fe = Mat3::new(1.02, 0.01, 0.0, 0.0, 0.99, 0.0, 0.0, 0.0, 1.0);
        }
        let mut opts = SolverOptions::default();
        opts.cfl_limit = 2.0;
        Solver::from_parts(
            ps,
            vec![elastic(1e4)],
            spec.clone(),
            step(spf, frame, [0.0; 3]),
            vec![],
            vec![],
            opts,
        )
    };
    let mut still = build(false);
    let mut moving = build(true);
    still.advance_frame().unwrap();
    moving.advance_frame().unwrap();
    for (a, b) in still.particles.iter().zip(&moving.particles) {
        assert!((b.x - u * frame - a.x).norm() < 1e-8);
        assert!((b.fe - a.fe).norm() < 1e-8);
    }
}

#[test]
fn frozen_particles_are_untouched() {
    let spec = GridSpec::cube(16, 1.0);
    let mut ps = blob(3, Vec3::repeat(0.5), spec.cell_width);
    for p in ps.iter_mut().take(5) {
        p.frozen = true;
        p.fe = Mat3::new(1.1, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
    }
    let before: Vec<_> = ps[..5].to_vec();
    let mut s = Solver::from_parts(
        ps,
        vec![elastic(1e4)],
        spec,
        step(30, 0.01, [0.0, 0.0, -9.8]),
        vec![],
        vec![],
        SolverOptions::default(),
    );
    s.advance_frame().unwrap();
    for (a, b) in before.iter().zip(&s.particles[..5]) {
        assert_eq!((a.x, a.v, a.fe), (b.x, b.v, b.fe));
    }
}

#[test]
fn cfl_violation_is_reported() {
    let spec = GridSpec::cube(16, 1.0);
    let mut p = ParticleState::new(Vec3::repeat(0.5), 1e-3, 1e-6);
    p.v = Vec3::new(100.0, 0.0, 0.0);
    let mut s = Solver::from_parts(
        vec![p],
        vec![elastic(1e5)],
        spec,
        step(10, 0.01, [0.0; 3]),
        vec![],
        vec![],
        SolverOptions::default(),
    );
    let err = s.advance_frame().unwrap_err();
    assert!(matches!(
        err,
        mphys::mpm::SimError::Unstable {
            frame: 0,
            substep: 0,
            ..
        }
    ));
}

proptest! {
    #[test]
    fn partition_of_unity(x in 0.2f64..0.8, y in 0.2f64..0.8, z in 0.2f64..0.8) {
        let s = Stencil::new(&Vec3::new(x, y, z), &Vec3::zeros(), 64.0);
        let mut sum = 0.0;
        let mut first = Vec3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    sum += s.weight(i, j, k);
                    first += s.offset(i, j, k, 1.0 / 64.0) * s.weight(i, j, k);
                }
            }
        }
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        prop_assert!(first.norm() <= 1e-15);
    }
}
