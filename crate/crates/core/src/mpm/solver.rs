//! Explicit MLS-MPM time stepping: particle-to-grid scatter, grid update,
//! grid-to-particle gather and the per-particle plastic projection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::grid::{Grid, GridSpec};
use super::kernel::Stencil;
use super::model::{ElasticModel, MaterialModel};
use super::particles::{build_particles, ParticleState};
use super::trajectory::{FrameSummary, Snapshot, Trajectory};
use crate::constitutive::{
    kirchhoff_fixed_corotated_polar, polar_rotation, svd_rotation_safe, Mat3, SvdDecomposition,
    Vec3, SINGULAR_EPS,
};
use crate::material::{MaterialError, MaterialParams};
use crate::plasticity::{Plasticity, TrialState};
use crate::scene::{apply_boundary, BoundaryCondition, ForceModule, SceneConfig, SceneError};

/// Lower bound applied to singular values of a collapsed `Fᵉ`.
pub const SINGULAR_VALUE_FLOOR: f64 = 0.05;

/// Particles per scatter block in [`ExecutionMode::Parallel`].
const SCATTER_CHUNK: usize = 512;

/// Time stepping of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepConfig {
    pub substeps_per_frame: u32,
    pub frames: u32,
    /// Seconds per frame.
    pub frame_duration: f64,
    /// m/s².
    pub gravity: [f64; 3],
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            substeps_per_frame: 256,
            frames: 150,
            frame_duration: 5.0 / 150.0,
            gravity: [0.0, 0.0, -9.8],
        }
    }
}

impl StepConfig {
    /// Substep length, `frame_duration / substeps_per_frame`.
    pub fn dt(&self) -> f64 {
        self.frame_duration / self.substeps_per_frame as f64
    }

    pub fn total_substeps(&self) -> u64 {
        self.frames as u64 * self.substeps_per_frame as u64
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.substeps_per_frame == 0 {
            return Err("substeps_per_frame must be positive".into());
        }
        if !(self.frame_duration > 0.0 && self.frame_duration.is_finite()) {
            return Err(format!("frame_duration {} must be positive", self.frame_duration));
        }
        if self.gravity.iter().any(|g| !g.is_finite()) {
            return Err("gravity must be finite".into());
        }
        Ok(())
    }
}

/// How the scatter is reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    /// Serial scatter in particle order; bit-reproducible.
    #[default]
    Deterministic,
    /// Fixed-size particle blocks scattered concurrently into private
    /// buffers, then summed in block order.
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub mode: ExecutionMode,
    /// Largest admissible `max ‖v‖ · dt / h`.
    pub cfl_limit: f64,
    /// Record per-substep mass and momentum totals.
    pub record_conservation: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mode: ExecutionMode::Deterministic,
            cfl_limit: 0.5,
            record_conservation: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulation unstable at frame {frame}, substep {substep}: {reason}")]
    Unstable {
        frame: u64,
        substep: u64,
        reason: String,
    },
    #[error("particle {particle} at {position:?} left the grid at frame {frame}, substep {substep}")]
    ParticleOutOfDomain {
        particle: usize,
        position: [f64; 3],
        frame: u64,
        substep: u64,
    },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Material(#[from] MaterialError),
}

/// Totals around one substep's transfers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservationRecord {
    pub step: u64,
    pub particle_mass: f64,
    pub grid_mass: f64,
    /// Particle momentum before the scatter.
    pub particle_momentum: Vec3,
    /// `Σ mᵢ vᵢ` over nodes after the grid update.
    pub grid_momentum: Vec3,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub substeps: u64,
    /// Times a collapsed `Fᵉ` had its singular values floored.
    pub det_clamps: u64,
    pub warnings: Vec<String>,
    pub conservation: Vec<ConservationRecord>,
}

/// A particle whose stencil leaves the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutOfDomain {
    pub particle: usize,
    pub position: Vec3,
}

#[inline]
fn stencil_in_grid(p: &ParticleState, grid: &Grid, inv_h: f64) -> Option<Stencil> {
    if !p.x.iter().all(|c| c.is_finite()) {
        return None;
    }
    let s = Stencil::new(&p.x, &grid.spec.origin(), inv_h);
    let res = grid.spec.resolution;
    (0..3)
        .all(|a| s.base[a] >= 0 && s.base[a] + 2 <= res[a] as i64)
        .then_some(s)
}

/// Momentum and affine scatter terms: `m v` and `m C − dt V₀ (4/h²) τ`.
#[inline]
fn scatter_terms(p: &ParticleState, dt: f64, inv_h: f64) -> (Vec3, Mat3) {
    if p.frozen {
        return (Vec3::zeros(), Mat3::zeros());
    }
    let d_inv = 4.0 * inv_h * inv_h;
    (p.v * p.mass, p.c * p.mass - p.stress * (dt * p.volume * d_inv))
}

struct Block {
    lo: [usize; 3],
    dims: [usize; 3],
    mass: Vec<f64>,
    momentum: Vec<Vec3>,
}

fn scatter_block(
    particles: &[ParticleState],
    offset: usize,
    grid: &Grid,
    dt: f64,
) -> Result<Option<Block>, OutOfDomain> {
    let h = grid.spec.cell_width;
    let inv_h = 1.0 / h;
    let mut stencils = Vec::with_capacity(particles.len());
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    for (i, p) in particles.iter().enumerate() {
        if p.removed {
            continue;
        }
        let s = stencil_in_grid(p, grid, inv_h).ok_or(OutOfDomain {
            particle: offset + i,
            position: p.x,
        })?;
        for a in 0..3 {
            lo[a] = lo[a].min(s.base[a] as usize);
            hi[a] = hi[a].max(s.base[a] as usize + 2);
        }
        stencils.push((i, s));
    }
    if stencils.is_empty() {
        return Ok(None);
    }
    let dims: [usize; 3] = std::array::from_fn(|a| hi[a] - lo[a] + 1);
    let n = dims.iter().product();
    let mut block = Block {
        lo,
        dims,
        mass: vec![0.0; n],
        momentum: vec![Vec3::zeros(); n],
    };
    for (i, s) in stencils {
        let p = &particles[i];
        let (mv, affine) = scatter_terms(p, dt, inv_h);
        for di in 0..3 {
            for dj in 0..3 {
                for dk in 0..3 {
                    let w = s.weight(di, dj, dk);
                    let dpos = s.offset(di, dj, dk, h);
                    let idx = ((s.base[0] as usize + di - lo[0]) * dims[1]
                        + (s.base[1] as usize + dj - lo[1]))
                        * dims[2]
                        + (s.base[2] as usize + dk - lo[2]);
                    block.mass[idx] += w * p.mass;
                    block.momentum[idx] += (mv + affine * dpos) * w;
                }
            }
        }
    }
    Ok(Some(block))
}

fn add_block(grid: &mut Grid, b: &Block) {
    let hi = [
        b.lo[0] + b.dims[0] - 1,
        b.lo[1] + b.dims[1] - 1,
        b.lo[2] + b.dims[2] - 1,
    ];
    for i in 0..b.dims[0] {
        for j in 0..b.dims[1] {
            let row = (i * b.dims[1] + j) * b.dims[2];
            let start = grid.index(b.lo[0] + i, b.lo[1] + j, b.lo[2]);
            for k in 0..b.dims[2] {
                let node = &mut grid.nodes[start + k];
                node.mass += b.mass[row + k];
                node.momentum += b.momentum[row + k];
            }
        }
    }
    grid.mark_active(b.lo, hi);
}

/// Scatters particle mass, APIC momentum and stress impulse onto a cleared
/// grid.
pub fn p2g(
    particles: &[ParticleState],
    grid: &mut Grid,
    dt: f64,
    mode: ExecutionMode,
) -> Result<(), OutOfDomain> {
    match mode {
        ExecutionMode::Deterministic => {
            if let Some(b) = scatter_block(particles, 0, grid, dt)? {
                add_block(grid, &b);
            }
        }
        ExecutionMode::Parallel => {
            let g: &Grid = grid;
            let blocks = particles
                .par_chunks(SCATTER_CHUNK)
                .enumerate()
                .map(|(c, chunk)| scatter_block(chunk, c * SCATTER_CHUNK, g, dt))
                .collect::<Result<Vec<_>, _>>()?;
            for b in blocks.iter().flatten() {
                add_block(grid, b);
            }
        }
    }
    Ok(())
}

/// Turns node momentum into velocity, adds gravity, then applies the
/// boundary conditions in order.
pub fn grid_update(
    grid: &mut Grid,
    boundary_conditions: &[BoundaryCondition],
    gravity: Vec3,
    dt: f64,
    step: u64,
) {
    let eps = grid.spec.mass_epsilon;
    grid.for_each_active(|_, _, node| {
        node.velocity = if node.mass > eps {
            node.momentum / node.mass + gravity * dt
        } else {
            Vec3::zeros()
        };
    });
    for bc in boundary_conditions {
        apply_boundary(bc, grid, step, dt);
    }
}

/// Gathers velocity and affine velocity, advects, and applies the trial
/// deformation update `Fᵉ ← (I + dt C) Fᵉ`. Frozen and removed particles are
/// left alone.
pub fn g2p(grid: &Grid, particles: &mut [ParticleState], dt: f64) {
    let h = grid.spec.cell_width;
    let inv_h = 1.0 / h;
    let origin = grid.spec.origin();
    let d_inv = 4.0 * inv_h * inv_h;
    particles.par_iter_mut().for_each(|p| {
        if !p.is_dynamic() {
            return;
        }
        let s = Stencil::new(&p.x, &origin, inv_h);
        let mut v = Vec3::zeros();
        let mut b = Mat3::zeros();
        for di in 0..3 {
            for dj in 0..3 {
                for dk in 0..3 {
                    let w = s.weight(di, dj, dk);
                    let idx = grid.index(
                        s.base[0] as usize + di,
                        s.base[1] as usize + dj,
                        s.base[2] as usize + dk,
                    );
                    let vi = grid.nodes[idx].velocity;
                    v += vi * w;
                    b += (vi * w) * s.offset(di, dj, dk, h).transpose();
                }
            }
        }
        p.v = v;
        p.c = b * d_inv;
        p.x += v * dt;
        p.fe = (Mat3::identity() + p.c * dt) * p.fe;
    });
}

/// Kirchhoff stress of a particle's current state; Newtonian fluids add the
/// viscous term `J μ (C + Cᵀ)`.
fn stress_of(model: &MaterialModel, svd: &SvdDecomposition, c: &Mat3) -> Mat3 {
    let tau = model.elastic.kirchhoff(svd);
    if model.viscosity > 0.0 {
        tau + (c + c.transpose()) * (svd.sigma.product() * model.viscosity)
    } else {
        tau
    }
}

/// Outcome of projecting one particle.
#[derive(Clone, Copy, Default)]
struct ProjectStats {
    clamps: u64,
    non_finite: u64,
}

impl std::iter::Sum for ProjectStats {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ProjectStats::default(), |a, b| ProjectStats {
            clamps: a.clamps + b.clamps,
            non_finite: a.non_finite + b.non_finite,
        })
    }
}

fn project_particle(p: &mut ParticleState, model: &MaterialModel, dt: f64) -> ProjectStats {
    let mut stats = ProjectStats::default();
    // Purely elastic corotated material only needs the polar rotation.
    if let (Plasticity::Identity, ElasticModel::FixedCorotated(lame)) =
        (model.plasticity, model.elastic)
    {
        if let Some(r) = polar_rotation(&p.fe) {
            p.stress = kirchhoff_fixed_corotated_polar(&p.fe, &r, lame);
            return stats;
        }
    }
    let Ok(mut svd) = svd_rotation_safe(&p.fe) else {
        stats.non_finite = 1;
        return stats;
    };
    if svd.sigma.product() <= SINGULAR_EPS || svd.sigma.min() <= 0.0 {
        svd.sigma = svd.sigma.map(|s| s.max(SINGULAR_VALUE_FLOOR));
        p.fe = svd.reconstruct();
        stats.clamps = 1;
    }
    let trial = TrialState::from_svd(p.fe, svd, dt, p.plastic_strain)
        .expect("singular values are positive after flooring");
    let r = model.plasticity.apply(&trial);
    p.fe = r.fe;
    p.plastic_strain = r.plastic_strain;
    if model.reset_deviatoric {
        let s = r.hencky.sum().exp().cbrt();
        p.fe = Mat3::identity() * s;
        let iso = SvdDecomposition {
            u: Mat3::identity(),
            sigma: Vec3::repeat(s),
            v: Mat3::identity(),
        };
        p.stress = stress_of(model, &iso, &p.c);
    } else {
        let returned = SvdDecomposition {
            u: svd.u,
            sigma: r.hencky.map(f64::exp),
            v: svd.v,
        };
        p.stress = stress_of(model, &returned, &p.c);
    }
    stats
}

/// Elastic stress of the current state, without any plastic projection.
pub fn refresh_stress(particles: &mut [ParticleState], models: &[MaterialModel]) {
    particles.par_iter_mut().for_each(|p| {
        if !p.is_dynamic() {
            p.stress = Mat3::zeros();
            return;
        }
        if let Ok(svd) = svd_rotation_safe(&p.fe) {
            p.stress = stress_of(&models[p.group as usize], &svd, &p.c);
        }
    });
}

/// Per-particle cached state of a force module.
#[derive(Debug, Clone, Default)]
struct ForceRuntime {
    selection: Option<Vec<usize>>,
    /// Release schedule: substep of tick `k` is `start + round(k · spacing)`.
    release: Option<ReleaseSchedule>,
}

#[derive(Debug, Clone)]
struct ReleaseSchedule {
    start: u64,
    spacing: f64,
    ticks: u64,
    next: u64,
    cursor: usize,
}

/// Stateful time integrator for one scene.
#[derive(Debug, Clone)]
pub struct Solver {
    pub particles: Vec<ParticleState>,
    /// Material of each particle group, indexed by `group`.
    pub models: Vec<MaterialModel>,
    pub grid: Grid,
    pub step: StepConfig,
    pub boundary_conditions: Vec<BoundaryCondition>,
    pub forces: Vec<ForceModule>,
    pub options: SolverOptions,
    pub diagnostics: Diagnostics,
    runtime: Vec<ForceRuntime>,
    step_index: u64,
}

impl Solver {
    /// Builds particles and materials for `scene`, with `params` applied to
    /// every object that has no material of its own.
    pub fn new(
        scene: &SceneConfig,
        params: &MaterialParams,
        options: SolverOptions,
    ) -> Result<Self, SimError> {
        let (particles, models) = build_particles(scene, params)?;
        Ok(Solver::from_parts(
            particles,
            models,
            scene.grid.clone(),
            scene.step.clone(),
            scene.boundary_conditions.clone(),
            scene.forces.clone(),
            options,
        ))
    }

    pub fn from_parts(
        mut particles: Vec<ParticleState>,
        models: Vec<MaterialModel>,
        grid: GridSpec,
        step: StepConfig,
        boundary_conditions: Vec<BoundaryCondition>,
        forces: Vec<ForceModule>,
        options: SolverOptions,
    ) -> Self {
        refresh_stress(&mut particles, &models);
        Solver {
            particles,
            models,
            grid: Grid::new(grid),
            runtime: vec![ForceRuntime::default(); forces.len()],
            step,
            boundary_conditions,
            forces,
            options,
            diagnostics: Diagnostics::default(),
            step_index: 0,
        }
    }

    pub fn dt(&self) -> f64 {
        self.step.dt()
    }

    /// Substeps taken so far.
    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    /// Simulated time in seconds.
    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.dt()
    }

    fn location(&self) -> (u64, u64) {
        let spf = self.step.substeps_per_frame as u64;
        (self.step_index / spf, self.step_index % spf)
    }

    fn selection(&mut self, f: usize) -> Vec<usize> {
        if let Some(sel) = &self.runtime[f].selection {
            return sel.clone();
        }
        let selector = self.forces[f].selector();
        let sel: Vec<usize> = self
            .particles
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.removed && selector.matches(&p.x, p.group))
            .map(|(i, _)| i)
            .collect();
        if sel.is_empty() {
            let (frame, substep) = self.location();
            self.diagnostics.warnings.push(format!(
                "forces[{f}] ({}) selected no particles at frame {frame}, substep {substep}",
                self.forces[f].name()
            ));
        }
        self.runtime[f].selection = Some(sel.clone());
        sel
    }

    fn active_forces(&self) -> Vec<usize> {
        let dt = self.dt();
        let total = self.step.total_substeps().max(self.step_index + 1);
        (0..self.forces.len())
            .filter(|&f| {
                let (a, b) = self.forces[f].step_range(dt, total);
                self.step_index >= a && self.step_index < b
            })
            .collect()
    }

    /// Velocity increments and releases, applied before the scatter.
    fn apply_pre_forces(&mut self, active: &[usize]) {
        let dt = self.dt();
        for &f in active {
            match self.forces[f].clone() {
                ForceModule::AddConstantForce { force, .. } => {
                    let dv = Vec3::from(force) * dt;
                    for i in self.selection(f) {
                        if self.particles[i].is_dynamic() {
                            self.particles[i].v += dv;
                        }
                    }
                }
                ForceModule::AddImpulse { impulse, .. } => {
                    let dv = Vec3::from(impulse);
                    for i in self.selection(f) {
                        if self.particles[i].is_dynamic() {
                            self.particles[i].v += dv;
                        }
                    }
                }
                ForceModule::ReleaseParticles { layer_size, .. } => {
                    self.release(f, layer_size);
                }
                _ => {}
            }
        }
    }

    fn release(&mut self, f: usize, layer_size: usize) {
        let frozen: Vec<usize> = self
            .selection(f)
            .into_iter()
            .filter(|&i| self.particles[i].frozen && !self.particles[i].removed)
            .collect();
        if self.runtime[f].release.is_none() {
            let total = self.step.total_substeps().max(self.step_index + 1);
            let (a, b) = self.forces[f].step_range(self.dt(), total);
            let ticks = frozen.len().div_ceil(layer_size).max(1) as u64;
            self.runtime[f].release = Some(ReleaseSchedule {
                start: a,
                spacing: (b - a) as f64 / ticks as f64,
                ticks,
                next: 0,
                cursor: 0,
            });
            self.runtime[f].selection = Some(frozen);
        }
        let order = self.runtime[f].selection.clone().unwrap_or_default();
        let step = self.step_index;
        let sched = self.runtime[f].release.as_mut().expect("schedule initialised");
        while sched.next < sched.ticks
            && step >= sched.start + (sched.next as f64 * sched.spacing).round() as u64
        {
            let end = (sched.cursor + layer_size).min(order.len());
            for &i in &order[sched.cursor..end] {
                let p = &mut self.particles[i];
                p.frozen = false;
                p.v = Vec3::zeros();
                p.c = Mat3::zeros();
            }
            sched.cursor = end;
            sched.next += 1;
        }
    }

    /// Velocity overrides, applied after the gather; positions are corrected
    /// so the particle moves with the prescribed velocity over the substep.
    fn apply_post_forces(&mut self, active: &[usize]) {
        let dt = self.dt();
        for &f in active {
            match self.forces[f].clone() {
                ForceModule::ForceParticlesTranslation { velocity, axes, .. } => {
                    for i in self.selection(f) {
                        let p = &mut self.particles[i];
                        if !p.is_dynamic() {
                            continue;
                        }
                        for a in 0..3 {
                            if axes[a] {
                                p.x[a] += dt * (velocity[a] - p.v[a]);
                                p.v[a] = velocity[a];
                            }
                        }
                    }
                }
                ForceModule::ForceParticlesRotation {
                    axis_point,
                    axis,
                    angular_speed,
                    ..
                } => {
                    let omega = Vec3::from(axis).normalize() * angular_speed;
                    let origin = Vec3::from(axis_point);
                    for i in self.selection(f) {
                        let p = &mut self.particles[i];
                        if !p.is_dynamic() {
                            continue;
                        }
                        let target = omega.cross(&(p.x - origin));
                        p.x += (target - p.v) * dt;
                        p.v = target;
                    }
                }
                _ => {}
            }
        }
    }

    fn apply_cuts(&mut self) {
        let dt = self.dt();
        for bc in &self.boundary_conditions {
            let Some(region) = bc.cut_region() else { continue };
            if !bc.is_active(self.step_index, dt) {
                continue;
            }
            for p in self.particles.iter_mut().filter(|p| p.is_dynamic()) {
                if region.contains(&p.x) {
                    p.removed = true;
                    p.v = Vec3::zeros();
                    p.stress = Mat3::zeros();
                }
            }
        }
    }

    /// Advances one substep.
    pub fn substep(&mut self) -> Result<(), SimError> {
        let dt = self.dt();
        let (frame, substep) = self.location();
        let active = self.active_forces();
        self.apply_pre_forces(&active);

        let record = self.options.record_conservation.then(|| {
            let live = self.particles.iter().filter(|p| !p.removed);
            let mass: f64 = live.clone().map(|p| p.mass).sum();
            let momentum: Vec3 = live.filter(|p| !p.frozen).map(|p| p.v * p.mass).sum();
            (mass, momentum)
        });

        self.grid.clear();
        p2g(&self.particles, &mut self.grid, dt, self.options.mode).map_err(|e| {
            SimError::ParticleOutOfDomain {
                particle: e.particle,
                position: e.position.into(),
                frame,
                substep,
            }
        })?;
        let grid_mass = record.map(|_| self.grid.total_mass());
        grid_update(
            &mut self.grid,
            &self.boundary_conditions,
            Vec3::from(self.step.gravity),
            dt,
            self.step_index,
        );
        if let (Some((pm, pp)), Some(gm)) = (record, grid_mass) {
            self.diagnostics.conservation.push(ConservationRecord {
                step: self.step_index,
                particle_mass: pm,
                grid_mass: gm,
                particle_momentum: pp,
                grid_momentum: self.grid.total_velocity_momentum(),
            });
        }

        g2p(&self.grid, &mut self.particles, dt);
        self.apply_post_forces(&active);
        self.apply_cuts();

        let h = self.grid.spec.cell_width;
        let max_speed = self
            .particles
            .par_iter()
            .filter(|p| p.is_dynamic())
            .map(|p| {
                let s = p.v.norm();
                if s.is_finite() && p.x.iter().all(|c| c.is_finite()) {
                    s
                } else {
                    f64::INFINITY
                }
            })
            .reduce(|| 0.0, f64::max);
        if !(max_speed * dt <= self.options.cfl_limit * h) {
            return Err(SimError::Unstable {
                frame,
                substep,
                reason: format!(
                    "max particle speed {max_speed:.4e} m/s exceeds the CFL bound {:.4e} m/s",
                    self.options.cfl_limit * h / dt
                ),
            });
        }

        let models = &self.models;
        let stats: ProjectStats = self
            .particles
            .par_iter_mut()
            .map(|p| {
                if p.is_dynamic() {
                    project_particle(p, &models[p.group as usize], dt)
                } else {
                    ProjectStats::default()
                }
            })
            .sum();
        if stats.non_finite > 0 {
            return Err(SimError::Unstable {
                frame,
                substep,
                reason: format!("{} deformation gradients became non-finite", stats.non_finite),
            });
        }
        self.diagnostics.det_clamps += stats.clamps;
        self.diagnostics.substeps += 1;
        self.step_index += 1;
        Ok(())
    }

    /// Runs the substeps of one frame.
    pub fn advance_frame(&mut self) -> Result<(), SimError> {
        for _ in 0..self.step.substeps_per_frame {
            self.substep()?;
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot::capture(&self.particles)
    }

    pub fn summary(&self, frame: u32) -> FrameSummary {
        FrameSummary::compute(frame, &self.particles)
    }
}

/// Output of [`simulate`].
#[derive(Debug, Clone)]
pub struct Simulation {
    pub trajectory: Trajectory,
    pub summaries: Vec<FrameSummary>,
    pub diagnostics: Diagnostics,
}

/// Runs `scene.step.frames` frames and records a snapshot after each one.
pub fn simulate(
    scene: &SceneConfig,
    params: &MaterialParams,
    options: SolverOptions,
) -> Result<Simulation, SimError> {
    let mut solver = Solver::new(scene, params, options)?;
    let mut snapshots = Vec::new();
    let mut summaries = Vec::new();
    if scene.step.frames == 0 {
        snapshots.push(solver.snapshot());
        summaries.push(solver.summary(0));
    }
    for frame in 1..=scene.step.frames {
        solver.advance_frame()?;
        snapshots.push(solver.snapshot());
        summaries.push(solver.summary(frame));
    }
    Ok(Simulation {
        trajectory: Trajectory {
            particle_count: solver.particles.len(),
            snapshots,
        },
        summaries,
        diagnostics: solver.diagnostics,
    })
}
