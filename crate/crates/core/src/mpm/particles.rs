//! Particle state and particle sources.

use std::io::{BufRead, BufReader};

use crate::constitutive::{Mat3, Vec3};
use crate::material::{MaterialError, MaterialParams};
use crate::scene::{ObjectSpec, ParticleSource, SceneConfig, SceneError};

use super::model::MaterialModel;

/// One material point.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub x: Vec3,
    pub v: Vec3,
    pub mass: f64,
    /// Reference volume `V₀ = m/ρ`.
    pub volume: f64,
    /// Affine velocity matrix.
    pub c: Mat3,
    /// Elastic deformation gradient.
    pub fe: Mat3,
    pub plastic_strain: f64,
    pub color: Vec3,
    pub group: u32,
    /// Held in place, massive but inert, until released.
    pub frozen: bool,
    /// Removed by a `cut` collider; ignored by every transfer.
    pub removed: bool,
    /// Kirchhoff stress of the current `fe`, scattered by the next transfer.
    pub stress: Mat3,
}

impl ParticleState {
    pub fn new(x: Vec3, mass: f64, volume: f64) -> Self {
        ParticleState {
            x,
            v: Vec3::zeros(),
            mass,
            volume,
            c: Mat3::zeros(),
            fe: Mat3::identity(),
            plastic_strain: 0.0,
            color: Vec3::repeat(0.8),
            group: 0,
            frozen: false,
            removed: false,
            stress: Mat3::zeros(),
        }
    }

    /// Participates in transfers with its own velocity and stress.
    #[inline]
    pub fn is_dynamic(&self) -> bool {
        !self.frozen && !self.removed
    }
}

/// Lattice points filling `[min, max]` at roughly `count` points.
fn box_lattice(min: [f64; 3], max: [f64; 3], count: usize) -> Vec<Vec3> {
    let extent: [f64; 3] = std::array::from_fn(|a| max[a] - min[a]);
    let volume: f64 = extent.iter().product();
    let spacing = (volume / count as f64).cbrt();
    let n: [usize; 3] = std::array::from_fn(|a| ((extent[a] / spacing).round() as usize).max(1));
    let mut out = Vec::with_capacity(n.iter().product());
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let idx = [i, j, k];
                out.push(Vec3::from_fn(|a, _| {
                    min[a] + (idx[a] as f64 + 0.5) * extent[a] / n[a] as f64
                }));
            }
        }
    }
    out
}

fn sphere_lattice(center: [f64; 3], radius: f64, count: usize) -> Vec<Vec3> {
    let volume = 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3);
    let spacing = (volume / count as f64).cbrt();
    let n = ((2.0 * radius / spacing).round() as usize).max(1);
    let c = Vec3::from(center);
    let lo = c - Vec3::repeat(radius);
    let step = 2.0 * radius / n as f64;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let p = lo + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * step;
                if (p - c).norm() <= radius {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Reads `x y z [r g b]` lines.
pub fn read_particle_file(
    reader: impl std::io::Read,
) -> Result<Vec<(Vec3, Option<Vec3>)>, String> {
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let vals: Vec<f64> = body
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        match vals.len() {
            3 => out.push((Vec3::new(vals[0], vals[1], vals[2]), None)),
            6 => out.push((
                Vec3::new(vals[0], vals[1], vals[2]),
                Some(Vec3::new(vals[3], vals[4], vals[5])),
            )),
            n => return Err(format!("line {}: expected 3 or 6 numbers, found {n}", lineno + 1)),
        }
    }
    Ok(out)
}

fn object_points(
    scene: &SceneConfig,
    obj: &ObjectSpec,
) -> Result<(Vec<(Vec3, Option<Vec3>)>, f64), SceneError> {
    Ok(match &obj.source {
        ParticleSource::Box { min, max } => {
            let vol = (0..3).map(|a| max[a] - min[a]).product();
            (box_lattice(*min, *max, obj.count).into_iter().map(|p| (p, None)).collect(), vol)
        }
        ParticleSource::Sphere { center, radius } => {
            let vol = 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3);
            let pts = sphere_lattice(*center, *radius, obj.count);
            (pts.into_iter().map(|p| (p, None)).collect(), vol)
        }
        ParticleSource::File { path } => {
            let full = scene.resolve_path(path);
            let file = std::fs::File::open(&full).map_err(|source| SceneError::Io {
                path: full.clone(),
                source,
            })?;
            let pts = read_particle_file(file)
                .map_err(|m| SceneError::Validation(format!("{}: {m}", full.display())))?;
            if pts.is_empty() {
                return Err(SceneError::Validation(format!(
                    "{}: no particles",
                    full.display()
                )));
            }
            let vol = obj.volume.unwrap_or_else(|| {
                let mut lo = Vec3::repeat(f64::INFINITY);
                let mut hi = Vec3::repeat(f64::NEG_INFINITY);
                for (p, _) in &pts {
                    lo = lo.inf(p);
                    hi = hi.sup(p);
                }
                (hi - lo).iter().map(|e| e.max(1e-9)).product()
            });
            (pts, vol)
        }
    })
}

/// Builds every object's particles and the material model of each group.
/// Group ids are object indices; `params` applies to objects without their
/// own material.
pub fn build_particles(
    scene: &SceneConfig,
    params: &MaterialParams,
) -> Result<(Vec<ParticleState>, Vec<MaterialModel>), SceneError> {
    let mut particles = Vec::new();
    let mut models = Vec::with_capacity(scene.objects.len());
    for (g, obj) in scene.objects.iter().enumerate() {
        let mp = obj.material.as_ref().unwrap_or(params);
        let model = MaterialModel::new(mp, scene.modulus_scale)?;
        let (points, volume) = object_points(scene, obj)?;
        let per_volume = volume / points.len() as f64;
        let mass = mp.density * per_volume;
        if !(mass > 0.0) {
            return Err(SceneError::Material(MaterialError::NonFinite {
                field: crate::material::Param::Density,
                value: mp.density,
            }));
        }
        for (x, color) in points {
            let mut p = ParticleState::new(x, mass, per_volume);
            p.v = Vec3::from(obj.velocity);
            p.color = color.unwrap_or(Vec3::from(obj.color));
            p.group = g as u32;
            p.frozen = obj.frozen;
            if p.frozen {
                p.v = Vec3::zeros();
            }
            particles.push(p);
        }
        models.push(model);
    }
    Ok((particles, models))
}
