//! Grid boundary conditions.

use serde::{Deserialize, Serialize};

use super::Aabb;
use crate::constitutive::Vec3;
use crate::mpm::Grid;

fn default_padding() -> usize {
    3
}

fn all_axes() -> [bool; 3] {
    [true; 3]
}

fn default_mode() -> ColliderMode {
    ColliderMode::Frictional
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColliderMode {
    /// `v = 0` on contact.
    Sticky,
    /// Inward normal velocity removed, tangential kept.
    Slip,
    /// Inward normal velocity removed, tangential reduced by Coulomb friction.
    Frictional,
    /// `v = 0` inside the region, and particles entering it are removed.
    Cut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    /// Half-space behind a plane; `normal` points into the free side.
    Plane { point: [f64; 3], normal: [f64; 3] },
    Box { min: [f64; 3], max: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryCondition {
    /// Keeps material `padding` cells away from the domain walls.
    BoundingBox {
        #[serde(default = "default_padding")]
        padding: usize,
        #[serde(default)]
        friction: f64,
    },
    SurfaceCollider {
        #[serde(default = "default_mode")]
        mode: ColliderMode,
        geometry: Geometry,
        #[serde(default)]
        friction: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<[f64; 2]>,
    },
    /// Prescribes node velocity on the selected axes inside a box.
    ClampGrid {
        bounds: Aabb,
        velocity: [f64; 3],
        #[serde(default = "all_axes")]
        axes: [bool; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<[f64; 2]>,
    },
}

/// Substep index range `[start, end)` covered by a window in seconds.
pub(crate) fn window_steps(window: Option<[f64; 2]>, dt: f64) -> (u64, u64) {
    match window {
        None => (0, u64::MAX),
        Some([t0, t1]) => ((t0 / dt).round() as u64, (t1 / dt).round() as u64),
    }
}

pub(crate) fn validate_window(window: Option<[f64; 2]>, duration: f64) -> Result<(), String> {
    if let Some([t0, t1]) = window {
        let tol = 1e-9 * duration.max(1.0);
        if !(t0 >= 0.0 && t0 <= t1 && t1 <= duration + tol) {
            return Err(format!(
                "time window [{t0}, {t1}] must lie within [0, {duration}]"
            ));
        }
    }
    Ok(())
}

/// Removes the inward normal component of `v` and applies Coulomb friction
/// to what is left. `n` is the unit normal pointing into the free side.
pub(crate) fn coulomb_project(v: Vec3, n: Vec3, friction: f64) -> Vec3 {
    let vn = v.dot(&n);
    if vn >= 0.0 {
        return v;
    }
    let vt = v - n * vn;
    if friction == 0.0 {
        return vt;
    }
    let t = vt.norm();
    if t == 0.0 {
        return vt;
    }
    vt * (1.0 - friction * vn.abs() / t).max(0.0)
}

impl BoundaryCondition {
    pub fn window(&self) -> Option<[f64; 2]> {
        match self {
            BoundaryCondition::BoundingBox { .. } => None,
            BoundaryCondition::SurfaceCollider { window, .. }
            | BoundaryCondition::ClampGrid { window, .. } => *window,
        }
    }

    pub fn is_active(&self, step: u64, dt: f64) -> bool {
        let (a, b) = window_steps(self.window(), dt);
        step >= a && step < b
    }

    pub(crate) fn validate(&self, duration: f64) -> Result<(), String> {
        validate_window(self.window(), duration)?;
        match self {
            BoundaryCondition::BoundingBox { friction, .. } => {
                if !(*friction >= 0.0) {
                    return Err("friction must be non-negative".into());
                }
            }
            BoundaryCondition::SurfaceCollider {
                mode,
                geometry,
                friction,
                ..
            } => {
                if !(*friction >= 0.0) {
                    return Err("friction must be non-negative".into());
                }
                if *mode == ColliderMode::Sticky && *friction != 0.0 {
                    return Err(format!(
                        "sticky collider must have zero friction (got {friction})"
                    ));
                }
                match geometry {
                    Geometry::Plane { normal, .. } => {
                        if Vec3::from(*normal).norm() == 0.0 {
                            return Err("collider plane normal must be non-zero".into());
                        }
                    }
                    Geometry::Box { min, max } => {
                        if matches!(mode, ColliderMode::Slip | ColliderMode::Frictional) {
                            return Err("slip and frictional colliders need a plane".into());
                        }
                        if (0..3).any(|a| !(min[a] <= max[a])) {
                            return Err("collider box min exceeds max".into());
                        }
                    }
                }
            }
            BoundaryCondition::ClampGrid { bounds, .. } => {
                if (0..3).any(|a| !(bounds.min[a] <= bounds.max[a])) {
                    return Err("clamp bounds min exceeds max".into());
                }
            }
        }
        Ok(())
    }

    /// Region whose particles a `cut` collider removes.
    pub(crate) fn cut_region(&self) -> Option<Geometry> {
        match self {
            BoundaryCondition::SurfaceCollider {
                mode: ColliderMode::Cut,
                geometry,
                ..
            } => Some(*geometry),
            _ => None,
        }
    }
}

impl Geometry {
    /// Whether `p` lies in the constrained region (behind or on a plane,
    /// inside a box).
    pub fn contains(&self, p: &Vec3) -> bool {
        match self {
            Geometry::Plane { point, normal } => {
                (p - Vec3::from(*point)).dot(&Vec3::from(*normal)) <= 0.0
            }
            Geometry::Box { min, max } => Aabb { min: *min, max: *max }.contains(p),
        }
    }

    fn unit_normal(&self) -> Vec3 {
        match self {
            Geometry::Plane { normal, .. } => Vec3::from(*normal).normalize(),
            Geometry::Box { .. } => Vec3::zeros(),
        }
    }
}

/// Applies one boundary condition to every massive node of `grid` at
/// substep `step`. Inactive conditions leave the grid untouched.
pub fn apply_boundary(bc: &BoundaryCondition, grid: &mut Grid, step: u64, dt: f64) {
    if !bc.is_active(step, dt) {
        return;
    }
    let eps = grid.spec.mass_epsilon;
    let res = grid.spec.resolution;
    match bc {
        BoundaryCondition::BoundingBox { padding, friction } => {
            let pad = *padding;
            grid.for_each_active(|idx, _, node| {
                if node.mass <= eps {
                    return;
                }
                for a in 0..3 {
                    let mut n = Vec3::zeros();
                    if idx[a] < pad {
                        n[a] = 1.0;
                    } else if idx[a] + pad > res[a] {
                        n[a] = -1.0;
                    } else {
                        continue;
                    }
                    node.velocity = coulomb_project(node.velocity, n, *friction);
                }
            });
        }
        BoundaryCondition::SurfaceCollider {
            mode,
            geometry,
            friction,
            ..
        } => {
            let n = geometry.unit_normal();
            grid.for_each_active(|_, pos, node| {
                if node.mass <= eps || !geometry.contains(&pos) {
                    return;
                }
                node.velocity = match mode {
                    ColliderMode::Sticky | ColliderMode::Cut => Vec3::zeros(),
                    ColliderMode::Slip => coulomb_project(node.velocity, n, 0.0),
                    ColliderMode::Frictional => coulomb_project(node.velocity, n, *friction),
                };
            });
        }
        BoundaryCondition::ClampGrid {
            bounds,
            velocity,
            axes,
            ..
        } => {
            grid.for_each_active(|_, pos, node| {
                if node.mass <= eps || !bounds.contains(&pos) {
                    return;
                }
                for a in 0..3 {
                    if axes[a] {
                        node.velocity[a] = velocity[a];
                    }
                }
            });
        }
    }
}
