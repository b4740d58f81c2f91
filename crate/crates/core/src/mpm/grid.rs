//! Uniform background grid.

use serde::{Deserialize, Serialize};

use crate::constitutive::Vec3;

/// Resolution and placement of the background grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Cells per axis.
    pub resolution: [usize; 3],
    /// Cell width in metres.
    pub cell_width: f64,
    /// World position of node `(0, 0, 0)`.
    pub origin: [f64; 3],
    /// Nodes lighter than this (kg) get no velocity.
    pub mass_epsilon: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            resolution: [64; 3],
            cell_width: 1.0 / 64.0,
            origin: [0.0; 3],
            mass_epsilon: 1e-12,
        }
    }
}

impl GridSpec {
    pub fn cube(resolution: usize, extent: f64) -> Self {
        GridSpec {
            resolution: [resolution; 3],
            cell_width: extent / resolution as f64,
            ..GridSpec::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.resolution.iter().any(|&r| r < 8) {
            return Err(format!("grid resolution {:?} must be at least 8 per axis", self.resolution));
        }
        if !(self.cell_width > 0.0 && self.cell_width.is_finite()) {
            return Err(format!("grid cell width {} must be positive", self.cell_width));
        }
        if !(self.mass_epsilon >= 0.0) {
            return Err("grid mass epsilon must be non-negative".into());
        }
        Ok(())
    }

    pub fn origin(&self) -> Vec3 {
        Vec3::from(self.origin)
    }

    /// World-space upper corner of the domain.
    pub fn upper(&self) -> Vec3 {
        Vec3::new(
            self.origin[0] + self.resolution[0] as f64 * self.cell_width,
            self.origin[1] + self.resolution[1] as f64 * self.cell_width,
            self.origin[2] + self.resolution[2] as f64 * self.cell_width,
        )
    }

    /// Number of nodes per axis (`resolution + 1`).
    pub fn nodes(&self) -> [usize; 3] {
        [self.resolution[0] + 1, self.resolution[1] + 1, self.resolution[2] + 1]
    }

    pub fn node_count(&self) -> usize {
        self.nodes().iter().product()
    }
}

/// Mass and momentum accumulated at a node, plus the velocity derived from
/// them during the grid update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GridNode {
    pub mass: f64,
    pub momentum: Vec3,
    pub velocity: Vec3,
}

/// Dense node storage with a tracked active box.
#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: GridSpec,
    pub nodes: Vec<GridNode>,
    dims: [usize; 3],
    /// Inclusive node-index box touched since the last clear.
    active: Option<([usize; 3], [usize; 3])>,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Self {
        let dims = spec.nodes();
        Grid {
            nodes: vec![GridNode::default(); spec.node_count()],
            spec,
            dims,
            active: None,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let h = self.spec.cell_width;
        self.spec.origin() + Vec3::new(i as f64 * h, j as f64 * h, k as f64 * h)
    }

    /// Zeros every node touched since the previous clear.
    pub fn clear(&mut self) {
        if let Some((lo, hi)) = self.active.take() {
            for i in lo[0]..=hi[0] {
                for j in lo[1]..=hi[1] {
                    let start = self.index(i, j, lo[2]);
                    let end = self.index(i, j, hi[2]);
                    self.nodes[start..=end].fill(GridNode::default());
                }
            }
        }
    }

    pub(crate) fn mark_active(&mut self, lo: [usize; 3], hi: [usize; 3]) {
        self.active = Some(match self.active {
            None => (lo, hi),
            Some((a, b)) => (
                [a[0].min(lo[0]), a[1].min(lo[1]), a[2].min(lo[2])],
                [b[0].max(hi[0]), b[1].max(hi[1]), b[2].max(hi[2])],
            ),
        });
    }

    pub fn active_box(&self) -> Option<([usize; 3], [usize; 3])> {
        self.active
    }

    /// Calls `f` for every node in the active box.
    pub fn for_each_active(&mut self, mut f: impl FnMut([usize; 3], Vec3, &mut GridNode)) {
        let Some((lo, hi)) = self.active else { return };
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    let idx = self.index(i, j, k);
                    let pos = self.node_position(i, j, k);
                    f([i, j, k], pos, &mut self.nodes[idx]);
                }
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.mass).sum()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.nodes.iter().map(|n| n.momentum).sum()
    }

    /// `Σ mᵢ vᵢ` over nodes with a velocity.
    pub fn total_velocity_momentum(&self) -> Vec3 {
        self.nodes
            .iter()
            .filter(|n| n.mass > self.spec.mass_epsilon)
            .map(|n| n.velocity * n.mass)
            .sum()
    }
}
