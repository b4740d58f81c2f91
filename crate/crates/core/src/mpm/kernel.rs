//! Quadratic B-spline interpolation stencil.

use crate::constitutive::Vec3;

/// Weights and offsets of the 3×3×3 nodes influencing one particle.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    /// Index of the lowest node of the stencil along each axis.
    pub base: [i64; 3],
    /// Per-axis weights of nodes `base + 0..3`.
    pub weights: [[f64; 3]; 3],
    /// Particle position relative to `base`, in cells.
    pub frac: Vec3,
}

impl Stencil {
    /// Stencil of a particle at `x` on a grid with node `0` at `origin` and
    /// spacing `h`.
    #[inline]
    pub fn new(x: &Vec3, origin: &Vec3, inv_h: f64) -> Self {
        let mut base = [0i64; 3];
        let mut weights = [[0.0; 3]; 3];
        let mut frac = Vec3::zeros();
        for a in 0..3 {
            let g = (x[a] - origin[a]) * inv_h;
            let b = (g - 0.5).floor();
            let fx = g - b;
            base[a] = b as i64;
            frac[a] = fx;
            weights[a] = [
                0.5 * (1.5 - fx) * (1.5 - fx),
                0.75 - (fx - 1.0) * (fx - 1.0),
                0.5 * (fx - 0.5) * (fx - 0.5),
            ];
        }
        Stencil { base, weights, frac }
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize, k: usize) -> f64 {
        self.weights[0][i] * self.weights[1][j] * self.weights[2][k]
    }

    /// `x_node − x_particle` in world units.
    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize, h: f64) -> Vec3 {
        Vec3::new(
            (i as f64 - self.frac[0]) * h,
            (j as f64 - self.frac[1]) * h,
            (k as f64 - self.frac[2]) * h,
        )
    }
}
