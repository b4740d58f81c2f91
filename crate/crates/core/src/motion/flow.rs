//! Exact screen-space flow between snapshots and the flow-based motion score.

use rayon::prelude::*;

use super::render::{footprint, OrthoCamera};
use crate::constitutive::Vec3;
use crate::mpm::Snapshot;
use crate::scene::{Camera, RenderSettings};

/// Lower bound on the total flow magnitude in the score's inverse term.
pub const ECMS_GUARD: f64 = 1e-6;

/// Per-pixel displacement in pixels between two frames, screen axes.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 2]>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            data: vec![[0.0; 2]; width * height],
        }
    }

    pub fn at(&self, x: usize, y: usize) -> [f64; 2] {
        self.data[y * self.width + x]
    }

    /// Frobenius norm over all pixels and both channels.
    pub fn norm(&self) -> f64 {
        self.data
            .iter()
            .map(|f| f[0] * f[0] + f[1] * f[1])
            .sum::<f64>()
            .sqrt()
    }

    /// Squared norm of the 5-point Laplacian, edges replicated.
    pub fn laplacian_energy(&self) -> f64 {
        let (w, h) = (self.width, self.height);
        let mut total = 0.0;
        for y in 0..h {
            for x in 0..w {
                let c = self.at(x, y);
                let l = self.at(x.saturating_sub(1), y);
                let r = self.at((x + 1).min(w - 1), y);
                let u = self.at(x, y.saturating_sub(1));
                let d = self.at(x, (y + 1).min(h - 1));
                for ch in 0..2 {
                    let lap = l[ch] + r[ch] + u[ch] + d[ch] - 4.0 * c[ch];
                    total += lap * lap;
                }
            }
        }
        total
    }
}

fn flow_between(a: &Snapshot, b: &Snapshot, cam: &OrthoCamera, radius: f64) -> FlowField {
    let (w, h) = (cam.width, cam.height);
    let mut sum = vec![[0.0f64; 2]; w * h];
    let mut count = vec![0u32; w * h];
    let to_vec = |p: &[f32; 3]| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64);
    for (pa, pb) in a.positions.iter().zip(&b.positions) {
        let (u0, v0, _) = cam.project(&to_vec(pa));
        let (u1, v1, _) = cam.project(&to_vec(pb));
        let d = [u1 - u0, v1 - v0];
        if !(u0.is_finite() && v0.is_finite() && d[0].is_finite() && d[1].is_finite()) {
            continue;
        }
        for px in footprint(u0, v0, radius, w, h) {
            sum[px][0] += d[0];
            sum[px][1] += d[1];
            count[px] += 1;
        }
    }
    let mut flow = FlowField::zeros(w, h);
    for px in 0..w * h {
        if count[px] > 0 {
            let n = count[px] as f64;
            flow.data[px] = [sum[px][0] / n, sum[px][1] / n];
        }
    }
    flow
}

/// Flow from each snapshot to the next: the mean screen displacement of the
/// particles whose disc covers a pixel in the earlier frame.
pub fn flow_from_snapshots(
    snapshots: &[Snapshot],
    camera: &Camera,
    settings: &RenderSettings,
) -> Vec<FlowField> {
    let cam = OrthoCamera::new(camera);
    snapshots
        .par_windows(2)
        .map(|pair| flow_between(&pair[0], &pair[1], &cam, settings.disc_radius))
        .collect()
}

/// `1 / max(Σ‖F‖, guard) + Σ‖F_l − F_{l−1}‖² + Σ‖∇²F_l‖²`.
pub fn ecms(flows: &[FlowField], guard: f64) -> f64 {
    let magnitude: f64 = flows.iter().map(FlowField::norm).sum();
    let temporal: f64 = flows
        .windows(2)
        .map(|p| {
            p[1].data
                .iter()
                .zip(&p[0].data)
                .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
                .sum::<f64>()
        })
        .sum();
    let spatial: f64 = flows.iter().map(FlowField::laplacian_energy).sum();
    1.0 / magnitude.max(guard) + temporal + spatial
}
