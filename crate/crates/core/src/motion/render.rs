//! Orthographic disc splatting of particle snapshots.

use rayon::prelude::*;

use crate::constitutive::Vec3;
use crate::mpm::Snapshot;
use crate::scene::{Camera, RenderSettings};

/// Orthographic projection derived from a [`Camera`]. Screen coordinates
/// are in pixels with `x` to the right and `y` down, origin at the top-left
/// image corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthoCamera {
    pub origin: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
    pub width: usize,
    pub height: usize,
    /// Pixels per metre.
    pub scale: f64,
}

impl OrthoCamera {
    pub fn new(cam: &Camera) -> Self {
        let origin = Vec3::from(cam.look_at);
        let forward = (origin - Vec3::from(cam.position)).normalize();
        let right = forward.cross(&Vec3::from(cam.up)).normalize();
        let up = right.cross(&forward);
        OrthoCamera {
            origin,
            right,
            up,
            forward,
            width: cam.width,
            height: cam.height,
            scale: cam.width as f64 / cam.view_width,
        }
    }

    /// Pixel position and depth along the view direction.
    pub fn project(&self, x: &Vec3) -> (f64, f64, f64) {
        let d = x - self.origin;
        (
            self.width as f64 * 0.5 + d.dot(&self.right) * self.scale,
            self.height as f64 * 0.5 - d.dot(&self.up) * self.scale,
            d.dot(&self.forward),
        )
    }

    /// World velocity in pixels per second, screen axes.
    pub fn project_velocity(&self, v: &Vec3) -> [f64; 2] {
        [v.dot(&self.right) * self.scale, -v.dot(&self.up) * self.scale]
    }
}

/// Colour image plus alpha coverage and a screen-space velocity map.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB in `[0, 1]` over a black background.
    pub color: Vec<[f32; 3]>,
    /// Accumulated disc opacity in `[0, 1]`.
    pub coverage: Vec<f32>,
    /// Blended velocity of the visible particles in pixels per second,
    /// zero where nothing projects.
    pub velocity: Vec<[f32; 2]>,
    /// Pixels per metre of the camera that produced the frame.
    pub scale: f64,
}

impl RenderedFrame {
    pub fn blank(width: usize, height: usize, scale: f64) -> Self {
        RenderedFrame {
            width,
            height,
            color: vec![[0.0; 3]; width * height],
            coverage: vec![0.0; width * height],
            velocity: vec![[0.0; 2]; width * height],
            scale,
        }
    }
}

/// Pixel rectangle whose centres can lie within `radius` of `(u, v)`.
pub(crate) fn footprint(
    u: f64,
    v: f64,
    radius: f64,
    width: usize,
    height: usize,
) -> impl Iterator<Item = usize> {
    let x0 = (u - radius - 0.5).ceil().max(0.0) as usize;
    let x1 = ((u + radius - 0.5).floor() + 1.0).clamp(0.0, width as f64) as usize;
    let y0 = (v - radius - 0.5).ceil().max(0.0) as usize;
    let y1 = ((v + radius - 0.5).floor() + 1.0).clamp(0.0, height as f64) as usize;
    let r2 = radius * radius;
    (y0..y1).flat_map(move |y| {
        (x0..x1).filter_map(move |x| {
            let dx = x as f64 + 0.5 - u;
            let dy = y as f64 + 0.5 - v;
            (dx * dx + dy * dy <= r2).then_some(y * width + x)
        })
    })
}

/// Splats every particle as a disc, farthest first, blending colour and
/// velocity with the same opacity.
pub fn render_frame(snap: &Snapshot, camera: &Camera, settings: &RenderSettings) -> RenderedFrame {
    let cam = OrthoCamera::new(camera);
    let (w, h) = (cam.width, cam.height);
    let mut frame = RenderedFrame::blank(w, h, cam.scale);
    let projected: Vec<(f64, f64, f64)> = snap
        .positions
        .iter()
        .map(|p| cam.project(&Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64)))
        .collect();
    let mut order: Vec<usize> = (0..snap.len()).collect();
    order.sort_by(|&a, &b| projected[b].2.total_cmp(&projected[a].2).then(a.cmp(&b)));

    let alpha = settings.alpha as f32;
    // Velocity is blended premultiplied and normalised by coverage at the end.
    let mut vel_acc = vec![[0.0f32; 2]; w * h];
    for i in order {
        let (u, v, _) = projected[i];
        if !(u.is_finite() && v.is_finite()) {
            continue;
        }
        let c = snap.colors[i];
        let pv = snap.velocities[i];
        let sv = cam.project_velocity(&Vec3::new(pv[0] as f64, pv[1] as f64, pv[2] as f64));
        let sv = [sv[0] as f32, sv[1] as f32];
        for px in footprint(u, v, settings.disc_radius, w, h) {
            let keep = 1.0 - alpha;
            let dst = &mut frame.color[px];
            for ch in 0..3 {
                dst[ch] = alpha * c[ch].clamp(0.0, 1.0) + keep * dst[ch];
            }
            frame.coverage[px] = alpha + keep * frame.coverage[px];
            for ch in 0..2 {
                vel_acc[px][ch] = alpha * sv[ch] + keep * vel_acc[px][ch];
            }
        }
    }
    for (px, acc) in vel_acc.iter().enumerate() {
        let a = frame.coverage[px];
        if a > 0.0 {
            frame.velocity[px] = [acc[0] / a, acc[1] / a];
        }
    }
    frame
}

/// Renders every snapshot; frames are independent and rendered in parallel.
pub fn render_trajectory(
    snapshots: &[Snapshot],
    camera: &Camera,
    settings: &RenderSettings,
) -> Vec<RenderedFrame> {
    snapshots
        .par_iter()
        .map(|s| render_frame(s, camera, settings))
        .collect()
}
