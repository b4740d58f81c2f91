//! Pooled motion features and the Charbonnier distillation loss.

use super::extractor::LmdConfig;
use super::render::RenderedFrame;
use super::MotionError;

/// Side of the square pixel block pooled into one feature cell.
pub const FEATURE_CELL: usize = 8;

/// Dense `frames × channels × height × width` tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    pub frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureVolume {
    pub fn zeros(frames: usize, channels: usize, height: usize, width: usize) -> Self {
        FeatureVolume {
            frames,
            channels,
            height,
            width,
            data: vec![0.0; frames * channels * height * width],
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.frames, self.channels, self.height, self.width]
    }

    #[inline]
    pub fn index(&self, l: usize, c: usize, y: usize, x: usize) -> usize {
        ((l * self.channels + c) * self.height + y) * self.width + x
    }

    pub fn get(&self, l: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(l, c, y, x)]
    }

    /// One frame's `channels × height × width` slice.
    pub fn frame(&self, l: usize) -> &[f64] {
        let n = self.channels * self.height * self.width;
        &self.data[l * n..(l + 1) * n]
    }

    pub fn frame_mut(&mut self, l: usize) -> &mut [f64] {
        let n = self.channels * self.height * self.width;
        &mut self.data[l * n..(l + 1) * n]
    }

    /// The listed frames, in the given order.
    pub fn select_frames(&self, frames: &[usize]) -> Self {
        let mut out = FeatureVolume::zeros(frames.len(), self.channels, self.height, self.width);
        for (dst, &src) in frames.iter().enumerate() {
            out.frame_mut(dst).copy_from_slice(self.frame(src));
        }
        out
    }
}

/// Per frame: mean coverage of each 8×8 block, then the block-mean screen
/// velocity in units of `velocity_scale` m/s. Colour is never read.
pub fn encode_motion_features(
    frames: &[RenderedFrame],
    velocity_scale: f64,
) -> Result<FeatureVolume, MotionError> {
    let first = frames.first().ok_or(MotionError::Empty)?;
    let (w, h) = (first.width, first.height);
    if w % FEATURE_CELL != 0 || h % FEATURE_CELL != 0 {
        return Err(MotionError::DimensionMismatch(format!(
            "frame {w}x{h} is not a multiple of {FEATURE_CELL}"
        )));
    }
    if let Some((i, f)) = frames
        .iter()
        .enumerate()
        .find(|(_, f)| f.width != w || f.height != h)
    {
        return Err(MotionError::DimensionMismatch(format!(
            "frame {i} is {}x{}, expected {w}x{h}",
            f.width, f.height
        )));
    }
    let (fw, fh) = (w / FEATURE_CELL, h / FEATURE_CELL);
    let mut vol = FeatureVolume::zeros(frames.len(), 3, fh, fw);
    let cell_area = (FEATURE_CELL * FEATURE_CELL) as f64;
    for (l, f) in frames.iter().enumerate() {
        let to_features = 1.0 / (f.scale * velocity_scale);
        for cy in 0..fh {
            for cx in 0..fw {
                let mut sums = [0.0f64; 3];
                for y in cy * FEATURE_CELL..(cy + 1) * FEATURE_CELL {
                    for x in cx * FEATURE_CELL..(cx + 1) * FEATURE_CELL {
                        let px = y * w + x;
                        sums[0] += f.coverage[px] as f64;
                        sums[1] += f.velocity[px][0] as f64;
                        sums[2] += f.velocity[px][1] as f64;
                    }
                }
                let o = vol.index(l, 0, cy, cx);
                vol.data[o] = sums[0] / cell_area;
                let o = vol.index(l, 1, cy, cx);
                vol.data[o] = sums[1] / cell_area * to_features;
                let o = vol.index(l, 2, cy, cx);
                vol.data[o] = sums[2] / cell_area * to_features;
            }
        }
    }
    Ok(vol)
}

/// `w · sqrt(‖pred − target‖² + β²)` over the whole volume.
pub fn lmd_loss(
    pred: &FeatureVolume,
    target: &FeatureVolume,
    cfg: &LmdConfig,
) -> Result<f64, MotionError> {
    if pred.dims() != target.dims() {
        return Err(MotionError::DimensionMismatch(format!(
            "prediction {:?} vs target {:?}",
            pred.dims(),
            target.dims()
        )));
    }
    let sq: f64 = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(cfg.weight * (sq + cfg.beta * cfg.beta).sqrt())
}
