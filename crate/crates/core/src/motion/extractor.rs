//! Two-layer linear convolutional motion extractor with an EMA shadow.

use serde::{Deserialize, Serialize};

use super::features::{lmd_loss, FeatureVolume};
use super::MotionError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmdConfig {
    /// Charbonnier smoothing constant.
    pub beta: f64,
    pub weight: f64,
    pub learning_rate: f64,
    pub ema_decay: f64,
}

impl Default for LmdConfig {
    fn default() -> Self {
        LmdConfig {
            beta: 1e-3,
            weight: 1.0,
            learning_rate: 2e-5,
            ema_decay: 0.99,
        }
    }
}

/// 3×3 convolution from `channels` to `channels` with bias and zero padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub channels: usize,
    /// `[out][in][ky][kx]`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    /// Kernel whose only non-zero taps are the unit centre taps.
    pub fn identity(channels: usize) -> Self {
        let mut weight = vec![0.0; channels * channels * 9];
        for c in 0..channels {
            weight[(c * channels + c) * 9 + 4] = 1.0;
        }
        ConvLayer {
            channels,
            weight,
            bias: vec![0.0; channels],
        }
    }

    #[inline]
    fn w(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weight[((o * self.channels + i) * 3 + ky) * 3 + kx]
    }

    /// Applies the layer to one `channels × h × w` frame.
    pub fn forward_frame(&self, input: &[f64], h: usize, w: usize) -> Vec<f64> {
        let c = self.channels;
        let mut out = vec![0.0; c * h * w];
        for o in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = self.bias[o];
                    for i in 0..c {
                        for ky in 0..3 {
                            let Some(sy) = (y + ky).checked_sub(1).filter(|sy| *sy < h) else {
                                continue;
                            };
                            for kx in 0..3 {
                                let Some(sx) = (x + kx).checked_sub(1).filter(|sx| *sx < w)
                                else {
                                    continue;
                                };
                                acc += self.w(o, i, ky, kx) * input[(i * h + sy) * w + sx];
                            }
                        }
                    }
                    out[(o * h + y) * w + x] = acc;
                }
            }
        }
        out
    }

    /// Accumulates weight and bias gradients for upstream gradient
    /// `g_out` and returns the gradient with respect to the input.
    fn backward_frame(
        &self,
        input: &[f64],
        g_out: &[f64],
        h: usize,
        w: usize,
        grad: &mut ConvLayer,
    ) -> Vec<f64> {
        let c = self.channels;
        let mut g_in = vec![0.0; c * h * w];
        for o in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let g = g_out[(o * h + y) * w + x];
                    if g == 0.0 {
                        continue;
                    }
                    grad.bias[o] += g;
                    for i in 0..c {
                        for ky in 0..3 {
                            let Some(sy) = (y + ky).checked_sub(1).filter(|sy| *sy < h) else {
                                continue;
                            };
                            for kx in 0..3 {
                                let Some(sx) = (x + kx).checked_sub(1).filter(|sx| *sx < w)
                                else {
                                    continue;
                                };
                                let src = (i * h + sy) * w + sx;
                                grad.weight[((o * c + i) * 3 + ky) * 3 + kx] += g * input[src];
                                g_in[src] += self.w(o, i, ky, kx) * g;
                            }
                        }
                    }
                }
            }
        }
        g_in
    }

    fn zeros_like(&self) -> Self {
        ConvLayer {
            channels: self.channels,
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weight.iter_mut().chain(self.bias.iter_mut())
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weight.iter().chain(self.bias.iter())
    }
}

/// Two stacked [`ConvLayer`]s without a nonlinearity, plus an exponential
/// moving average of their weights used to embed targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionExtractor {
    pub layers: [ConvLayer; 2],
    pub shadow: [ConvLayer; 2],
}

fn apply(layers: &[ConvLayer; 2], z: &FeatureVolume) -> FeatureVolume {
    let mut out = z.clone();
    for l in 0..z.frames {
        let hidden = layers[0].forward_frame(z.frame(l), z.height, z.width);
        let y = layers[1].forward_frame(&hidden, z.height, z.width);
        out.frame_mut(l).copy_from_slice(&y);
    }
    out
}

impl MotionExtractor {
    /// Identity map on `channels`-channel volumes.
    pub fn identity(channels: usize) -> Self {
        let layer = ConvLayer::identity(channels);
        MotionExtractor {
            layers: [layer.clone(), layer.clone()],
            shadow: [layer.clone(), layer],
        }
    }

    pub fn channels(&self) -> usize {
        self.layers[0].channels
    }

    fn check(&self, z: &FeatureVolume) -> Result<(), MotionError> {
        if z.channels != self.channels() {
            return Err(MotionError::DimensionMismatch(format!(
                "extractor has {} channels, volume has {}",
                self.channels(),
                z.channels
            )));
        }
        Ok(())
    }

    pub fn forward(&self, z: &FeatureVolume) -> Result<FeatureVolume, MotionError> {
        self.check(z)?;
        Ok(apply(&self.layers, z))
    }

    /// Forward pass through the EMA shadow weights.
    pub fn forward_ema(&self, z: &FeatureVolume) -> Result<FeatureVolume, MotionError> {
        self.check(z)?;
        Ok(apply(&self.shadow, z))
    }

    /// Loss of `M(z_pred)` against the detached `M_ema(z_target)`.
    pub fn loss(
        &self,
        z_target: &FeatureVolume,
        z_pred: &FeatureVolume,
        cfg: &LmdConfig,
    ) -> Result<f64, MotionError> {
        lmd_loss(&self.forward(z_pred)?, &self.forward_ema(z_target)?, cfg)
    }

    /// Closed-form gradients of [`loss`](Self::loss) with respect to both
    /// layers, together with the loss value.
    pub fn gradient(
        &self,
        z_target: &FeatureVolume,
        z_pred: &FeatureVolume,
        cfg: &LmdConfig,
    ) -> Result<(f64, [ConvLayer; 2]), MotionError> {
        let target = self.forward_ema(z_target)?;
        self.check(z_pred)?;
        if target.dims() != z_pred.dims() {
            return Err(MotionError::DimensionMismatch(format!(
                "target {:?} vs prediction {:?}",
                target.dims(),
                z_pred.dims()
            )));
        }
        let (h, w) = (z_pred.height, z_pred.width);
        let mut hidden = Vec::with_capacity(z_pred.frames);
        let mut sq = 0.0;
        let mut diffs = Vec::with_capacity(z_pred.frames);
        for l in 0..z_pred.frames {
            let a = self.layers[0].forward_frame(z_pred.frame(l), h, w);
            let y = self.layers[1].forward_frame(&a, h, w);
            let d: Vec<f64> = y.iter().zip(target.frame(l)).map(|(p, t)| p - t).collect();
            sq += d.iter().map(|x| x * x).sum::<f64>();
            hidden.push(a);
            diffs.push(d);
        }
        let root = (sq + cfg.beta * cfg.beta).sqrt();
        let loss = cfg.weight * root;
        let factor = cfg.weight / root;
        let mut grads = [self.layers[0].zeros_like(), self.layers[1].zeros_like()];
        for l in 0..z_pred.frames {
            let g_y: Vec<f64> = diffs[l].iter().map(|d| d * factor).collect();
            let [g0, g1] = &mut grads;
            let g_hidden = self.layers[1].backward_frame(&hidden[l], &g_y, h, w, g1);
            self.layers[0].backward_frame(z_pred.frame(l), &g_hidden, h, w, g0);
        }
        Ok((loss, grads))
    }

    /// One gradient-descent step on the loss followed by the EMA update
    /// `shadow ← decay·shadow + (1 − decay)·weights`. Returns the loss
    /// before the step.
    pub fn train_step(
        &mut self,
        z_target: &FeatureVolume,
        z_pred: &FeatureVolume,
        cfg: &LmdConfig,
    ) -> Result<f64, MotionError> {
        let (loss, grads) = self.gradient(z_target, z_pred, cfg)?;
        for (layer, grad) in self.layers.iter_mut().zip(&grads) {
            for (p, g) in layer.params_mut().zip(grad.params()) {
                *p -= cfg.learning_rate * g;
            }
        }
        let decay = cfg.ema_decay;
        for (shadow, layer) in self.shadow.iter_mut().zip(&self.layers) {
            for (s, p) in shadow.params_mut().zip(layer.params()) {
                *s = decay * *s + (1.0 - decay) * p;
            }
        }
        Ok(loss)
    }
}
