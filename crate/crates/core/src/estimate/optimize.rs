//! Frame boosting, the distillation loss as a function of the scaled
//! coefficients, central-difference gradients and the Adam loop.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::backend::TranscriptEntry;
use crate::material::{
    range_of, scale_value, scaled_bounds, unscale_value, ClampEvent, MaterialClass, MaterialError,
    MaterialParams, ParamRange,
};
use crate::motion::{
    encode_motion_features, render_trajectory, FeatureVolume, LmdConfig, MotionError,
    MotionExtractor,
};
use crate::mpm::{simulate, SimError, SolverOptions, Snapshot, Trajectory};
use crate::scene::{perturb_particles, SceneConfig};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error("reference trajectory: {0}")]
    Reference(String),
    #[error("initial parameters are unstable: {0}")]
    Unstable(String),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Finite-difference step in scaled coordinates.
    pub fd_step: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    /// Number of interleaved frame subsequences.
    pub boost: usize,
    /// Keep only the first this-many frames of each subsequence.
    pub subsequence_len: Option<usize>,
    /// Stop when the loss changes by less than this fraction over
    /// `plateau_window` iterations.
    pub plateau_tolerance: f64,
    pub plateau_window: usize,
    pub lmd: LmdConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iterations: 40,
            fd_step: 0.05,
            learning_rate: 0.2,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            boost: 8,
            subsequence_len: None,
            plateau_tolerance: 1e-4,
            plateau_window: 5,
            lmd: LmdConfig::default(),
        }
    }
}

/// Splits frames `1..=n` into `m` interleaved lists `{i, i+m, i+2m, …}`.
pub fn frame_boost_subsequences(n: usize, m: usize) -> Vec<Vec<usize>> {
    (1..=m).map(|i| (i..=n).step_by(m.max(1)).collect()).collect()
}

/// The optimised coefficients of one class and the fixed density.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpace {
    pub class: MaterialClass,
    pub density: f64,
    pub ranges: Vec<ParamRange>,
}

impl ParamSpace {
    /// Space of `params`' class coefficients and their scaled coordinates.
    pub fn new(params: &MaterialParams) -> Result<(Self, Vec<f64>), MaterialError> {
        params.validate_fields()?;
        let ranges: Vec<ParamRange> = params
            .class
            .coefficients()
            .iter()
            .map(|p| range_of(params.class, *p).expect("class coefficient has a range"))
            .collect();
        let coords = ranges
            .iter()
            .map(|r| scale_value(r, params.get(r.param).expect("validated")))
            .collect();
        Ok((
            ParamSpace {
                class: params.class,
                density: params.density,
                ranges,
            },
            coords,
        ))
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.ranges.iter().map(scaled_bounds).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.ranges.iter().map(|r| r.param.key().to_string()).collect()
    }

    pub fn unscale(&self, coords: &[f64]) -> MaterialParams {
        let mut p = MaterialParams::new(self.class, self.density);
        for (r, c) in self.ranges.iter().zip(coords) {
            p.set(r.param, Some(unscale_value(r, *c)));
        }
        p
    }

    /// Projects `coords` onto the box, reporting each moved coordinate in
    /// physical units.
    pub fn clamp(&self, coords: &mut [f64]) -> Vec<ClampEvent> {
        let mut events = Vec::new();
        for ((c, r), (lo, hi)) in coords.iter_mut().zip(&self.ranges).zip(self.bounds()) {
            let clamped = c.clamp(lo, hi);
            if clamped != *c {
                events.push(ClampEvent {
                    field: r.param,
                    original: unscale_value(r, *c),
                    clamped: unscale_value(r, clamped),
                });
                *c = clamped;
            }
        }
        events
    }
}

/// Perturbs, renders and encodes snapshots with the scene's camera and
/// perturbation settings.
pub fn features_of(snapshots: &[Snapshot], scene: &SceneConfig) -> Result<FeatureVolume, MotionError> {
    let perturbed: Vec<Snapshot> = snapshots
        .iter()
        .map(|s| perturb_particles(s, &scene.perturb))
        .collect();
    let frames = render_trajectory(&perturbed, &scene.camera, &scene.render);
    encode_motion_features(&frames, scene.render.velocity_scale)
}

/// Outcome of one loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// `+∞` when the simulation failed.
    pub loss: f64,
    /// Why the simulation failed, if it did.
    pub unstable: Option<String>,
    /// Encoded features of the simulated subsequence.
    pub features: Option<FeatureVolume>,
}

impl Evaluation {
    fn failed(reason: String) -> Self {
        Evaluation {
            loss: f64::INFINITY,
            unstable: Some(reason),
            features: None,
        }
    }
}

/// Everything the loss needs besides the coefficients.
#[derive(Debug, Clone)]
pub struct LossContext {
    pub scene: SceneConfig,
    pub space: ParamSpace,
    /// Reference features of frames `1..=N`, frame `j` at index `j − 1`.
    pub target: FeatureVolume,
    pub extractor: MotionExtractor,
    pub lmd: LmdConfig,
    pub options: SolverOptions,
}

impl LossContext {
    pub fn new(
        scene: &SceneConfig,
        space: ParamSpace,
        reference: &Trajectory,
        lmd: LmdConfig,
        options: SolverOptions,
    ) -> Result<Self, EstimateError> {
        if reference.snapshots.is_empty() {
            return Err(EstimateError::Reference("no snapshots".into()));
        }
        let n = reference.snapshots.len().min(scene.step.frames as usize);
        if n == 0 {
            return Err(EstimateError::Reference("scene simulates zero frames".into()));
        }
        let target = features_of(&reference.snapshots[..n], scene)?;
        Ok(LossContext {
            scene: scene.clone(),
            space,
            extractor: MotionExtractor::identity(target.channels),
            target,
            lmd,
            options,
        })
    }

    /// Number of supervised frames.
    pub fn frames(&self) -> usize {
        self.target.frames
    }

    /// Simulates up to the last frame of `frames` (1-based) and encodes
    /// those frames.
    pub fn predict(&self, params: &MaterialParams, frames: &[usize]) -> Result<FeatureVolume, String> {
        let last = frames.iter().copied().max().unwrap_or(0);
        let mut scene = self.scene.clone();
        scene.step.frames = last as u32;
        let sim = simulate(&scene, params, self.options.clone()).map_err(|e| e.to_string())?;
        let picked: Vec<Snapshot> = frames
            .iter()
            .map(|j| sim.trajectory.snapshots[j - 1].clone())
            .collect();
        features_of(&picked, &scene).map_err(|e| e.to_string())
    }

    pub fn target_frames(&self, frames: &[usize]) -> FeatureVolume {
        let idx: Vec<usize> = frames.iter().map(|j| j - 1).collect();
        self.target.select_frames(&idx)
    }
}

/// Distillation loss of the scaled coefficients on one subsequence:
/// `lmd(M(pred), M_ema(target))`. Out-of-box coordinates are clamped first;
/// failed simulations give `+∞`.
pub fn loss_for_params(ctx: &LossContext, coords: &[f64], frames: &[usize]) -> Evaluation {
    let mut c = coords.to_vec();
    ctx.space.clamp(&mut c);
    let params = ctx.space.unscale(&c);
    let pred = match ctx.predict(&params, frames) {
        Ok(p) => p,
        Err(reason) => return Evaluation::failed(reason),
    };
    match ctx.extractor.loss(&ctx.target_frames(frames), &pred, &ctx.lmd) {
        Ok(loss) if loss.is_finite() => Evaluation {
            loss,
            unstable: None,
            features: Some(pred),
        },
        Ok(loss) => Evaluation::failed(format!("non-finite loss {loss}")),
        Err(e) => Evaluation::failed(e.to_string()),
    }
}

/// Central-difference gradient and the samples it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct FdGradient {
    pub gradient: Vec<f64>,
    /// Loss at `θ + hᵢeᵢ` and `θ − hᵢeᵢ` per coordinate.
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    pub evaluations: usize,
}

/// `gᵢ = (L(θ + h eᵢ) − L(θ − h eᵢ)) / 2h`, with the offsets cut at
/// `bounds`. When one side is infinite the other side and `center` give a
/// one-sided difference; when both are, the component is zero. The `2·dim`
/// evaluations run concurrently.
pub fn fd_gradient<F>(
    loss: F,
    theta: &[f64],
    h: f64,
    bounds: &[(f64, f64)],
    center: Option<f64>,
) -> FdGradient
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = theta.len();
    let points: Vec<(usize, f64)> = (0..dim)
        .flat_map(|i| {
            let (lo, hi) = bounds.get(i).copied().unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
            [(i, (theta[i] + h).min(hi)), (i, (theta[i] - h).max(lo))]
        })
        .collect();
    let values: Vec<f64> = points
        .par_iter()
        .map(|&(i, x)| {
            let mut p = theta.to_vec();
            p[i] = x;
            loss(&p)
        })
        .collect();
    let mut gradient = vec![0.0; dim];
    let mut plus = vec![0.0; dim];
    let mut minus = vec![0.0; dim];
    for i in 0..dim {
        let (xp, xm) = (points[2 * i].1, points[2 * i + 1].1);
        let (lp, lm) = (values[2 * i], values[2 * i + 1]);
        plus[i] = lp;
        minus[i] = lm;
        let c = center.filter(|c| c.is_finite());
        gradient[i] = match (lp.is_finite(), lm.is_finite(), c) {
            (true, true, _) if xp > xm => (lp - lm) / (xp - xm),
            (true, false, Some(c)) if xp > theta[i] => (lp - c) / (xp - theta[i]),
            (false, true, Some(c)) if theta[i] > xm => (c - lm) / (theta[i] - xm),
            _ => 0.0,
        };
    }
    FdGradient {
        gradient,
        plus,
        minus,
        evaluations: points.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    Plateau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub initial_params: MaterialParams,
    pub final_params: MaterialParams,
    /// Names of the optimised coefficients, in trace order.
    pub parameters: Vec<String>,
    /// Loss at the start of each accepted iteration.
    pub loss_trace: Vec<f64>,
    /// Physical coefficient values at the start of each accepted iteration.
    pub parameter_trace: Vec<Vec<f64>>,
    /// Subsequence supervised by each accepted iteration.
    pub subsequence_trace: Vec<usize>,
    /// Loss of the final parameters on the first subsequence.
    pub final_loss: Option<f64>,
    pub clamp_events: Vec<ClampEvent>,
    /// Iterations whose parameters failed to simulate and were rolled back.
    pub rejected_iterations: Vec<usize>,
    pub evaluations: usize,
    pub stop_reason: StopReason,
    pub wall_time_seconds: f64,
    pub transcript: Vec<TranscriptEntry>,
}

/// Adam on central-difference gradients in scaled space.
///
/// A coordinate whose two difference samples both lie at or above the
/// current loss is bracketed: the minimum along it is within one step, so
/// its gradient and first moment are zeroed rather than chasing noise. A
/// step that lands on unsimulatable parameters is rolled back and the
/// learning rate halved.
pub fn optimize(
    scene: &SceneConfig,
    init: &MaterialParams,
    reference: &Trajectory,
    cfg: &OptimizerConfig,
    options: SolverOptions,
) -> Result<EstimationReport, EstimateError> {
    let start = Instant::now();
    let (space, mut theta) = ParamSpace::new(init)?;
    let mut clamp_events = space.clamp(&mut theta);
    let initial_params = space.unscale(&theta);
    let mut ctx = LossContext::new(scene, space, reference, cfg.lmd, options)?;
    let groups: Vec<Vec<usize>> = frame_boost_subsequences(ctx.frames(), cfg.boost.max(1))
        .into_iter()
        .map(|mut g| {
            if let Some(len) = cfg.subsequence_len {
                g.truncate(len.max(1));
            }
            g
        })
        .filter(|g| !g.is_empty())
        .collect();
    let bounds = ctx.space.bounds();
    let dim = ctx.space.dim();
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut lr = cfg.learning_rate;
    let mut adam_t = 0i32;
    let mut report = EstimationReport {
        initial_params: initial_params.clone(),
        final_params: initial_params,
        parameters: ctx.space.names(),
        loss_trace: Vec::new(),
        parameter_trace: Vec::new(),
        subsequence_trace: Vec::new(),
        final_loss: None,
        clamp_events: Vec::new(),
        rejected_iterations: Vec::new(),
        evaluations: 0,
        stop_reason: StopReason::MaxIterations,
        wall_time_seconds: 0.0,
        transcript: Vec::new(),
    };
    let mut previous: Option<Vec<f64>> = None;

    for iter in 0..cfg.max_iterations {
        let group_index = iter % groups.len();
        let frames = &groups[group_index];
        let center = loss_for_params(&ctx, &theta, frames);
        report.evaluations += 1;
        if let Some(reason) = &center.unstable {
            match previous.take() {
                Some(prev) => {
                    theta = prev;
                    lr *= 0.5;
                    m.iter_mut().for_each(|x| *x = 0.0);
                    report.rejected_iterations.push(iter);
                    continue;
                }
                None => return Err(EstimateError::Unstable(reason.clone())),
            }
        }
        report.loss_trace.push(center.loss);
        report
            .parameter_trace
            .push(ctx.space.unscale(&theta).values(&ctx.space.ranges));
        report.subsequence_trace.push(group_index);

        let t = report.loss_trace.len() - 1;
        if t >= cfg.plateau_window {
            let old = report.loss_trace[t - cfg.plateau_window];
            if (center.loss - old).abs() <= cfg.plateau_tolerance * old.abs() {
                report.stop_reason = StopReason::Plateau;
                break;
            }
        }

        let fd = fd_gradient(
            |p| loss_for_params(&ctx, p, frames).loss,
            &theta,
            cfg.fd_step,
            &bounds,
            Some(center.loss),
        );
        report.evaluations += fd.evaluations;
        adam_t += 1;
        let mut next = theta.clone();
        for i in 0..dim {
            let bracketed = fd.plus[i] >= center.loss && fd.minus[i] >= center.loss;
            let g = if bracketed { 0.0 } else { fd.gradient[i] };
            if bracketed {
                m[i] = 0.0;
            }
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / (1.0 - cfg.beta1.powi(adam_t));
            let v_hat = v[i] / (1.0 - cfg.beta2.powi(adam_t));
            next[i] -= lr * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
        }
        clamp_events.extend(ctx.space.clamp(&mut next));

        if let Some(pred) = &center.features {
            let target = ctx.target_frames(frames);
            ctx.extractor.train_step(&target, pred, &cfg.lmd)?;
        }
        previous = Some(std::mem::replace(&mut theta, next));
    }

    report.final_params = ctx.space.unscale(&theta);
    if cfg.max_iterations > 0 {
        let last = loss_for_params(&ctx, &theta, &groups[0]);
        report.evaluations += 1;
        report.final_loss = last.loss.is_finite().then_some(last.loss);
    }
    report.clamp_events = clamp_events;
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}
