//! Gaussian jitter of particle positions and colours used to augment the
//! frames fed to the motion loss.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::mpm::Snapshot;
use crate::rng;

/// Stream id reserved for perturbation noise.
const PERTURB_STREAM: u64 = 0x5045_5254;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbConfig {
    /// Standard deviation of the position jitter in metres; colours get
    /// twice this.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            epsilon: 0.1,
            seed: 0,
        }
    }
}

/// Returns a jittered copy: `x + ε·n` and `clamp(c + 2ε·n', 0, 1)` with
/// independent standard normals per particle and axis. The noise depends
/// only on `cfg.seed` and the particle index, so every snapshot perturbed
/// with one config receives the same offsets.
pub fn perturb_particles(snapshot: &Snapshot, cfg: &PerturbConfig) -> Snapshot {
    let mut out = snapshot.clone();
    if cfg.epsilon == 0.0 {
        return out;
    }
    let mut rng = rng::stream(cfg.seed, PERTURB_STREAM);
    let eps = cfg.epsilon;
    for (x, c) in out.positions.iter_mut().zip(out.colors.iter_mut()) {
        for a in 0..3 {
            let n: f64 = StandardNormal.sample(&mut rng);
            x[a] = (x[a] as f64 + eps * n) as f32;
        }
        for a in 0..3 {
            let n: f64 = StandardNormal.sample(&mut rng);
            c[a] = (c[a] as f64 + 2.0 * eps * n).clamp(0.0, 1.0) as f32;
        }
    }
    out
}
