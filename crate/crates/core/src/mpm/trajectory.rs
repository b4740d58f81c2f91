//! Recorded particle snapshots and their binary / CSV export.
//!
//! Binary layout, little-endian: magic `MPHY`, `u16` version, `u32` particle
//! count, `u32` frame count, then per frame `3N` f32 positions, `3N` f32
//! velocities and `3N` f32 colours.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::particles::ParticleState;
use crate::constitutive::Vec3;

pub const TRAJECTORY_MAGIC: &[u8; 4] = b"MPHY";
pub const TRAJECTORY_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("not a trajectory file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported trajectory version {0}")]
    BadVersion(u16),
    #[error("trajectory truncated or unreadable: {0}")]
    Io(#[from] io::Error),
}

/// Particle positions, velocities and colours at one instant, stored in
/// single precision exactly as exported.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Snapshot {
    pub positions: Vec<[f32; 3]>,
    pub velocities: Vec<[f32; 3]>,
    pub colors: Vec<[f32; 3]>,
}

fn to_f32(v: &Vec3) -> [f32; 3] {
    [v[0] as f32, v[1] as f32, v[2] as f32]
}

impl Snapshot {
    pub fn capture(particles: &[ParticleState]) -> Self {
        Snapshot {
            positions: particles.iter().map(|p| to_f32(&p.x)).collect(),
            velocities: particles.iter().map(|p| to_f32(&p.v)).collect(),
            colors: particles.iter().map(|p| to_f32(&p.color)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Same particles with every colour replaced by `f(index, colour)`.
    pub fn recolored(&self, f: impl Fn(usize, [f32; 3]) -> [f32; 3]) -> Self {
        Snapshot {
            colors: self.colors.iter().enumerate().map(|(i, c)| f(i, *c)).collect(),
            ..self.clone()
        }
    }
}

/// Snapshot after each simulated frame. A run of zero frames holds only the
/// initial state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub particle_count: usize,
    pub snapshots: Vec<Snapshot>,
}

/// Aggregate statistics of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSummary {
    pub frame: u32,
    pub kinetic_energy: f64,
    pub max_speed: f64,
    pub center_of_mass: Vec3,
}

impl FrameSummary {
    pub fn compute(frame: u32, particles: &[ParticleState]) -> Self {
        let mut ke = 0.0;
        let mut vmax: f64 = 0.0;
        let mut mass = 0.0;
        let mut moment = Vec3::zeros();
        for p in particles.iter().filter(|p| !p.removed) {
            let s2 = p.v.norm_squared();
            ke += 0.5 * p.mass * s2;
            vmax = vmax.max(s2.sqrt());
            mass += p.mass;
            moment += p.x * p.mass;
        }
        FrameSummary {
            frame,
            kinetic_energy: ke,
            max_speed: vmax,
            center_of_mass: if mass > 0.0 { moment / mass } else { Vec3::zeros() },
        }
    }
}

fn write_vecs(w: &mut impl Write, vs: &[[f32; 3]]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(vs.len() * 12);
    for v in vs {
        for c in v {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    w.write_all(&buf)
}

fn read_vecs(r: &mut impl Read, n: usize) -> io::Result<Vec<[f32; 3]>> {
    let mut buf = vec![0u8; n * 12];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(12)
        .map(|c| {
            std::array::from_fn(|a| f32::from_le_bytes(c[4 * a..4 * a + 4].try_into().unwrap()))
        })
        .collect())
}

pub fn write_trajectory(w: &mut impl Write, traj: &Trajectory) -> io::Result<()> {
    w.write_all(TRAJECTORY_MAGIC)?;
    w.write_all(&TRAJECTORY_VERSION.to_le_bytes())?;
    w.write_all(&(traj.particle_count as u32).to_le_bytes())?;
    w.write_all(&(traj.snapshots.len() as u32).to_le_bytes())?;
    for s in &traj.snapshots {
        write_vecs(w, &s.positions)?;
        write_vecs(w, &s.velocities)?;
        write_vecs(w, &s.colors)?;
    }
    Ok(())
}

pub fn read_trajectory(r: &mut impl Read) -> Result<Trajectory, TrajectoryError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != TRAJECTORY_MAGIC {
        return Err(TrajectoryError::BadMagic(magic));
    }
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b2)?;
    let version = u16::from_le_bytes(b2);
    if version != TRAJECTORY_VERSION {
        return Err(TrajectoryError::BadVersion(version));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let frames = u32::from_le_bytes(b4) as usize;
    let mut snapshots = Vec::with_capacity(frames);
    for _ in 0..frames {
        snapshots.push(Snapshot {
            positions: read_vecs(r, n)?,
            velocities: read_vecs(r, n)?,
            colors: read_vecs(r, n)?,
        });
    }
    Ok(Trajectory {
        particle_count: n,
        snapshots,
    })
}

/// CSV with header `frame,kinetic_energy,max_speed,com_x,com_y,com_z`.
pub fn write_summary_csv(w: &mut impl Write, rows: &[FrameSummary]) -> io::Result<()> {
    writeln!(w, "frame,kinetic_energy,max_speed,com_x,com_y,com_z")?;
    for r in rows {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e}",
            r.frame,
            r.kinetic_energy,
            r.max_speed,
            r.center_of_mass[0],
            r.center_of_mass[1],
            r.center_of_mass[2]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let s = Snapshot {
            positions: vec![[0.1, 0.2, 0.3], [1.0, 2.0, 3.0]],
            velocities: vec![[0.0, -1.5, 0.0]; 2],
            colors: vec![[1.0, 0.5, 0.25]; 2],
        };
        let t = Trajectory {
            particle_count: 2,
            snapshots: vec![s.clone(), s],
        };
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &t).unwrap();
        assert_eq!(buf.len(), 4 + 2 + 4 + 4 + 2 * 3 * 2 * 12);
        assert_eq!(read_trajectory(&mut buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn bad_magic() {
        let buf = b"NOPE\x01\x00\x00\x00\x00\x00\x00\x00\x00\x00";
        assert!(matches!(
            read_trajectory(&mut buf.as_slice()),
            Err(TrajectoryError::BadMagic(_))
        ));
    }
}
