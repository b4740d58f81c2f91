//! Binary PPM frames and `MPHT` tensors.
//!
//! Tensor layout, little-endian: magic `MPHT`, `u16` version, `u32` rank,
//! `rank` × `u32` dimensions, then the f32 entries in row-major order.

use std::io::{self, Read, Write};

use super::render::RenderedFrame;
use crate::mpm::TrajectoryError;

pub const TENSOR_MAGIC: &[u8; 4] = b"MPHT";
const TENSOR_VERSION: u16 = 1;

/// Writes the colour channels as binary PPM (P6), 8 bits per channel.
pub fn write_ppm(w: &mut impl Write, frame: &RenderedFrame) -> io::Result<()> {
    write!(w, "P6\n{} {}\n255\n", frame.width, frame.height)?;
    let bytes: Vec<u8> = frame
        .color
        .iter()
        .flat_map(|c| c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
        .collect();
    w.write_all(&bytes)
}

pub fn write_tensor(w: &mut impl Write, dims: &[usize], data: &[f64]) -> io::Result<()> {
    debug_assert_eq!(dims.iter().product::<usize>(), data.len());
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&TENSOR_VERSION.to_le_bytes())?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for d in dims {
        w.write_all(&(*d as u32).to_le_bytes())?;
    }
    let bytes: Vec<u8> = data.iter().flat_map(|v| (*v as f32).to_le_bytes()).collect();
    w.write_all(&bytes)
}

/// Reads a tensor back as `(dims, values)`.
pub fn read_tensor(r: &mut impl Read) -> Result<(Vec<usize>, Vec<f32>), TrajectoryError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != TENSOR_MAGIC {
        return Err(TrajectoryError::BadMagic(magic));
    }
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b2)?;
    let version = u16::from_le_bytes(b2);
    if version != TENSOR_VERSION {
        return Err(TrajectoryError::BadVersion(version));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let rank = u32::from_le_bytes(b4) as usize;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        r.read_exact(&mut b4)?;
        dims.push(u32::from_le_bytes(b4) as usize);
    }
    let n: usize = dims.iter().product();
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    let values = buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((dims, values))
}
