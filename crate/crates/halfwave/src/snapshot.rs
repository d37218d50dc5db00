//! Binary field snapshots: "HWBL", u32 version, u64 n, f64 r_max, u8 sector,
//! then n little-endian (re, im) f64 pairs.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{HwError, Result};
use crate::grid::{RadialGrid, Sector};

pub const MAGIC: &[u8; 4] = b"HWBL";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub r_max: f64,
    pub sector: Sector,
    pub values: Vec<Complex64>,
}

pub fn encode(grid: &RadialGrid, sector: Sector, values: &[Complex64]) -> Result<Vec<u8>> {
    grid.check_len(values.len())?;
    let mut out = Vec::with_capacity(25 + 16 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    out.extend_from_slice(&grid.r_max().to_le_bytes());
    out.push(sector.tag());
    for z in values {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Snapshot> {
    let take = |at: usize, len: usize| -> Result<&[u8]> {
        bytes
            .get(at..at + len)
            .ok_or_else(|| HwError::Format(format!("truncated at byte {at}")))
    };
    if take(0, 4)? != MAGIC {
        return Err(HwError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(4, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(HwError::Format(format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(take(8, 8)?.try_into().unwrap()) as usize;
    let r_max = f64::from_le_bytes(take(16, 8)?.try_into().unwrap());
    let sector = Sector::from_tag(take(24, 1)?[0])?;
    let body = take(25, 16 * n)?;
    if bytes.len() != 25 + 16 * n {
        return Err(HwError::Format("trailing bytes".into()));
    }
    let values = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(Snapshot { n, r_max, sector, values })
}

pub fn write(path: &Path, grid: &RadialGrid, sector: Sector, values: &[Complex64]) -> Result<()> {
    std::fs::write(path, encode(grid, sector, values)?)?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Snapshot> {
    decode(&std::fs::read(path)?)
}
