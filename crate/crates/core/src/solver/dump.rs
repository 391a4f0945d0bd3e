//! Binary field dumps.
//!
//! Layout (little endian): magic `TPOSN1\n`; u64 `K_max`, `N`, reserved `0`; f64 `L`,
//! `lambda`, `T`; then modes `k = -K..K`, each `N^3` nodes x1-fastest, each node three
//! components as `(re, im)` f64 pairs.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{Grid, TimePeriodicField};
use crate::error::{Error, Result};
use crate::special::FlowParams;

pub const DUMP_MAGIC: &[u8; 7] = b"TPOSN1\n";

pub fn write_dump<W: Write>(field: &TimePeriodicField, mut w: W) -> Result<()> {
    w.write_all(DUMP_MAGIC)?;
    for v in [field.k_max as u64, field.grid.n as u64, 0] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [field.grid.half_length, field.params.lambda, field.params.period] {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(field.grid.len() * 48);
    for mode in &field.modes {
        buf.clear();
        for node in mode {
            for c in node {
                buf.extend_from_slice(&c.re.to_le_bytes());
                buf.extend_from_slice(&c.im.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

pub fn read_dump<R: Read>(mut r: R) -> Result<TimePeriodicField> {
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let k_max = read_u64(&mut r)? as usize;
    let n = read_u64(&mut r)? as usize;
    if read_u64(&mut r)? != 0 {
        return Err(Error::Format("reserved word must be 0".into()));
    }
    let l = read_f64(&mut r)?;
    let lambda = read_f64(&mut r)?;
    let period = read_f64(&mut r)?;
    let grid = Grid::new(n, l).map_err(|e| Error::Format(e.to_string()))?;
    let params = FlowParams::new(lambda, period).map_err(|e| Error::Format(e.to_string()))?;
    if k_max > 1 << 20 {
        return Err(Error::Format("K_max out of range".into()));
    }
    let mut field = TimePeriodicField::zeros(k_max, grid, params);
    let mut buf = vec![0u8; grid.len() * 48];
    for mode in &mut field.modes {
        r.read_exact(&mut buf).map_err(|_| Error::Format("truncated mode data".into()))?;
        for (node, chunk) in mode.iter_mut().zip(buf.chunks_exact(48)) {
            let f = |i: usize| f64::from_le_bytes(chunk[8 * i..8 * i + 8].try_into().unwrap());
            *node = [Complex64::new(f(0), f(1)), Complex64::new(f(2), f(3)), Complex64::new(f(4), f(5))];
        }
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes".into()));
    }
    Ok(field)
}
