//! Binary path dump.
//!
//! Layout, all little-endian: magic `RZEH`, `u32` version, `u64` paths,
//! `u64` recorded intervals, `f64` time between records, then for each path
//! its recorded `X` values followed by its recorded `Y` values.

use std::io::{Read, Write};

use super::PathBundle;
use crate::error::{Error, Result};

pub const DUMP_MAGIC: &[u8; 4] = b"RZEH";
pub const DUMP_VERSION: u32 = 1;

/// Writes the recorded trajectories. Records must be evenly spaced.
pub fn write_dump<W: Write>(bundle: &PathBundle, mut out: W) -> Result<()> {
    let n_rec = bundle.n_records();
    let intervals = n_rec.saturating_sub(1);
    let spacing = if intervals == 0 {
        0.0
    } else {
        (bundle.record_times[n_rec - 1] - bundle.record_times[0]) / intervals as f64
    };
    let uneven = bundle
        .record_times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - spacing).abs() > 1e-9 * spacing.max(1.0));
    if uneven {
        return Err(Error::Domain(
            "path dump needs evenly spaced records; pick a stride dividing the step count".into(),
        ));
    }
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&DUMP_VERSION.to_le_bytes())?;
    out.write_all(&(bundle.n_paths as u64).to_le_bytes())?;
    out.write_all(&(intervals as u64).to_le_bytes())?;
    out.write_all(&spacing.to_le_bytes())?;
    for path in 0..bundle.n_paths {
        let span = path * n_rec..(path + 1) * n_rec;
        for v in bundle.x[span.clone()].iter().chain(&bundle.y[span]) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Dump contents: `(dt, x, y)` with trajectories indexed `[path][record]`.
pub type DumpContents = (f64, Vec<Vec<f64>>, Vec<Vec<f64>>);

pub fn read_dump<R: Read>(mut input: R) -> Result<DumpContents> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Domain("not a path dump (bad magic)".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != DUMP_VERSION {
        return Err(Error::Domain(format!("unsupported dump version {version}")));
    }
    input.read_exact(&mut b8)?;
    let n_paths = u64::from_le_bytes(b8) as usize;
    input.read_exact(&mut b8)?;
    let n_rec = u64::from_le_bytes(b8) as usize + 1;
    input.read_exact(&mut b8)?;
    let dt = f64::from_le_bytes(b8);
    let mut read_row = |input: &mut R| -> Result<Vec<f64>> {
        (0..n_rec)
            .map(|_| {
                input.read_exact(&mut b8)?;
                Ok(f64::from_le_bytes(b8))
            })
            .collect()
    };
    let mut xs = Vec::with_capacity(n_paths);
    let mut ys = Vec::with_capacity(n_paths);
    for _ in 0..n_paths {
        xs.push(read_row(&mut input)?);
        ys.push(read_row(&mut input)?);
    }
    Ok((dt, xs, ys))
}
