//! Snapshot files.
//!
//! Binary layout, all little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `CARLSNAP` |
//! | 4 | format version (`u32`, currently 1) |
//! | 4 | solver kind (`u32`: 0 kinetic, 1 limit, 2 other) |
//! | 4 | n (`u32`) |
//! | 8·n | cells per axis (`u64`) |
//! | 8 | dx (`f64`) |
//! | 8·n | origin (`f64`) |
//! | 8 | t (`f64`) |
//! | 4 | field count (`u32`) |
//! | 8·cells·fields | field-major data, each field row-major (`f64`) |

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::{Boundary, Grid};

const MAGIC: &[u8; 8] = b"CARLSNAP";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Kinetic = 0,
    Limit = 1,
    Other = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub kind: SolverKind,
    pub grid: Grid,
    pub t: f64,
    pub fields: Vec<Vec<f64>>,
}

pub fn write_binary(w: &mut impl Write, kind: SolverKind, grid: &Grid, t: f64, fields: &[Vec<f64>]) -> Result<()> {
    if fields.iter().any(|f| f.len() != grid.len()) {
        return Err(Error::GridMismatch);
    }
    let mut buf = Vec::with_capacity(64 + 8 * grid.len() * fields.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(kind as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    for &c in grid.cells() {
        buf.extend_from_slice(&(c as u64).to_le_bytes());
    }
    buf.extend_from_slice(&grid.dx().to_le_bytes());
    for &o in grid.origin() {
        buf.extend_from_slice(&o.to_le_bytes());
    }
    buf.extend_from_slice(&t.to_le_bytes());
    buf.extend_from_slice(&(fields.len() as u32).to_le_bytes());
    for f in fields {
        for v in f {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a binary snapshot. The boundary kind is not stored and is reported as periodic.
pub fn read_binary(r: &mut impl Read) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = match cur.u32()? {
        0 => SolverKind::Kinetic,
        1 => SolverKind::Limit,
        2 => SolverKind::Other,
        k => return Err(Error::Format(format!("unknown solver kind {k}"))),
    };
    let n = cur.u32()? as usize;
    if !(1..=3).contains(&n) {
        return Err(Error::Format(format!("dimension {n}")));
    }
    let cells = (0..n).map(|_| cur.u64().map(|c| c as usize)).collect::<Result<Vec<_>>>()?;
    let dx = cur.f64()?;
    let origin = (0..n).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
    let t = cur.f64()?;
    let count = cur.u32()? as usize;
    let grid = Grid::new(&cells, &[dx], Boundary::Periodic)?.with_origin(&origin)?;
    let fields = (0..count)
        .map(|_| (0..grid.len()).map(|_| cur.f64()).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    if cur.pos != bytes.len() {
        return Err(Error::Format("trailing bytes".into()));
    }
    Ok(Snapshot { kind, grid, t, fields })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos + k;
        let s = self.bytes.get(self.pos..end).ok_or_else(|| Error::Format("truncated".into()))?;
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// One row per cell: coordinates then field values.
pub fn write_csv(w: &mut impl Write, grid: &Grid, names: &[&str], fields: &[Vec<f64>]) -> Result<()> {
    if names.len() != fields.len() || fields.iter().any(|f| f.len() != grid.len()) {
        return Err(Error::GridMismatch);
    }
    let n = grid.dim();
    let axes = ["x", "y", "z"];
    let mut out = String::new();
    let header: Vec<&str> = axes[..n].iter().copied().chain(names.iter().copied()).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for k in 0..grid.len() {
        let x = grid.center(k);
        let row: Vec<String> =
            x[..n].iter().map(|v| format!("{v:e}")).chain(fields.iter().map(|f| format!("{:e}", f[k]))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}
