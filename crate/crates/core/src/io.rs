//! File formats: numeric tables, CSV outputs and binary wave-function
//! snapshots.
//!
//! Snapshot layout (little endian): magic `QTRJ`, `u16` version, `u32`
//! n_points, `f64` x_min, x_max, hbar, then `n_points` pairs of `f64`
//! (re, im).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::grid::GridSpec;
use crate::wavefunction::WaveFunction;
use crate::{Error, C64, Result};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"QTRJ";
pub const SNAPSHOT_VERSION: u16 = 1;

/// Parse whitespace- or comma-separated numeric rows with exactly `ncols`
/// columns; `#` starts a comment. Returns the columns.
pub fn parse_columns(text: &str, ncols: usize) -> Result<Vec<Vec<f64>>> {
    let mut cols = vec![Vec::new(); ncols];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != ncols {
            return Err(Error::config(format!(
                "line {}: expected {ncols} columns, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        for (col, f) in cols.iter_mut().zip(fields) {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::config(format!("line {}: cannot parse {f:?} as a number", lineno + 1)))?;
            if !v.is_finite() {
                return Err(Error::config(format!("line {}: non-finite value", lineno + 1)));
            }
            col.push(v);
        }
    }
    Ok(cols)
}

pub fn read_columns(path: &Path, ncols: usize) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    parse_columns(&text, ncols).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

/// Create `path` (and its parent directories) and hand a buffered writer to
/// `f`.
pub fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_snapshot<W: Write>(psi: &WaveFunction, mut w: W) -> std::io::Result<()> {
    let g = psi.grid();
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&(g.n_points as u32).to_le_bytes())?;
    for v in [g.x_min, g.x_max, g.hbar] {
        w.write_all(&v.to_le_bytes())?;
    }
    for a in psi.amplitudes() {
        w.write_all(&a.re.to_le_bytes())?;
        w.write_all(&a.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<WaveFunction> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::config("not a wave-function snapshot (bad magic)"));
    }
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b2)?;
    let version = u16::from_le_bytes(b2);
    if version != SNAPSHOT_VERSION {
        return Err(Error::config(format!("unsupported snapshot version {version}")));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    let mut f = || -> Result<f64> {
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        Ok(f64::from_le_bytes(b8))
    };
    let (x_min, x_max, hbar) = (f()?, f()?, f()?);
    let grid = GridSpec::new(n, x_min, x_max, hbar)?;
    let mut amps = Vec::with_capacity(n);
    for _ in 0..n {
        amps.push(C64::new(f()?, f()?));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::config(format!("{} trailing bytes after snapshot", rest.len())));
    }
    WaveFunction::from_amplitudes(grid, amps)
}

pub fn save_snapshot(psi: &WaveFunction, path: &Path) -> Result<()> {
    write_file(path, |w| write_snapshot(psi, w))
}

pub fn load_snapshot(path: &Path) -> Result<WaveFunction> {
    let f = File::open(path).map_err(|e| Error::config(format!("cannot open {}: {e}", path.display())))?;
    read_snapshot(std::io::BufReader::new(f))
}
