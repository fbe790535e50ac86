//! Field and kernel persistence.
//!
//! Binary layout: magic `FPME`, then little-endian `u32` version (1), `d`,
//! `n`, then little-endian `f64` values in row-major order. Densities store
//! `n^d` values, kernels the `N(N-1)/2` upper-triangle entries with a JSON
//! sidecar `<file>.json`. The CSV alternative has a header line `d,n` and one
//! value per line.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{FpmeError, Result};
use crate::grid::{DensityField, GridSpec};
use crate::kernel::{comp_estimate_constant, KernelConfig, KernelMatrix};

pub const MAGIC: &[u8; 4] = b"FPME";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn encode(grid: &GridSpec, values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * values.len());
    out.extend_from_slice(MAGIC);
    for v in [FORMAT_VERSION, grid.dim() as u32, grid.resolution() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn format_err(offset: usize, message: impl Into<String>) -> FpmeError {
    FpmeError::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("four bytes")))
        .ok_or_else(|| format_err(bytes.len(), "truncated header"))
}

/// Parses a binary payload with `expected(grid)` values.
fn decode(bytes: &[u8], expected: impl Fn(&GridSpec) -> usize) -> Result<(GridSpec, Vec<f64>)> {
    if bytes.len() < 4 {
        return Err(format_err(bytes.len(), "truncated magic"));
    }
    if &bytes[..4] != MAGIC {
        return Err(format_err(
            0,
            format!("bad magic bytes {:02x?}, expected \"FPME\"", &bytes[..4]),
        ));
    }
    let version = read_u32(bytes, 4)?;
    if version != FORMAT_VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let d = read_u32(bytes, 8)? as usize;
    let n = read_u32(bytes, 12)? as usize;
    let grid = GridSpec::new(d, n).map_err(|e| format_err(8, e.to_string()))?;
    let count = expected(&grid);
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != 8 * count {
        return Err(format_err(
            HEADER_LEN + payload.len().min(8 * count),
            format!("payload has {} bytes, expected {}", payload.len(), 8 * count),
        ));
    }
    let mut values = Vec::with_capacity(count);
    for (k, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("eight bytes"));
        if v.is_nan() {
            return Err(format_err(HEADER_LEN + 8 * k, "NaN in payload"));
        }
        values.push(v);
    }
    Ok((grid, values))
}

fn density_at(grid: GridSpec, values: Vec<f64>, offset: impl Fn(usize) -> usize) -> Result<DensityField> {
    if let Some(k) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(format_err(offset(k), format!("invalid density value {}", values[k])));
    }
    DensityField::new(grid, values)
}

/// Writes a density; `.csv` paths get the text format, anything else binary.
pub fn store_density(field: &DensityField, path: &Path) -> Result<()> {
    if is_csv(path) {
        let g = field.grid();
        let mut text = format!("{},{}\n", g.dim(), g.resolution());
        for v in field.values() {
            text.push_str(&format!("{v:e}\n"));
        }
        fs::write(path, text)?;
    } else {
        fs::write(path, encode(field.grid(), field.values()))?;
    }
    Ok(())
}

/// Reads a density written by [`store_density`].
pub fn load_density(path: &Path) -> Result<DensityField> {
    let bytes = fs::read(path)?;
    if is_csv(path) {
        return parse_csv(&bytes);
    }
    let (grid, values) = decode(&bytes, |g| g.cells())?;
    density_at(grid, values, |k| HEADER_LEN + 8 * k)
}

fn parse_csv(bytes: &[u8]) -> Result<DensityField> {
    let text = std::str::from_utf8(bytes).map_err(|e| format_err(e.valid_up_to(), "not valid UTF-8"))?;
    let mut offset = 0;
    let mut lines = Vec::new();
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            lines.push((offset, trimmed));
        }
        offset += line.len();
    }
    let (_, header) = lines.first().ok_or_else(|| format_err(0, "empty CSV"))?;
    let parts: Vec<&str> = header.split(',').map(str::trim).collect();
    let parse_dim = |s: &str| s.parse::<usize>().map_err(|_| format_err(0, format!("bad header \"{header}\"")));
    if parts.len() != 2 {
        return Err(format_err(0, format!("header must be \"d,n\", got \"{header}\"")));
    }
    let grid = GridSpec::new(parse_dim(parts[0])?, parse_dim(parts[1])?).map_err(|e| format_err(0, e.to_string()))?;
    let rows = &lines[1..];
    if rows.len() != grid.cells() {
        return Err(format_err(
            offset,
            format!("{} value rows for a grid of {} cells", rows.len(), grid.cells()),
        ));
    }
    let mut values = Vec::with_capacity(rows.len());
    for &(off, row) in rows {
        let v: f64 = row.parse().map_err(|_| format_err(off, format!("bad value \"{row}\"")))?;
        values.push(v);
    }
    let offsets: Vec<usize> = rows.iter().map(|r| r.0).collect();
    density_at(grid, values, |k| offsets[k])
}

/// Kernel metadata stored next to a kernel file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSidecar {
    pub sigma: f64,
    pub radius: usize,
    pub tail_correction: bool,
    #[serde(rename = "C_comp_estimate")]
    pub c_comp_estimate: f64,
}

/// `<file>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the upper triangle of `kernel` and its JSON sidecar.
pub fn store_kernel(kernel: &KernelMatrix, path: &Path) -> Result<KernelSidecar> {
    fs::write(path, encode(kernel.grid(), kernel.upper()))?;
    let meta = KernelSidecar {
        sigma: kernel.sigma(),
        radius: kernel.config().truncation_radius,
        tail_correction: kernel.config().tail_correction,
        c_comp_estimate: comp_estimate_constant(kernel),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(meta)
}

/// Reads a kernel written by [`store_kernel`].
pub fn load_kernel(path: &Path) -> Result<KernelMatrix> {
    let bytes = fs::read(path)?;
    let (grid, upper) = decode(&bytes, |g| g.pair_count())?;
    if let Some(k) = upper.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(format_err(HEADER_LEN + 8 * k, format!("invalid kernel value {}", upper[k])));
    }
    let meta: KernelSidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    KernelMatrix::from_upper(
        grid,
        meta.sigma,
        KernelConfig::new(meta.radius, meta.tail_correction)?,
        upper,
    )
}
