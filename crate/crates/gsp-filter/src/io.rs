//! CSV and little-endian binary serialization.
//!
//! Binary dumps start with `dim: u64`, `n: u64`, `L: f64`, optionally followed by an extension of
//! `u64` counts (`rows, cols` for two-axis arrays, `N` for ensembles), and then the payload as
//! interleaved `re, im` pairs of `f64`.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;

use crate::error::{GspError, Result};
use crate::gabor::GaborSystem;
use crate::grid::{Domain, Grid, GridFunction};
use crate::linalg::CMat;
use crate::sim::GspEnsemble;
use crate::symbol_matrix::{DecayReport, MatrixM};
use crate::weyl::{TfDistribution, WeylSymbol};

fn io_err(e: impl std::fmt::Display) -> GspError {
    GspError::Io(e.to_string())
}

fn csv_err(e: csv::Error) -> GspError {
    GspError::Io(e.to_string())
}

/// Binary dump header.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpHeader {
    pub grid: Grid,
    pub extension: Vec<u64>,
}

/// Writes a binary dump.
pub fn write_dump(mut w: impl Write, grid: &Grid, extension: &[u64], values: &[C64]) -> Result<()> {
    let mut buf = Vec::with_capacity(24 + 8 * extension.len() + 16 * values.len());
    buf.extend_from_slice(&(grid.dim() as u64).to_le_bytes());
    buf.extend_from_slice(&(grid.n() as u64).to_le_bytes());
    buf.extend_from_slice(&grid.half_width().to_le_bytes());
    for e in extension {
        buf.extend_from_slice(&e.to_le_bytes());
    }
    for v in values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)
}

/// Reads a binary dump whose header extension has `extension` entries.
pub fn read_dump(mut r: impl Read, extension: usize) -> Result<(DumpHeader, Vec<C64>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io_err)?;
    let head = 24 + 8 * extension;
    if bytes.len() < head || (bytes.len() - head) % 16 != 0 {
        return Err(GspError::Parse(format!("dump of {} bytes has no valid layout", bytes.len())));
    }
    let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().expect("eight bytes") };
    let dim = u64::from_le_bytes(word(0)) as usize;
    let n = u64::from_le_bytes(word(1)) as usize;
    let l = f64::from_le_bytes(word(2));
    let grid = Grid::with_dim(n, l, dim)?;
    let ext = (0..extension).map(|i| u64::from_le_bytes(word(3 + i))).collect();
    let values = bytes[head..]
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().expect("eight bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("eight bytes")),
            )
        })
        .collect();
    Ok((DumpHeader { grid, extension: ext }, values))
}

pub fn write_function_binary(w: impl Write, f: &GridFunction) -> Result<()> {
    write_dump(w, f.grid(), &[], f.values())
}

/// Reads a grid function dump into the given domain.
pub fn read_function_binary(r: impl Read, domain: Domain) -> Result<GridFunction> {
    let (h, values) = read_dump(r, 0)?;
    GridFunction::with_domain(h.grid, domain, values)
}

pub fn write_symbol_binary(w: impl Write, a: &WeylSymbol) -> Result<()> {
    write_dump(w, a.grid(), &[a.rows() as u64, a.cols() as u64], a.values())
}

pub fn read_symbol_binary(r: impl Read) -> Result<WeylSymbol> {
    let (h, values) = read_dump(r, 2)?;
    WeylSymbol::new(h.grid, values)
}

pub fn write_tf_binary(w: impl Write, v: &TfDistribution) -> Result<()> {
    write_dump(w, v.grid(), &[v.rows() as u64, v.cols() as u64], v.values())
}

/// Operator matrices are stored row-major with a `rows, cols` extension.
pub fn write_operator_binary(w: impl Write, grid: &Grid, k: &CMat) -> Result<()> {
    let values: Vec<C64> = (0..k.nrows()).flat_map(|i| (0..k.ncols()).map(move |j| k[(i, j)])).collect();
    write_dump(w, grid, &[k.nrows() as u64, k.ncols() as u64], &values)
}

pub fn read_operator_binary(r: impl Read) -> Result<(Grid, CMat)> {
    let (h, values) = read_dump(r, 2)?;
    let (rows, cols) = (h.extension[0] as usize, h.extension[1] as usize);
    if rows * cols != values.len() {
        return Err(GspError::LengthMismatch { expected: rows * cols, got: values.len() });
    }
    Ok((h.grid, CMat::from_row_slice(rows, cols, &values)))
}

/// Realizations are stored one after another with an `N` extension.
pub fn write_ensemble_binary(w: impl Write, ens: &GspEnsemble) -> Result<()> {
    let values: Vec<C64> = (0..ens.len()).flat_map(|i| ens.realization(i).to_vec()).collect();
    write_dump(w, ens.grid(), &[ens.len() as u64], &values)
}

/// Grid function table: node coordinate(s), `re`, `im`.
pub fn write_function_csv(w: impl Write, f: &GridFunction) -> Result<()> {
    let grid = f.grid();
    let name = match f.domain() {
        Domain::Position => "x",
        Domain::Frequency => "xi",
    };
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = if grid.dim() == 1 {
        vec![name.to_string()]
    } else {
        (1..=grid.dim()).map(|i| format!("{name}{i}")).collect()
    };
    header.extend(["re".to_string(), "im".to_string()]);
    out.write_record(&header).map_err(csv_err)?;
    for (idx, v) in f.values().iter().enumerate() {
        let mut rec: Vec<String> =
            grid.unravel(idx).iter().take(grid.dim()).map(|j| grid.coordinate(f.domain(), *j).to_string()).collect();
        rec.push(v.re.to_string());
        rec.push(v.im.to_string());
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush().map_err(io_err)
}

/// Symbol table: `x`, `xi`, `re`, `im`.
pub fn write_symbol_csv(w: impl Write, a: &WeylSymbol) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "xi", "re", "im"]).map_err(csv_err)?;
    for s in 0..a.rows() {
        for l in 0..a.cols() {
            let v = a.at(s, l);
            out.serialize((a.position(s), a.grid().frequency(l), v.re, v.im)).map_err(csv_err)?;
        }
    }
    out.flush().map_err(io_err)
}

/// Lattice table: integer coordinates `n1, n2, k1, k2`, lattice point, coefficient.
pub fn write_lattice_csv(w: impl Write, sys: &GaborSystem, coefficients: &[C64]) -> Result<()> {
    if coefficients.len() != sys.len() {
        return Err(GspError::LengthMismatch { expected: sys.len(), got: coefficients.len() });
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n1", "n2", "k1", "k2", "lambda1", "lambda2", "lambda1_prime", "lambda2_prime", "re", "im"])
        .map_err(csv_err)?;
    for (i, c) in coefficients.iter().enumerate() {
        let k = sys.lattice_indices(i);
        let p = sys.lattice_point(i);
        out.serialize((k[0], k[1], k[2], k[3], p[0], p[1], p[2], p[3], c.re, c.im)).map_err(csv_err)?;
    }
    out.flush().map_err(io_err)
}

/// Triplets `lambda, omega, abs` of the stored entries.
pub fn write_matrix_csv(w: impl Write, m: &MatrixM) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["lambda", "omega", "abs"]).map_err(csv_err)?;
    for (l, o, v) in m.triplets() {
        out.serialize((l, o, v)).map_err(csv_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn write_decay_json(w: impl Write, report: &DecayReport) -> Result<()> {
    serde_json::to_writer_pretty(w, report).map_err(io_err)
}
