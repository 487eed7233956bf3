//! Uniform 2D scalar grids and the `gslgrid 1` text format.
//!
//! A [`Grid`] stores one scalar per square cell in row-major order with
//! **row 0 at the bottom** of the field; the text format writes the top row
//! first, so writers and readers both flip. `origin` is the physical
//! coordinate (µm) of the lower-left corner of cell (0, 0); cell centers sit
//! at `origin + (i + 0.5) * pitch`.
//!
//! Values are serialized with nine significant digits. Parsing such a value
//! and re-serializing it reproduces the bytes exactly, so a file is a fixed
//! point of load/save and two runs that produce the same numbers produce the
//! same bytes.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// What the scalar in a grid file measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    /// Remnant resist height, µm.
    Height,
    /// Applied clearing dose, µC/cm².
    Dose,
    /// Deposited energy in dose-equivalent units, µC/cm².
    Energy,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Height => "height",
            Quantity::Dose => "dose",
            Quantity::Energy => "energy",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Quantity::Height => "um",
            Quantity::Dose => "uC_cm2",
            Quantity::Energy => "uC_cm2",
        }
    }

    fn parse(s: &str) -> Option<Quantity> {
        match s {
            "height" => Some(Quantity::Height),
            "dose" => Some(Quantity::Dose),
            "energy" => Some(Quantity::Energy),
            _ => None,
        }
    }
}

/// Dense row-major scalar field on a square-cell grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    ncols: usize,
    nrows: usize,
    pitch: f64,
    origin: (f64, f64),
    values: Vec<f64>,
}

impl Grid {
    /// Zero-filled grid. `pitch` is the cell edge in µm.
    pub fn new(ncols: usize, nrows: usize, pitch: f64, origin: (f64, f64)) -> Result<Grid> {
        Self::from_values(ncols, nrows, pitch, origin, vec![0.0; ncols * nrows])
    }

    /// Grid filled with a constant.
    pub fn filled(
        ncols: usize,
        nrows: usize,
        pitch: f64,
        origin: (f64, f64),
        value: f64,
    ) -> Result<Grid> {
        Self::from_values(ncols, nrows, pitch, origin, vec![value; ncols * nrows])
    }

    /// Grid from an existing row-major value buffer (row 0 = bottom row).
    pub fn from_values(
        ncols: usize,
        nrows: usize,
        pitch: f64,
        origin: (f64, f64),
        values: Vec<f64>,
    ) -> Result<Grid> {
        if ncols == 0 || nrows == 0 {
            return Err(Error::InvalidParameter(
                "grid must have at least one column and one row".into(),
            ));
        }
        if !(pitch > 0.0) || !pitch.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid pitch must be positive and finite, got {pitch}"
            )));
        }
        if !origin.0.is_finite() || !origin.1.is_finite() {
            return Err(Error::InvalidParameter("grid origin must be finite".into()));
        }
        if values.len() != ncols * nrows {
            return Err(Error::InvalidParameter(format!(
                "value buffer holds {} cells, grid needs {}",
                values.len(),
                ncols * nrows
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid values must be finite, got {v}"
            )));
        }
        Ok(Grid {
            ncols,
            nrows,
            pitch,
            origin,
            values,
        })
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    /// Physical width × height of the field in µm.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.ncols as f64 * self.pitch,
            self.nrows as f64 * self.pitch,
        )
    }

    #[inline]
    pub fn idx(&self, col: usize, row: usize) -> usize {
        debug_assert!(col < self.ncols && row < self.nrows);
        row * self.ncols + col
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[self.idx(col, row)]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, value: f64) {
        let i = self.idx(col, row);
        self.values[i] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// x coordinate (µm) of the center of column `col`.
    pub fn x_of_col(&self, col: usize) -> f64 {
        self.origin.0 + (col as f64 + 0.5) * self.pitch
    }

    /// y coordinate (µm) of the center of row `row`.
    pub fn y_of_row(&self, row: usize) -> f64 {
        self.origin.1 + (row as f64 + 0.5) * self.pitch
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when `other` has the same dimensions, pitch (to 1e-9 relative)
    /// and origin (to 1e-9 µm).
    pub fn same_geometry(&self, other: &Grid) -> bool {
        self.ncols == other.ncols
            && self.nrows == other.nrows
            && (self.pitch - other.pitch).abs() <= 1e-9 * self.pitch
            && (self.origin.0 - other.origin.0).abs() <= 1e-9
            && (self.origin.1 - other.origin.1).abs() <= 1e-9
    }

    /// Bilinear interpolation at physical point (x, y).
    ///
    /// The point must lie inside the convex hull of cell centers; sampling
    /// exactly at a center reproduces that cell's value.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Result<f64> {
        let fx = (x - self.origin.0) / self.pitch - 0.5;
        let fy = (y - self.origin.1) / self.pitch - 0.5;
        if !(0.0..=(self.ncols - 1) as f64).contains(&fx)
            || !(0.0..=(self.nrows - 1) as f64).contains(&fy)
        {
            return Err(Error::InvalidGeometry(format!(
                "sample point ({x}, {y}) um outside the interpolable region of the grid"
            )));
        }
        // Single-column / single-row grids degenerate to 1D interpolation.
        let c0 = (fx.floor() as usize).min(self.ncols.saturating_sub(2));
        let r0 = (fy.floor() as usize).min(self.nrows.saturating_sub(2));
        let tx = (fx - c0 as f64).clamp(0.0, 1.0);
        let ty = (fy - r0 as f64).clamp(0.0, 1.0);
        let c1 = (c0 + 1).min(self.ncols - 1);
        let r1 = (r0 + 1).min(self.nrows - 1);
        let v00 = self.get(c0, r0);
        let v10 = self.get(c1, r0);
        let v01 = self.get(c0, r1);
        let v11 = self.get(c1, r1);
        Ok(v00 * (1.0 - tx) * (1.0 - ty)
            + v10 * tx * (1.0 - ty)
            + v01 * (1.0 - tx) * ty
            + v11 * tx * ty)
    }
}

/// Formats a value with nine significant digits.
///
/// The representation is scientific (`1.23456789e2`), stable across runs,
/// and idempotent under parse/format round trips.
pub(crate) fn fmt_g9(v: f64) -> String {
    format!("{v:.8e}")
}

pub(crate) fn push_g9(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.8e}");
}

/// Writes `grid` in `gslgrid 1` format.
pub fn write_grid<W: Write>(mut w: W, grid: &Grid, quantity: Quantity) -> std::io::Result<()> {
    writeln!(w, "gslgrid 1")?;
    writeln!(
        w,
        "{} {} {} {} {}",
        grid.ncols,
        grid.nrows,
        fmt_g9(grid.pitch),
        quantity.as_str(),
        quantity.unit()
    )?;
    let mut line = String::with_capacity(grid.ncols * 18);
    for row in (0..grid.nrows).rev() {
        line.clear();
        for col in 0..grid.ncols {
            if col > 0 {
                line.push(' ');
            }
            push_g9(&mut line, grid.get(col, row));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Reads a `gslgrid 1` file. The stored origin is not part of the format;
/// the returned grid has origin (0, 0).
pub fn read_grid<R: BufRead>(r: R) -> Result<(Grid, Quantity)> {
    let mut lines = r.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file, expected 'gslgrid 1'"))?;
    let header = header?;
    if header.trim() != "gslgrid 1" {
        return Err(parse_err(1, format!("expected 'gslgrid 1', got '{header}'")));
    }

    let (_, shape) = lines
        .next()
        .ok_or_else(|| parse_err(2, "missing grid shape line"))?;
    let shape = shape?;
    let tok: Vec<&str> = shape.split_whitespace().collect();
    if tok.len() != 5 {
        return Err(parse_err(
            2,
            format!("expected 'ncols nrows pitch_um quantity unit', got '{shape}'"),
        ));
    }
    let ncols: usize = tok[0]
        .parse()
        .map_err(|_| parse_err(2, format!("bad column count '{}'", tok[0])))?;
    let nrows: usize = tok[1]
        .parse()
        .map_err(|_| parse_err(2, format!("bad row count '{}'", tok[1])))?;
    let pitch: f64 = tok[2]
        .parse()
        .map_err(|_| parse_err(2, format!("bad pitch '{}'", tok[2])))?;
    let quantity = Quantity::parse(tok[3])
        .ok_or_else(|| parse_err(2, format!("unknown quantity '{}'", tok[3])))?;
    if tok[4] != quantity.unit() {
        return Err(parse_err(
            2,
            format!(
                "unit '{}' does not match quantity '{}' (expected '{}')",
                tok[4],
                quantity.as_str(),
                quantity.unit()
            ),
        ));
    }

    let mut values = vec![0.0; ncols * nrows];
    let mut rows_read = 0usize;
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if rows_read == nrows {
            return Err(parse_err(
                lineno,
                format!("unexpected extra data, already read {nrows} rows"),
            ));
        }
        // File stores the top row first.
        let row = nrows - 1 - rows_read;
        let mut count = 0usize;
        for tok in line.split_whitespace() {
            if count == ncols {
                return Err(parse_err(
                    lineno,
                    format!("row has more than {ncols} values"),
                ));
            }
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad value '{tok}'")))?;
            values[row * ncols + count] = v;
            count += 1;
        }
        if count != ncols {
            return Err(parse_err(
                lineno,
                format!("row has {count} values, expected {ncols}"),
            ));
        }
        rows_read += 1;
    }
    if rows_read != nrows {
        return Err(parse_err(
            0,
            format!("file has {rows_read} data rows, expected {nrows}"),
        ));
    }

    Ok((Grid::from_values(ncols, nrows, pitch, (0.0, 0.0), values)?, quantity))
}

pub fn save_grid(path: impl AsRef<Path>, grid: &Grid, quantity: Quantity) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_grid(BufWriter::new(file), grid, quantity).map_err(|e| Error::io(path, e))
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<(Grid, Quantity)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_grid(BufReader::new(file))
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}
