//! ESRI ASCII grid reading and writing.
//!
//! Floats are written with at most 10 significant digits and trailing zeros
//! trimmed, so `write(read(f)) == f` for any file this module produced.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geodata::Grid;

const HEADER_KEYS: [&str; 6] = [
    "ncols",
    "nrows",
    "xllcorner",
    "yllcorner",
    "cellsize",
    "NODATA_value",
];

pub fn read_grid(path: impl AsRef<Path>) -> Result<Grid> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_grid(&text, path)
}

pub fn write_grid(grid: &Grid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_grid(grid)).map_err(|e| Error::io(path, e))
}

pub fn parse_grid(text: &str, path: &Path) -> Result<Grid> {
    let mut lines = text.lines().enumerate();
    let mut header = [0.0f64; 6];
    for (slot, key) in HEADER_KEYS.iter().enumerate() {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| Error::format(path, slot + 1, format!("missing header `{key}`")))?;
        let mut tokens = line.split_whitespace();
        let name = tokens.next().unwrap_or("");
        if !name.eq_ignore_ascii_case(key) {
            return Err(Error::format(
                path,
                idx + 1,
                format!("expected header `{key}`, found `{line}`"),
            ));
        }
        let value = tokens
            .next()
            .and_then(|t| t.parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::format(path, idx + 1, format!("bad value for `{key}`")))?;
        if tokens.next().is_some() {
            return Err(Error::format(path, idx + 1, "trailing tokens in header line"));
        }
        header[slot] = value;
    }
    let [ncols, nrows, xll, yll, cellsize, nodata] = header;
    for (name, v, line) in [("ncols", ncols, 1), ("nrows", nrows, 2)] {
        if v < 1.0 || v.fract() != 0.0 {
            return Err(Error::format(path, line, format!("{name} must be a positive integer")));
        }
    }
    let (ncols, nrows) = (ncols as usize, nrows as usize);

    let mut values = Vec::with_capacity(ncols * nrows);
    let mut rows = 0usize;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if rows == nrows {
            return Err(Error::Dimension(format!(
                "{}: line {}: more than {nrows} data rows",
                path.display(),
                idx + 1
            )));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v = tok
                .parse::<f64>()
                .map_err(|_| Error::format(path, idx + 1, format!("bad cell value `{tok}`")))?;
            values.push(v);
        }
        let got = values.len() - before;
        if got != ncols {
            return Err(Error::Dimension(format!(
                "{}: line {}: expected {ncols} values, found {got}",
                path.display(),
                idx + 1
            )));
        }
        rows += 1;
    }
    if rows != nrows {
        return Err(Error::Dimension(format!(
            "{}: expected {nrows} data rows, found {rows}",
            path.display()
        )));
    }
    Grid::new(ncols, nrows, xll, yll, cellsize, nodata, values)
}

pub fn format_grid(grid: &Grid) -> String {
    let mut out = String::with_capacity(grid.values().len() * 8 + 128);
    let _ = writeln!(out, "ncols {}", grid.ncols());
    let _ = writeln!(out, "nrows {}", grid.nrows());
    let _ = writeln!(out, "xllcorner {}", format_g10(grid.xll()));
    let _ = writeln!(out, "yllcorner {}", format_g10(grid.yll()));
    let _ = writeln!(out, "cellsize {}", format_g10(grid.cellsize()));
    let _ = writeln!(out, "NODATA_value {}", format_g10(grid.nodata()));
    for row in grid.values().chunks(grid.ncols()) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&format_g10(*v));
        }
        out.push('\n');
    }
    out
}

/// `%.10g`-style formatting: 10 significant digits, trailing zeros trimmed.
pub fn format_g10(v: f64) -> String {
    format_sig(v, 10)
}

pub(crate) fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
