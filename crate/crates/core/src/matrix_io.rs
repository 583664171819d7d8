//! Plain-text complex matrix files.
//!
//! ```text
//! semeq-matrix 1 <rows> <cols>
//! # key=value          (any number of metadata lines)
//! <re> <im>            (rows·cols lines, column-major)
//! ```
//!
//! Numbers are written in shortest round-trip form, so reading a written file
//! reproduces the matrix exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{c, CMat};

const MAGIC: &str = "semeq-matrix";
const VERSION: u32 = 1;

pub fn to_text(m: &CMat, meta: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(32 * m.len() + 64);
    writeln!(out, "{MAGIC} {VERSION} {} {}", m.nrows(), m.ncols()).expect("writing to a string");
    for (k, v) in meta {
        writeln!(out, "# {k}={v}").expect("writing to a string");
    }
    for z in m.iter() {
        writeln!(out, "{} {}", z.re, z.im).expect("writing to a string");
    }
    out
}

/// Parses a matrix and its metadata; `origin` names the source in errors.
pub fn from_text(text: &str, origin: &Path) -> Result<(CMat, Vec<(String, String)>)> {
    let fail = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| fail(1, "empty file".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != MAGIC {
        return Err(fail(1, format!("expected `{MAGIC} {VERSION} <rows> <cols>`")));
    }
    if parts[1] != VERSION.to_string() {
        return Err(fail(1, format!("unsupported version {}", parts[1])));
    }
    let rows: usize = parts[2].parse().map_err(|_| fail(1, "bad row count".into()))?;
    let cols: usize = parts[3].parse().map_err(|_| fail(1, "bad column count".into()))?;

    let mut meta = Vec::new();
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        let mut nums = line.split_whitespace().map(str::parse::<f64>);
        match (nums.next(), nums.next(), nums.next()) {
            (Some(Ok(re)), Some(Ok(im)), None) => data.push(c(re, im)),
            _ => return Err(fail(i + 1, format!("expected `<re> <im>`, got `{line}`"))),
        }
    }
    if data.len() != rows * cols {
        return Err(fail(
            text.lines().count(),
            format!("{} entries for a {rows}x{cols} matrix", data.len()),
        ));
    }
    Ok((CMat::from_vec(rows, cols, data), meta))
}

pub fn write_matrix(path: &Path, m: &CMat, meta: &[(&str, String)]) -> Result<()> {
    std::fs::write(path, to_text(m, meta)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<CMat> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(from_text(&text, path)?.0)
}
