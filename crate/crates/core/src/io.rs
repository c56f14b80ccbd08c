//! Matrix and vector files.
//!
//! CSV: one row per line, comma-separated decimal floats, no header.
//! Binary: `ALWM`, then `n` and `d` as little-endian `u64`, then `n * d`
//! little-endian `f64` in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;

pub const BINARY_MAGIC: &[u8; 4] = b"ALWM";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "binary" | "bin" => Ok(Self::Binary),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}` (expected csv or binary)"))),
        }
    }
}

impl MatrixFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Binary => "bin",
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a matrix, choosing the encoding from the leading bytes.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<RealMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(path, &bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| io_err(path, "not UTF-8 text and no binary header"))?;
        parse_csv(path, &text)
    }
}

fn decode_binary(path: &Path, bytes: &[u8]) -> Result<RealMatrix> {
    let header = |at: usize| -> Result<u64> {
        bytes
            .get(at..at + 8)
            .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")))
            .ok_or_else(|| io_err(path, "truncated binary header"))
    };
    let n = header(4)? as usize;
    let d = header(12)? as usize;
    let body = &bytes[20..];
    let expected = n.checked_mul(d).and_then(|c| c.checked_mul(8));
    if expected != Some(body.len()) {
        return Err(io_err(
            path,
            format!("binary payload is {} bytes, header declares {n}x{d}", body.len()),
        ));
    }
    let data: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(io_err(path, format!("entry ({}, {}) is not finite", pos / d, pos % d)));
    }
    RealMatrix::from_row_major(n, d, &data)
}

fn parse_csv(path: &Path, text: &str) -> Result<RealMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                let field = field.trim();
                match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    Ok(_) => Err(parse_err(path, line_no, format!("`{field}` is not finite"))),
                    Err(_) => Err(parse_err(path, line_no, format!("`{field}` is not a number"))),
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("expected {} fields, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(io_err(path, "no rows"));
    }
    RealMatrix::from_rows(&rows)
}

/// Reads one value per non-empty line.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let field = l.trim();
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, i + 1, format!("`{field}` is not a finite number")))
        })
        .collect()
}

/// Reads one trimmed token per non-empty line.
pub fn read_tokens(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

pub fn encode_matrix(m: &RealMatrix, format: MatrixFormat) -> Vec<u8> {
    match format {
        MatrixFormat::Csv => {
            let mut out = String::new();
            for i in 0..m.nrows() {
                let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
            out.into_bytes()
        }
        MatrixFormat::Binary => {
            let mut out = Vec::with_capacity(20 + 8 * m.nrows() * m.ncols());
            out.extend_from_slice(BINARY_MAGIC);
            out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
            out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
            for v in m.to_row_major() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out
        }
    }
}

pub fn write_matrix(path: impl AsRef<Path>, m: &RealMatrix, format: MatrixFormat) -> Result<()> {
    write_atomic(path, &encode_matrix(m, format))
}

/// Writes to a sibling temporary file and renames it into place, so a
/// failed run never leaves a partial file at `path`.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let name = path
        .file_name()
        .ok_or_else(|| io_err(path, "not a file path"))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_err(path, e));
    }
    Ok(())
}
