//! Sample files: CSV with one value per line, or a little-endian `f64`
//! stream behind the 8-byte magic `SWTL0001`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SWTL0001";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Csv,
    Binary,
}

pub fn write_samples<W: Write>(values: &[f64], format: SampleFormat, mut out: W) -> Result<()> {
    match format {
        SampleFormat::Csv => {
            for v in values {
                writeln!(out, "{v}")?;
            }
        }
        SampleFormat::Binary => {
            out.write_all(MAGIC)?;
            for v in values {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Parses either format, detected by the magic header.
pub fn parse_samples(bytes: &[u8]) -> Result<Vec<f64>> {
    let values = if let Some(body) = bytes.strip_prefix(MAGIC.as_slice()) {
        if body.len() % 8 != 0 {
            return Err(Error::Parse(format!("binary body of {} bytes is not a whole number of f64", body.len())));
        }
        body.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect()
    } else {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(Error::Parse("sample file holds no values".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("samples"));
    }
    Ok(values)
}

pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    parse_samples(&fs::read(path)?)
}
