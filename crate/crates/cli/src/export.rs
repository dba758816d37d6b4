//! Deterministic CSV and flat binary exporters.
//!
//! CSV: fixed column order, `{:.16e}` floats (17 significant digits), `NaN`
//! for undefined entries, LF line endings.
//!
//! Binary grids: 4-byte magic (`ENV1` envelopes, `FLD1` fields), three
//! dimensions as little-endian `u64`, three spacings as little-endian `f64`,
//! then the payload as little-endian `f64`. `ENV1` stores `α1` then `α2`,
//! each as interleaved `(Re, Im)`; `FLD1` stores 12 planes, `Re` then `Im` of
//! each of the six components.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use twoscale_core::linalg::C64;
use twoscale_core::Error;

use crate::error::{CliError, CliResult};

pub const ENV_MAGIC: &[u8; 4] = b"ENV1";
pub const FLD_MAGIC: &[u8; 4] = b"FLD1";
const HEADER_LEN: usize = 4 + 3 * 8 + 3 * 8;

pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Num(v) => f.write_str(&fmt_f64(*v)),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

pub fn csv_string(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|c| c.to_string()).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> CliResult<()> {
    write_text(path, &csv_string(header, rows))
}

/// A complex grid with its header.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryGrid {
    pub magic: [u8; 4],
    pub dims: [u64; 3],
    pub spacings: [f64; 3],
    /// `ENV1`: two arrays; `FLD1`: six arrays; each of length `dims` product.
    pub arrays: Vec<Vec<C64>>,
}

impl BinaryGrid {
    fn expected_arrays(magic: &[u8; 4]) -> Option<usize> {
        match magic {
            m if m == ENV_MAGIC => Some(2),
            m if m == FLD_MAGIC => Some(6),
            _ => None,
        }
    }

    pub fn points(&self) -> usize {
        self.dims.iter().product::<u64>() as usize
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, Error> {
        let n = self.points();
        let want = Self::expected_arrays(&self.magic)
            .ok_or_else(|| Error::ExportIntegrity(format!("unknown magic {:?}", self.magic)))?;
        if self.arrays.len() != want || self.arrays.iter().any(|a| a.len() != n) {
            return Err(Error::ExportIntegrity("array count or length does not match header".into()));
        }
        let mut out = Vec::with_capacity(HEADER_LEN + want * n * 16);
        out.extend_from_slice(&self.magic);
        for d in self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for s in self.spacings {
            out.extend_from_slice(&s.to_le_bytes());
        }
        if &self.magic == ENV_MAGIC {
            for a in &self.arrays {
                for v in a {
                    out.extend_from_slice(&v.re.to_le_bytes());
                    out.extend_from_slice(&v.im.to_le_bytes());
                }
            }
        } else {
            for a in &self.arrays {
                for v in a {
                    out.extend_from_slice(&v.re.to_le_bytes());
                }
                for v in a {
                    out.extend_from_slice(&v.im.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, Error> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::ExportIntegrity(format!("file too short ({} bytes)", bytes.len())));
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        let count = Self::expected_arrays(&magic)
            .ok_or_else(|| Error::ExportIntegrity(format!("bad magic {:?}", String::from_utf8_lossy(&magic))))?;
        let u = |i: usize| u64::from_le_bytes(bytes[4 + 8 * i..12 + 8 * i].try_into().expect("8 bytes"));
        let f = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().expect("8 bytes"));
        let dims = [u(0), u(1), u(2)];
        let spacings = [f(28), f(36), f(44)];
        let n = dims
            .iter()
            .try_fold(1u64, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::ExportIntegrity("dimension overflow".into()))? as usize;
        let body = &bytes[HEADER_LEN..];
        if body.len() != count * n * 16 {
            return Err(Error::ExportIntegrity(format!(
                "payload has {} bytes, header implies {}",
                body.len(),
                count * n * 16
            )));
        }
        let val = |i: usize| f64::from_le_bytes(body[8 * i..8 * i + 8].try_into().expect("8 bytes"));
        let arrays = (0..count)
            .map(|a| {
                (0..n)
                    .map(|k| {
                        if &magic == ENV_MAGIC {
                            let base = 2 * (a * n + k);
                            C64::new(val(base), val(base + 1))
                        } else {
                            let base = 2 * a * n;
                            C64::new(val(base + k), val(base + n + k))
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            magic,
            dims,
            spacings,
            arrays,
        })
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let bytes = self.to_bytes()?;
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&bytes).map_err(|e| CliError::io(path, e))?;
        w.flush().map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| CliError::io(path, e))?;
        Ok(Self::from_bytes(&bytes)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(magic: &[u8; 4], count: usize) -> BinaryGrid {
        let dims = [2, 3, 1];
        let arrays = (0..count)
            .map(|a| (0..6).map(|k| C64::new(k as f64 * 0.1 + a as f64, -1.0 / (k as f64 + 1.0))).collect())
            .collect();
        BinaryGrid {
            magic: *magic,
            dims,
            spacings: [0.5, 0.25, 1.0],
            arrays,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        for (m, c) in [(ENV_MAGIC, 2), (FLD_MAGIC, 6)] {
            let g = sample(m, c);
            let back = BinaryGrid::from_bytes(&g.to_bytes().unwrap()).unwrap();
            assert_eq!(back, g);
        }
    }

    #[test]
    fn corrupt_magic_and_length() {
        let mut b = sample(ENV_MAGIC, 2).to_bytes().unwrap();
        b[0] = b'X';
        assert!(matches!(BinaryGrid::from_bytes(&b), Err(Error::ExportIntegrity(_))));
        let b = sample(FLD_MAGIC, 6).to_bytes().unwrap();
        assert!(matches!(BinaryGrid::from_bytes(&b[..b.len() - 8]), Err(Error::ExportIntegrity(_))));
    }

    #[test]
    fn csv_format() {
        let s = csv_string(&["a", "b"], &[vec![Cell::Num(1.0), Cell::Num(f64::NAN)]]);
        assert_eq!(s, "a,b\n1.0000000000000000e0,NaN\n");
    }
}
