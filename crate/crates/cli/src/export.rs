//! Field files. CSV holds grid samples as `x[,y],value` rows at
//! `x_j = 2πj/n`, with `x` the slower index in two dimensions. JSON holds
//! the coefficient table `{"k": [re, im]}` keyed by `"k1"` or `"k1,k2"`.
//! Numbers carry 15 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde_json::Value;
use waves_core::spectral::{PeriodicGrid, SurfaceField};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldFormat {
    Csv,
    Json,
}

impl FieldFormat {
    pub fn extension(self) -> &'static str {
        match self {
            FieldFormat::Csv => "csv",
            FieldFormat::Json => "json",
        }
    }
}

/// Number formatted with 15 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.14e}")
}

pub fn field_to_csv(f: &SurfaceField) -> String {
    let grid = f.grid();
    let mut out = String::new();
    out.push_str(if grid.dim() == 1 { "x,value\n" } else { "x,y,value\n" });
    for (idx, v) in f.values().iter().enumerate() {
        let p = grid.point(idx);
        if grid.dim() == 1 {
            let _ = writeln!(out, "{},{}", num(p[0]), num(*v));
        } else {
            let _ = writeln!(out, "{},{},{}", num(p[0]), num(p[1]), num(*v));
        }
    }
    out
}

fn key(k: [i64; 2], dim: usize) -> String {
    if dim == 1 {
        k[0].to_string()
    } else {
        format!("{},{}", k[0], k[1])
    }
}

/// Coefficient table as a JSON object, in grid order.
pub fn coeffs_to_json(f: &SurfaceField) -> String {
    let grid = f.grid();
    let body: Vec<String> = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            format!(
                "\"{}\": [{}, {}]",
                key(grid.wavevector(idx), grid.dim()),
                num(c.re),
                num(c.im)
            )
        })
        .collect();
    format!("{{{}}}", body.join(", "))
}

pub fn export_field(f: &SurfaceField, path: &Path, format: FieldFormat) -> Result<()> {
    let text = match format {
        FieldFormat::Csv => field_to_csv(f),
        FieldFormat::Json => coeffs_to_json(f) + "\n",
    };
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn malformed(path: &Path, message: impl Into<String>) -> CliError {
    CliError::FieldFormat {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn side_length(count: usize, dim: usize) -> Option<usize> {
    let n = if dim == 1 {
        count
    } else {
        (count as f64).sqrt().round() as usize
    };
    (n.pow(dim as u32) == count).then_some(n)
}

/// Reads a field written by [`export_field`]; the grid is inferred from
/// the number of entries.
pub fn import_field(path: &Path, format: FieldFormat) -> Result<SurfaceField> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    match format {
        FieldFormat::Csv => {
            let mut lines = text.lines();
            let dim = match lines.next() {
                Some("x,value") => 1,
                Some("x,y,value") => 2,
                _ => return Err(malformed(path, "unexpected header")),
            };
            let values = lines
                .filter(|l| !l.is_empty())
                .map(|l| {
                    l.rsplit(',')
                        .next()
                        .and_then(|v| v.parse::<f64>().ok())
                        .ok_or_else(|| malformed(path, format!("bad row `{l}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            let n = side_length(values.len(), dim).ok_or_else(|| malformed(path, "row count is not n^d"))?;
            let grid = PeriodicGrid::new(dim, n)?;
            Ok(SurfaceField::from_values(grid, values))
        }
        FieldFormat::Json => {
            let doc: Value = serde_json::from_str(&text)?;
            let table = doc.as_object().ok_or_else(|| malformed(path, "expected an object"))?;
            let dim = match table.keys().next() {
                Some(k) if k.contains(',') => 2,
                Some(_) => 1,
                None => return Err(malformed(path, "empty table")),
            };
            let n = side_length(table.len(), dim).ok_or_else(|| malformed(path, "entry count is not n^d"))?;
            let grid = PeriodicGrid::new(dim, n)?;
            let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
            for (k, v) in table {
                let parts: Vec<i64> = k
                    .split(',')
                    .map(|p| p.trim().parse::<i64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| malformed(path, format!("bad key `{k}`")))?;
                let kv = match parts[..] {
                    [a] if dim == 1 => [a, 0],
                    [a, b] if dim == 2 => [a, b],
                    _ => return Err(malformed(path, format!("bad key `{k}`"))),
                };
                let half = (n / 2) as i64;
                if kv.iter().take(dim).any(|&c| c < -half || c >= half) {
                    return Err(malformed(path, format!("wavenumber `{k}` outside the grid")));
                }
                let pair = v
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .and_then(|a| Some(Complex64::new(a[0].as_f64()?, a[1].as_f64()?)))
                    .ok_or_else(|| malformed(path, format!("bad value for `{k}`")))?;
                coeffs[grid.index_of(kv)] = pair;
            }
            Ok(SurfaceField::from_coeffs(grid, coeffs))
        }
    }
}
