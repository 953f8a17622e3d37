//! CSV reading and writing.
//!
//! All floats are written with Rust's shortest round-trip formatting, so a
//! file read back yields bitwise-identical values and identical runs yield
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hybrid_uq_core::MomentSeries;

/// A parsed CSV: header names and one f64 column per header.
#[derive(Debug)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    /// Index of a named column.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

/// Formats one float with shortest round-trip decimals.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Time tag used in snapshot filenames (`samples_t18.csv` for t = 18).
pub fn time_tag(t: f64) -> String {
    fmt_f64(t)
}

/// Writes the moments CSV: time column plus mean/variance per state
/// variable, thinned to every `stride`-th grid point.
pub fn write_moments(
    path: &Path,
    moments: &MomentSeries,
    names: &[String],
    stride: usize,
) -> Result<()> {
    assert_eq!(moments.dims(), names.len(), "one name per state dimension");
    let mut out = String::new();
    out.push('t');
    for name in names {
        let _ = write!(out, ",mean_{name},var_{name}");
    }
    out.push('\n');
    for i in (0..moments.times.len()).step_by(stride) {
        let _ = write!(out, "{}", fmt_f64(moments.times[i]));
        for d in 0..moments.dims() {
            let _ = write!(
                out,
                ",{},{}",
                fmt_f64(moments.mean[d][i]),
                fmt_f64(moments.variance[d][i])
            );
        }
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Writes weighted state samples: one column per state variable plus a
/// final `weight` column.
pub fn write_samples(
    path: &Path,
    names: &[String],
    states: &[Vec<f64>],
    weights: &[f64],
) -> Result<()> {
    assert_eq!(states.len(), weights.len(), "one weight per sample");
    let mut out = String::new();
    out.push_str(&names.join(","));
    out.push_str(",weight\n");
    for (state, &w) in states.iter().zip(weights) {
        assert_eq!(state.len(), names.len(), "one value per state dimension");
        for (k, &v) in state.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(v));
        }
        let _ = writeln!(out, ",{}", fmt_f64(w));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Writes a step CDF as (x, F) rows: support points ascending, cumulative
/// mass after each atom.
pub fn write_cdf(path: &Path, support: &[f64], cumulative: &[f64]) -> Result<()> {
    assert_eq!(support.len(), cumulative.len());
    let mut out = String::from("x,F\n");
    for (&x, &f) in support.iter().zip(cumulative) {
        let _ = writeln!(out, "{},{}", fmt_f64(x), fmt_f64(f));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Writes a histogram as (bin_left, bin_right, mass) rows.
pub fn write_hist(path: &Path, edges: &[f64], masses: &[f64]) -> Result<()> {
    assert_eq!(edges.len(), masses.len() + 1, "bins+1 edges");
    let mut out = String::from("bin_left,bin_right,mass\n");
    for (b, &m) in masses.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_f64(edges[b]),
            fmt_f64(edges[b + 1]),
            fmt_f64(m)
        );
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Reads a CSV with a header row into named f64 columns.
pub fn read_table(path: &Path) -> Result<Table> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header_line = match lines.next() {
        Some(l) if !l.trim().is_empty() => l,
        _ => bail!("{}: missing header row", path.display()),
    };
    let headers: Vec<String> = header_line.split(',').map(|h| h.trim().to_string()).collect();
    let mut columns = vec![Vec::new(); headers.len()];
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != headers.len() {
            bail!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                row + 2,
                fields.len(),
                headers.len()
            );
        }
        for (c, field) in fields.iter().enumerate() {
            let v: f64 = field.trim().parse().with_context(|| {
                format!(
                    "{}: row {}, column {}: not a number: {field:?}",
                    path.display(),
                    row + 2,
                    headers[c]
                )
            })?;
            columns[c].push(v);
        }
    }
    Ok(Table { headers, columns })
}
