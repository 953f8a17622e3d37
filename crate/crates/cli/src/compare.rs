//! `compare` subcommand: column-wise difference report between two moment
//! CSVs, with optional pass/fail thresholds on the max-abs difference.

use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::tabular::{self, Table};

/// Difference statistics for one shared column.
#[derive(Debug)]
pub struct ColumnDiff {
    pub name: String,
    pub linf: f64,
    pub rms: f64,
}

/// Row indices of `cand` matching each `base` time exactly.
///
/// Grids must either coincide or the candidate must be a superset of the
/// base grid (finer output of the same run); anything else is an error.
fn align_grids(base: &[f64], cand: &[f64]) -> Result<Vec<usize>> {
    if base == cand {
        return Ok((0..base.len()).collect());
    }
    let mut indices = Vec::with_capacity(base.len());
    let mut j = 0;
    for &t in base {
        while j < cand.len() && cand[j] < t {
            j += 1;
        }
        if j >= cand.len() || cand[j] != t {
            bail!(
                "time grids do not match: candidate has no row at t = {} \
                 (grids must coincide or the candidate must be a superset)",
                tabular::fmt_f64(t)
            );
        }
        indices.push(j);
        j += 1;
    }
    Ok(indices)
}

/// Differences for every non-time column of `base`, candidate rows aligned
/// by exact time match.
pub fn diff_tables(base: &Table, cand: &Table) -> Result<Vec<ColumnDiff>> {
    let bt = base
        .column_index("t")
        .context("base file has no 't' column")?;
    let ct = cand
        .column_index("t")
        .context("candidate file has no 't' column")?;
    if base.len() == 0 {
        bail!("base file has no data rows");
    }
    let rows = align_grids(&base.columns[bt], &cand.columns[ct])?;
    let mut diffs = Vec::new();
    for (c, name) in base.headers.iter().enumerate() {
        if c == bt {
            continue;
        }
        let cc = cand
            .column_index(name)
            .with_context(|| format!("candidate file has no '{name}' column"))?;
        let mut linf: f64 = 0.0;
        let mut sumsq = 0.0;
        for (i, &j) in rows.iter().enumerate() {
            let d = base.columns[c][i] - cand.columns[cc][j];
            linf = linf.max(d.abs());
            sumsq += d * d;
        }
        diffs.push(ColumnDiff {
            name: name.clone(),
            linf,
            rms: (sumsq / rows.len() as f64).sqrt(),
        });
    }
    Ok(diffs)
}

/// Runs the comparison and prints one line per column; exits nonzero when a
/// `--linf-max` threshold is exceeded.
pub fn cmd_compare(
    base_path: &Path,
    cand_path: &Path,
    thresholds: &[(String, f64)],
) -> Result<bool> {
    let base = tabular::read_table(base_path)?;
    let cand = tabular::read_table(cand_path)?;
    let diffs = diff_tables(&base, &cand)?;
    for (name, _) in thresholds {
        if !diffs.iter().any(|d| &d.name == name) {
            bail!("--linf-max names unknown column '{name}'");
        }
    }
    let mut all_ok = true;
    for d in &diffs {
        let limit = thresholds
            .iter()
            .find(|(name, _)| name == &d.name)
            .map(|&(_, v)| v);
        let verdict = match limit {
            Some(v) if d.linf <= v => " (limit {v}: pass)".replace("{v}", &tabular::fmt_f64(v)),
            Some(v) => {
                all_ok = false;
                " (limit {v}: FAIL)".replace("{v}", &tabular::fmt_f64(v))
            }
            None => String::new(),
        };
        println!(
            "{}: linf={} rms={}{verdict}",
            d.name,
            tabular::fmt_f64(d.linf),
            tabular::fmt_f64(d.rms)
        );
    }
    Ok(all_ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(headers: &[&str], columns: &[&[f64]]) -> Table {
        Table {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            columns: columns.iter().map(|c| c.to_vec()).collect(),
        }
    }

    #[test]
    fn identical_tables_have_zero_difference() {
        let a = table(&["t", "mean_x"], &[&[0.0, 0.1, 0.2], &[1.0, 2.0, 3.0]]);
        let d = diff_tables(&a, &a).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].linf, 0.0);
        assert_eq!(d[0].rms, 0.0);
    }

    #[test]
    fn superset_candidate_is_downsampled() {
        let base = table(&["t", "v"], &[&[0.0, 0.2, 0.4], &[1.0, 2.0, 3.0]]);
        let cand = table(
            &["t", "v"],
            &[&[0.0, 0.1, 0.2, 0.3, 0.4], &[1.0, 9.0, 2.5, 9.0, 3.0]],
        );
        let d = diff_tables(&base, &cand).unwrap();
        assert_eq!(d[0].linf, 0.5);
        let expected_rms = (0.25f64 / 3.0).sqrt();
        assert!((d[0].rms - expected_rms).abs() < 1e-15);
    }

    #[test]
    fn mismatched_grids_and_missing_columns_error() {
        let base = table(&["t", "v"], &[&[0.0, 0.15], &[1.0, 2.0]]);
        let cand = table(&["t", "v"], &[&[0.0, 0.1, 0.2], &[1.0, 2.0, 3.0]]);
        assert!(diff_tables(&base, &cand).unwrap_err().to_string().contains("0.15"));

        let cand = table(&["t", "w"], &[&[0.0, 0.15], &[1.0, 2.0]]);
        assert!(diff_tables(&base, &cand).unwrap_err().to_string().contains("'v'"));

        let no_t = table(&["x", "v"], &[&[0.0], &[1.0]]);
        assert!(diff_tables(&no_t, &cand).is_err());
    }
}
