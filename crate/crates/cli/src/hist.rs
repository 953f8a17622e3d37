//! Weighted equal-width histograms over snapshot samples.

use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::tabular;

/// Equal-width histogram: `edges` has one more entry than `masses`.
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

/// Bins weighted values into `bins` equal-width cells spanning the sample
/// range. Masses sum to the total weight; a degenerate range (all values
/// equal) puts everything in the first bin.
pub fn build(values: &[f64], weights: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        bail!("no samples to bin");
    }
    if bins == 0 {
        bail!("histogram needs at least one bin");
    }
    assert_eq!(values.len(), weights.len(), "one weight per value");
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        if !v.is_finite() {
            bail!("sample value {v} is not finite");
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|b| if b == bins { hi } else { lo + width * b as f64 })
        .collect();
    let mut masses = vec![0.0; bins];
    for (&v, &w) in values.iter().zip(weights) {
        let idx = if hi == lo {
            0
        } else {
            (((v - lo) / (hi - lo)) * bins as f64).floor() as usize
        };
        masses[idx.min(bins - 1)] += w;
    }
    Ok(Histogram { edges, masses })
}

/// `hist` subcommand: bins the first state column of a recorded snapshot
/// and writes `hist_t<t>.csv` next to it.
pub fn cmd_hist(run_dir: &Path, t: f64, bins: usize) -> Result<()> {
    let tag = tabular::time_tag(t);
    let samples_path = run_dir.join(format!("samples_t{tag}.csv"));
    if !samples_path.exists() {
        let mut available: Vec<String> = std::fs::read_dir(run_dir)
            .with_context(|| format!("reading {}", run_dir.display()))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n.starts_with("samples_t") && n.ends_with(".csv"))
            .collect();
        available.sort();
        bail!(
            "no snapshot recorded at t = {tag} ({} not found; available: [{}])",
            samples_path.display(),
            available.join(", ")
        );
    }
    let table = tabular::read_table(&samples_path)?;
    let weight_col = table
        .column_index("weight")
        .with_context(|| format!("{}: no weight column", samples_path.display()))?;
    if table.len() == 0 {
        bail!("{}: snapshot holds no samples", samples_path.display());
    }
    let hist = build(&table.columns[0], &table.columns[weight_col], bins)?;
    let out_path = run_dir.join(format!("hist_t{tag}.csv"));
    tabular::write_hist(&out_path, &hist.edges, &hist.masses)?;
    let total: f64 = hist.masses.iter().sum();
    println!(
        "wrote {} ({} bins over [{}, {}], total mass {})",
        out_path.display(),
        bins,
        tabular::fmt_f64(hist.edges[0]),
        tabular::fmt_f64(hist.edges[bins]),
        tabular::fmt_f64(total)
    );
    Ok(())
}
