//! `run` subcommand: executes a resolved experiment and writes its outputs.
//!
//! Every run produces `moments.csv` (time, mean and variance per state
//! variable) and `manifest.json` (resolved config, code version, completion
//! status). Each requested snapshot time adds weighted state samples
//! (`samples_t<t>.csv`) and the CDF of the first state variable
//! (`cdf_t<t>.csv`); with `hist_bins` set, an equal-width histogram too.
//!
//! Snapshot samples carry explicit weights so every method exposes the same
//! shape: Monte Carlo and quasi-Monte Carlo samples weigh 1/n, wavelet
//! cells weigh the (equal) cell probability, smooth-chaos surrogate
//! evaluations weigh their quadrature mass, and transport characteristics
//! weigh their carried probability mass.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use hybrid_uq_core::basis::{hermite_eval, hermite_rule};
use hybrid_uq_core::hpc::{self, SolveStatus};
use hybrid_uq_core::model::switching_oscillator;
use hybrid_uq_core::resets::{bouncing_ball, make_boundary_layer};
use hybrid_uq_core::sampling::{self, SnapshotSamples};
use hybrid_uq_core::transport::{propagate, TransportConfig};
use hybrid_uq_core::{EnsembleStats, HaarBasis, HybridSystem, MomentSeries, ParamDist};

use crate::config::{self, ExperimentConfig, MethodConfig, ResolvedConfig, SystemConfig};
use crate::{hist, tabular};

/// How the propagation ended.
pub enum RunStatus {
    Complete,
    Diverged { t_last: f64 },
}

/// Weighted state samples at one requested time.
pub struct SnapshotSet {
    /// The configured snapshot time (used in filenames).
    pub label: f64,
    /// `states[sample][dim]`.
    pub states: Vec<Vec<f64>>,
    /// Probability mass per sample; sums to 1.
    pub weights: Vec<f64>,
}

/// Everything a run produces before serialization.
pub struct RunArtifacts {
    pub names: Vec<String>,
    pub moments: MomentSeries,
    pub snapshots: Vec<SnapshotSet>,
    pub status: RunStatus,
    pub samples_used: Option<usize>,
}

/// Index of grid time `t` in `times`, or `None` when the series was
/// truncated before reaching it.
fn grid_index(times: &[f64], t: f64, dt: f64) -> Option<usize> {
    let i = (t / dt).round() as usize;
    (i < times.len() && (times[i] - t).abs() <= 1e-9 * t.abs().max(1.0)).then_some(i)
}

fn sampled_artifacts(
    names: Vec<String>,
    stats: EnsembleStats,
    snaps: Vec<SnapshotSamples<f64>>,
    labels: &[f64],
) -> RunArtifacts {
    let snapshots = labels
        .iter()
        .zip(snaps)
        .map(|(&label, snap)| {
            let m = snap.states.len();
            SnapshotSet {
                label,
                weights: vec![1.0 / m as f64; m],
                states: snap.states,
            }
        })
        .collect();
    RunArtifacts {
        names,
        moments: stats.moments(),
        snapshots,
        samples_used: Some(stats.samples_used),
        status: RunStatus::Complete,
    }
}

fn execute_transport(rc: &ResolvedConfig, n: usize) -> Result<RunArtifacts> {
    let SystemConfig::Oscillator { c, x0, .. } = rc.system else {
        unreachable!("transport is validated to pair with the oscillator");
    };
    let series = propagate(&TransportConfig { n, damping: c, x0 }, rc.t_end, rc.dt)?;
    let names = switching_oscillator::<f64>(c).state_names().to_vec();
    let mut snapshots = Vec::new();
    for &t in &rc.snapshot_times {
        let ti = grid_index(series.times(), t, rc.dt)
            .with_context(|| format!("snapshot time {t} not on the output grid"))?;
        let ens = series.ensemble_at(ti);
        snapshots.push(SnapshotSet {
            label: t,
            states: ens.particles.iter().map(|p| p.state.clone()).collect(),
            weights: ens.particles.iter().map(|p| p.weight).collect(),
        });
    }
    Ok(RunArtifacts {
        names,
        moments: series.moments(),
        snapshots,
        status: RunStatus::Complete,
        samples_used: None,
    })
}

/// Runs the configured experiment and collects moments plus snapshots.
pub fn execute(rc: &ResolvedConfig) -> Result<RunArtifacts> {
    if let MethodConfig::Transport { n } = rc.method {
        return execute_transport(rc, n);
    }

    let (sys, dist, x0): (HybridSystem, ParamDist, Vec<f64>) = match rc.system {
        SystemConfig::Oscillator { c, mu, sigma, x0 } => (
            switching_oscillator(c),
            ParamDist::gaussian(mu, sigma)?,
            x0.to_vec(),
        ),
        SystemConfig::Ball {
            mu_g,
            sigma_g,
            gamma,
            epsilon,
            y0,
            v0,
        } => {
            let layer = make_boundary_layer(bouncing_ball(gamma)?, epsilon)?;
            let x0 = layer.augment_initial(&[y0, v0]);
            (layer.into_system(), ParamDist::gaussian(mu_g, sigma_g)?, x0)
        }
    };
    let names = sys.state_names().to_vec();
    let snap_times = &rc.snapshot_times;

    match rc.method {
        MethodConfig::Mc { n, seed } => {
            let (stats, snaps) = sampling::run_mc_with_snapshots(
                &sys, &dist, &x0, rc.t_end, rc.dt, n, seed, snap_times,
            )?;
            Ok(sampled_artifacts(names, stats, snaps, snap_times))
        }
        MethodConfig::Qmc { n } => {
            let (stats, snaps) =
                sampling::run_qmc_with_snapshots(&sys, &dist, &x0, rc.t_end, rc.dt, n, snap_times)?;
            Ok(sampled_artifacts(names, stats, snaps, snap_times))
        }
        MethodConfig::HpcWavelet { order } => {
            let series = hpc::evolve(&sys, &dist, &x0, order, rc.t_end, rc.dt)?;
            let basis = HaarBasis::new(order, dist)?;
            let n_cells = basis.n_cells();
            let mut snapshots = Vec::new();
            for &t in snap_times {
                // A snapshot past a divergence point is dropped; the
                // manifest flags the truncation.
                let Some(ti) = grid_index(&series.times, t, rc.dt) else {
                    continue;
                };
                let profile = hpc::cell_profile(&sys, &basis, &series.states[ti]);
                let states = (0..n_cells)
                    .map(|l| (0..sys.dim()).map(|d| profile.values[d][l]).collect())
                    .collect();
                snapshots.push(SnapshotSet {
                    label: t,
                    states,
                    weights: vec![1.0 / n_cells as f64; n_cells],
                });
            }
            Ok(RunArtifacts {
                names,
                moments: series.moments.clone(),
                snapshots,
                status: match series.status {
                    SolveStatus::Complete => RunStatus::Complete,
                    SolveStatus::Diverged { t_last } => RunStatus::Diverged { t_last },
                },
                samples_used: None,
            })
        }
        MethodConfig::HpcHermite { degree, quad_order } => {
            let quad = config::hermite_quad_order(degree, quad_order);
            let series = hpc::evolve_hermite(&sys, &dist, &x0, degree, quad, rc.t_end, rc.dt)?;
            let rule = hermite_rule(quad)?;
            let mut snapshots = Vec::new();
            for &t in snap_times {
                let Some(ti) = grid_index(&series.times, t, rc.dt) else {
                    continue;
                };
                let coeffs = &series.states[ti].coeffs;
                let states = rule
                    .nodes()
                    .iter()
                    .map(|&xi| {
                        let h = hermite_eval(degree, xi);
                        coeffs
                            .iter()
                            .map(|c| c.iter().zip(&h).map(|(a, b)| a * b).sum())
                            .collect()
                    })
                    .collect();
                snapshots.push(SnapshotSet {
                    label: t,
                    states,
                    weights: rule.weights().to_vec(),
                });
            }
            Ok(RunArtifacts {
                names,
                moments: series.moments.clone(),
                snapshots,
                status: match series.status {
                    SolveStatus::Complete => RunStatus::Complete,
                    SolveStatus::Diverged { t_last } => RunStatus::Diverged { t_last },
                },
                samples_used: None,
            })
        }
        MethodConfig::Transport { .. } => unreachable!("handled above"),
    }
}

#[derive(Serialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
enum ManifestStatus {
    Complete,
    Diverged { t_last: f64 },
    Failed { message: String },
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    status: ManifestStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples_used: Option<usize>,
    config: &'a ResolvedConfig,
    outputs: Vec<String>,
}

fn write_manifest(rc: &ResolvedConfig, manifest: &Manifest) -> Result<()> {
    let path = rc.output_dir.join("manifest.json");
    let body = serde_json::to_string_pretty(manifest)? + "\n";
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
}

/// `run` subcommand. Returns `Ok(true)` on full completion, `Ok(false)`
/// when the solver diverged (partial outputs retained and flagged).
pub fn cmd_run(config_path: &Path) -> Result<bool> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .with_context(|| format!("{}: invalid config", config_path.display()))?;
    let rc = config::resolve(cfg, config_path)
        .with_context(|| format!("{}: invalid config", config_path.display()))?;
    fs::create_dir_all(&rc.output_dir)
        .with_context(|| format!("creating {}", rc.output_dir.display()))?;

    let art = match execute(&rc) {
        Ok(art) => art,
        Err(e) => {
            write_manifest(
                &rc,
                &Manifest {
                    version: env!("CARGO_PKG_VERSION"),
                    status: ManifestStatus::Failed {
                        message: format!("{e:#}"),
                    },
                    samples_used: None,
                    config: &rc,
                    outputs: Vec::new(),
                },
            )?;
            return Err(e);
        }
    };

    let mut outputs = Vec::new();
    tabular::write_moments(
        &rc.output_dir.join("moments.csv"),
        &art.moments,
        &art.names,
        rc.output_stride,
    )?;
    outputs.push("moments.csv".to_string());

    for snap in &art.snapshots {
        let tag = tabular::time_tag(snap.label);
        let samples_name = format!("samples_t{tag}.csv");
        tabular::write_samples(
            &rc.output_dir.join(&samples_name),
            &art.names,
            &snap.states,
            &snap.weights,
        )?;
        outputs.push(samples_name);

        let values: Vec<f64> = snap.states.iter().map(|s| s[0]).collect();
        let cdf = sampling::empirical_cdf(&values, Some(&snap.weights))?;
        let cdf_name = format!("cdf_t{tag}.csv");
        tabular::write_cdf(&rc.output_dir.join(&cdf_name), cdf.support(), cdf.cumulative())?;
        outputs.push(cdf_name);

        if let Some(bins) = rc.hist_bins {
            let h = hist::build(&values, &snap.weights, bins)?;
            let hist_name = format!("hist_t{tag}.csv");
            tabular::write_hist(&rc.output_dir.join(&hist_name), &h.edges, &h.masses)?;
            outputs.push(hist_name);
        }
    }

    let status = match art.status {
        RunStatus::Complete => ManifestStatus::Complete,
        RunStatus::Diverged { t_last } => ManifestStatus::Diverged { t_last },
    };
    write_manifest(
        &rc,
        &Manifest {
            version: env!("CARGO_PKG_VERSION"),
            status,
            samples_used: art.samples_used,
            config: &rc,
            outputs,
        },
    )?;

    match art.status {
        RunStatus::Complete => {
            println!("run complete: {}", rc.output_dir.display());
            Ok(true)
        }
        RunStatus::Diverged { t_last } => {
            eprintln!(
                "solver diverged at t = {}; partial outputs retained in {}",
                tabular::fmt_f64(t_last),
                rc.output_dir.display()
            );
            Ok(false)
        }
    }
}
