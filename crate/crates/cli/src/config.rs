//! Experiment configuration: JSON schema, defaults, and validation.
//!
//! A run is described by a single JSON document selecting a system, a
//! propagation method, and grid/output settings. Optional fields have
//! defaults; [`resolve`] applies them all and validates, so the manifest can
//! record the exact configuration that executed.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Result};
use serde::{Deserialize, Serialize};

/// Which hybrid system to propagate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemConfig {
    /// Damped oscillator whose constant forcing flips with the sign of the
    /// position; the forcing magnitude is the uncertain parameter,
    /// Gaussian(mu, sigma).
    Oscillator {
        /// Damping coefficient.
        #[serde(default = "defaults::damping")]
        c: f64,
        /// Mean of the uncertain forcing magnitude.
        mu: f64,
        /// Standard deviation of the uncertain forcing magnitude.
        sigma: f64,
        /// Initial state (position, velocity).
        #[serde(default = "defaults::oscillator_x0")]
        x0: [f64; 2],
    },
    /// Bouncing ball under uncertain gravity Gaussian(mu_g, sigma_g);
    /// impacts run through a floor layer of half-width `epsilon` that
    /// relaxes the velocity toward the restitution jump.
    Ball {
        /// Mean gravitational acceleration.
        #[serde(default = "defaults::mu_g")]
        mu_g: f64,
        /// Standard deviation of the gravitational acceleration.
        #[serde(default = "defaults::sigma_g")]
        sigma_g: f64,
        /// Restitution coefficient, strictly inside (0, 1).
        #[serde(default = "defaults::gamma")]
        gamma: f64,
        /// Floor-layer half-width.
        #[serde(default = "defaults::epsilon")]
        epsilon: f64,
        /// Release height.
        #[serde(default = "defaults::y0")]
        y0: f64,
        /// Release velocity.
        #[serde(default = "defaults::v0")]
        v0: f64,
    },
}

/// Which propagation method to use.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MethodConfig {
    /// Monte Carlo sampling: `n` pseudo-random parameter draws from `seed`.
    Mc { n: usize, seed: u64 },
    /// Quasi-Monte Carlo sampling: `n` low-discrepancy parameter points.
    Qmc { n: usize },
    /// Piecewise-constant (wavelet) chaos expansion of the given order.
    HpcWavelet { order: usize },
    /// Smooth polynomial chaos expansion of the given degree; region
    /// integrals use `quad_order` Gauss-Hermite nodes (default 2·degree+2).
    HpcHermite {
        degree: usize,
        #[serde(default)]
        quad_order: Option<usize>,
    },
    /// Density transport along `n` switching characteristics.
    Transport { n: usize },
}

/// Raw configuration as parsed from JSON, optional fields still unresolved.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub method: MethodConfig,
    /// Horizon; defaults to 20 for the oscillator, 2 for the ball.
    #[serde(default)]
    pub t_end: Option<f64>,
    /// Integration step; defaults to 1e-3 for the oscillator, 1e-4 for the
    /// ball.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Moments CSV keeps every `output_stride`-th grid point.
    #[serde(default = "defaults::stride")]
    pub output_stride: usize,
    /// Times at which to dump weighted state samples (and their CDF).
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// When set, also write an equal-width histogram with this many bins at
    /// each snapshot time.
    #[serde(default)]
    pub hist_bins: Option<usize>,
    /// Output directory; defaults to the config path with extension `.out`.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// Fully resolved configuration: every default applied, all fields concrete.
///
/// This is what the manifest records, so a run can be reproduced from the
/// manifest alone.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub system: SystemConfig,
    pub method: MethodConfig,
    pub t_end: f64,
    pub dt: f64,
    pub output_stride: usize,
    pub snapshot_times: Vec<f64>,
    pub hist_bins: Option<usize>,
    pub output_dir: PathBuf,
}

mod defaults {
    pub fn damping() -> f64 {
        0.5
    }
    pub fn oscillator_x0() -> [f64; 2] {
        [1e-2, 1.0]
    }
    pub fn mu_g() -> f64 {
        9.8
    }
    pub fn sigma_g() -> f64 {
        0.2
    }
    pub fn gamma() -> f64 {
        0.9
    }
    pub fn epsilon() -> f64 {
        0.01
    }
    pub fn y0() -> f64 {
        1.0
    }
    pub fn v0() -> f64 {
        0.0
    }
    pub fn stride() -> usize {
        1
    }
}

/// Applies defaults and validates; `config_path` anchors the default output
/// directory.
pub fn resolve(cfg: ExperimentConfig, config_path: &Path) -> Result<ResolvedConfig> {
    let (t_end_default, dt_default) = match cfg.system {
        SystemConfig::Oscillator { .. } => (20.0, 1e-3),
        SystemConfig::Ball { .. } => (2.0, 1e-4),
    };
    let t_end = cfg.t_end.unwrap_or(t_end_default);
    let dt = cfg.dt.unwrap_or(dt_default);
    let output_dir = cfg
        .output_dir
        .unwrap_or_else(|| config_path.with_extension("out"));

    ensure!(
        t_end.is_finite() && t_end >= 0.0,
        "t_end must be finite and nonnegative, got {t_end}"
    );
    ensure!(
        dt.is_finite() && dt > 0.0,
        "dt must be finite and positive, got {dt}"
    );
    ensure!(
        cfg.output_stride >= 1,
        "output_stride must be at least 1, got {}",
        cfg.output_stride
    );
    if let Some(bins) = cfg.hist_bins {
        ensure!(bins >= 1, "hist_bins must be at least 1, got {bins}");
    }
    for &t in &cfg.snapshot_times {
        ensure!(t.is_finite(), "snapshot time must be finite, got {t}");
        ensure!(
            (0.0..=t_end + 1e-9).contains(&t),
            "snapshot time {t} lies outside the horizon [0, {t_end}]"
        );
        let steps = (t / dt).round();
        ensure!(
            (steps * dt - t).abs() <= 1e-9 * t.abs().max(1.0),
            "snapshot time {t} is not a multiple of dt = {dt}"
        );
    }

    match cfg.system {
        SystemConfig::Oscillator { c, mu, sigma, x0 } => {
            ensure!(c.is_finite(), "damping c must be finite, got {c}");
            ensure!(mu.is_finite(), "mu must be finite, got {mu}");
            ensure!(
                sigma.is_finite() && sigma > 0.0,
                "sigma must be finite and positive, got {sigma}"
            );
            ensure!(
                x0.iter().all(|v| v.is_finite()),
                "initial state must be finite, got {x0:?}"
            );
        }
        SystemConfig::Ball {
            mu_g,
            sigma_g,
            gamma,
            epsilon,
            y0,
            v0,
        } => {
            ensure!(mu_g.is_finite(), "mu_g must be finite, got {mu_g}");
            ensure!(
                sigma_g.is_finite() && sigma_g > 0.0,
                "sigma_g must be finite and positive, got {sigma_g}"
            );
            ensure!(
                gamma.is_finite() && 0.0 < gamma && gamma < 1.0,
                "gamma must lie strictly inside (0, 1), got {gamma}"
            );
            ensure!(
                epsilon.is_finite() && epsilon > 0.0,
                "epsilon must be finite and positive, got {epsilon}"
            );
            ensure!(
                y0.is_finite() && y0 > epsilon,
                "release height y0 = {y0} must lie above the floor layer epsilon = {epsilon}"
            );
            ensure!(v0.is_finite(), "v0 must be finite, got {v0}");
        }
    }

    match cfg.method {
        MethodConfig::Mc { n, .. } => {
            ensure!(n >= 2, "mc needs at least 2 samples, got {n}");
        }
        MethodConfig::Qmc { n } => {
            ensure!(n >= 1, "qmc needs at least 1 sample, got {n}");
        }
        MethodConfig::HpcWavelet { .. } => {}
        MethodConfig::HpcHermite { degree, quad_order } => {
            let needed = 2 * degree + 2;
            if let Some(q) = quad_order {
                ensure!(
                    q >= needed,
                    "quad_order = {q} is too small for degree {degree}; need at least {needed}"
                );
            }
        }
        MethodConfig::Transport { n } => {
            ensure!(n >= 1, "transport needs at least one term, got {n}");
            match cfg.system {
                SystemConfig::Oscillator { mu, sigma, .. } => {
                    if mu != 0.0 || sigma != 1.0 {
                        bail!(
                            "the transport method expands a standard-normal parameter; \
                             set mu = 0 and sigma = 1 (got mu = {mu}, sigma = {sigma})"
                        );
                    }
                }
                SystemConfig::Ball { .. } => {
                    bail!("the transport method supports the oscillator system only");
                }
            }
        }
    }

    Ok(ResolvedConfig {
        system: cfg.system,
        method: cfg.method,
        t_end,
        dt,
        output_stride: cfg.output_stride,
        snapshot_times: cfg.snapshot_times,
        hist_bins: cfg.hist_bins,
        output_dir,
    })
}

/// Resolved quadrature order for the smooth-chaos method.
pub fn hermite_quad_order(degree: usize, quad_order: Option<usize>) -> usize {
    quad_order.unwrap_or(2 * degree + 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ExperimentConfig {
        serde_json::from_str(text).expect("fixture parses")
    }

    #[test]
    fn defaults_resolve_per_system() {
        let osc = parse(r#"{"system":{"type":"oscillator","mu":0.0,"sigma":1.0},"method":{"type":"qmc","n":10}}"#);
        let rc = resolve(osc, Path::new("runs/case.json")).unwrap();
        assert_eq!(rc.t_end, 20.0);
        assert_eq!(rc.dt, 1e-3);
        assert_eq!(rc.output_stride, 1);
        assert_eq!(rc.output_dir, PathBuf::from("runs/case.out"));
        match rc.system {
            SystemConfig::Oscillator { c, x0, .. } => {
                assert_eq!(c, 0.5);
                assert_eq!(x0, [1e-2, 1.0]);
            }
            _ => panic!("expected oscillator"),
        }

        let ball = parse(r#"{"system":{"type":"ball"},"method":{"type":"mc","n":8,"seed":1}}"#);
        let rc = resolve(ball, Path::new("ball.json")).unwrap();
        assert_eq!(rc.t_end, 2.0);
        assert_eq!(rc.dt, 1e-4);
        match rc.system {
            SystemConfig::Ball {
                mu_g,
                sigma_g,
                gamma,
                epsilon,
                y0,
                v0,
            } => {
                assert_eq!(
                    (mu_g, sigma_g, gamma, epsilon, y0, v0),
                    (9.8, 0.2, 0.9, 0.01, 1.0, 0.0)
                );
            }
            _ => panic!("expected ball"),
        }
    }

    #[test]
    fn rejects_bad_fields() {
        let cases = [
            r#"{"system":{"type":"oscillator","mu":0.0,"sigma":0.0},"method":{"type":"qmc","n":10}}"#,
            r#"{"system":{"type":"oscillator","mu":0.0,"sigma":1.0},"method":{"type":"mc","n":1,"seed":0}}"#,
            r#"{"system":{"type":"oscillator","mu":0.0,"sigma":1.0},"method":{"type":"qmc","n":10},"dt":0.0}"#,
            r#"{"system":{"type":"oscillator","mu":0.0,"sigma":1.0},"method":{"type":"qmc","n":10},"output_stride":0}"#,
            r#"{"system":{"type":"oscillator","mu":0.0,"sigma":1.0},"method":{"type":"qmc","n":10},"snapshot_times":[0.0005]}"#,
            r#"{"system":{"type":"ball","y0":0.005},"method":{"type":"mc","n":8,"seed":1}}"#,
            r#"{"system":{"type":"ball"},"method":{"type":"transport","n":5}}"#,
            r#"{"system":{"type":"oscillator","mu":10.0,"sigma":2.0},"method":{"type":"transport","n":5}}"#,
            r#"{"system":{"type":"oscillator","mu":0.0,"sigma":1.0},"method":{"type":"hpc-hermite","degree":3,"quad_order":4}}"#,
        ];
        for text in cases {
            let cfg = parse(text);
            assert!(resolve(cfg, Path::new("x.json")).is_err(), "accepted: {text}");
        }
    }

    #[test]
    fn unknown_fields_fail_at_parse_time() {
        let err = serde_json::from_str::<ExperimentConfig>(
            r#"{"system":{"type":"oscillator","mu":0.0,"sigma":1.0,"zeta":2.0},"method":{"type":"qmc","n":10}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("zeta"), "{err}");
    }

    #[test]
    fn snapshot_on_grid_accepted() {
        let cfg = parse(
            r#"{"system":{"type":"oscillator","mu":0.0,"sigma":1.0},"method":{"type":"qmc","n":10},"snapshot_times":[18.0],"t_end":20.0}"#,
        );
        let rc = resolve(cfg, Path::new("x.json")).unwrap();
        assert_eq!(rc.snapshot_times, vec![18.0]);
    }
}
