//! Density transport along switching characteristics.
//!
//! Instead of expanding the state in the random germ, this route expands
//! the Liouville (phase-space density) equation of the switching
//! oscillator in Hermite polynomials of the uncertain parameter. The
//! resulting coupled hyperbolic system diagonalizes through the
//! three-term recurrence: the coupling matrix is the Jacobi matrix of the
//! Hermite family, its eigenvalues are the quadrature nodes, and the
//! decoupled scalar densities are advected along *characteristics* — one
//! copy of the oscillator per node, driven by λ_i. A deterministic
//! initial state makes each characteristic carry a constant probability
//! mass equal to the Gauss-Hermite weight of its node, so moments and
//! distribution functions reconstruct by weighted sums over a small,
//! deterministic particle ensemble.
//!
//! The route is only valid when probability mass cannot pile up on the
//! switching surface; [`check_no_accumulation`] screens a system for that
//! condition before propagation.

use rayon::prelude::*;

use thiserror::Error;

use crate::basis::{hermite_eval, hermite_rule, BasisError};
use crate::model::{simulate, switching_oscillator, HybridSystem, ModelError, Trajectory};
use crate::sampling::{empirical_cdf, StepCdf};
use crate::scalar::{cast_usize, to_f64, Scalar};
use crate::series::MomentSeries;

/// Errors from transport propagation.
#[derive(Debug, Error)]
pub enum TransportError {
    /// Configuration rejected before any work.
    #[error("invalid transport configuration: {0}")]
    Config(String),
    /// Quadrature/diagonalization failure.
    #[error(transparent)]
    Basis(#[from] BasisError),
    /// Characteristic integration failure.
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A sampled point on the switching surface together with the unit normal
/// oriented from the mode-0 side into the mode-1 side.
#[derive(Debug, Clone)]
pub struct InterfacePoint<T> {
    /// State on the guard surface.
    pub state: Vec<T>,
    /// Normal at that state, pointing from mode 0 into mode 1.
    pub normal: Vec<T>,
}

/// Outcome of the accumulation screen.
#[derive(Debug, Clone, PartialEq)]
pub enum Accumulation {
    /// Mass crosses or leaves the switching surface everywhere sampled.
    NoAccumulation,
    /// Flows converge on the surface somewhere; the payload describes the
    /// first offending probe.
    AccumulationPossible(String),
}

/// Classifies whether probability mass can accumulate on the switching
/// surface, by the sign pattern of the normal flow on both sides.
///
/// With the normal n̂ oriented from mode 0 into mode 1, let a = f₀·n̂ and
/// b = f₁·n̂ at an interface point. Mass converges onto the surface
/// exactly when the mode-0 flow pushes across (a > 0) while the mode-1
/// flow pushes back (b ≤ 0), or the weak/strict roles swap (a ≥ 0,
/// b < 0). Same-signed nonzero flows cross, opposite flows pulling away
/// (a ≤ 0, b ≥ 0) split, and doubly tangent flows (a = b = 0) slide —
/// none of those concentrate mass.
///
/// Second-order systems whose guard reads positions only shortcut to
/// [`Accumulation::NoAccumulation`]: their normal flow is carried by the
/// velocity states, which are continuous across the switch, so both sides
/// always agree. Single-mode systems have no switching surface at all.
pub fn check_no_accumulation<T: Scalar>(
    sys: &HybridSystem<T>,
    lambda: T,
    probes: &[InterfacePoint<T>],
) -> Accumulation {
    if sys.n_modes() == 1 || sys.second_order_positions().is_some() {
        return Accumulation::NoAccumulation;
    }
    let dim = sys.dim();
    let mut f = vec![T::zero(); dim];
    let mut scratch = vec![T::zero(); dim];
    for (idx, probe) in probes.iter().enumerate() {
        let mut flow = [T::zero(); 2];
        for (mode, slot) in flow.iter_mut().enumerate() {
            sys.eval_field(mode, &probe.state, lambda, &mut f, &mut scratch);
            *slot = f
                .iter()
                .zip(&probe.normal)
                .fold(T::zero(), |acc, (&fi, &ni)| acc + fi * ni);
        }
        let (a, b) = (flow[0], flow[1]);
        let converging =
            (a > T::zero() && b <= T::zero()) || (a >= T::zero() && b < T::zero());
        if converging {
            return Accumulation::AccumulationPossible(format!(
                "flows converge at interface probe {idx}: f0·n = {}, f1·n = {}",
                to_f64(a),
                to_f64(b)
            ));
        }
    }
    Accumulation::NoAccumulation
}

/// Diagonalization of the Hermite coupling matrix for an `n`-term
/// expansion: characteristic speeds (the quadrature nodes), the constant
/// probability mass each characteristic carries (the weights), and a
/// residual certifying the node/polynomial-zero identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagonalization<T> {
    /// Eigenvalues of the coupling matrix = quadrature nodes, ascending.
    pub nodes: Vec<T>,
    /// Probability mass per characteristic; sums to 1.
    pub weights: Vec<T>,
    /// max over nodes of the Newton step |H_n(λ)| / (1 + |H_n'(λ)|) — the
    /// distance from each node to the true polynomial zero.
    pub node_residual: T,
}

/// Builds the `n`-term diagonalization.
///
/// The coupling matrix of the Hermite-expanded density system is the
/// Jacobi matrix of the (probabilists') Hermite family, so its
/// eigendecomposition *is* the Gauss-Hermite rule: eigenvalues = nodes =
/// zeros of H_n (all real — the system is hyperbolic), and projecting a
/// deterministic initial density onto the eigenbasis puts the
/// Gauss-Hermite weight of each node on its characteristic.
pub fn build_diagonalization<T: Scalar>(n: usize) -> Result<Diagonalization<T>, BasisError> {
    let rule = hermite_rule::<T>(n)?;
    let mut node_residual = T::zero();
    for &node in rule.nodes() {
        let h = hermite_eval(n, node);
        // H_n'(λ) = n·H_{n−1}(λ) for the probabilists' family.
        let deriv = cast_usize::<T>(n) * h[n - 1];
        let step = h[n].abs() / (T::one() + deriv.abs());
        node_residual = node_residual.max(step);
    }
    Ok(Diagonalization {
        nodes: rule.nodes().to_vec(),
        weights: rule.weights().to_vec(),
        node_residual,
    })
}

/// Transport study configuration for the switching-oscillator family.
#[derive(Debug, Clone, Copy)]
pub struct TransportConfig<T> {
    /// Number of Hermite terms (characteristics).
    pub n: usize,
    /// Oscillator damping γ ≥ 0.
    pub damping: T,
    /// Deterministic initial state (x, y).
    pub x0: [T; 2],
}

/// One weighted characteristic particle at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle<T> {
    /// Characteristic speed λ_i (a quadrature node).
    pub lambda: T,
    /// Constant probability mass carried.
    pub weight: T,
    /// Phase-space position.
    pub state: Vec<T>,
    /// Density-amplitude growth e^{γt} accumulated along the
    /// characteristic (phase-space contraction); cancels in moments.
    pub growth: T,
}

/// The weighted particle ensemble at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble<T> {
    /// Ensemble time.
    pub time: T,
    /// Particles in node order.
    pub particles: Vec<Particle<T>>,
}

/// Moments and weighted step CDFs reconstructed from one ensemble.
#[derive(Debug, Clone)]
pub struct Reconstruction<T> {
    /// Weighted mean per state dimension.
    pub mean: Vec<T>,
    /// Weighted variance per state dimension (≥ 0).
    pub variance: Vec<T>,
    /// Weighted empirical CDF per state dimension.
    pub cdfs: Vec<StepCdf<T>>,
}

/// Reconstructs moments and marginal CDFs from an ensemble by weighted
/// sums; the density growth factor cancels against support contraction
/// and does not enter.
///
/// Panics if the ensemble is empty or its weights are invalid — both are
/// excluded by construction for ensembles this module emits.
pub fn reconstruct<T: Scalar>(ens: &ParticleEnsemble<T>) -> Reconstruction<T> {
    assert!(!ens.particles.is_empty(), "ensemble must hold particles");
    let dim = ens.particles[0].state.len();
    let mut mean = vec![T::zero(); dim];
    let mut variance = vec![T::zero(); dim];
    let mut cdfs = Vec::with_capacity(dim);
    let weights: Vec<T> = ens.particles.iter().map(|p| p.weight).collect();
    for d in 0..dim {
        let values: Vec<T> = ens.particles.iter().map(|p| p.state[d]).collect();
        let mut m = T::zero();
        let mut sq = T::zero();
        for (v, w) in values.iter().zip(&weights) {
            m += *w * *v;
            sq += *w * *v * *v;
        }
        mean[d] = m;
        variance[d] = (sq - m * m).max(T::zero());
        cdfs.push(
            empirical_cdf(&values, Some(&weights)).expect("rule weights are positive and sum to 1"),
        );
    }
    Reconstruction {
        mean,
        variance,
        cdfs,
    }
}

/// Characteristic trajectories of a transport run, with per-time access
/// to the weighted ensemble.
pub struct TransportSeries<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
    damping: T,
    times: Vec<T>,
    trajectories: Vec<Trajectory<T>>,
}

impl<T: Scalar> TransportSeries<T> {
    /// Output grid times.
    pub fn times(&self) -> &[T] {
        &self.times
    }

    /// Characteristic speeds, ascending.
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Probability mass per characteristic.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Per-node characteristic trajectories, in node order.
    pub fn trajectories(&self) -> &[Trajectory<T>] {
        &self.trajectories
    }

    /// The weighted ensemble at grid index `ti`.
    pub fn ensemble_at(&self, ti: usize) -> ParticleEnsemble<T> {
        let time = self.times[ti];
        let growth = (self.damping * time).exp();
        let particles = self
            .nodes
            .iter()
            .zip(&self.weights)
            .zip(&self.trajectories)
            .map(|((&lambda, &weight), traj)| Particle {
                lambda,
                weight,
                state: traj.states[ti].clone(),
                growth,
            })
            .collect();
        ParticleEnsemble { time, particles }
    }

    /// Weighted mean/variance series over the whole grid.
    pub fn moments(&self) -> MomentSeries<T> {
        let n_times = self.times.len();
        let dim = self.trajectories[0].dim();
        let mut mean = vec![vec![T::zero(); n_times]; dim];
        let mut variance = vec![vec![T::zero(); n_times]; dim];
        for ti in 0..n_times {
            for d in 0..dim {
                let mut m = T::zero();
                let mut sq = T::zero();
                for (w, traj) in self.weights.iter().zip(&self.trajectories) {
                    let v = traj.states[ti][d];
                    m += *w * v;
                    sq += *w * v * v;
                }
                mean[d][ti] = m;
                variance[d][ti] = (sq - m * m).max(T::zero());
            }
        }
        MomentSeries {
            times: self.times.clone(),
            mean,
            variance,
        }
    }

    /// Weighted marginal CDF of dimension `d` at grid index `ti`.
    pub fn cdf_at(&self, ti: usize, d: usize) -> StepCdf<T> {
        let values: Vec<T> = self.trajectories.iter().map(|tr| tr.states[ti][d]).collect();
        empirical_cdf(&values, Some(&self.weights))
            .expect("rule weights are positive and sum to 1")
    }
}

/// Propagates the diagonalized density expansion of the switching
/// oscillator: one hybrid characteristic per node, integrated with the
/// event-localized stepper at λ := λ_i, each carrying its node's constant
/// probability mass.
///
/// The oscillator family declares second-order structure, so the
/// no-accumulation screen it must pass is immediate.
pub fn propagate<T: Scalar>(
    cfg: &TransportConfig<T>,
    t_end: T,
    dt: T,
) -> Result<TransportSeries<T>, TransportError> {
    if cfg.n == 0 {
        return Err(TransportError::Config(
            "expansion needs at least one term".into(),
        ));
    }
    // NaN is rejected by the finiteness arm.
    if cfg.damping < T::zero() || !cfg.damping.is_finite() {
        return Err(TransportError::Config(format!(
            "damping must be finite and nonnegative, got {}",
            to_f64(cfg.damping)
        )));
    }
    if cfg.x0.iter().any(|v| !v.is_finite()) {
        return Err(TransportError::Config(
            "initial state must be finite".into(),
        ));
    }
    let sys = switching_oscillator(cfg.damping);
    debug_assert_eq!(
        check_no_accumulation(&sys, T::zero(), &[]),
        Accumulation::NoAccumulation
    );
    let diag = build_diagonalization::<T>(cfg.n)?;
    let trajectories: Vec<Trajectory<T>> = diag
        .nodes
        .par_iter()
        .map(|&lambda| simulate(&sys, &cfg.x0, lambda, t_end, dt))
        .collect::<Result<_, _>>()?;
    Ok(TransportSeries {
        times: trajectories[0].times.clone(),
        nodes: diag.nodes,
        weights: diag.weights,
        damping: cfg.damping,
        trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModeField;
    use crate::random::ParamDist;
    use crate::sampling::run_qmc;
    use crate::series::max_abs_diff;

    /// 1-D two-mode system with constant fields `v0` (where x ≥ 0) and
    /// `v1` (where x < 0).
    fn two_speed(v0: f64, v1: f64) -> HybridSystem<f64> {
        let m0 = ModeField::lambda_free(move |_: &[f64], out: &mut [f64]| out[0] = v0);
        let m1 = ModeField::lambda_free(move |_: &[f64], out: &mut [f64]| out[0] = v1);
        HybridSystem::new(1, vec![m0, m1], |x: &[f64]| x[0]).unwrap()
    }

    /// Probe at the origin of a 1-D guard x: the normal from mode 0
    /// (x ≥ 0) into mode 1 (x < 0) points along −x.
    fn origin_probe() -> Vec<InterfacePoint<f64>> {
        vec![InterfacePoint {
            state: vec![0.0],
            normal: vec![-1.0],
        }]
    }

    #[test]
    fn second_order_guard_flow_never_accumulates() {
        // The oscillator declares second-order structure: its guard reads
        // the position and the normal flow is the (continuous) velocity.
        let sys = switching_oscillator::<f64>(0.5);
        assert_eq!(
            check_no_accumulation(&sys, 0.3, &[]),
            Accumulation::NoAccumulation
        );

        // The same conclusion from the sign cases, without the shortcut:
        // an undeclared clone has f·n̂ = −y on both sides at x = 0.
        let m = || {
            ModeField::new(
                |x: &[f64], out: &mut [f64]| {
                    out[0] = x[1];
                    out[1] = -x[0] - 0.5 * x[1];
                },
                |_: &[f64], out: &mut [f64]| {
                    out[0] = 0.0;
                    out[1] = -1.0;
                },
            )
        };
        let bare = HybridSystem::new(2, vec![m(), m()], |x: &[f64]| x[0]).unwrap();
        let probes = vec![
            InterfacePoint {
                state: vec![0.0, 1.0],
                normal: vec![-1.0, 0.0],
            },
            InterfacePoint {
                state: vec![0.0, -1.0],
                normal: vec![-1.0, 0.0],
            },
        ];
        assert_eq!(
            check_no_accumulation(&bare, 0.3, &probes),
            Accumulation::NoAccumulation
        );
    }

    #[test]
    fn converging_flows_flag_accumulation() {
        // Flows pointing into the surface from both sides concentrate mass.
        let inward = two_speed(-1.0, 1.0);
        match check_no_accumulation(&inward, 0.0, &origin_probe()) {
            Accumulation::AccumulationPossible(desc) => {
                assert!(desc.contains("probe 0"), "description: {desc}")
            }
            other => panic!("expected accumulation, got {other:?}"),
        }

        // Same direction on both sides: mass crosses and moves on.
        let through = two_speed(1.0, 1.0);
        assert_eq!(
            check_no_accumulation(&through, 0.0, &origin_probe()),
            Accumulation::NoAccumulation
        );

        // Diverging flows split mass away from the surface.
        let outward = two_speed(1.0, -1.0);
        assert_eq!(
            check_no_accumulation(&outward, 0.0, &origin_probe()),
            Accumulation::NoAccumulation
        );

        // Doubly tangent flows slide along the surface.
        let frozen = two_speed(0.0, 0.0);
        assert_eq!(
            check_no_accumulation(&frozen, 0.0, &origin_probe()),
            Accumulation::NoAccumulation
        );
    }

    #[test]
    fn diagonalization_matches_quadrature() {
        let d2 = build_diagonalization::<f64>(2).unwrap();
        assert!((d2.nodes[0] + 1.0).abs() < 1e-12);
        assert!((d2.nodes[1] - 1.0).abs() < 1e-12);
        assert!((d2.weights[0] - 0.5).abs() < 1e-12);
        assert!((d2.weights[1] - 0.5).abs() < 1e-12);

        for n in 2..=40 {
            let d = build_diagonalization::<f64>(n).unwrap();
            assert_eq!(d.nodes.len(), n);
            let wsum: f64 = d.weights.iter().sum();
            assert!(
                (wsum - 1.0).abs() < 1e-12,
                "weights at n={n} sum to {wsum}"
            );
            assert!(
                d.node_residual < 1e-10,
                "node residual {} at n={n}",
                d.node_residual
            );
            assert!(d.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn initial_ensemble_is_a_point_mass() {
        let cfg = TransportConfig::<f64> {
            n: 7,
            damping: 0.5,
            x0: [1e-2, 1.0],
        };
        let series = propagate(&cfg, 0.0, 1e-3).unwrap();
        assert_eq!(series.times(), [0.0]);
        let ens = series.ensemble_at(0);
        assert_eq!(ens.particles.len(), 7);
        let wsum: f64 = ens.particles.iter().map(|p| p.weight).sum();
        assert!((wsum - 1.0).abs() < 1e-12);
        for p in &ens.particles {
            assert_eq!(p.state, vec![1e-2, 1.0]);
            assert_eq!(p.growth, 1.0);
        }
        let rec = reconstruct(&ens);
        assert!((rec.mean[0] - 1e-2).abs() < 1e-15);
        assert!((rec.mean[1] - 1.0).abs() < 1e-15);
        assert!(rec.variance.iter().all(|&v| (0.0..1e-15).contains(&v)));
    }

    #[test]
    fn single_node_is_the_plain_trajectory() {
        let cfg = TransportConfig::<f64> {
            n: 1,
            damping: 0.5,
            x0: [1e-2, 1.0],
        };
        let series = propagate(&cfg, 5.0, 1e-3).unwrap();
        assert_eq!(series.nodes(), [0.0]);
        assert_eq!(series.weights(), [1.0]);
        let sys = switching_oscillator(0.5);
        let traj = simulate(&sys, &[1e-2, 1.0], 0.0, 5.0, 1e-3).unwrap();
        let m = series.moments();
        for (ti, st) in traj.states.iter().enumerate() {
            assert!((m.mean[0][ti] - st[0]).abs() < 1e-15);
            assert!(m.variance[0][ti] < 1e-15);
        }
    }

    #[test]
    fn undamped_center_characteristic_conserves_energy() {
        // Odd order puts a node exactly at λ = 0; with γ = 0 that
        // characteristic is a pure center orbit x² + y² = const.
        let cfg = TransportConfig::<f64> {
            n: 15,
            damping: 0.0,
            x0: [1e-2, 1.0],
        };
        let series = propagate(&cfg, 18.0, 1e-3).unwrap();
        let center = series
            .nodes()
            .iter()
            .position(|l| l.abs() < 1e-12)
            .expect("odd rule has a zero node");
        let traj = &series.trajectories()[center];
        let e0 = traj.states[0][0].powi(2) + traj.states[0][1].powi(2);
        let drift = traj
            .states
            .iter()
            .map(|s| (s[0].powi(2) + s[1].powi(2) - e0).abs())
            .fold(0.0, f64::max);
        assert!(drift / e0 < 1e-6, "relative energy drift {}", drift / e0);
    }

    #[test]
    fn characteristics_split_by_node_sign() {
        let cfg = TransportConfig::<f64> {
            n: 70,
            damping: 0.5,
            x0: [1e-2, 1.0],
        };
        let series = propagate(&cfg, 18.0, 1e-3).unwrap();
        let last = series.times().len() - 1;
        let ens = series.ensemble_at(last);

        for p in &ens.particles {
            let x = p.state[0];
            if p.lambda > 0.0 {
                // No admissible rest point: collapses onto the origin.
                assert!(
                    x.abs() <= 0.02,
                    "positive-node particle λ={} ended at x={x}",
                    p.lambda
                );
            } else if p.lambda < -0.5 {
                // Rest points at ±|λ|; the slowest transient remaining at
                // t=18 scales with |λ| e^{−γt/2}.
                assert!(
                    (x.abs() - p.lambda.abs()).abs() <= 0.25,
                    "negative-node particle λ={} ended at x={x}",
                    p.lambda
                );
            }
        }

        // All mass on positive nodes is in the origin cluster and the
        // nearest negative-node rest points stay clear of it, so the CDF
        // jump across the origin is exactly the positive-node mass: 1/2
        // for an even rule.
        let cdf = series.cdf_at(last, 0);
        let jump = cdf.mass_between(-0.025, 0.025);
        assert!((jump - 0.5).abs() < 1e-9, "origin mass {jump}");
    }

    #[test]
    fn expansion_refinement_tightens_moment_errors() {
        let dist = ParamDist::gaussian(0.0, 1.0).unwrap();
        let sys = switching_oscillator(0.5);
        let reference = run_qmc(&sys, &dist, &[1e-2, 1.0], 18.0, 1e-3, 3000).unwrap();

        let mut errs = Vec::new();
        for n in [15, 70] {
            let cfg = TransportConfig::<f64> {
                n,
                damping: 0.5,
                x0: [1e-2, 1.0],
            };
            let m = propagate(&cfg, 18.0, 1e-3).unwrap().moments();
            errs.push((
                max_abs_diff(&m.mean[0], &reference.mean[0]),
                max_abs_diff(&m.variance[0], &reference.variance[0]),
            ));
        }
        let (mean15, var15) = errs[0];
        let (mean70, var70) = errs[1];
        // Sparse-node tolerance plus a small allowance for the
        // quasi-random reference baseline.
        assert!(mean15 <= 9.56e-2 + 0.02, "n=15 mean error {mean15}");
        assert!(var15 <= 7.95e-2 + 0.02, "n=15 variance error {var15}");
        assert!(mean70 <= 5.28e-2 + 0.02, "n=70 mean error {mean70}");
        assert!(var70 <= 4.92e-2 + 0.02, "n=70 variance error {var70}");
        assert!(mean70 <= mean15, "refinement must not worsen the mean");
        assert!(var70 <= var15, "refinement must not worsen the variance");
    }

    #[test]
    fn weights_stay_normalized_along_the_run() {
        for n in [1usize, 2, 3, 7, 16] {
            let cfg = TransportConfig::<f64> {
                n,
                damping: 0.5,
                x0: [1e-2, 1.0],
            };
            let series = propagate(&cfg, 1.0, 1e-2).unwrap();
            for ti in [0, series.times().len() / 2, series.times().len() - 1] {
                let ens = series.ensemble_at(ti);
                let wsum: f64 = ens.particles.iter().map(|p| p.weight).sum();
                assert!((wsum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_malformed_configs() {
        let bad_n = TransportConfig {
            n: 0,
            damping: 0.5,
            x0: [0.0, 1.0],
        };
        assert!(matches!(
            propagate(&bad_n, 1.0, 1e-3),
            Err(TransportError::Config(_))
        ));
        let bad_damping = TransportConfig {
            n: 3,
            damping: -0.1,
            x0: [0.0, 1.0],
        };
        assert!(matches!(
            propagate(&bad_damping, 1.0, 1e-3),
            Err(TransportError::Config(_))
        ));
        let bad_x0 = TransportConfig {
            n: 3,
            damping: 0.5,
            x0: [f64::NAN, 1.0],
        };
        assert!(matches!(
            propagate(&bad_x0, 1.0, 1e-3),
            Err(TransportError::Config(_))
        ));
    }
}
