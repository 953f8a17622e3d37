//! Monte Carlo and quasi-Monte Carlo ensemble baselines.
//!
//! Both drivers draw parameter values — pseudorandom (seeded) or from the
//! Weyl low-discrepancy sequence pushed through the inverse CDF — simulate
//! one trajectory per draw, and reduce to per-time mean and unbiased
//! variance. The reduction is *deterministic under parallelism*: samples are
//! grouped into fixed-size chunks, each chunk is summed serially with
//! compensated accumulation, and chunk partials are combined in chunk order.
//! The result is bitwise identical whether the chunk map runs on one thread
//! or many, which the reproducibility tests assert literally.
//!
//! Ensembles can also capture the raw per-sample states at selected grid
//! times ([`SnapshotSamples`]); downstream code builds histograms, empirical
//! CDFs ([`empirical_cdf`]), and bootstrap error bars from those.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{simulate, HybridSystem, ModelError};
use crate::random::{DistError, ParamDist};
use crate::scalar::{cast, cast_usize, Scalar};
use crate::series::{KahanSum, MomentSeries, TimeGrid};

/// Samples per reduction chunk. Fixed (never derived from the thread count)
/// so the reduction tree is the same in serial and parallel runs.
const CHUNK: usize = 256;

/// Fraction of an ensemble allowed to diverge before the run aborts.
const DIVERGENCE_BUDGET: f64 = 0.01;

/// Errors from ensemble runs and empirical-distribution construction.
#[derive(Debug, Error)]
pub enum SamplingError {
    /// Monte Carlo needs at least two samples for an unbiased variance.
    #[error("ensemble size {n} too small (need at least {min})")]
    TooFewSamples { n: usize, min: usize },
    /// More than the tolerated fraction of samples diverged.
    #[error("{diverged} of {total} samples diverged (budget is 1%)")]
    TooManyDivergent { diverged: usize, total: usize },
    /// A requested snapshot time does not lie on the output grid.
    #[error("snapshot time {t} is not on the output grid")]
    SnapshotOffGrid { t: f64 },
    /// Parameter-distribution failure while drawing samples.
    #[error(transparent)]
    Dist(#[from] DistError),
    /// Non-divergence model failure (bad grid, dimension mismatch, Zeno cap).
    #[error(transparent)]
    Model(#[from] ModelError),
    /// Empirical CDF of nothing.
    #[error("empirical distribution needs at least one value")]
    EmptyDistribution,
    /// Weights must be nonnegative and sum to 1.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

/// Per-time mean and unbiased variance of an ensemble of trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats<T> {
    /// Shared output grid times.
    pub times: Vec<T>,
    /// `mean[dim][time]`.
    pub mean: Vec<Vec<T>>,
    /// `variance[dim][time]`, elementwise ≥ 0.
    pub variance: Vec<Vec<T>>,
    /// Samples that completed integration and entered the statistics.
    pub samples_used: usize,
    /// True when a single sample forced the variance to zero by convention.
    pub degenerate: bool,
}

impl<T: Scalar> EnsembleStats<T> {
    /// Number of state dimensions.
    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    /// The statistics as a plain moment series.
    pub fn moments(&self) -> MomentSeries<T> {
        MomentSeries {
            times: self.times.clone(),
            mean: self.mean.clone(),
            variance: self.variance.clone(),
        }
    }
}

/// Raw per-sample states captured at one grid time, in sample order
/// (diverged samples omitted).
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSamples<T> {
    /// Snapshot time (a grid point).
    pub time: T,
    /// Index of that time on the output grid.
    pub grid_index: usize,
    /// `states[sample][dim]`.
    pub states: Vec<Vec<T>>,
}

/// First `n` entries of the Weyl sequence frac(k·√2), k = 1…n.
///
/// Deterministic and equidistributed on [0, 1); entry values never hit 0
/// exactly (√2 is irrational and the rounding keeps a fractional part), so
/// they are safe quantile arguments.
pub fn weyl_sequence<T: Scalar>(n: usize) -> Vec<T> {
    assert!(n >= 1, "sequence length must be positive");
    let root2 = std::f64::consts::SQRT_2;
    (1..=n)
        .map(|k| cast::<T>((k as f64 * root2).fract()))
        .collect()
}

/// Seeded Monte Carlo ensemble: `n` i.i.d. parameter draws by inverse
/// transform from a ChaCha stream, reduced to moments on the output grid.
///
/// Individual diverging trajectories are excluded; the run aborts if more
/// than 1% of them diverge. Identical seeds give bitwise-identical results.
pub fn run_mc<T: Scalar>(
    sys: &HybridSystem<T>,
    d: &ParamDist<T>,
    x0: &[T],
    t_end: T,
    dt: T,
    n: usize,
    seed: u64,
) -> Result<EnsembleStats<T>, SamplingError> {
    Ok(run_mc_with_snapshots(sys, d, x0, t_end, dt, n, seed, &[])?.0)
}

/// [`run_mc`] that additionally captures per-sample states at the given grid
/// times.
#[allow(clippy::too_many_arguments)]
pub fn run_mc_with_snapshots<T: Scalar>(
    sys: &HybridSystem<T>,
    d: &ParamDist<T>,
    x0: &[T],
    t_end: T,
    dt: T,
    n: usize,
    seed: u64,
    snapshot_times: &[T],
) -> Result<(EnsembleStats<T>, Vec<SnapshotSamples<T>>), SamplingError> {
    if n < 2 {
        return Err(SamplingError::TooFewSamples { n, min: 2 });
    }
    let lambdas = draw_gaussian_stream(d, n, seed)?;
    run_lambda_ensemble(sys, &lambdas, x0, t_end, dt, snapshot_times)
}

/// Quasi-Monte Carlo ensemble: λ_k = inverse CDF of the k-th Weyl point.
/// Fully deterministic; `n = 1` yields the single trajectory with zero
/// variance, flagged degenerate.
pub fn run_qmc<T: Scalar>(
    sys: &HybridSystem<T>,
    d: &ParamDist<T>,
    x0: &[T],
    t_end: T,
    dt: T,
    n: usize,
) -> Result<EnsembleStats<T>, SamplingError> {
    Ok(run_qmc_with_snapshots(sys, d, x0, t_end, dt, n, &[])?.0)
}

/// [`run_qmc`] that additionally captures per-sample states at the given
/// grid times.
pub fn run_qmc_with_snapshots<T: Scalar>(
    sys: &HybridSystem<T>,
    d: &ParamDist<T>,
    x0: &[T],
    t_end: T,
    dt: T,
    n: usize,
    snapshot_times: &[T],
) -> Result<(EnsembleStats<T>, Vec<SnapshotSamples<T>>), SamplingError> {
    if n < 1 {
        return Err(SamplingError::TooFewSamples { n, min: 1 });
    }
    let lambdas: Vec<T> = weyl_sequence::<T>(n)
        .into_iter()
        .map(|u| d.inverse_cdf(u))
        .collect::<Result<_, _>>()?;
    run_lambda_ensemble(sys, &lambdas, x0, t_end, dt, snapshot_times)
}

/// Uniform draws strictly inside (0, 1) pushed through the inverse CDF.
fn draw_gaussian_stream<T: Scalar>(
    d: &ParamDist<T>,
    n: usize,
    seed: u64,
) -> Result<Vec<T>, SamplingError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut lambdas = Vec::with_capacity(n);
    for _ in 0..n {
        // 53 mantissa bits at bin midpoints: u ∈ (0, 1) strictly, so the
        // quantile map is always defined.
        let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0);
        lambdas.push(d.inverse_cdf(cast(u))?);
    }
    Ok(lambdas)
}

/// Partial reduction of one chunk of samples.
struct ChunkPartial<T> {
    /// Finalized `Σ x` per [dim][time].
    sum: Vec<Vec<T>>,
    /// Finalized `Σ x²` per [dim][time].
    sum_sq: Vec<Vec<T>>,
    /// Snapshot states `[snap][local_sample]`, completed samples only.
    snaps: Vec<Vec<Vec<T>>>,
    used: usize,
    diverged: usize,
}

/// Shared ensemble engine: simulates one trajectory per λ and reduces
/// deterministically. `lambdas` order defines sample order everywhere
/// (statistics, snapshots, divergence accounting).
pub fn run_lambda_ensemble<T: Scalar>(
    sys: &HybridSystem<T>,
    lambdas: &[T],
    x0: &[T],
    t_end: T,
    dt: T,
    snapshot_times: &[T],
) -> Result<(EnsembleStats<T>, Vec<SnapshotSamples<T>>), SamplingError> {
    let n = lambdas.len();
    if n == 0 {
        return Err(SamplingError::TooFewSamples { n: 0, min: 1 });
    }
    let grid = TimeGrid::new(t_end, dt).map_err(ModelError::from)?;
    let n_times = grid.len();
    let dim = sys.dim();
    let snap_indices: Vec<usize> = snapshot_times
        .iter()
        .map(|&t| {
            grid.index_of(t, cast(1e-9))
                .ok_or(SamplingError::SnapshotOffGrid {
                    t: crate::scalar::to_f64(t),
                })
        })
        .collect::<Result<_, _>>()?;

    let n_chunks = n.div_ceil(CHUNK);
    // Chunk partials are materialized in bounded blocks and folded in chunk
    // order, so memory stays modest and the combination order is fixed.
    const CHUNKS_PER_BLOCK: usize = 32;

    let mut sum_acc = vec![vec![KahanSum::<T>::new(); n_times]; dim];
    let mut sq_acc = vec![vec![KahanSum::<T>::new(); n_times]; dim];
    let mut snapshots: Vec<SnapshotSamples<T>> = snap_indices
        .iter()
        .map(|&gi| SnapshotSamples {
            time: grid.time(gi),
            grid_index: gi,
            states: Vec::new(),
        })
        .collect();
    let mut used = 0usize;
    let mut diverged = 0usize;
    let mut fatal: Option<SamplingError> = None;

    for block_start in (0..n_chunks).step_by(CHUNKS_PER_BLOCK) {
        let block_end = (block_start + CHUNKS_PER_BLOCK).min(n_chunks);
        let partials: Vec<Result<ChunkPartial<T>, SamplingError>> = (block_start..block_end)
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = ((c + 1) * CHUNK).min(n);
                reduce_chunk(sys, &lambdas[lo..hi], x0, t_end, dt, &snap_indices, dim, n_times)
            })
            .collect();
        for partial in partials {
            match partial {
                Ok(p) => {
                    for d_i in 0..dim {
                        for ti in 0..n_times {
                            sum_acc[d_i][ti].add(p.sum[d_i][ti]);
                            sq_acc[d_i][ti].add(p.sum_sq[d_i][ti]);
                        }
                    }
                    for (snap, states) in snapshots.iter_mut().zip(p.snaps) {
                        snap.states.extend(states);
                    }
                    used += p.used;
                    diverged += p.diverged;
                }
                Err(e) => {
                    // Keep the first fatal error; chunk order makes this
                    // deterministic too.
                    if fatal.is_none() {
                        fatal = Some(e);
                    }
                }
            }
        }
        if fatal.is_some() {
            break;
        }
    }
    if let Some(e) = fatal {
        return Err(e);
    }
    if (diverged as f64) > DIVERGENCE_BUDGET * n as f64 {
        return Err(SamplingError::TooManyDivergent { diverged, total: n });
    }
    if used == 0 {
        return Err(SamplingError::TooManyDivergent { diverged, total: n });
    }

    let used_t = cast_usize::<T>(used);
    let mut mean = vec![vec![T::zero(); n_times]; dim];
    let mut variance = vec![vec![T::zero(); n_times]; dim];
    for d_i in 0..dim {
        for ti in 0..n_times {
            let s = sum_acc[d_i][ti].value();
            let m = s / used_t;
            mean[d_i][ti] = m;
            if used > 1 {
                let raw = (sq_acc[d_i][ti].value() - s * m) / (used_t - T::one());
                variance[d_i][ti] = raw.max(T::zero());
            }
        }
    }
    Ok((
        EnsembleStats {
            times: grid.times(),
            mean,
            variance,
            samples_used: used,
            degenerate: used == 1,
        },
        snapshots,
    ))
}

/// Serial reduction of one chunk; divergence is tolerated per sample, any
/// other failure is fatal for the whole ensemble.
#[allow(clippy::too_many_arguments)]
fn reduce_chunk<T: Scalar>(
    sys: &HybridSystem<T>,
    lambdas: &[T],
    x0: &[T],
    t_end: T,
    dt: T,
    snap_indices: &[usize],
    dim: usize,
    n_times: usize,
) -> Result<ChunkPartial<T>, SamplingError> {
    let mut sum = vec![vec![KahanSum::<T>::new(); n_times]; dim];
    let mut sum_sq = vec![vec![KahanSum::<T>::new(); n_times]; dim];
    let mut snaps: Vec<Vec<Vec<T>>> = snap_indices.iter().map(|_| Vec::new()).collect();
    let mut used = 0usize;
    let mut diverged = 0usize;
    for &lambda in lambdas {
        let traj = match simulate(sys, x0, lambda, t_end, dt) {
            Ok(t) => t,
            Err(ModelError::Diverged { .. }) => {
                diverged += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for (ti, state) in traj.states.iter().enumerate() {
            for (d_i, &v) in state.iter().enumerate() {
                sum[d_i][ti].add(v);
                sum_sq[d_i][ti].add(v * v);
            }
        }
        for (slot, &gi) in snaps.iter_mut().zip(snap_indices) {
            slot.push(traj.states[gi].clone());
        }
        used += 1;
    }
    Ok(ChunkPartial {
        sum: sum
            .into_iter()
            .map(|row| row.into_iter().map(|k| k.value()).collect())
            .collect(),
        sum_sq: sum_sq
            .into_iter()
            .map(|row| row.into_iter().map(|k| k.value()).collect())
            .collect(),
        snaps,
        used,
        diverged,
    })
}

/// Right-continuous step CDF over a finite weighted support.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCdf<T> {
    xs: Vec<T>,
    cum: Vec<T>,
}

impl<T: Scalar> StepCdf<T> {
    /// Distinct support points, ascending.
    pub fn support(&self) -> &[T] {
        &self.xs
    }

    /// Cumulative weights aligned with [`Self::support`]; the last entry is
    /// the total mass (1 up to rounding).
    pub fn cumulative(&self) -> &[T] {
        &self.cum
    }

    /// CDF value P(X ≤ x).
    pub fn eval(&self, x: T) -> T {
        match self.xs.partition_point(|&s| s <= x) {
            0 => T::zero(),
            k => self.cum[k - 1],
        }
    }

    /// Probability mass on the half-open interval (a, b], i.e. F(b) − F(a).
    pub fn mass_between(&self, a: T, b: T) -> T {
        self.eval(b) - self.eval(a)
    }

    /// Support points and their point masses (CDF jumps).
    pub fn atoms(&self) -> Vec<(T, T)> {
        let mut out = Vec::with_capacity(self.xs.len());
        let mut prev = T::zero();
        for (&x, &c) in self.xs.iter().zip(&self.cum) {
            out.push((x, c - prev));
            prev = c;
        }
        out
    }
}

/// Builds the empirical CDF of `values`, optionally weighted.
///
/// Weights must be nonnegative and sum to 1 (±1e-12); omitted weights mean
/// 1/n each. Exactly equal values merge into one atom.
pub fn empirical_cdf<T: Scalar>(
    values: &[T],
    weights: Option<&[T]>,
) -> Result<StepCdf<T>, SamplingError> {
    if values.is_empty() {
        return Err(SamplingError::EmptyDistribution);
    }
    let n = values.len();
    let uniform = T::one() / cast_usize::<T>(n);
    if let Some(w) = weights {
        if w.len() != n {
            return Err(SamplingError::InvalidWeights(format!(
                "{} weights for {} values",
                w.len(),
                n
            )));
        }
        if w.iter().any(|&x| x < T::zero() || !x.is_finite()) {
            return Err(SamplingError::InvalidWeights(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: T = w.iter().fold(T::zero(), |a, &b| a + b);
        if (total - T::one()).abs() > cast(1e-12) {
            return Err(SamplingError::InvalidWeights(format!(
                "weights sum to {total}, expected 1"
            )));
        }
    }
    let mut pairs: Vec<(T, T)> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, weights.map_or(uniform, |w| w[i])))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite sample values"));

    let mut xs: Vec<T> = Vec::with_capacity(n);
    let mut cum: Vec<T> = Vec::with_capacity(n);
    let mut acc = KahanSum::new();
    for (x, w) in pairs {
        acc.add(w);
        if xs.last() == Some(&x) {
            *cum.last_mut().expect("nonempty") = acc.value();
        } else {
            xs.push(x);
            cum.push(acc.value());
        }
    }
    Ok(StepCdf { xs, cum })
}
