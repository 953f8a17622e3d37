//! Uncertainty propagation for hybrid (switching) dynamical systems with one
//! uncertain scalar parameter.
//!
//! A *hybrid system* here is a vector field that switches between a small set
//! of smooth modes depending on the sign of a guard function of the state,
//! optionally combined with an instantaneous reset map (e.g. an impact law).
//! When a parameter of the field is random, the map from parameter to state is
//! only piecewise smooth, which breaks the fast convergence that spectral
//! uncertainty methods rely on. This crate implements three complementary
//! approaches and the shared infrastructure to compare them:
//!
//! - [`sampling`] — Monte Carlo and quasi-Monte Carlo ensemble baselines with
//!   deterministic, parallelism-independent reductions.
//! - [`hpc`] — intrusive polynomial chaos on the coefficients of a parameter
//!   expansion, in either a multiresolution piecewise-constant (Haar wavelet)
//!   basis, which is robust to switching, or a global Hermite basis, which is
//!   not.
//! - [`transport`] — a characteristics method for the parameter-conditioned
//!   density: a diagonalized spectral system whose characteristics are exactly
//!   the trajectories at Gauss--Hermite parameter nodes.
//!
//! Supporting modules: [`model`] (hybrid systems and their event-accurate
//! integration), [`random`] (parameter distributions and quantile machinery),
//! [`basis`] (Haar and Hermite bases plus Gaussian quadrature), [`resets`]
//! (smoothing reset maps into stiff boundary layers), and [`series`] (time
//! grids and moment series).
//!
//! Everything numeric is generic over the scalar type through [`scalar::Scalar`]
//! (implemented for `f32` and `f64`); the crate root re-exports `f64` aliases
//! for the common types, which is what the companion CLI uses.

pub mod basis;
pub mod hpc;
pub mod model;
pub mod random;
pub mod resets;
pub mod sampling;
pub mod scalar;
pub mod series;
pub mod transport;

pub use scalar::Scalar;

/// `f64` hybrid system.
pub type HybridSystem = model::HybridSystem<f64>;
/// `f64` simulated trajectory.
pub type Trajectory = model::Trajectory<f64>;
/// `f64` parameter distribution.
pub type ParamDist = random::ParamDist<f64>;
/// `f64` ensemble statistics from sampling runs.
pub type EnsembleStats = sampling::EnsembleStats<f64>;
/// `f64` multiresolution (Haar) basis.
pub type HaarBasis = basis::HaarBasis<f64>;
/// `f64` Gauss--Hermite quadrature rule.
pub type HermiteRule = basis::HermiteRule<f64>;
/// `f64` wavelet-chaos coefficient series.
pub type WaveletSeries = hpc::WaveletSeries<f64>;
/// `f64` moment time series.
pub type MomentSeries = series::MomentSeries<f64>;
