//! Time grids, moment time series, and compensated accumulation.
//!
//! Every propagation method in this crate reports its results on a uniform
//! time grid as a mean/variance series per state dimension; this module holds
//! those shared containers plus the small numeric helpers (Kahan summation,
//! elementwise norms) used when reducing ensembles deterministically.

use thiserror::Error;

use crate::scalar::{cast_usize, Scalar};

/// Errors from constructing a [`TimeGrid`].
#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    /// Step or horizon was zero, negative, or not finite.
    #[error("time step and horizon must be finite and positive (dt = {dt}, t_end = {t_end})")]
    InvalidStep { dt: f64, t_end: f64 },
    /// The horizon is not an integer number of steps.
    #[error("horizon {t_end} is not a whole number of steps of size {dt}")]
    IncommensurateStep { dt: f64, t_end: f64 },
}

/// Uniform time grid `0, dt, 2 dt, ..., n dt = t_end`.
///
/// Grid times are generated as `i * dt` (not by accumulation) so they carry no
/// drift; the horizon must be a whole number of steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<T> {
    dt: T,
    n_steps: usize,
}

impl<T: Scalar> TimeGrid<T> {
    /// Builds the grid covering `[0, t_end]` with step `dt`. A zero horizon
    /// is allowed and yields the single point t = 0.
    pub fn new(t_end: T, dt: T) -> Result<Self, GridError> {
        let (dtf, tf) = (crate::scalar::to_f64(dt), crate::scalar::to_f64(t_end));
        if !(dtf.is_finite() && tf.is_finite() && dtf > 0.0 && tf >= 0.0) {
            return Err(GridError::InvalidStep { dt: dtf, t_end: tf });
        }
        if tf == 0.0 {
            return Ok(Self { dt, n_steps: 0 });
        }
        let n = (tf / dtf).round();
        if n < 1.0 || (n * dtf - tf).abs() > 1e-9 * tf.max(1.0) {
            return Err(GridError::IncommensurateStep { dt: dtf, t_end: tf });
        }
        Ok(Self {
            dt,
            n_steps: n as usize,
        })
    }

    /// Step size.
    pub fn dt(&self) -> T {
        self.dt
    }

    /// Number of steps (`len() - 1`).
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points, including both endpoints.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    /// A grid always contains at least the point t = 0.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Time of grid point `i`.
    pub fn time(&self, i: usize) -> T {
        cast_usize::<T>(i) * self.dt
    }

    /// All grid times as a vector.
    pub fn times(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Index of the grid point nearest `t`, if `t` lies on the grid within
    /// `tol`.
    pub fn index_of(&self, t: T, tol: T) -> Option<usize> {
        let i = crate::scalar::to_f64(t / self.dt).round();
        if i < 0.0 || i > self.n_steps as f64 {
            return None;
        }
        let i = i as usize;
        ((self.time(i) - t).abs() <= tol).then_some(i)
    }
}

/// Mean and variance of each state dimension over a time grid.
///
/// Storage is column-major: `mean[dim][i]` is the mean of state `dim` at
/// `times[i]`. Every propagation method reduces to this type, which is what
/// the CLI serializes.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries<T> {
    /// Grid times.
    pub times: Vec<T>,
    /// Per-dimension mean series, `mean[dim][time]`.
    pub mean: Vec<Vec<T>>,
    /// Per-dimension variance series, `variance[dim][time]`; elementwise
    /// nonnegative.
    pub variance: Vec<Vec<T>>,
}

impl<T: Scalar> MomentSeries<T> {
    /// Number of state dimensions.
    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    /// Number of time points.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// Whether the series holds no time points.
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Compensated accumulator (Kahan--Babuska--Neumaier summation).
///
/// Unlike plain Kahan summation, the Neumaier variant also captures the error
/// when an incoming term dominates the running sum. Used for all ensemble
/// reductions so that results do not depend on how work was split across
/// threads: chunks are summed in a fixed order with compensation, making
/// parallel and serial reductions bitwise identical.
#[derive(Debug, Clone, Copy)]
pub struct KahanSum<T> {
    sum: T,
    comp: T,
}

impl<T: Scalar> Default for KahanSum<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> KahanSum<T> {
    /// Zero accumulator.
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    /// Adds one term.
    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Current compensated total.
    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

/// Maximum absolute difference between two equally long slices.
///
/// Panics if lengths differ; callers compare series that share a grid.
pub fn max_abs_diff<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    assert_eq!(xs.len(), ys.len(), "series length mismatch");
    xs.iter()
        .zip(ys)
        .fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

/// Root-mean-square difference between two equally long slices.
pub fn rms_diff<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    assert_eq!(xs.len(), ys.len(), "series length mismatch");
    if xs.is_empty() {
        return T::zero();
    }
    let mut acc = KahanSum::new();
    for (&x, &y) in xs.iter().zip(ys) {
        let d = x - y;
        acc.add(d * d);
    }
    (acc.value() / cast_usize(xs.len())).sqrt()
}
