//! Galerkin propagation of parametric uncertainty through switching fields.
//!
//! The state of the system is expanded in an orthonormal basis over the
//! uncertain parameter and the expansion coefficients are evolved by
//! projecting the vector field back onto the basis. Because the field
//! switches with the sign of a guard, the projection integrals split into
//! parameter regions where each mode is active, and those regions move as
//! the state evolves — they are re-derived from the current coefficients at
//! every Runge-Kutta stage.
//!
//! Two bases are provided:
//!
//! * **Haar wavelets** ([`evolve`]): the truncated expansion is piecewise
//!   constant on dyadic cells of the unit interval, so each cell belongs
//!   wholly to one mode and every projection integral is closed-form. This
//!   localization is what lets the expansion track switching dynamics.
//! * **Hermite polynomials** ([`evolve_hermite`]): the classical smooth
//!   basis with the region integrals approximated by Gauss-Hermite
//!   quadrature and a per-node mode indicator. Accurate while the
//!   parameter-to-state map stays smooth; degrades once switching makes it
//!   non-smooth, which the comparison tests exercise deliberately.
//!
//! Vector fields must be affine in the parameter (`f = f_det(x) + λ·f_lin(x)`,
//! the form [`ModeField`] stores); that makes the λ-weighted cell integrals
//! exact via the distribution's cell masses.

use thiserror::Error;

use rayon::prelude::*;

use crate::basis::{BasisError, HaarBasis, HermiteBasis};
use crate::model::{simulate, HybridSystem, ModelError, Trajectory};
use crate::random::ParamDist;
use crate::scalar::{cast, to_f64, Scalar};
use crate::series::{GridError, MomentSeries, TimeGrid};

/// Errors raised before a solve starts; mid-solve blow-up is reported
/// through [`SolveStatus`] instead so partial output survives.
#[derive(Debug, Error)]
pub enum HpcError {
    /// Basis construction failed (order too large, quadrature failure).
    #[error(transparent)]
    Basis(#[from] BasisError),
    /// Invalid output grid.
    #[error(transparent)]
    Grid(#[from] GridError),
    /// Initial state has the wrong dimension.
    #[error("initial state has {got} entries, system has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    /// Gauss-Hermite rule too small to integrate degree-2p products plus
    /// the indicator localization.
    #[error("quadrature order {quad_order} too small for degree {degree} (need ≥ {needed})")]
    QuadratureTooSmall {
        quad_order: usize,
        degree: usize,
        needed: usize,
    },
    /// The Hermite path expands in a standard-normal germ and therefore
    /// requires a Gaussian parameter.
    #[error("Hermite expansion requires a Gaussian parameter distribution")]
    NotGaussian,
    /// Cell trajectory integration failed for a reason other than
    /// blow-up (which is reported through [`SolveStatus`] instead).
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How a coefficient solve ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveStatus {
    /// Reached the requested horizon.
    Complete,
    /// Coefficients stopped being finite; `t_last` is the last grid time
    /// with valid output.
    Diverged { t_last: f64 },
}

/// Wavelet expansion coefficients of every state variable at one time.
///
/// Coefficient order per dimension: the constant mode first, then wavelets
/// by level and shift — index `2^j + k` holds level `j`, shift `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletState<T> {
    /// Wavelet order P (levels 0..=P).
    pub p: usize,
    /// Time this state refers to.
    pub time: T,
    /// `coeffs[dim][func]`, `2^{P+1}` functions per dimension.
    pub coeffs: Vec<Vec<T>>,
}

impl<T: Scalar> WaveletState<T> {
    /// Mean of one state variable: the coefficient of the constant mode.
    pub fn mean(&self, dim: usize) -> T {
        self.coeffs[dim][0]
    }

    /// Variance of one state variable: sum of squared wavelet coefficients
    /// (orthonormal basis, constant mode excluded). Nonnegative by
    /// construction.
    pub fn variance(&self, dim: usize) -> T {
        self.coeffs[dim][1..]
            .iter()
            .fold(T::zero(), |acc, &c| acc + c * c)
    }
}

/// Piecewise-constant view of a [`WaveletState`]: the value of every state
/// variable on each dyadic cell, plus the mode active there.
#[derive(Debug, Clone, PartialEq)]
pub struct CellProfile<T> {
    /// `values[dim][cell]`; exact on each cell (the truncated expansion is
    /// constant there).
    pub values: Vec<Vec<T>>,
    /// Mode selected by the guard sign of the cell state.
    pub modes: Vec<usize>,
}

/// Wavelet coefficient trajectories on the output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletSeries<T> {
    /// Wavelet order P.
    pub p: usize,
    /// Grid times with valid output (truncated on divergence).
    pub times: Vec<T>,
    /// Coefficient state at each time in `times`.
    pub states: Vec<WaveletState<T>>,
    /// Mean/variance per state dimension extracted from the coefficients.
    pub moments: MomentSeries<T>,
    /// Completion or divergence marker.
    pub status: SolveStatus,
}

/// Hermite expansion coefficients `a_0..a_p` of every state variable.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteState<T> {
    /// Polynomial degree p.
    pub degree: usize,
    /// Time this state refers to.
    pub time: T,
    /// `coeffs[dim][k]`, k = 0..=p.
    pub coeffs: Vec<Vec<T>>,
}

impl<T: Scalar> HermiteState<T> {
    /// Mean of one state variable (coefficient of the constant polynomial).
    pub fn mean(&self, dim: usize) -> T {
        self.coeffs[dim][0]
    }

    /// Variance of one state variable: Σ_{k≥1} k!·a_k².
    pub fn variance(&self, dim: usize) -> T {
        let mut fact = T::one();
        let mut acc = T::zero();
        for (k, &a) in self.coeffs[dim].iter().enumerate().skip(1) {
            fact *= cast::<T>(k as f64);
            acc += fact * a * a;
        }
        acc
    }
}

/// Hermite coefficient trajectories on the output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSeries<T> {
    /// Polynomial degree p.
    pub degree: usize,
    /// Grid times with valid output (truncated on divergence).
    pub times: Vec<T>,
    /// Coefficient state at each time in `times`.
    pub states: Vec<HermiteState<T>>,
    /// Mean/variance per state dimension.
    pub moments: MomentSeries<T>,
    /// Completion or divergence marker.
    pub status: SolveStatus,
}

/// Scratch buffers for one wavelet right-hand-side evaluation.
struct WaveletWork<T> {
    cells: Vec<Vec<T>>,
    cell_state: Vec<T>,
    det: Vec<T>,
    lin: Vec<T>,
    cell_rhs: Vec<Vec<T>>,
    /// Cell-average parameter value: cell mass / cell width (exact power-of-
    /// two rescale).
    lambda_bar: Vec<T>,
}

impl<T: Scalar> WaveletWork<T> {
    fn new(basis: &HaarBasis<T>, dim: usize) -> Self {
        let n_cells = basis.n_cells();
        let width = basis.cell_width();
        WaveletWork {
            cells: vec![vec![T::zero(); n_cells]; dim],
            cell_state: vec![T::zero(); dim],
            det: vec![T::zero(); dim],
            lin: vec![T::zero(); dim],
            cell_rhs: vec![vec![T::zero(); n_cells]; dim],
            lambda_bar: basis.cell_masses().iter().map(|&m| m / width).collect(),
        }
    }
}

/// Writes the coefficient derivatives for `coeffs` (flat `[dim][func]`
/// layout) into `deriv`. The mode regions are re-derived from the current
/// coefficients: each cell picks the mode indicated by its synthesized
/// state.
fn wavelet_rhs_flat<T: Scalar>(
    sys: &HybridSystem<T>,
    basis: &HaarBasis<T>,
    work: &mut WaveletWork<T>,
    coeffs: &[T],
    deriv: &mut [T],
) {
    let dim = sys.dim();
    let nf = basis.n_funcs();
    let n_cells = basis.n_cells();
    for v in 0..dim {
        basis.synthesize(&coeffs[v * nf..(v + 1) * nf], &mut work.cells[v]);
    }
    for l in 0..n_cells {
        for v in 0..dim {
            work.cell_state[v] = work.cells[v][l];
        }
        let mode = sys.indicator(&work.cell_state);
        let field = sys.mode(mode);
        field.eval_det(&work.cell_state, &mut work.det);
        field.eval_lin(&work.cell_state, &mut work.lin);
        for v in 0..dim {
            work.cell_rhs[v][l] = work.det[v] + work.lin[v] * work.lambda_bar[l];
        }
    }
    for v in 0..dim {
        basis.project(&work.cell_rhs[v], &mut deriv[v * nf..(v + 1) * nf]);
    }
}

/// Cell values and active modes implied by a wavelet coefficient state.
pub fn cell_profile<T: Scalar>(
    sys: &HybridSystem<T>,
    basis: &HaarBasis<T>,
    state: &WaveletState<T>,
) -> CellProfile<T> {
    let dim = sys.dim();
    let n_cells = basis.n_cells();
    let mut values = vec![vec![T::zero(); n_cells]; dim];
    for (vals, coeffs) in values.iter_mut().zip(&state.coeffs) {
        basis.synthesize(coeffs, vals);
    }
    let mut modes = Vec::with_capacity(n_cells);
    let mut x = vec![T::zero(); dim];
    for l in 0..n_cells {
        for (xv, vals) in x.iter_mut().zip(&values) {
            *xv = vals[l];
        }
        modes.push(sys.indicator(&x));
    }
    CellProfile { values, modes }
}

/// One evaluation of the wavelet coefficient derivatives.
///
/// Returns `deriv[dim][func]` for the given state. The per-cell mode comes
/// from the guard sign of the synthesized cell state; λ-weighted terms use
/// the exact cell masses of the parameter distribution.
pub fn wavelet_rhs<T: Scalar>(
    sys: &HybridSystem<T>,
    basis: &HaarBasis<T>,
    state: &WaveletState<T>,
) -> Result<Vec<Vec<T>>, HpcError> {
    let dim = sys.dim();
    if state.coeffs.len() != dim {
        return Err(HpcError::DimensionMismatch {
            expected: dim,
            got: state.coeffs.len(),
        });
    }
    let nf = basis.n_funcs();
    let mut flat = vec![T::zero(); dim * nf];
    for v in 0..dim {
        flat[v * nf..(v + 1) * nf].copy_from_slice(&state.coeffs[v]);
    }
    let mut work = WaveletWork::new(basis, dim);
    let mut deriv = vec![T::zero(); dim * nf];
    wavelet_rhs_flat(sys, basis, &mut work, &flat, &mut deriv);
    Ok((0..dim)
        .map(|v| deriv[v * nf..(v + 1) * nf].to_vec())
        .collect())
}

/// Classic fixed-step RK4 over a flat coefficient vector. Returns false if
/// the updated state stopped being finite (the update is still written).
fn rk4_flat<T: Scalar, F: FnMut(&[T], &mut [T])>(
    rhs: &mut F,
    y: &mut [T],
    h: T,
    k: &mut [Vec<T>; 4],
    tmp: &mut [T],
) -> bool {
    let half = h / cast::<T>(2.0);
    let sixth = h / cast::<T>(6.0);
    let two = cast::<T>(2.0);
    rhs(y, &mut k[0]);
    for i in 0..y.len() {
        tmp[i] = y[i] + half * k[0][i];
    }
    let (k0, rest) = k.split_at_mut(1);
    rhs(tmp, &mut rest[0]);
    for i in 0..y.len() {
        tmp[i] = y[i] + half * rest[0][i];
    }
    rhs(tmp, &mut rest[1]);
    for i in 0..y.len() {
        tmp[i] = y[i] + h * rest[1][i];
    }
    rhs(tmp, &mut rest[2]);
    let mut finite = true;
    for i in 0..y.len() {
        y[i] += sixth * (k0[0][i] + two * rest[0][i] + two * rest[1][i] + rest[2][i]);
        finite &= y[i].is_finite();
    }
    finite
}

/// Projects one trajectory per cell onto wavelet coefficient states, one
/// per shared grid time. Every cell starts from the same deterministic
/// state, so the first entry is written directly (exact zero spread)
/// instead of round-tripped through the projection.
fn project_trajectories<T: Scalar>(
    basis: &HaarBasis<T>,
    trajs: &[Trajectory<T>],
    p: usize,
    dim: usize,
) -> Vec<WaveletState<T>> {
    let nf = basis.n_funcs();
    let times = &trajs[0].times;
    let mut cells = vec![T::zero(); trajs.len()];
    let mut states = Vec::with_capacity(times.len());
    for (ti, &time) in times.iter().enumerate() {
        let mut coeffs = vec![vec![T::zero(); nf]; dim];
        for (v, cv) in coeffs.iter_mut().enumerate() {
            if ti == 0 {
                cv[0] = trajs[0].states[0][v];
                continue;
            }
            for (l, traj) in trajs.iter().enumerate() {
                cells[l] = traj.states[ti][v];
            }
            basis.project(&cells, cv);
        }
        states.push(WaveletState { p, time, coeffs });
    }
    states
}

/// Evolves the wavelet expansion of `sys` from the deterministic initial
/// state `x0` (all spread enters through the parameter) to `t_end`.
///
/// Wavelet order `p` keeps `2^{p+1}` coefficients per state variable.
///
/// Because the truncated expansion is piecewise constant on the dyadic
/// parameter cells, the Galerkin-projected field never couples cells: it is
/// exactly one copy of the hybrid ODE per cell, driven by the cell-mean
/// parameter. The solve therefore integrates those copies trajectory-wise
/// with event localization and projects the cell values back to
/// coefficients at every grid time — the same coefficient system a flat
/// Runge-Kutta loop would integrate, minus the mode-smearing a fixed step
/// suffers when cells chatter against the guard.
///
/// If any cell trajectory blows up (or exhausts its event budget), the
/// returned series is truncated at the last grid time every cell reached
/// and flagged [`SolveStatus::Diverged`].
pub fn evolve<T: Scalar>(
    sys: &HybridSystem<T>,
    d: &ParamDist<T>,
    x0: &[T],
    p: usize,
    t_end: T,
    dt: T,
) -> Result<WaveletSeries<T>, HpcError> {
    let dim = sys.dim();
    if x0.len() != dim {
        return Err(HpcError::DimensionMismatch {
            expected: dim,
            got: x0.len(),
        });
    }
    let basis = HaarBasis::new(p, *d)?;
    let grid = TimeGrid::new(t_end, dt)?;
    let nf = basis.n_funcs();
    let width = basis.cell_width();
    let lambdas: Vec<T> = basis.cell_masses().iter().map(|&m| m / width).collect();

    let run_all = |horizon: T| -> Vec<Result<Trajectory<T>, ModelError>> {
        lambdas
            .par_iter()
            .map(|&l| simulate(sys, x0, l, horizon, dt))
            .collect()
    };

    // First pass over the full horizon; on any cell failure, find the last
    // grid step every cell is known to have reached.
    let mut status = SolveStatus::Complete;
    let mut keep_steps = grid.n_steps();
    let mut runs = run_all(t_end);
    for run in &runs {
        let reached = match run {
            Ok(_) => continue,
            Err(ModelError::Diverged { t_last }) => *t_last,
            Err(ModelError::ZenoGuard { t, .. }) => *t,
            Err(_) => continue, // surfaced below when unwrapping
        };
        let steps = (reached / to_f64(dt) + 1e-9).floor() as usize;
        keep_steps = keep_steps.min(steps);
    }
    let states = if keep_steps == grid.n_steps() {
        let trajs = runs
            .drain(..)
            .collect::<Result<Vec<_>, _>>()
            .map_err(HpcError::Model)?;
        project_trajectories(&basis, &trajs, p, dim)
    } else {
        status = SolveStatus::Diverged {
            t_last: to_f64(grid.time(keep_steps)),
        };
        if keep_steps == 0 {
            let mut coeffs = vec![vec![T::zero(); nf]; dim];
            for v in 0..dim {
                coeffs[v][0] = x0[v];
            }
            vec![WaveletState {
                p,
                time: T::zero(),
                coeffs,
            }]
        } else {
            // Re-run to the truncated horizon; every cell stayed finite at
            // least this far, so these solves complete.
            let trajs = run_all(grid.time(keep_steps))
                .into_iter()
                .collect::<Result<Vec<_>, _>>()
                .map_err(HpcError::Model)?;
            project_trajectories(&basis, &trajs, p, dim)
        }
    };

    let times: Vec<T> = states.iter().map(|s| s.time).collect();
    let moments = MomentSeries {
        times: times.clone(),
        mean: (0..dim)
            .map(|v| states.iter().map(|s| s.mean(v)).collect())
            .collect(),
        variance: (0..dim)
            .map(|v| states.iter().map(|s| s.variance(v)).collect())
            .collect(),
    };
    Ok(WaveletSeries {
        p,
        times,
        states,
        moments,
        status,
    })
}

/// Precomputed Gauss-Hermite data for the Hermite Galerkin path.
struct HermiteWork<T> {
    /// `psi[q][k] = H_k(ξ_q)`.
    psi: Vec<Vec<T>>,
    weights: Vec<T>,
    /// λ value at each node: μ + σ·ξ_q.
    lambda: Vec<T>,
    /// k! for k = 0..=p.
    factorial: Vec<T>,
    node_state: Vec<T>,
    field: Vec<T>,
    scratch: Vec<T>,
}

/// Writes Hermite coefficient derivatives (flat `[dim][k]` layout) into
/// `deriv` by pseudo-spectral projection: evaluate the expansion at each
/// quadrature node, apply the node's mode, and re-project.
fn hermite_rhs_flat<T: Scalar>(
    sys: &HybridSystem<T>,
    work: &mut HermiteWork<T>,
    n_coeff: usize,
    coeffs: &[T],
    deriv: &mut [T],
) {
    let dim = sys.dim();
    deriv.fill(T::zero());
    for q in 0..work.weights.len() {
        for v in 0..dim {
            let block = &coeffs[v * n_coeff..(v + 1) * n_coeff];
            let mut x = T::zero();
            for (a, &c) in block.iter().enumerate() {
                x += c * work.psi[q][a];
            }
            work.node_state[v] = x;
        }
        let mode = sys.indicator(&work.node_state);
        sys.eval_field(
            mode,
            &work.node_state,
            work.lambda[q],
            &mut work.field,
            &mut work.scratch,
        );
        let w = work.weights[q];
        for v in 0..dim {
            for a in 0..n_coeff {
                deriv[v * n_coeff + a] += w * work.psi[q][a] * work.field[v];
            }
        }
    }
    for v in 0..dim {
        for a in 0..n_coeff {
            deriv[v * n_coeff + a] /= work.factorial[a];
        }
    }
}

/// One evaluation of the Hermite coefficient derivatives (degree inferred
/// from the state, quadrature of `quad_order` nodes).
pub fn hermite_galerkin_rhs<T: Scalar>(
    sys: &HybridSystem<T>,
    d: &ParamDist<T>,
    state: &HermiteState<T>,
    quad_order: usize,
) -> Result<Vec<Vec<T>>, HpcError> {
    let dim = sys.dim();
    if state.coeffs.len() != dim {
        return Err(HpcError::DimensionMismatch {
            expected: dim,
            got: state.coeffs.len(),
        });
    }
    let mut work = build_hermite_work(d, state.degree, quad_order, dim)?;
    let n_coeff = state.degree + 1;
    let mut flat = vec![T::zero(); dim * n_coeff];
    for v in 0..dim {
        flat[v * n_coeff..(v + 1) * n_coeff].copy_from_slice(&state.coeffs[v]);
    }
    let mut deriv = vec![T::zero(); dim * n_coeff];
    hermite_rhs_flat(sys, &mut work, n_coeff, &flat, &mut deriv);
    Ok((0..dim)
        .map(|v| deriv[v * n_coeff..(v + 1) * n_coeff].to_vec())
        .collect())
}

fn build_hermite_work<T: Scalar>(
    d: &ParamDist<T>,
    degree: usize,
    quad_order: usize,
    dim: usize,
) -> Result<HermiteWork<T>, HpcError> {
    let (mu, sigma) = match *d {
        ParamDist::Gaussian { mean, std_dev } => (mean, std_dev),
        _ => return Err(HpcError::NotGaussian),
    };
    let needed = 2 * degree + 2;
    if quad_order < needed {
        return Err(HpcError::QuadratureTooSmall {
            quad_order,
            degree,
            needed,
        });
    }
    let rule = crate::basis::hermite_rule::<T>(quad_order)?;
    let basis = HermiteBasis::new(degree);
    let psi: Vec<Vec<T>> = rule.nodes().iter().map(|&xi| basis.eval(xi)).collect();
    let lambda: Vec<T> = rule.nodes().iter().map(|&xi| mu + sigma * xi).collect();
    let mut factorial = vec![T::one(); degree + 1];
    for a in 1..=degree {
        factorial[a] = factorial[a - 1] * cast::<T>(a as f64);
    }
    Ok(HermiteWork {
        psi,
        weights: rule.weights().to_vec(),
        lambda,
        factorial,
        node_state: vec![T::zero(); dim],
        field: vec![T::zero(); dim],
        scratch: vec![T::zero(); dim],
    })
}

/// Hermite-basis counterpart of [`evolve`]: expansion of degree `p` in a
/// standard-normal germ, region integrals by `quad_order`-node
/// Gauss-Hermite quadrature (must be ≥ 2p+2).
#[allow(clippy::too_many_arguments)]
pub fn evolve_hermite<T: Scalar>(
    sys: &HybridSystem<T>,
    d: &ParamDist<T>,
    x0: &[T],
    p: usize,
    quad_order: usize,
    t_end: T,
    dt: T,
) -> Result<HermiteSeries<T>, HpcError> {
    let dim = sys.dim();
    if x0.len() != dim {
        return Err(HpcError::DimensionMismatch {
            expected: dim,
            got: x0.len(),
        });
    }
    let mut work = build_hermite_work(d, p, quad_order, dim)?;
    let grid = TimeGrid::new(t_end, dt)?;
    let n_coeff = p + 1;

    let mut flat = vec![T::zero(); dim * n_coeff];
    for v in 0..dim {
        flat[v * n_coeff] = x0[v];
    }
    let mut k = [
        vec![T::zero(); dim * n_coeff],
        vec![T::zero(); dim * n_coeff],
        vec![T::zero(); dim * n_coeff],
        vec![T::zero(); dim * n_coeff],
    ];
    let mut tmp = vec![T::zero(); dim * n_coeff];

    let unflatten = |flat: &[T], time: T| HermiteState {
        degree: p,
        time,
        coeffs: (0..dim)
            .map(|v| flat[v * n_coeff..(v + 1) * n_coeff].to_vec())
            .collect(),
    };

    let mut states = vec![unflatten(&flat, T::zero())];
    let mut status = SolveStatus::Complete;
    for step in 0..grid.n_steps() {
        let ok = {
            let mut rhs = |y: &[T], dy: &mut [T]| hermite_rhs_flat(sys, &mut work, n_coeff, y, dy);
            rk4_flat(&mut rhs, &mut flat, grid.dt(), &mut k, &mut tmp)
        };
        if !ok {
            status = SolveStatus::Diverged {
                t_last: to_f64(grid.time(step)),
            };
            break;
        }
        states.push(unflatten(&flat, grid.time(step + 1)));
    }

    let times: Vec<T> = states.iter().map(|s| s.time).collect();
    let moments = MomentSeries {
        times: times.clone(),
        mean: (0..dim)
            .map(|v| states.iter().map(|s| s.mean(v)).collect())
            .collect(),
        variance: (0..dim)
            .map(|v| states.iter().map(|s| s.variance(v)).collect())
            .collect(),
    };
    Ok(HermiteSeries {
        degree: p,
        times,
        states,
        moments,
        status,
    })
}
