//! Hybrid dynamical systems and event-accurate trajectory simulation.
//!
//! A [`HybridSystem`] owns one or two smooth vector fields ("modes") selected
//! by the sign of a guard function: mode 0 is active where g(x) ≥ 0, mode 1
//! where g(x) < 0, so the mode domains partition the state space by
//! construction. Fields are *affine in the uncertain parameter*,
//! f(x, λ) = f_det(x) + λ·f_lin(x), which covers every system this crate
//! targets and is what lets the chaos solver integrate the parameter exactly.
//!
//! [`simulate`] integrates a single trajectory with fixed-step classical RK4
//! and localizes guard crossings inside a step by bisection until the guard
//! is within `event_tol` of zero; the mode switches at the crossing and the
//! event is recorded. Instantaneous state resets are *not* applied here —
//! systems carrying a [`SeparableReset`] are first smoothed into a stiff
//! boundary layer (see the `resets` module), after which ordinary simulation
//! applies.

use thiserror::Error;

use crate::scalar::{cast, to_f64, Scalar};
use crate::series::{GridError, TimeGrid};

/// State-to-derivative closure: writes d/dt into `out`.
pub type StateFn<T> = Box<dyn Fn(&[T], &mut [T]) + Send + Sync>;
/// Scalar guard function of the full state.
pub type GuardFn<T> = Box<dyn Fn(&[T]) -> T + Send + Sync>;

/// Errors from system construction and simulation.
#[derive(Debug, Error)]
pub enum ModelError {
    /// Input state has the wrong dimension.
    #[error("state dimension mismatch: system has {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// Invalid time grid.
    #[error(transparent)]
    Grid(#[from] GridError),
    /// The state left the finite range during integration.
    #[error("integration diverged to a non-finite state at t = {t_last}")]
    Diverged { t_last: f64 },
    /// Switching-event cap exceeded (Zeno-like accumulation).
    #[error("exceeded {max_events} switching events at t = {t}")]
    ZenoGuard { t: f64, max_events: usize },
    /// Systems are built from one field or a guard-selected pair.
    #[error("unsupported mode count {n_modes} (expected 1 or 2)")]
    InvalidModeCount { n_modes: usize },
    /// Reset structure is malformed (overlap, bad indices, empty blocks).
    #[error("invalid reset structure: {0}")]
    InvalidReset(String),
}

/// One smooth mode of a hybrid system, affine in the uncertain parameter:
/// f(x, λ) = f_det(x) + λ·f_lin(x).
pub struct ModeField<T> {
    det: StateFn<T>,
    lin: StateFn<T>,
}

impl<T: Scalar> ModeField<T> {
    /// Field from its parameter-free and parameter-linear parts.
    pub fn new(
        det: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
        lin: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            det: Box::new(det),
            lin: Box::new(lin),
        }
    }

    /// Field that does not depend on the parameter (f_lin ≡ 0).
    pub fn lambda_free(det: impl Fn(&[T], &mut [T]) + Send + Sync + 'static) -> Self {
        Self::new(det, |_, out| out.fill(T::zero()))
    }

    /// Writes f_det(x) into `out`.
    #[inline]
    pub fn eval_det(&self, x: &[T], out: &mut [T]) {
        (self.det)(x, out);
    }

    /// Writes f_lin(x) into `out`.
    #[inline]
    pub fn eval_lin(&self, x: &[T], out: &mut [T]) {
        (self.lin)(x, out);
    }

    /// Writes the full field f_det(x) + λ·f_lin(x) into `out`, using
    /// `scratch` (same length) for the linear part.
    #[inline]
    pub fn eval(&self, x: &[T], lambda: T, out: &mut [T], scratch: &mut [T]) {
        (self.det)(x, out);
        (self.lin)(x, scratch);
        for (o, &s) in out.iter_mut().zip(scratch.iter()) {
            *o += lambda * s;
        }
    }
}

/// Instantaneous reset whose guard depends only on states that are not
/// themselves reset (separability): crossing g(y) = 0 maps the reset block
/// x⁻ to h(x⁻) while the guard block is continuous.
pub struct SeparableReset<T> {
    reset_states: Vec<usize>,
    guard_states: Vec<usize>,
    guard_fn: GuardFn<T>,
    reset_map: StateFn<T>,
}

impl<T: Scalar> SeparableReset<T> {
    /// Builds the reset; the two index blocks must be nonempty and disjoint.
    ///
    /// `guard_fn` receives the guard-state subvector, `reset_map` maps the
    /// reset-state subvector before the reset to its value after.
    pub fn new(
        reset_states: Vec<usize>,
        guard_states: Vec<usize>,
        guard_fn: impl Fn(&[T]) -> T + Send + Sync + 'static,
        reset_map: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
    ) -> Result<Self, ModelError> {
        if reset_states.is_empty() || guard_states.is_empty() {
            return Err(ModelError::InvalidReset(
                "reset and guard blocks must be nonempty".into(),
            ));
        }
        if reset_states.iter().any(|i| guard_states.contains(i)) {
            return Err(ModelError::InvalidReset(
                "reset and guard state blocks overlap (reset is not separable)".into(),
            ));
        }
        Ok(Self {
            reset_states,
            guard_states,
            guard_fn: Box::new(guard_fn),
            reset_map: Box::new(reset_map),
        })
    }

    /// Indices of the states the reset map rewrites.
    pub fn reset_states(&self) -> &[usize] {
        &self.reset_states
    }

    /// Indices of the states the guard reads.
    pub fn guard_states(&self) -> &[usize] {
        &self.guard_states
    }

    /// Guard value from the guard-state subvector.
    pub fn guard(&self, guard_block: &[T]) -> T {
        (self.guard_fn)(guard_block)
    }

    /// Applies the reset map to a reset-state subvector.
    pub fn apply(&self, pre: &[T], post: &mut [T]) {
        (self.reset_map)(pre, post);
    }
}

/// Hybrid system: one or two affine-in-λ modes selected by a guard sign,
/// with an optional separable reset awaiting boundary-layer smoothing.
pub struct HybridSystem<T> {
    dim: usize,
    state_names: Vec<String>,
    modes: Vec<ModeField<T>>,
    guard: GuardFn<T>,
    reset: Option<SeparableReset<T>>,
    second_order_positions: Option<usize>,
}

impl<T: Scalar> HybridSystem<T> {
    /// System with two modes selected by the guard sign (mode 0 iff g ≥ 0).
    pub fn new(
        dim: usize,
        modes: Vec<ModeField<T>>,
        guard: impl Fn(&[T]) -> T + Send + Sync + 'static,
    ) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        let n_modes = modes.len();
        if n_modes == 0 || n_modes > 2 {
            return Err(ModelError::InvalidModeCount { n_modes });
        }
        let state_names = (0..dim).map(|i| format!("x{i}")).collect();
        Ok(Self {
            dim,
            state_names,
            modes,
            guard: Box::new(guard),
            reset: None,
            second_order_positions: None,
        })
    }

    /// Single-mode (smooth) system; the guard is identically positive.
    pub fn single_mode(dim: usize, field: ModeField<T>) -> Result<Self, ModelError> {
        Self::new(dim, vec![field], |_| T::one())
    }

    /// Attaches a separable reset; indices must lie within the dimension.
    pub fn with_reset(mut self, reset: SeparableReset<T>) -> Result<Self, ModelError> {
        let oob = reset
            .reset_states
            .iter()
            .chain(&reset.guard_states)
            .any(|&i| i >= self.dim);
        if oob {
            return Err(ModelError::InvalidReset(format!(
                "reset indices exceed state dimension {}",
                self.dim
            )));
        }
        self.reset = Some(reset);
        Ok(self)
    }

    /// Names the state components (for reports and CSV headers).
    ///
    /// Panics if the name count does not match the dimension.
    pub fn with_state_names<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Self {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        assert_eq!(names.len(), self.dim, "one name per state dimension");
        self.state_names = names;
        self
    }

    /// Declares second-order mechanical structure: the first `n_positions`
    /// states are positions, the rest their velocities, and the guard
    /// depends on positions only. Consumed by the density-accumulation
    /// screen in the transport module.
    pub fn with_second_order_structure(mut self, n_positions: usize) -> Self {
        assert!(
            2 * n_positions == self.dim,
            "second-order structure needs dim = 2 · positions"
        );
        self.second_order_positions = Some(n_positions);
        self
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// State component names.
    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    /// Number of modes (1 or 2).
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// The mode fields.
    pub fn mode(&self, idx: usize) -> &ModeField<T> {
        &self.modes[idx]
    }

    /// Guard value at a state.
    pub fn guard(&self, x: &[T]) -> T {
        (self.guard)(x)
    }

    /// The attached reset, if any.
    pub fn reset(&self) -> Option<&SeparableReset<T>> {
        self.reset.as_ref()
    }

    /// Declared second-order position count, if any.
    pub fn second_order_positions(&self) -> Option<usize> {
        self.second_order_positions
    }

    /// Active mode index at a state: 0 iff g(x) ≥ 0, else 1 (ties to mode 0).
    /// Single-mode systems always report 0, so exactly one mode is active at
    /// every state.
    #[inline]
    pub fn indicator(&self, x: &[T]) -> usize {
        if self.modes.len() == 1 || self.guard(x) >= T::zero() {
            0
        } else {
            1
        }
    }

    /// Evaluates the field of `mode_idx` at (x, λ) into `out`.
    #[inline]
    pub fn eval_field(&self, mode_idx: usize, x: &[T], lambda: T, out: &mut [T], scratch: &mut [T]) {
        self.modes[mode_idx].eval(x, lambda, out, scratch);
    }
}

/// The switching oscillator ẍ + cẋ + x ± λ = 0, written first-order in
/// states (x, y = ẋ): the forcing is +λ where x ≥ 0 and −λ where x < 0,
/// which makes the parameter coupling flip sign across the guard x = 0.
pub fn switching_oscillator<T: Scalar>(c: T) -> HybridSystem<T> {
    let damp0 = c;
    let damp1 = c;
    let plus = ModeField::new(
        move |x: &[T], out: &mut [T]| {
            out[0] = x[1];
            out[1] = -x[0] - damp0 * x[1];
        },
        |_: &[T], out: &mut [T]| {
            out[0] = T::zero();
            out[1] = -T::one();
        },
    );
    let minus = ModeField::new(
        move |x: &[T], out: &mut [T]| {
            out[0] = x[1];
            out[1] = -x[0] - damp1 * x[1];
        },
        |_: &[T], out: &mut [T]| {
            out[0] = T::zero();
            out[1] = T::one();
        },
    );
    HybridSystem::new(2, vec![plus, minus], |x: &[T]| x[0])
        .expect("two modes")
        .with_state_names(["x", "y"])
        .with_second_order_structure(1)
}

/// A recorded mode switch.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<T> {
    /// Crossing time.
    pub time: T,
    /// State at the crossing (|g| ≤ event tolerance).
    pub state: Vec<T>,
    /// Mode active before the crossing.
    pub from_mode: usize,
    /// Mode active after the crossing.
    pub to_mode: usize,
}

/// A simulated trajectory sampled on the uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    /// Strictly increasing sample times (the integration grid).
    pub times: Vec<T>,
    /// State at each sample time.
    pub states: Vec<Vec<T>>,
    /// Active mode at each sample time.
    pub mode_ids: Vec<usize>,
    /// Mode switches in time order.
    pub events: Vec<Event<T>>,
}

impl<T: Scalar> Trajectory<T> {
    /// Number of samples.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// A trajectory holds at least the initial sample.
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// Final state.
    pub fn final_state(&self) -> &[T] {
        self.states.last().expect("nonempty trajectory")
    }

    /// One state component across all samples.
    pub fn component(&self, d: usize) -> impl Iterator<Item = T> + '_ {
        self.states.iter().map(move |x| x[d])
    }
}

/// Tunables for [`simulate_with`].
#[derive(Debug, Clone, Copy)]
pub struct SimOptions<T> {
    /// Guard tolerance scale: events are localized to
    /// |g| ≤ `event_tol_scale` · (1 + ‖x‖).
    pub event_tol_scale: T,
    /// Mode-switch cap guarding against Zeno-like chatter.
    pub max_events: usize,
    /// Bisection iteration cap per event.
    pub max_bisections: usize,
}

impl<T: Scalar> Default for SimOptions<T> {
    fn default() -> Self {
        Self {
            event_tol_scale: cast(1e-10),
            max_events: 1_000_000,
            max_bisections: 120,
        }
    }
}

/// Fixed-size scratch space for RK4 stages.
struct RkScratch<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    xs: Vec<T>,
    lin: Vec<T>,
}

impl<T: Scalar> RkScratch<T> {
    fn new(dim: usize) -> Self {
        Self {
            k1: vec![T::zero(); dim],
            k2: vec![T::zero(); dim],
            k3: vec![T::zero(); dim],
            k4: vec![T::zero(); dim],
            xs: vec![T::zero(); dim],
            lin: vec![T::zero(); dim],
        }
    }
}

/// One classical RK4 step of size `h` under a fixed mode field.
fn rk4_step<T: Scalar>(
    field: &ModeField<T>,
    lambda: T,
    x: &[T],
    h: T,
    out: &mut [T],
    s: &mut RkScratch<T>,
) {
    let half = cast::<T>(0.5);
    let sixth = T::one() / cast::<T>(6.0);
    let two = cast::<T>(2.0);
    field.eval(x, lambda, &mut s.k1, &mut s.lin);
    for (i, &xi) in x.iter().enumerate() {
        s.xs[i] = xi + half * h * s.k1[i];
    }
    field.eval(&s.xs, lambda, &mut s.k2, &mut s.lin);
    for (i, &xi) in x.iter().enumerate() {
        s.xs[i] = xi + half * h * s.k2[i];
    }
    field.eval(&s.xs, lambda, &mut s.k3, &mut s.lin);
    for (i, &xi) in x.iter().enumerate() {
        s.xs[i] = xi + h * s.k3[i];
    }
    field.eval(&s.xs, lambda, &mut s.k4, &mut s.lin);
    for (i, &xi) in x.iter().enumerate() {
        out[i] = xi + h * sixth * (s.k1[i] + two * s.k2[i] + two * s.k3[i] + s.k4[i]);
    }
}

fn norm2<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |a, &v| a + v * v).sqrt()
}

fn all_finite<T: Scalar>(x: &[T]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Simulates with default [`SimOptions`].
pub fn simulate<T: Scalar>(
    sys: &HybridSystem<T>,
    x0: &[T],
    lambda: T,
    t_end: T,
    dt: T,
) -> Result<Trajectory<T>, ModelError> {
    simulate_with(sys, x0, lambda, t_end, dt, SimOptions::default())
}

/// Integrates one trajectory of `sys` from `x0` with parameter λ over
/// `[0, t_end]` on a fixed grid of step `dt`.
///
/// Within each grid step the active mode's field is advanced by classical
/// RK4. If the mode indicated at the step end differs from the current mode,
/// the crossing is localized by bisection on the step fraction until the
/// guard magnitude falls below the event tolerance; the mode switches there,
/// the event is recorded, and integration resumes over the step remainder
/// (several events per step are handled). Samples land exactly on the grid.
pub fn simulate_with<T: Scalar>(
    sys: &HybridSystem<T>,
    x0: &[T],
    lambda: T,
    t_end: T,
    dt: T,
    opts: SimOptions<T>,
) -> Result<Trajectory<T>, ModelError> {
    if x0.len() != sys.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: sys.dim(),
            got: x0.len(),
        });
    }
    let grid = TimeGrid::new(t_end, dt)?;
    let dim = sys.dim();
    let mut scratch = RkScratch::new(dim);
    let mut x = x0.to_vec();
    let mut mode = sys.indicator(&x);

    let mut traj = Trajectory {
        times: Vec::with_capacity(grid.len()),
        states: Vec::with_capacity(grid.len()),
        mode_ids: Vec::with_capacity(grid.len()),
        events: Vec::new(),
    };
    traj.times.push(T::zero());
    traj.states.push(x.clone());
    traj.mode_ids.push(mode);

    let mut x_try = vec![T::zero(); dim];
    let mut x_mid = vec![T::zero(); dim];

    for step in 0..grid.n_steps() {
        let t_step = grid.time(step);
        let mut done = T::zero(); // advanced fraction of this step, in time units
        loop {
            let h = dt - done;
            rk4_step(&sys.modes[mode], lambda, &x, h, &mut x_try, &mut scratch);
            if !all_finite(&x_try) {
                return Err(ModelError::Diverged {
                    t_last: to_f64(t_step + done),
                });
            }
            if sys.n_modes() == 1 || sys.indicator(&x_try) == mode {
                x.copy_from_slice(&x_try);
                break;
            }

            // A crossing lies in (0, h]: bisect on the step fraction for the
            // earliest sub-step whose endpoint indicates the other mode, and
            // stop once the guard there is within tolerance.
            let mut lo = T::zero();
            let mut hi = h;
            x_mid.copy_from_slice(&x_try);
            for _ in 0..opts.max_bisections {
                let tol = opts.event_tol_scale * (T::one() + norm2(&x_mid));
                if sys.guard(&x_mid).abs() <= tol {
                    break;
                }
                let mid = cast::<T>(0.5) * (lo + hi);
                if mid <= lo || mid >= hi {
                    break; // interval collapsed to adjacent floats
                }
                rk4_step(&sys.modes[mode], lambda, &x, mid, &mut x_try, &mut scratch);
                if !all_finite(&x_try) {
                    return Err(ModelError::Diverged {
                        t_last: to_f64(t_step + done),
                    });
                }
                if sys.indicator(&x_try) == mode {
                    lo = mid;
                } else {
                    hi = mid;
                    x_mid.copy_from_slice(&x_try);
                }
            }

            let t_cross = t_step + done + hi;
            let new_mode = 1 - mode;
            traj.events.push(Event {
                time: t_cross,
                state: x_mid.clone(),
                from_mode: mode,
                to_mode: new_mode,
            });
            if traj.events.len() > opts.max_events {
                return Err(ModelError::ZenoGuard {
                    t: to_f64(t_cross),
                    max_events: opts.max_events,
                });
            }
            mode = new_mode;
            x.copy_from_slice(&x_mid);
            done += hi;
            if dt - done <= T::epsilon() * dt {
                break; // event landed on the grid point
            }
        }
        traj.times.push(grid.time(step + 1));
        traj.states.push(x.clone());
        traj.mode_ids.push(mode);
    }
    Ok(traj)
}
