//! Godunov finite-volume drift and explicit Euler stepping.

use crate::grid::{burgers_flux, SpaceTimeGrid, WaveSpec};

/// Which state the Godunov flux is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxBranch {
    Left,
    Right,
    Sonic,
}

/// Selects the minimizing/maximizing candidate of the Godunov flux for
/// `F(q) = (q - gamma)^2 / 2`. Ties resolve to the left state.
#[inline]
pub fn godunov_branch(q_left: f64, q_right: f64, gamma: f64) -> FluxBranch {
    let fl = burgers_flux(q_left, gamma);
    let fr = burgers_flux(q_right, gamma);
    if q_left <= q_right {
        if q_left < gamma && gamma < q_right {
            FluxBranch::Sonic
        } else if fr < fl {
            FluxBranch::Right
        } else {
            FluxBranch::Left
        }
    } else if fr > fl {
        FluxBranch::Right
    } else {
        FluxBranch::Left
    }
}

/// Godunov numerical flux between two neighboring cell values.
#[inline]
pub fn godunov_flux(q_left: f64, q_right: f64, gamma: f64) -> f64 {
    match godunov_branch(q_left, q_right, gamma) {
        FluxBranch::Left => burgers_flux(q_left, gamma),
        FluxBranch::Right => burgers_flux(q_right, gamma),
        FluxBranch::Sonic => 0.0,
    }
}

/// Godunov flux together with its partial derivatives in `(q_left, q_right)`.
/// At kinks the derivative of the selected branch is returned.
#[inline]
pub fn godunov_flux_with_derivative(q_left: f64, q_right: f64, gamma: f64) -> (f64, f64, f64) {
    match godunov_branch(q_left, q_right, gamma) {
        FluxBranch::Left => (burgers_flux(q_left, gamma), q_left - gamma, 0.0),
        FluxBranch::Right => (burgers_flux(q_right, gamma), 0.0, q_right - gamma),
        FluxBranch::Sonic => (0.0, 0.0, 0.0),
    }
}

/// Semi-discrete right-hand side `b_m(Q)` on the interior cells `1..M-1`
/// (zero-based), written into `out` (length `M - 2`).
pub fn drift_into(state: &[f64], spec: &WaveSpec, dx: f64, out: &mut [f64]) {
    let m = state.len();
    debug_assert!(m >= 4);
    debug_assert_eq!(out.len(), m - 2);
    let inv_dx = 1.0 / dx;
    let diff = spec.viscosity * inv_dx * inv_dx;
    let mut f_west = godunov_flux(state[0], state[1], spec.gamma);
    for i in 1..m - 1 {
        let f_east = godunov_flux(state[i], state[i + 1], spec.gamma);
        out[i - 1] = -(f_east - f_west) * inv_dx + diff * (state[i + 1] - 2.0 * state[i] + state[i - 1]);
        f_west = f_east;
    }
}

pub fn drift(state: &[f64], spec: &WaveSpec, dx: f64) -> Vec<f64> {
    let mut out = vec![0.0; state.len() - 2];
    drift_into(state, spec, dx, &mut out);
    out
}

/// How boundary cells are pinned at each time level.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryPolicy {
    /// First and last cell held at the far-field states for every level.
    FixedStates { left: f64, right: f64 },
    /// The `width` outermost cells on each side follow the straight line in
    /// time between the initial and terminal samplings.
    TimeInterpolated {
        initial: Vec<f64>,
        terminal: Vec<f64>,
        width: usize,
    },
}

impl BoundaryPolicy {
    /// Number of pinned cells on each side.
    pub fn width(&self) -> usize {
        match self {
            BoundaryPolicy::FixedStates { .. } => 1,
            BoundaryPolicy::TimeInterpolated { width, .. } => *width,
        }
    }

    pub fn is_pinned(&self, cell: usize, cells: usize) -> bool {
        let w = self.width();
        cell < w || cell >= cells - w
    }

    /// Overwrites the pinned cells of `state` with their values at level `n` of `steps`.
    pub fn apply(&self, state: &mut [f64], n: usize, steps: usize) {
        let m = state.len();
        match self {
            BoundaryPolicy::FixedStates { left, right } => {
                state[0] = *left;
                state[m - 1] = *right;
            }
            BoundaryPolicy::TimeInterpolated {
                initial,
                terminal,
                width,
            } => {
                let s = n as f64 / steps as f64;
                for i in (0..*width).chain(m - *width..m) {
                    state[i] = (1.0 - s) * initial[i] + s * terminal[i];
                }
            }
        }
    }
}

/// Stability number `dt * (max|F'| / dx + 2D / dx^2)` of the explicit scheme
/// for states bounded by `[lo, hi]`.
pub fn stability_number(grid: &SpaceTimeGrid, spec: &WaveSpec, lo: f64, hi: f64) -> f64 {
    let max_speed = (lo - spec.gamma).abs().max((hi - spec.gamma).abs());
    grid.dt * (max_speed / grid.dx + 2.0 * spec.viscosity / (grid.dx * grid.dx))
}

/// Logs a warning when the explicit scheme may be unstable on `grid`.
pub fn warn_if_unstable(grid: &SpaceTimeGrid, spec: &WaveSpec) -> f64 {
    let nu = stability_number(grid, spec, spec.u_plus, spec.u_minus);
    if nu > 1.0 {
        log::warn!(
            "explicit Euler stability number {nu:.3} exceeds 1 (dx = {}, dt = {}, D = {})",
            grid.dx,
            grid.dt,
            spec.viscosity
        );
    }
    nu
}

/// One explicit Euler step from level `n` to `n + 1`:
/// `Q^{n+1} = Q^n + dt b(Q^n) + forcing + eps * noise` on the interior, then
/// boundary cells reset by `bc`. Pass `None` for absent forcing or noise.
#[allow(clippy::too_many_arguments)]
pub fn euler_step(
    state: &[f64],
    spec: &WaveSpec,
    grid: &SpaceTimeGrid,
    bc: &BoundaryPolicy,
    forcing: Option<&[f64]>,
    noise: Option<&[f64]>,
    eps: f64,
    n: usize,
) -> Vec<f64> {
    let mut next = vec![0.0; state.len()];
    let mut scratch = vec![0.0; state.len() - 2];
    euler_step_into(state, spec, grid, bc, forcing, noise, eps, n, &mut scratch, &mut next);
    next
}

/// Allocation-free form of [`euler_step`].
#[allow(clippy::too_many_arguments)]
pub fn euler_step_into(
    state: &[f64],
    spec: &WaveSpec,
    grid: &SpaceTimeGrid,
    bc: &BoundaryPolicy,
    forcing: Option<&[f64]>,
    noise: Option<&[f64]>,
    eps: f64,
    n: usize,
    scratch: &mut [f64],
    next: &mut [f64],
) {
    let m = state.len();
    drift_into(state, spec, grid.dx, scratch);
    next.copy_from_slice(state);
    for j in 0..m - 2 {
        let mut v = state[j + 1] + grid.dt * scratch[j];
        if let Some(f) = forcing {
            v += f[j];
        }
        if let Some(w) = noise {
            v += eps * w[j];
        }
        next[j + 1] = v;
    }
    bc.apply(next, n + 1, grid.steps);
}

/// Noiseless trajectory `Q^0..Q^N` from `initial`.
pub fn deterministic_trajectory(
    initial: &[f64],
    spec: &WaveSpec,
    grid: &SpaceTimeGrid,
    bc: &BoundaryPolicy,
) -> Vec<Vec<f64>> {
    let mut levels = Vec::with_capacity(grid.steps + 1);
    levels.push(initial.to_vec());
    for n in 0..grid.steps {
        let next = euler_step(&levels[n], spec, grid, bc, None, None, 0.0, n);
        levels.push(next);
    }
    levels
}
