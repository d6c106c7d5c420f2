//! Rare events: initial and target profiles, pinning, and analytic test paths.

use crate::error::{Error, Result};
use crate::flux::BoundaryPolicy;
use crate::grid::{sample_profile, SpaceTimeGrid, WaveSpec};
use crate::rate::{FreeMask, PathMatrix};

/// Jump ratio between the strong and weak shocks of the
/// weak/strong transition scenarios.
pub const STRONG_SHOCK_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    /// Same profile translated by `x0` at the final time.
    Displacement { x0: f64 },
    /// Final profile is a shock with different far-field states (and speed).
    SpeedChange { target: WaveSpec },
    /// Weak shock grows into a strong one with the same midpoint.
    WeakToStrong,
    /// Strong shock decays into the weak one with the same midpoint.
    StrongToWeak,
}

/// A rare event `Q^0 = U_0`, `Q^N` equal to (or within `delta` of) `U_T`.
#[derive(Debug, Clone)]
pub struct RareEventSpec {
    pub scenario: Scenario,
    pub grid: SpaceTimeGrid,
    /// Wave of the initial profile; its flux and viscosity drive the dynamics.
    pub wave: WaveSpec,
    /// Wave the event was built from.
    pub base_wave: WaveSpec,
    pub initial: Vec<f64>,
    pub target: Vec<f64>,
    /// Radius of the terminal ball in the `sqrt(dx)`-weighted L2 norm; zero pins `Q^N`.
    pub delta: f64,
    pub boundary: BoundaryPolicy,
}

impl RareEventSpec {
    /// Builds the event. `boundary_width` applies to the time-interpolated
    /// policies of the non-displacement scenarios (1 or 2).
    pub fn new(
        scenario: Scenario,
        grid: SpaceTimeGrid,
        wave: WaveSpec,
        delta: f64,
        boundary_width: usize,
    ) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::config("scenario.delta", format!("must be >= 0, got {delta}")));
        }
        if !(1..=2).contains(&boundary_width) {
            return Err(Error::config(
                "scenario.boundary_width",
                format!("must be 1 or 2, got {boundary_width}"),
            ));
        }
        let strong = || {
            let mid = 0.5 * (wave.u_minus + wave.u_plus);
            let half = 0.5 * STRONG_SHOCK_FACTOR * wave.jump();
            wave.with_states(mid + half, mid - half)
        };
        let (initial_wave, target_wave, shift) = match scenario {
            Scenario::Displacement { x0 } => {
                if !x0.is_finite() {
                    return Err(Error::config("scenario.x0", "must be finite"));
                }
                (wave, wave, x0)
            }
            Scenario::SpeedChange { target } => (wave, target, 0.0),
            Scenario::WeakToStrong => (wave, strong()?, 0.0),
            Scenario::StrongToWeak => (strong()?, wave, 0.0),
        };
        let initial = sample_profile(&initial_wave, &grid, 0.0);
        let target = sample_profile(&target_wave, &grid, shift);
        let boundary = match scenario {
            Scenario::Displacement { .. } => BoundaryPolicy::FixedStates {
                left: wave.u_minus,
                right: wave.u_plus,
            },
            _ => BoundaryPolicy::TimeInterpolated {
                initial: initial.clone(),
                terminal: target.clone(),
                width: boundary_width,
            },
        };
        Ok(Self {
            scenario,
            grid,
            wave: initial_wave,
            base_wave: wave,
            initial,
            target,
            delta,
            boundary,
        })
    }

    pub fn displacement(&self) -> Option<f64> {
        match self.scenario {
            Scenario::Displacement { x0 } => Some(x0),
            _ => None,
        }
    }

    /// Same event on a grid with another time horizon.
    pub fn with_grid(&self, grid: SpaceTimeGrid) -> Result<Self> {
        Self::new(self.scenario, grid, self.base_wave, self.delta, self.boundary.width())
    }

    /// Same event with another ball radius.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.scenario, self.grid, self.base_wave, delta, self.boundary.width())
    }

    /// Free variables: interior non-pinned cells on levels `1..N-1`, plus the
    /// terminal level when the terminal slice is not pinned.
    pub fn free_mask(&self, terminal_free: bool) -> FreeMask {
        let steps = self.grid.steps;
        let cells = self.grid.cells;
        FreeMask::new(steps + 1, cells, |n, m| {
            let level_ok = n > 0 && (n < steps || terminal_free);
            level_ok && !self.boundary.is_pinned(m, cells)
        })
    }

    /// Squared weighted distance `dx sum_m (q_m - target_m)^2`.
    pub fn terminal_distance_sq(&self, terminal: &[f64]) -> f64 {
        self.grid.dx
            * terminal
                .iter()
                .zip(&self.target)
                .map(|(q, t)| (q - t) * (q - t))
                .sum::<f64>()
    }

    /// Builds a path from per-level samplings, imposing the boundary policy on
    /// levels `1..N-1`. Level `N` is taken verbatim.
    fn assemble(&self, mut level: impl FnMut(usize) -> Vec<f64>) -> PathMatrix {
        let steps = self.grid.steps;
        let mut path = PathMatrix::zeros(steps + 1, self.grid.cells);
        for n in 0..=steps {
            let mut q = level(n);
            if n > 0 && n < steps {
                self.boundary.apply(&mut q, n, steps);
            }
            path.slice_mut(n).copy_from_slice(&q);
        }
        path
    }

    /// Convex combination `(1 - n/N) U_0 + (n/N) U_T` at level `n`.
    pub fn linear_interpolation_path(&self) -> PathMatrix {
        let steps = self.grid.steps as f64;
        self.assemble(|n| {
            let s = n as f64 / steps;
            self.initial
                .iter()
                .zip(&self.target)
                .map(|(a, b)| (1.0 - s) * a + s * b)
                .collect()
        })
    }

    /// Profile translated by `(n/N) x0` at level `n`; the target itself at `N`.
    pub fn linear_shift_path(&self) -> Result<PathMatrix> {
        let x0 = self.displacement().ok_or_else(|| {
            Error::Optimizer("linear_shift_path needs a displacement scenario".into())
        })?;
        let steps = self.grid.steps;
        Ok(self.assemble(|n| {
            if n == 0 {
                self.initial.clone()
            } else if n == steps {
                self.target.clone()
            } else {
                sample_profile(&self.wave, &self.grid, x0 * n as f64 / steps as f64)
            }
        }))
    }

    /// Interpolation path with seeded Gaussian noise of standard deviation
    /// `scale` added to every free entry.
    pub fn random_path<R: rand::Rng + ?Sized>(&self, scale: f64, rng: &mut R) -> PathMatrix {
        use rand_distr::StandardNormal;
        let mut path = self.linear_interpolation_path();
        let mask = self.free_mask(false);
        for &k in mask.indices() {
            let z: f64 = rng.sample(StandardNormal);
            path.as_flat_mut()[k] += scale * z;
        }
        path
    }
}
