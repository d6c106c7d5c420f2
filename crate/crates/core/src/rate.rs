//! Discrete large-deviation rate function of the Euler scheme.
//!
//! For a path `Q^0..Q^N` the rate is
//! `I(Q) = (dt dx / 2) sum_n || Phi^{-1} r^n ||^2` with the step residual
//! `r^n = (Q^{n+1} - Q^n) / dt - b(Q^n)` on interior cells.

use crate::flux::{drift_into, godunov_flux_with_derivative};
use crate::grid::{SpaceTimeGrid, WaveSpec};
use crate::noise::NoiseModel;

/// Full discrete solution: `levels` time slices of `cells` values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    levels: usize,
    cells: usize,
    data: Vec<f64>,
}

impl PathMatrix {
    pub fn zeros(levels: usize, cells: usize) -> Self {
        Self {
            levels,
            cells,
            data: vec![0.0; levels * cells],
        }
    }

    pub fn from_slices(slices: &[Vec<f64>]) -> Self {
        let levels = slices.len();
        let cells = slices.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(levels * cells);
        for s in slices {
            assert_eq!(s.len(), cells, "ragged path slices");
            data.extend_from_slice(s);
        }
        Self { levels, cells, data }
    }

    pub fn from_flat(levels: usize, cells: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), levels * cells);
        Self { levels, cells, data }
    }

    /// Number of time levels, `N + 1`.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn steps(&self) -> usize {
        self.levels - 1
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn slice(&self, n: usize) -> &[f64] {
        &self.data[n * self.cells..(n + 1) * self.cells]
    }

    pub fn slice_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.cells..(n + 1) * self.cells]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.data[n * self.cells + m]
    }

    pub fn set(&mut self, n: usize, m: usize, v: f64) {
        self.data[n * self.cells + m] = v;
    }

    /// Entrywise `(1 - s) self + s other`.
    pub fn lerp(&self, other: &PathMatrix, s: f64) -> PathMatrix {
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (1.0 - s) * a + s * b)
            .collect();
        PathMatrix {
            levels: self.levels,
            cells: self.cells,
            data,
        }
    }
}

/// Per-step forcing `h^n = Phi^{-1}(Q^{n+1} - Q^n - dt b(Q^n))`, `n = 0..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSequence {
    pub steps: Vec<Vec<f64>>,
}

impl ForcingSequence {
    pub fn zeros(steps: usize, interior: usize) -> Self {
        Self {
            steps: vec![vec![0.0; interior]; steps],
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `Phi h^n` for every step, the additive forcing seen by the Euler scheme.
    pub fn colored(&self, model: &NoiseModel) -> Vec<Vec<f64>> {
        self.steps.iter().map(|h| model.apply_factor(h)).collect()
    }
}

/// Which `(level, cell)` entries of a path are optimization variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreeMask {
    levels: usize,
    cells: usize,
    free: Vec<bool>,
    indices: Vec<usize>,
}

impl FreeMask {
    pub fn new(levels: usize, cells: usize, mut is_free: impl FnMut(usize, usize) -> bool) -> Self {
        let mut free = vec![false; levels * cells];
        let mut indices = Vec::new();
        for n in 0..levels {
            for m in 0..cells {
                if is_free(n, m) {
                    free[n * cells + m] = true;
                    indices.push(n * cells + m);
                }
            }
        }
        Self {
            levels,
            cells,
            free,
            indices,
        }
    }

    pub fn is_free(&self, n: usize, m: usize) -> bool {
        self.free[n * self.cells + m]
    }

    /// Flat path indices of the free entries, in level-major order.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn count(&self) -> usize {
        self.indices.len()
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn gather(&self, path: &PathMatrix) -> Vec<f64> {
        self.indices.iter().map(|&k| path.data[k]).collect()
    }

    pub fn scatter(&self, values: &[f64], path: &mut PathMatrix) {
        for (&k, &v) in self.indices.iter().zip(values) {
            path.data[k] = v;
        }
    }
}

/// Rate function of one discrete problem: grid, flux, and noise covariance.
#[derive(Debug, Clone, Copy)]
pub struct RateFunctional<'a> {
    pub grid: &'a SpaceTimeGrid,
    pub wave: &'a WaveSpec,
    pub model: &'a NoiseModel,
}

impl<'a> RateFunctional<'a> {
    pub fn new(grid: &'a SpaceTimeGrid, wave: &'a WaveSpec, model: &'a NoiseModel) -> Self {
        Self { grid, wave, model }
    }

    fn check(&self, path: &PathMatrix) {
        assert_eq!(path.cells(), self.grid.cells, "path/grid cell mismatch");
        assert_eq!(path.steps(), self.grid.steps, "path/grid step mismatch");
    }

    /// `r^n` on the interior cells.
    pub fn residual(&self, path: &PathMatrix, n: usize) -> Vec<f64> {
        let mut r = vec![0.0; self.grid.interior()];
        self.residual_into(path, n, &mut r);
        r
    }

    fn residual_into(&self, path: &PathMatrix, n: usize, out: &mut [f64]) {
        let now = path.slice(n);
        let next = path.slice(n + 1);
        drift_into(now, self.wave, self.grid.dx, out);
        let inv_dt = 1.0 / self.grid.dt;
        for (j, r) in out.iter_mut().enumerate() {
            *r = (next[j + 1] - now[j + 1]) * inv_dt - *r;
        }
    }

    pub fn rate(&self, path: &PathMatrix) -> f64 {
        self.check(path);
        let mut r = vec![0.0; self.grid.interior()];
        let mut total = 0.0;
        for n in 0..self.grid.steps {
            self.residual_into(path, n, &mut r);
            self.model.whiten_in_place(&mut r);
            total += r.iter().map(|v| v * v).sum::<f64>();
        }
        0.5 * self.grid.dt * self.grid.dx * total
    }

    /// Rate of `path` with the drift replaced by the fixed vectors `drift[n]`,
    /// an exactly quadratic functional of the path.
    pub fn rate_with_frozen_drift(&self, path: &PathMatrix, drift: &[Vec<f64>]) -> f64 {
        self.check(path);
        let inv_dt = 1.0 / self.grid.dt;
        let mut total = 0.0;
        for (n, b) in drift.iter().enumerate().take(self.grid.steps) {
            let now = path.slice(n);
            let next = path.slice(n + 1);
            let mut r: Vec<f64> = (0..self.grid.interior())
                .map(|j| (next[j + 1] - now[j + 1]) * inv_dt - b[j])
                .collect();
            self.model.whiten_in_place(&mut r);
            total += r.iter().map(|v| v * v).sum::<f64>();
        }
        0.5 * self.grid.dt * self.grid.dx * total
    }

    /// Rate and its gradient with respect to every path entry (pinned entries
    /// included; callers restrict to the free mask).
    pub fn rate_and_full_gradient(&self, path: &PathMatrix, grad: &mut [f64]) -> f64 {
        self.check(path);
        let cells = self.grid.cells;
        let interior = self.grid.interior();
        let dt = self.grid.dt;
        let dx = self.grid.dx;
        let gamma = self.wave.gamma;
        let diff = self.wave.viscosity / (dx * dx);
        assert_eq!(grad.len(), path.levels() * cells);
        grad.iter_mut().for_each(|g| *g = 0.0);

        let mut h = vec![0.0; interior];
        // adjoint weights G on all cells, zero on the two boundary cells
        let mut adj = vec![0.0; cells];
        let mut total = 0.0;
        for n in 0..self.grid.steps {
            self.residual_into(path, n, &mut h);
            self.model.whiten_in_place(&mut h);
            total += h.iter().map(|v| v * v).sum::<f64>();
            // dI/dr^n = dt dx C^{-1} r^n = dt dx Phi^{-T} h^n
            self.model.whiten_transpose_in_place(&mut h);
            adj[0] = 0.0;
            adj[cells - 1] = 0.0;
            for j in 0..interior {
                adj[j + 1] = dt * dx * h[j];
            }

            // residual depends on Q^{n+1} through (Q^{n+1} - Q^n) / dt
            let (before, after) = grad.split_at_mut((n + 1) * cells);
            let g_now = &mut before[n * cells..];
            let g_next = &mut after[..cells];
            for i in 1..cells - 1 {
                g_next[i] += adj[i] / dt;
                g_now[i] -= adj[i] / dt;
            }

            // and on Q^n through -b(Q^n)
            let q = path.slice(n);
            for i in 0..cells - 1 {
                // F_{i+1/2} enters b_i with -1/dx and b_{i+1} with +1/dx
                let (_, dl, dr) = godunov_flux_with_derivative(q[i], q[i + 1], gamma);
                let c = (adj[i + 1] - adj[i]) / dx;
                // d(-sum adj_i b_i)/dF = -c
                g_now[i] -= c * dl;
                g_now[i + 1] -= c * dr;
            }
            for i in 0..cells {
                let left = if i > 0 { adj[i - 1] } else { 0.0 };
                let right = if i + 1 < cells { adj[i + 1] } else { 0.0 };
                g_now[i] -= diff * (left - 2.0 * adj[i] + right);
            }
        }
        0.5 * dt * dx * total
    }

    /// Rate and gradient restricted to the free entries of `mask`.
    pub fn rate_gradient(&self, path: &PathMatrix, mask: &FreeMask) -> (f64, Vec<f64>) {
        let mut full = vec![0.0; path.levels() * path.cells()];
        let value = self.rate_and_full_gradient(path, &mut full);
        let grad = mask.indices().iter().map(|&k| full[k]).collect();
        (value, grad)
    }

    /// Forcing `h^n = dt Phi^{-1} r^n` that the Euler scheme needs to follow `path`.
    pub fn forcing_from_path(&self, path: &PathMatrix) -> ForcingSequence {
        self.check(path);
        let steps = (0..self.grid.steps)
            .map(|n| {
                let mut r = self.residual(path, n);
                self.model.whiten_in_place(&mut r);
                r.iter_mut().for_each(|v| *v *= self.grid.dt);
                r
            })
            .collect();
        ForcingSequence { steps }
    }

    /// Cauchy-Schwarz lower bound
    /// `(dt dx / (2 ||Phi^T 1||^2)) (sum_n <r^n, 1>)^2 / N` on the rate.
    pub fn discrete_lower_bound(&self, path: &PathMatrix) -> f64 {
        self.check(path);
        let mut sum = 0.0;
        let mut r = vec![0.0; self.grid.interior()];
        for n in 0..self.grid.steps {
            self.residual_into(path, n, &mut r);
            sum += r.iter().sum::<f64>();
        }
        let steps = self.grid.steps as f64;
        0.5 * self.grid.dt * self.grid.dx * sum * sum / (self.model.ones_norm_sq() * steps)
    }
}
