//! Space-time grids, the moving-frame Burgers flux, and viscous shock profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking that a spacing divides an interval.
const DIVISIBILITY_TOL: f64 = 1e-9;

/// Uniform mesh of `cells` finite volumes on `[left, right]` and `steps`
/// explicit time steps on `[0, duration]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub left: f64,
    pub right: f64,
    pub cells: usize,
    pub dx: f64,
    pub duration: f64,
    pub steps: usize,
    pub dt: f64,
}

impl SpaceTimeGrid {
    pub fn new(left: f64, right: f64, cells: usize, duration: f64, steps: usize) -> Result<Self> {
        if !(left.is_finite() && right.is_finite() && right > left) {
            return Err(Error::InvalidGrid(format!(
                "need finite left < right, got [{left}, {right}]"
            )));
        }
        if cells < 4 {
            return Err(Error::InvalidGrid(format!("need at least 4 cells, got {cells}")));
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidGrid(format!("duration must be positive, got {duration}")));
        }
        if steps < 1 {
            return Err(Error::InvalidGrid("need at least one time step".into()));
        }
        Ok(Self {
            left,
            right,
            cells,
            dx: (right - left) / cells as f64,
            duration,
            steps,
            dt: duration / steps as f64,
        })
    }

    /// Builds a grid from spacings, requiring `dx | (right - left)` and
    /// `dt | duration` to a relative tolerance of 1e-9.
    pub fn from_spacing(left: f64, right: f64, dx: f64, duration: f64, dt: f64) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::InvalidGrid(format!("dx must be positive, got {dx}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        let cells = divide_exactly(right - left, dx)
            .ok_or_else(|| Error::InvalidGrid("dx does not divide domain".into()))?;
        let steps = divide_exactly(duration, dt)
            .ok_or_else(|| Error::InvalidGrid("dt does not divide duration".into()))?;
        Self::new(left, right, cells, duration, steps)
    }

    /// Center of the zero-based cell `i`, i.e. `x_{i+1/2}` in one-based notation.
    pub fn center(&self, i: usize) -> f64 {
        self.left + (i as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }

    /// Number of interior cells carrying noise and residuals.
    pub fn interior(&self) -> usize {
        self.cells - 2
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Same spatial mesh with a different time horizon at the same `dt`.
    pub fn with_duration(&self, duration: f64) -> Result<Self> {
        Self::from_spacing(self.left, self.right, self.dx, duration, self.dt)
    }
}

fn divide_exactly(length: f64, spacing: f64) -> Option<usize> {
    if !(length.is_finite() && length > 0.0) {
        return None;
    }
    let ratio = length / spacing;
    let count = ratio.round();
    if count < 1.0 || ((ratio - count) / count).abs() > DIVISIBILITY_TOL {
        return None;
    }
    Some(count as usize)
}

/// Flux families with a closed-form viscous profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FluxKind {
    /// `F(u) = (u - gamma)^2 / 2`; `gamma = 0` is the lab-frame Burgers flux.
    BurgersMoving,
}

/// A viscous shock connecting `u_minus` (left) to `u_plus` (right) for the
/// Burgers flux observed in a frame moving with speed `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveSpec {
    pub u_minus: f64,
    pub u_plus: f64,
    pub viscosity: f64,
    pub gamma: f64,
    pub flux_kind: FluxKind,
}

impl WaveSpec {
    pub fn new(u_minus: f64, u_plus: f64, viscosity: f64, gamma: f64) -> Result<Self> {
        if !(u_minus.is_finite() && u_plus.is_finite() && gamma.is_finite()) {
            return Err(Error::InvalidWave("states and gamma must be finite".into()));
        }
        if u_minus <= u_plus {
            return Err(Error::InvalidWave(format!(
                "need u_minus > u_plus for an admissible shock, got {u_minus} <= {u_plus}"
            )));
        }
        if !(viscosity.is_finite() && viscosity > 0.0) {
            return Err(Error::InvalidWave(format!("viscosity must be positive, got {viscosity}")));
        }
        Ok(Self {
            u_minus,
            u_plus,
            viscosity,
            gamma,
            flux_kind: FluxKind::BurgersMoving,
        })
    }

    #[inline]
    pub fn flux(&self, u: f64) -> f64 {
        burgers_flux(u, self.gamma)
    }

    /// Jump `u_minus - u_plus`, always positive.
    pub fn jump(&self) -> f64 {
        self.u_minus - self.u_plus
    }

    /// Shock speed in this frame.
    pub fn speed(&self) -> f64 {
        // u_minus > u_plus is a constructor invariant
        rankine_hugoniot_speed(self.u_minus, self.u_plus, |u| self.flux(u))
            .expect("WaveSpec states are distinct")
    }

    /// Same flux and frame with different end states.
    pub fn with_states(&self, u_minus: f64, u_plus: f64) -> Result<Self> {
        Self::new(u_minus, u_plus, self.viscosity, self.gamma)
    }

    /// Width `4D / (u_minus - u_plus)` of the tanh transition layer.
    pub fn width(&self) -> f64 {
        4.0 * self.viscosity / self.jump()
    }
}

#[inline]
pub fn burgers_flux(u: f64, gamma: f64) -> f64 {
    0.5 * (u - gamma) * (u - gamma)
}

/// Speed `(F(u+) - F(u-)) / (u+ - u-)` of a jump between two states.
pub fn rankine_hugoniot_speed(u_minus: f64, u_plus: f64, flux: impl Fn(f64) -> f64) -> Result<f64> {
    if u_minus == u_plus {
        return Err(Error::DegenerateJump);
    }
    Ok((flux(u_plus) - flux(u_minus)) / (u_plus - u_minus))
}

/// Viscous Burgers profile centered at `x = 0`:
/// `U(x) = (u- + u+)/2 - (u- - u+)/2 * tanh((u- - u+) x / (4D))`.
pub fn profile(spec: &WaveSpec, x: f64) -> f64 {
    let mid = 0.5 * (spec.u_minus + spec.u_plus);
    let half = 0.5 * spec.jump();
    mid - half * (spec.jump() * x / (4.0 * spec.viscosity)).tanh()
}

/// Derivative of [`profile`] in `x`.
pub fn profile_slope(spec: &WaveSpec, x: f64) -> f64 {
    let half = 0.5 * spec.jump();
    let k = spec.jump() / (4.0 * spec.viscosity);
    let t = (k * x).tanh();
    -half * k * (1.0 - t * t)
}

/// Point samples of the profile translated by `shift` at every cell center.
pub fn sample_profile(spec: &WaveSpec, grid: &SpaceTimeGrid, shift: f64) -> Vec<f64> {
    (0..grid.cells)
        .map(|i| profile(spec, grid.center(i) - shift))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn table_wave() -> WaveSpec {
        WaveSpec::new(2.0, 1.0, 1.0, 1.5).unwrap()
    }

    #[test]
    fn rh_speed_examples() {
        let lab = |u: f64| 0.5 * u * u;
        assert_abs_diff_eq!(rankine_hugoniot_speed(2.0, 1.0, lab).unwrap(), 1.5);
        assert_abs_diff_eq!(rankine_hugoniot_speed(1.0, -1.0, lab).unwrap(), 0.0);
        let moving = |u: f64| burgers_flux(u, 1.5);
        assert_abs_diff_eq!(rankine_hugoniot_speed(2.0, 1.0, moving).unwrap(), 0.0);
        assert!(matches!(
            rankine_hugoniot_speed(1.0, 1.0, lab),
            Err(Error::DegenerateJump)
        ));
    }

    #[test]
    fn profile_center_and_tails() {
        let w = WaveSpec::new(2.0, 1.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(profile(&w, 0.0), 1.5);
        assert_abs_diff_eq!(profile(&w, -1e3), 2.0);
        assert_abs_diff_eq!(profile(&w, 1e3), 1.0);
    }

    #[test]
    fn profile_solves_travelling_wave_ode_in_lab_frame() {
        let w = WaveSpec::new(2.0, 1.0, 1.0, 0.0).unwrap();
        let s = w.speed();
        assert_abs_diff_eq!(s, 1.5, epsilon = 1e-15);
        for &x in &[-3.0, -1.0, 0.0, 1.0, 3.0] {
            let u = profile(&w, x);
            let lhs = w.viscosity * profile_slope(&w, x);
            let rhs = w.flux(u) - w.flux(w.u_minus) - s * (u - w.u_minus);
            assert!((lhs - rhs).abs() < 1e-10, "x={x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn invalid_waves_rejected() {
        assert!(WaveSpec::new(1.0, 2.0, 1.0, 0.0).is_err());
        assert!(WaveSpec::new(2.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn grid_counts_and_centers() {
        let g = SpaceTimeGrid::from_spacing(-15.0, 20.0, 0.5, 1.0, 0.05).unwrap();
        assert_eq!(g.cells, 70);
        assert_eq!(g.steps, 20);
        assert!((g.center(0) - (g.left + g.dx / 2.0)).abs() <= f64::EPSILON * 20.0);
        assert!((g.center(g.cells - 1) - (g.right - g.dx / 2.0)).abs() <= f64::EPSILON * 20.0);
    }

    #[test]
    fn grid_rejects_bad_spacing() {
        let e = SpaceTimeGrid::from_spacing(-15.0, 20.0, 0.3, 1.0, 0.05).unwrap_err();
        assert!(e.to_string().contains("dx does not divide domain"));
        assert!(SpaceTimeGrid::new(0.0, 1.0, 3, 1.0, 1).is_err());
        assert!(SpaceTimeGrid::new(0.0, 1.0, 4, 1.0, 0).is_err());
    }

    #[test]
    fn sampled_profile_near_grid_center() {
        let w = table_wave();
        let g = SpaceTimeGrid::from_spacing(-15.0, 20.0, 0.5, 1.0, 0.05).unwrap();
        let q = sample_profile(&w, &g, 0.0);
        let i = (0..g.cells)
            .min_by(|&a, &b| g.center(a).abs().total_cmp(&g.center(b).abs()))
            .unwrap();
        let variation = (profile(&w, g.center(i) - g.dx / 2.0) - profile(&w, g.center(i) + g.dx / 2.0)).abs();
        assert!((q[i] - 1.5).abs() <= variation);
        assert!((q[0] - 2.0).abs() < 1e-3);
        assert!((q[g.cells - 1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn shift_by_one_cell_is_an_index_shift() {
        let w = table_wave();
        let g = SpaceTimeGrid::from_spacing(-15.0, 20.0, 0.5, 1.0, 0.05).unwrap();
        let a = sample_profile(&w, &g, 0.0);
        let b = sample_profile(&w, &g, g.dx);
        for i in 1..g.cells {
            assert_abs_diff_eq!(b[i], a[i - 1], epsilon = 1e-12);
        }
    }
}
