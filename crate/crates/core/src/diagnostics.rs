//! Shock center tracking, the Gaussian center law, and scaling fits.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::grid::{SpaceTimeGrid, WaveSpec};
use crate::noise::NoiseModel;
use crate::rate::PathMatrix;

/// Displacement of `state` relative to `reference`:
/// `dx sum_m (Q_m - reference_m) / (u_minus - u_plus)`.
///
/// A decreasing profile translated right by `x0` has center `x0`.
pub fn wave_center(state: &[f64], reference: &[f64], spec: &WaveSpec, dx: f64) -> Result<f64> {
    if state.len() != reference.len() {
        return Err(Error::Dimension {
            module: "diagnostics",
            expected: reference.len(),
            actual: state.len(),
        });
    }
    let jump = spec.u_minus - spec.u_plus;
    if jump == 0.0 {
        return Err(Error::DegenerateJump);
    }
    let mass: f64 = state.iter().zip(reference).map(|(q, r)| q - r).sum();
    Ok(dx * mass / jump)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSeries {
    pub times: Vec<f64>,
    pub centers: Vec<f64>,
    pub reference: WaveSpec,
}

/// Center of every level of `path` relative to `reference`.
pub fn center_series(
    path: &PathMatrix,
    reference: &[f64],
    spec: &WaveSpec,
    grid: &SpaceTimeGrid,
) -> Result<CenterSeries> {
    let centers = (0..path.levels())
        .map(|n| wave_center(path.slice(n), reference, spec, grid.dx))
        .collect::<Result<Vec<_>>>()?;
    Ok(CenterSeries {
        times: (0..path.levels()).map(|n| grid.time(n)).collect(),
        centers,
        reference: *spec,
    })
}

/// Mean and variance of the center at time `t`: the shock speed in the frame
/// times `t`, and `eps^2 t M / (u_minus - u_plus)^2` with `M` the covariance mass.
pub fn analytic_center_law(eps: f64, t: f64, model: &NoiseModel, dx: f64, spec: &WaveSpec) -> (f64, f64) {
    let mean = spec.speed() * t;
    let jump = spec.jump();
    let variance = eps * eps * t * model.total_covariance_mass(dx) / (jump * jump);
    (mean, variance)
}

/// `P(Z >= z)` for standard normal `Z`, in log form.
pub fn log_normal_tail(z: f64) -> f64 {
    if z < 25.0 {
        return (0.5 * erfc(z / std::f64::consts::SQRT_2)).ln();
    }
    // Mills ratio series
    let z2 = z * z;
    let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
    -0.5 * z2 - (z * (2.0 * std::f64::consts::PI).sqrt()).ln() + series.ln()
}

/// Natural log of [`analytic_exit_probability`].
pub fn log_exit_probability(
    x0: f64,
    t: f64,
    eps: f64,
    model: &NoiseModel,
    dx: f64,
    spec: &WaveSpec,
) -> Result<f64> {
    if !(t > 0.0 && eps > 0.0) {
        return Err(Error::Diagnostics(format!(
            "exit probability needs T > 0 and eps > 0, got T = {t}, eps = {eps}"
        )));
    }
    let (_, variance) = analytic_center_law(eps, t, model, dx, spec);
    Ok(log_normal_tail(x0 / variance.sqrt()))
}

/// Probability that the center moves at least `x0` beyond its mean by time `t`.
pub fn analytic_exit_probability(
    x0: f64,
    t: f64,
    eps: f64,
    model: &NoiseModel,
    dx: f64,
    spec: &WaveSpec,
) -> Result<f64> {
    if x0 == 0.0 && t > 0.0 && eps > 0.0 {
        return Ok(0.5);
    }
    log_exit_probability(x0, t, eps, model, dx, spec).map(f64::exp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitForm {
    /// `y = a + b x^2`
    Quadratic,
    /// `y = a + b x`
    Linear,
    /// `y = a + b / x`
    Reciprocal,
}

impl FitForm {
    fn regressor(self, x: f64) -> f64 {
        match self {
            FitForm::Quadratic => x * x,
            FitForm::Linear => x,
            FitForm::Reciprocal => 1.0 / x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub intercept: f64,
    pub coefficient: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `y = a + b g(x)` for the chosen `g`.
pub fn fit_scaling(xs: &[f64], ys: &[f64], form: FitForm) -> Result<ScalingFit> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension {
            module: "diagnostics",
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::Diagnostics(format!("fit needs at least 3 points, got {}", xs.len())));
    }
    let g: Vec<f64> = xs.iter().map(|&x| form.regressor(x)).collect();
    if g.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Diagnostics("non-finite fit data".into()));
    }
    let n = g.len() as f64;
    let gm = g.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sgg: f64 = g.iter().map(|v| (v - gm) * (v - gm)).sum();
    let sgy: f64 = g.iter().zip(ys).map(|(a, b)| (a - gm) * (b - ym)).sum();
    let syy: f64 = ys.iter().map(|v| (v - ym) * (v - ym)).sum();
    if !(sgg > 1e-14 * g.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE)) {
        return Err(Error::Diagnostics("degenerate design matrix".into()));
    }
    let coefficient = sgy / sgg;
    let intercept = ym - coefficient * gm;
    let sse: f64 = g
        .iter()
        .zip(ys)
        .map(|(a, b)| {
            let e = b - intercept - coefficient * a;
            e * e
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(ScalingFit {
        intercept,
        coefficient,
        r_squared,
    })
}
