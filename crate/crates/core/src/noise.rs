//! Spatial covariance of the forcing increments and its Cholesky factor.
//!
//! Increments live on the interior cells only. A step's increment is
//! `sqrt(dt/dx) * Phi * z` with `z` standard normal, so its covariance is
//! `(dt/dx) C` with `C = Phi Phi^T`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseKind {
    /// Spatially white increments, `C = I`.
    Identity,
    /// `C_ij = sigma^2 exp(-|x_i - x_j| / l_c)` at interior cell centers.
    Exponential { sigma: f64, correlation_length: f64 },
}

#[derive(Debug, Clone)]
pub struct NoiseModel {
    kind: NoiseKind,
    covariance: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl NoiseModel {
    pub fn build(kind: NoiseKind, grid: &SpaceTimeGrid) -> Result<Self> {
        let dim = grid.interior();
        match kind {
            NoiseKind::Identity => Ok(Self {
                kind,
                covariance: DMatrix::identity(dim, dim),
                factor: DMatrix::identity(dim, dim),
            }),
            NoiseKind::Exponential {
                sigma,
                correlation_length,
            } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::InvalidNoise(format!("sigma must be positive, got {sigma}")));
                }
                if !(correlation_length.is_finite() && correlation_length > 0.0) {
                    return Err(Error::InvalidNoise(format!(
                        "l_c must be positive, got {correlation_length}"
                    )));
                }
                let x: Vec<f64> = (1..=dim).map(|i| grid.center(i)).collect();
                let s2 = sigma * sigma;
                let covariance = DMatrix::from_fn(dim, dim, |i, j| {
                    s2 * (-(x[i] - x[j]).abs() / correlation_length).exp()
                });
                let factor = cholesky_with_jitter(&covariance)?;
                Ok(Self {
                    kind,
                    covariance,
                    factor,
                })
            }
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Lower-triangular `Phi` with `Phi Phi^T = C`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    fn is_identity(&self) -> bool {
        matches!(self.kind, NoiseKind::Identity)
    }

    /// `out = Phi v`.
    pub fn apply_factor_into(&self, v: &[f64], out: &mut [f64]) {
        if self.is_identity() {
            out.copy_from_slice(v);
            return;
        }
        let n = self.dim();
        for i in 0..n {
            let mut acc = 0.0;
            for k in 0..=i {
                acc += self.factor[(i, k)] * v[k];
            }
            out[i] = acc;
        }
    }

    pub fn apply_factor(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_factor_into(v, &mut out);
        out
    }

    /// Solves `Phi y = r` by forward substitution, in place.
    pub fn whiten_in_place(&self, r: &mut [f64]) {
        if self.is_identity() {
            return;
        }
        let n = self.dim();
        for i in 0..n {
            let mut acc = r[i];
            for k in 0..i {
                acc -= self.factor[(i, k)] * r[k];
            }
            r[i] = acc / self.factor[(i, i)];
        }
    }

    /// `Phi^{-1} r`.
    pub fn whiten(&self, r: &[f64]) -> Vec<f64> {
        let mut out = r.to_vec();
        self.whiten_in_place(&mut out);
        out
    }

    /// Solves `Phi^T y = h` by back substitution, in place.
    pub fn whiten_transpose_in_place(&self, h: &mut [f64]) {
        if self.is_identity() {
            return;
        }
        let n = self.dim();
        for i in (0..n).rev() {
            let mut acc = h[i];
            for k in i + 1..n {
                acc -= self.factor[(k, i)] * h[k];
            }
            h[i] = acc / self.factor[(i, i)];
        }
    }

    /// One time step's increment `sqrt(dt/dx) Phi z`, writing the standard
    /// normal draw `z` into `white` as well.
    pub fn sample_increments_into<R: Rng + ?Sized>(
        &self,
        dt: f64,
        dx: f64,
        rng: &mut R,
        white: &mut [f64],
        out: &mut [f64],
    ) {
        for z in white.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        self.apply_factor_into(white, out);
        let scale = (dt / dx).sqrt();
        out.iter_mut().for_each(|v| *v *= scale);
    }

    pub fn sample_increments<R: Rng + ?Sized>(&self, dt: f64, dx: f64, rng: &mut R) -> Vec<f64> {
        let mut white = vec![0.0; self.dim()];
        let mut out = vec![0.0; self.dim()];
        self.sample_increments_into(dt, dx, rng, &mut white, &mut out);
        out
    }

    /// Discrete mass `dx * sum_ij C_ij` of the covariance, the quadrature of
    /// the continuum kernel that the increments `(dt/dx) C` represent.
    pub fn total_covariance_mass(&self, dx: f64) -> f64 {
        dx * self.covariance.sum()
    }

    /// `||Phi^T 1||^2`, equal to `sum_ij C_ij`.
    pub fn ones_norm_sq(&self) -> f64 {
        let ones = DVector::from_element(self.dim(), 1.0);
        (self.factor.transpose() * ones).norm_squared()
    }
}

/// Cholesky factor of `c`; on failure retries once with
/// `1e-12 * trace(c) / n` added to the diagonal.
fn cholesky_with_jitter(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = c.clone().cholesky() {
        return Ok(ch.l());
    }
    let n = c.nrows();
    let jitter = 1e-12 * c.trace() / n as f64;
    log::warn!("covariance Cholesky failed, retrying with diagonal jitter {jitter:e}");
    let mut shifted = c.clone();
    for i in 0..n {
        shifted[(i, i)] += jitter;
    }
    shifted
        .cholesky()
        .map(|ch| ch.l())
        .ok_or(Error::NotPositiveDefinite)
}
