#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shockld::flux::godunov_flux;
use shockld::grid::{sample_profile, SpaceTimeGrid, WaveSpec};
use shockld::noise::{NoiseKind, NoiseModel};
use shockld::rate::{PathMatrix, RateFunctional};

pub fn table_grid() -> SpaceTimeGrid {
    SpaceTimeGrid::from_spacing(-15.0, 20.0, 0.5, 1.0, 0.05).unwrap()
}

pub fn table_wave() -> WaveSpec {
    WaveSpec::new(2.0, 1.0, 1.0, 1.5).unwrap()
}

pub fn table_model(grid: &SpaceTimeGrid) -> NoiseModel {
    NoiseModel::build(
        NoiseKind::Exponential {
            sigma: 1.0,
            correlation_length: 5.0,
        },
        grid,
    )
    .unwrap()
}

fn brute_force_flux(a: f64, b: f64, gamma: f64, points: usize) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let values = (0..points).map(|i| {
        let q = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        0.5 * (q - gamma) * (q - gamma)
    });
    if a <= b {
        values.fold(f64::INFINITY, f64::min)
    } else {
        values.fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Largest deviation of the Godunov flux from a 10^4-point search over
/// 10^3 random triples.
pub fn godunov_brute_force_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a = rng.random_range(-3.0..3.0);
        let b = rng.random_range(-3.0..3.0);
        let gamma = rng.random_range(-2.0..2.0);
        let err = (godunov_flux(a, b, gamma) - brute_force_flux(a, b, gamma, 10_000)).abs();
        worst = worst.max(err);
    }
    worst
}

fn smooth_path(grid: &SpaceTimeGrid, wave: &WaveSpec, rng: &mut ChaCha8Rng) -> PathMatrix {
    let base = sample_profile(wave, grid, 0.0);
    let amp: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.2..0.2));
    let shift = rng.random_range(-2.0..2.0);
    let width = grid.right - grid.left;
    let slices: Vec<Vec<f64>> = (0..=grid.steps)
        .map(|n| {
            let s = n as f64 / grid.steps as f64;
            let moved = sample_profile(wave, grid, shift * s);
            (0..grid.cells)
                .map(|m| {
                    let x = (grid.center(m) - grid.left) / width;
                    let bump: f64 = amp
                        .iter()
                        .enumerate()
                        .map(|(k, a)| a * (std::f64::consts::PI * (k + 1) as f64 * x).sin())
                        .sum();
                    (1.0 - s) * base[m] + s * moved[m] + s * (1.0 - s) * bump
                })
                .collect()
        })
        .collect();
    PathMatrix::from_slices(&slices)
}

/// Worst relative mismatch between the adjoint gradient and central
/// differences on 10 smooth random paths: 40 single entries (relative to the
/// gradient's sup norm) and one random direction per path.
pub fn gradient_fd_error(seed: u64) -> f64 {
    let grid = table_grid();
    // states above the sonic point keep the Godunov flux smooth
    let wave = WaveSpec::new(2.0, 1.0, 1.0, 0.0).unwrap();
    let model = table_model(&grid);
    let rf = RateFunctional::new(&grid, &wave, &model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let path = smooth_path(&grid, &wave, &mut rng);
        let mut grad = vec![0.0; path.as_flat().len()];
        rf.rate_and_full_gradient(&path, &mut grad);
        let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        for _ in 0..40 {
            let n = rng.random_range(0..=grid.steps);
            let m = rng.random_range(0..grid.cells);
            let mut p = path.clone();
            p.set(n, m, path.get(n, m) + h);
            let up = rf.rate(&p);
            p.set(n, m, path.get(n, m) - h);
            let down = rf.rate(&p);
            let fd = (up - down) / (2.0 * h);
            let g = grad[n * grid.cells + m];
            worst = worst.max((fd - g).abs() / g.abs().max(scale));
        }
        let dir: Vec<f64> = (0..grad.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let along = |s: f64| {
            let data = path.as_flat().iter().zip(&dir).map(|(q, d)| q + s * d).collect();
            rf.rate(&PathMatrix::from_flat(path.levels(), path.cells(), data))
        };
        let fd = (along(h) - along(-h)) / (2.0 * h);
        let g: f64 = grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
        worst = worst.max((fd - g).abs() / g.abs());
    }
    worst
}

/// Relative Frobenius error of `Phi Phi^T` against `C`.
pub fn factor_error() -> f64 {
    let grid = table_grid();
    let model = table_model(&grid);
    let phi = model.factor();
    let c = model.covariance();
    (phi * phi.transpose() - c).norm() / c.norm()
}

/// Relative Frobenius error of the empirical increment covariance over
/// `draws` samples against `(dt/dx) C`.
pub fn sampler_covariance_error(draws: usize, seed: u64) -> f64 {
    let grid = table_grid();
    let model = table_model(&grid);
    let dim = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = DVector::<f64>::zeros(dim);
    let mut outer = DMatrix::<f64>::zeros(dim, dim);
    for _ in 0..draws {
        let v = DVector::from_vec(model.sample_increments(grid.dt, grid.dx, &mut rng));
        sum += &v;
        outer.ger(1.0, &v, &v, 1.0);
    }
    let k = draws as f64;
    let mean = sum / k;
    let empirical = outer / k - &mean * mean.transpose();
    let expected = model.covariance() * (grid.dt / grid.dx);
    (empirical - &expected).norm() / expected.norm()
}
