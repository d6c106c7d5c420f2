//! Most probable transition paths.

pub mod bfgs;
pub mod line_search;
mod scenario;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::rate::{ForcingSequence, FreeMask, PathMatrix, RateFunctional};

pub use bfgs::{minimize, BfgsOptions, BfgsOutcome, BfgsStatus, HessianMemory};
pub use line_search::WolfeParams;
pub use scenario::{RareEventSpec, Scenario, STRONG_SHOCK_FACTOR};

#[derive(Debug, Clone, Copy)]
pub struct OptimizerOptions {
    /// Pinned case: `||grad||_inf <= tolerance * max(1, I)`.
    pub tolerance: f64,
    /// Ball case: bound on the KKT residual.
    pub kkt_tolerance: f64,
    pub max_iterations: usize,
    /// Largest problem solved with a dense inverse Hessian.
    pub dense_limit: usize,
    pub max_outer_iterations: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            kkt_tolerance: 1e-5,
            max_iterations: 5000,
            dense_limit: 2000,
            max_outer_iterations: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerStatus {
    Converged,
    MaxIterations,
    /// Returned the best point found after the line search gave up.
    LineSearchFailed,
    /// The noiseless trajectory already lies in the target set.
    DeterministicFeasible,
}

impl From<BfgsStatus> for OptimizerStatus {
    fn from(s: BfgsStatus) -> Self {
        match s {
            BfgsStatus::Converged => OptimizerStatus::Converged,
            BfgsStatus::MaxIterations => OptimizerStatus::MaxIterations,
            BfgsStatus::LineSearchFailed => OptimizerStatus::LineSearchFailed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimalPath {
    pub path: PathMatrix,
    pub rate_value: f64,
    /// Free-variable gradient infinity norm (pinned) or KKT residual (ball).
    pub gradient_norm: f64,
    pub iterations: usize,
    pub forcing: ForcingSequence,
    pub status: OptimizerStatus,
    /// Lagrange multiplier of the ball constraint; zero in the pinned case.
    pub multiplier: f64,
}

fn check_dims(spec: &RareEventSpec, model: &NoiseModel, init: &PathMatrix) -> Result<()> {
    let dim = |expected, actual| -> Result<()> {
        if expected != actual {
            return Err(Error::Dimension {
                module: "path_optimizer",
                expected,
                actual,
            });
        }
        Ok(())
    };
    dim(spec.grid.cells, init.cells())?;
    dim(spec.grid.steps + 1, init.levels())?;
    dim(spec.grid.interior(), model.dim())
}

/// Checks that the entries outside `mask` agree with `reference`.
fn check_pinning(init: &PathMatrix, reference: &PathMatrix, mask: &FreeMask) -> Result<()> {
    for (k, (a, b)) in init.as_flat().iter().zip(reference.as_flat()).enumerate() {
        let (n, m) = (k / init.cells(), k % init.cells());
        if !mask.is_free(n, m) && (a - b).abs() > 1e-12 * (1.0 + b.abs()) {
            return Err(Error::Optimizer(format!(
                "initial guess violates pinning at level {n}, cell {m}"
            )));
        }
    }
    Ok(())
}

fn bfgs_options(opts: &OptimizerOptions, n: usize, tolerance: f64) -> BfgsOptions {
    BfgsOptions {
        tolerance,
        max_iterations: opts.max_iterations,
        memory: HessianMemory::for_size(n, opts.dense_limit),
        wolfe: WolfeParams::default(),
    }
}

/// Minimizes the rate over paths with both end slices pinned.
pub fn minimize_pinned(
    spec: &RareEventSpec,
    model: &NoiseModel,
    init: &PathMatrix,
    opts: &OptimizerOptions,
) -> Result<OptimalPath> {
    if spec.delta != 0.0 {
        return Err(Error::Optimizer("minimize_pinned needs delta = 0".into()));
    }
    check_dims(spec, model, init)?;
    let mask = spec.free_mask(false);
    check_pinning(init, &spec.linear_interpolation_path(), &mask)?;
    let rf = RateFunctional::new(&spec.grid, &spec.wave, model);
    let start = rf.rate(init);
    if !start.is_finite() {
        return Err(Error::NonFinite);
    }

    let mut work = init.clone();
    let mut full = vec![0.0; init.as_flat().len()];
    let objective = |x: &[f64], g: &mut [f64]| {
        mask.scatter(x, &mut work);
        let v = rf.rate_and_full_gradient(&work, &mut full);
        for (gi, &k) in g.iter_mut().zip(mask.indices()) {
            *gi = full[k];
        }
        v
    };
    let out = minimize(objective, mask.gather(init), &bfgs_options(opts, mask.count(), opts.tolerance));
    if !out.value.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut path = init.clone();
    mask.scatter(&out.x, &mut path);
    let rate_value = rf.rate(&path);
    log::debug!(
        "pinned: I = {rate_value:e}, |g| = {:e}, {} iterations, {:?}",
        out.gradient_inf,
        out.iterations,
        out.status
    );
    Ok(OptimalPath {
        forcing: rf.forcing_from_path(&path),
        path,
        rate_value,
        gradient_norm: out.gradient_inf,
        iterations: out.iterations,
        status: out.status.into(),
        multiplier: 0.0,
    })
}

/// Minimizes the rate subject to `dx sum_m (q^N_m - target_m)^2 <= delta^2`
/// with an augmented Lagrangian around BFGS.
pub fn minimize_ball(
    spec: &RareEventSpec,
    model: &NoiseModel,
    init: &PathMatrix,
    opts: &OptimizerOptions,
) -> Result<OptimalPath> {
    if !(spec.delta > 0.0) {
        return Err(Error::Optimizer("minimize_ball needs delta > 0".into()));
    }
    check_dims(spec, model, init)?;
    let grid = &spec.grid;
    let steps = grid.steps;
    let cells = grid.cells;
    let rf = RateFunctional::new(grid, &spec.wave, model);
    let delta_sq = spec.delta * spec.delta;

    let noiseless = crate::flux::deterministic_trajectory(&spec.initial, &spec.wave, grid, &spec.boundary);
    if spec.terminal_distance_sq(&noiseless[steps]) <= delta_sq {
        let path = PathMatrix::from_slices(&noiseless);
        return Ok(OptimalPath {
            rate_value: rf.rate(&path),
            forcing: rf.forcing_from_path(&path),
            path,
            gradient_norm: 0.0,
            iterations: 0,
            status: OptimizerStatus::DeterministicFeasible,
            multiplier: 0.0,
        });
    }

    let mask = spec.free_mask(true);
    let mut reference = spec.linear_interpolation_path();
    spec.boundary.apply(reference.slice_mut(steps), steps, steps);
    check_pinning(init, &reference, &mask)?;
    if !rf.rate(init).is_finite() {
        return Err(Error::NonFinite);
    }

    let target = &spec.target;
    let dx = grid.dx;
    let terminal = steps * cells;
    let constraint = |path: &PathMatrix| spec.terminal_distance_sq(path.slice(steps)) - delta_sq;

    let mut x = mask.gather(init);
    let mut lambda = 0.0f64;
    let mut mu = 10.0 / delta_sq;
    let mut work = init.clone();
    let mut full = vec![0.0; init.as_flat().len()];
    let mut iterations = 0;
    let mut last_violation = f64::INFINITY;
    let mut status = OptimizerStatus::MaxIterations;
    let mut kkt = f64::INFINITY;

    for outer in 0..opts.max_outer_iterations {
        let objective = |v: &[f64], g: &mut [f64]| {
            mask.scatter(v, &mut work);
            let rate = rf.rate_and_full_gradient(&work, &mut full);
            let c = constraint(&work);
            let shifted = (lambda + mu * c).max(0.0);
            // d/dq (dx sum (q - t)^2) = 2 dx (q - t) on the terminal slice
            for m in 0..cells {
                let k = terminal + m;
                full[k] += shifted * 2.0 * dx * (work.as_flat()[k] - target[m]);
            }
            for (gi, &k) in g.iter_mut().zip(mask.indices()) {
                *gi = full[k];
            }
            rate + (shifted * shifted - lambda * lambda) / (2.0 * mu)
        };
        let inner_tol = (0.1 * opts.kkt_tolerance).min(opts.tolerance);
        let out = minimize(objective, x, &bfgs_options(opts, mask.count(), inner_tol));
        if !out.value.is_finite() {
            return Err(Error::NonFinite);
        }
        iterations += out.iterations;
        x = out.x;
        mask.scatter(&x, &mut work);
        let c = constraint(&work);
        let rate = rf.rate(&work);
        lambda = (lambda + mu * c).max(0.0);
        // inner gradient is grad I + lambda_new grad g
        let stationarity = out.gradient_inf / rate.abs().max(1.0);
        let complementarity = (-c / delta_sq).min(lambda).abs();
        kkt = stationarity.max(complementarity);
        log::debug!(
            "ball outer {outer}: I = {rate:e}, g = {c:e}, lambda = {lambda:e}, mu = {mu:e}, kkt = {kkt:e}"
        );
        if stationarity <= opts.kkt_tolerance && complementarity <= 0.1 * opts.kkt_tolerance.min(1e-6) {
            status = OptimizerStatus::Converged;
            break;
        }
        let violation = c.abs() / delta_sq;
        if violation > 0.25 * last_violation {
            mu *= 10.0;
        }
        last_violation = violation;
    }

    let path = work;
    Ok(OptimalPath {
        rate_value: rf.rate(&path),
        forcing: rf.forcing_from_path(&path),
        path,
        gradient_norm: kkt,
        iterations,
        status,
        multiplier: lambda,
    })
}

/// Fraction of random pairs `(p, q)` near `center` with
/// `I((p + q)/2) <= (I(p) + I(q))/2`. Perturbations are Gaussian on the free
/// entries with standard deviation `1e-2` times their RMS value.
pub fn midpoint_convexity_test<R: Rng + ?Sized>(
    rate: impl Fn(&PathMatrix) -> f64,
    center: &PathMatrix,
    mask: &FreeMask,
    trials: usize,
    rng: &mut R,
) -> f64 {
    if trials == 0 || mask.count() == 0 {
        return 1.0;
    }
    let base = mask.gather(center);
    let rms = (base.iter().map(|v| v * v).sum::<f64>() / base.len() as f64).sqrt();
    let scale = 1e-2 * rms.max(f64::MIN_POSITIVE);
    let mut p = center.clone();
    let mut q = center.clone();
    let mut mid = center.clone();
    let mut xp = vec![0.0; base.len()];
    let mut xq = vec![0.0; base.len()];
    let mut passed = 0usize;
    for _ in 0..trials {
        for i in 0..base.len() {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            xp[i] = base[i] + scale * a;
            xq[i] = base[i] + scale * b;
        }
        mask.scatter(&xp, &mut p);
        mask.scatter(&xq, &mut q);
        let xm: Vec<f64> = xp.iter().zip(&xq).map(|(a, b)| 0.5 * (a + b)).collect();
        mask.scatter(&xm, &mut mid);
        let (ip, iq, im) = (rate(&p), rate(&q), rate(&mid));
        let chord = 0.5 * (ip + iq);
        if im <= chord + 1e-12 * chord.abs().max(1.0) {
            passed += 1;
        }
    }
    passed as f64 / trials as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{SpaceTimeGrid, WaveSpec};
    use crate::noise::NoiseKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(x0: f64, delta: f64) -> (RareEventSpec, NoiseModel) {
        let grid = SpaceTimeGrid::from_spacing(-10.0, 15.0, 0.5, 0.5, 0.05).unwrap();
        let wave = WaveSpec::new(2.0, 1.0, 1.0, 1.5).unwrap();
        let spec = RareEventSpec::new(Scenario::Displacement { x0 }, grid, wave, delta, 1).unwrap();
        let model = NoiseModel::build(NoiseKind::Identity, &spec.grid).unwrap();
        (spec, model)
    }

    #[test]
    fn pinned_improves_on_test_paths() {
        let (spec, model) = small(2.0, 0.0);
        let rf = RateFunctional::new(&spec.grid, &spec.wave, &model);
        let w = spec.linear_interpolation_path();
        let v = spec.linear_shift_path().unwrap();
        let out = minimize_pinned(&spec, &model, &w, &OptimizerOptions::default()).unwrap();
        assert_eq!(out.status, OptimizerStatus::Converged);
        assert!(out.rate_value <= rf.rate(&v).min(rf.rate(&w)));
        assert!(out.rate_value >= rf.discrete_lower_bound(&out.path));
        assert_eq!(out.path.slice(spec.grid.steps), spec.target.as_slice());
    }

    #[test]
    fn zero_displacement_stays_near_the_profile() {
        let (spec, model) = small(0.0, 0.0);
        let rf = RateFunctional::new(&spec.grid, &spec.wave, &model);
        let still = spec.linear_interpolation_path();
        let out = minimize_pinned(&spec, &model, &still, &OptimizerOptions::default()).unwrap();
        // the sampled profile is only stationary up to truncation error
        assert!(out.rate_value <= rf.rate(&still));
        assert!(out.rate_value < 1e-4, "{}", out.rate_value);
    }

    #[test]
    fn random_guess_reaches_the_same_optimum() {
        let (spec, model) = small(2.0, 0.0);
        let opts = OptimizerOptions::default();
        let a = minimize_pinned(&spec, &model, &spec.linear_interpolation_path(), &opts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = minimize_pinned(&spec, &model, &spec.random_path(0.1, &mut rng), &opts).unwrap();
        assert!((a.rate_value - b.rate_value).abs() <= 1e-4 * a.rate_value, "{} vs {}", a.rate_value, b.rate_value);
    }

    #[test]
    fn pinned_rejects_bad_guess() {
        let (spec, model) = small(2.0, 0.0);
        let mut w = spec.linear_interpolation_path();
        w.set(spec.grid.steps, 5, 9.0);
        assert!(minimize_pinned(&spec, &model, &w, &OptimizerOptions::default()).is_err());
    }

    #[test]
    fn ball_constraint_is_active() {
        let (spec, model) = small(2.0, 0.3);
        let (pinned_spec, _) = small(2.0, 0.0);
        let init = spec.linear_interpolation_path();
        let mut init_ball = init.clone();
        spec.boundary
            .apply(init_ball.slice_mut(spec.grid.steps), spec.grid.steps, spec.grid.steps);
        let ball = minimize_ball(&spec, &model, &init_ball, &OptimizerOptions::default()).unwrap();
        let pinned = minimize_pinned(&pinned_spec, &model, &init, &OptimizerOptions::default()).unwrap();
        assert_eq!(ball.status, OptimizerStatus::Converged);
        let d2 = spec.terminal_distance_sq(ball.path.slice(spec.grid.steps));
        assert!((d2 / 0.09 - 1.0).abs() < 1e-6, "{d2}");
        assert!(ball.rate_value < pinned.rate_value);
        assert!(ball.multiplier > 0.0);
    }

    #[test]
    fn ball_shortcut_when_noiseless_path_is_feasible() {
        let (spec, model) = small(0.1, 5.0);
        let init = spec.linear_interpolation_path();
        let out = minimize_ball(&spec, &model, &init, &OptimizerOptions::default()).unwrap();
        assert_eq!(out.status, OptimizerStatus::DeterministicFeasible);
        assert!(out.rate_value <= 1e-10);
    }

    #[test]
    fn convexity_vacuous_and_quadratic() {
        let (spec, model) = small(2.0, 0.0);
        let rf = RateFunctional::new(&spec.grid, &spec.wave, &model);
        let center = spec.linear_shift_path().unwrap();
        let mask = spec.free_mask(false);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(midpoint_convexity_test(|p| rf.rate(p), &center, &mask, 0, &mut rng), 1.0);
        let frozen: Vec<Vec<f64>> = (0..spec.grid.steps)
            .map(|n| crate::flux::drift(center.slice(n), &spec.wave, spec.grid.dx))
            .collect();
        let f = midpoint_convexity_test(|p| rf.rate_with_frozen_drift(p, &frozen), &center, &mask, 200, &mut rng);
        assert_eq!(f, 1.0);
    }
}
