//! Basic and importance-sampling estimators of the terminal-ball event.
//!
//! Sample `k` of a run with root seed `s` draws from the ChaCha8 stream
//! `(s, k)`, so a sample's noise does not depend on `K`, the thread count or
//! the estimator.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::euler_step_into;
use crate::noise::NoiseModel;
use crate::optimize::RareEventSpec;
use crate::rate::ForcingSequence;

/// Half-width multiplier of the reported confidence intervals.
pub const CI_MULTIPLIER: f64 = 2.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub estimator: String,
    pub epsilon: f64,
    pub estimate: f64,
    /// Per-sample standard deviation.
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `std / estimate`; infinite without hits.
    pub relative_error: f64,
    pub samples: usize,
    pub hits: usize,
    pub seed: u64,
    pub flagged_saturated: bool,
}

impl EstimatorReport {
    fn from_samples(estimator: &str, epsilon: f64, seed: u64, values: &[f64], hits: usize) -> Self {
        let k = values.len() as f64;
        let mean = pairwise_sum(values) / k;
        let squares: Vec<f64> = values.iter().map(|v| v * v).collect();
        let var = (pairwise_sum(&squares) / k - mean * mean).max(0.0);
        let std = var.sqrt();
        let half = CI_MULTIPLIER * std / k.sqrt();
        let relative_error = if mean > 0.0 { std / mean } else { f64::INFINITY };
        Self {
            estimator: estimator.to_string(),
            epsilon,
            estimate: mean,
            std,
            ci_low: mean - half,
            ci_high: mean + half,
            relative_error,
            samples: values.len(),
            hits,
            seed,
            flagged_saturated: relative_error >= 0.9 * k.sqrt(),
        }
    }

    pub fn overlaps(&self, other: &EstimatorReport) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// Sum in a fixed binary-tree order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// `dx sum_m (terminal_m - target_m)^2 <= delta^2`.
pub fn event_indicator(terminal: &[f64], target: &[f64], delta: f64, dx: f64) -> bool {
    assert_eq!(terminal.len(), target.len(), "monte_carlo: length mismatch");
    let d2: f64 = terminal
        .iter()
        .zip(target)
        .map(|(q, t)| (q - t) * (q - t))
        .sum();
    dx * d2 <= delta * delta
}

/// `dP/dQ` for noise increments `dW^n` (covariance `(dt/dx) C`) observed
/// under the measure tilted by the forcing `h`.
pub fn likelihood_ratio(
    noise_path: &[Vec<f64>],
    forcing: &ForcingSequence,
    model: &NoiseModel,
    eps: f64,
    dt: f64,
    dx: f64,
) -> f64 {
    assert_eq!(noise_path.len(), forcing.len(), "monte_carlo: step count mismatch");
    let mut total = 0.0;
    for (dw, h) in noise_path.iter().zip(&forcing.steps) {
        let y = model.whiten(dw);
        for (yi, hi) in y.iter().zip(h) {
            let shifted = yi + hi / eps;
            total += shifted * shifted - yi * yi;
        }
    }
    (-(dx / (2.0 * dt)) * total).exp()
}

/// Independent generator of sample `index` under `root`.
pub fn sample_rng(root: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(index);
    rng
}

/// Child seed for the `tag`-th sub-run of a run seeded with `root`.
pub fn derive_seed(root: u64, tag: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root ^ 0x5eed_5eed_5eed_5eed);
    rng.set_stream(tag);
    rng.next_u64()
}

/// Terminal state and log likelihood ratio of one trajectory.
#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub terminal: Vec<f64>,
    pub log_weight: f64,
}

/// Runs trajectory `index` from the initial profile with forcing `Phi h^n`
/// (none when `forcing` is `None`) plus `eps` times sampled noise.
pub fn simulate_sample(
    spec: &RareEventSpec,
    model: &NoiseModel,
    eps: f64,
    forcing: Option<(&ForcingSequence, &[Vec<f64>])>,
    seed: u64,
    index: u64,
) -> SampleOutcome {
    let grid = &spec.grid;
    let dim = grid.interior();
    let mut rng = sample_rng(seed, index);
    let mut state = spec.initial.clone();
    let mut next = vec![0.0; grid.cells];
    let mut scratch = vec![0.0; dim];
    let mut white = vec![0.0; dim];
    let mut noise = vec![0.0; dim];
    // dW = sqrt(dt/dx) Phi z, so Phi^{-1} dW = sqrt(dt/dx) z
    let root = (grid.dt / grid.dx).sqrt();
    let mut log_weight = 0.0;
    for n in 0..grid.steps {
        model.sample_increments_into(grid.dt, grid.dx, &mut rng, &mut white, &mut noise);
        let colored = forcing.map(|(h, c)| {
            let hn = &h.steps[n];
            for (z, hi) in white.iter().zip(hn) {
                let y = root * z;
                let shifted = y + hi / eps;
                log_weight += shifted * shifted - y * y;
            }
            c[n].as_slice()
        });
        euler_step_into(
            &state,
            &spec.wave,
            grid,
            &spec.boundary,
            colored,
            Some(&noise),
            eps,
            n,
            &mut scratch,
            &mut next,
        );
        std::mem::swap(&mut state, &mut next);
    }
    SampleOutcome {
        terminal: state,
        log_weight: -(grid.dx / (2.0 * grid.dt)) * log_weight,
    }
}

fn check_run(spec: &RareEventSpec, model: &NoiseModel, eps: f64, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::config("run.K", "must be >= 1"));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::config("run.eps", format!("must be >= 0, got {eps}")));
    }
    if model.dim() != spec.grid.interior() {
        return Err(Error::Dimension {
            module: "monte_carlo",
            expected: spec.grid.interior(),
            actual: model.dim(),
        });
    }
    Ok(())
}

fn estimate(
    label: &str,
    spec: &RareEventSpec,
    model: &NoiseModel,
    eps: f64,
    k: usize,
    forcing: Option<&ForcingSequence>,
    seed: u64,
) -> EstimatorReport {
    let colored = forcing.map(|h| h.colored(model));
    let tilt = forcing.zip(colored.as_deref());
    let values: Vec<(bool, f64)> = (0..k as u64)
        .into_par_iter()
        .map(|i| {
            let s = simulate_sample(spec, model, eps, tilt, seed, i);
            let hit = event_indicator(&s.terminal, &spec.target, spec.delta, spec.grid.dx);
            (hit, if hit { s.log_weight.exp() } else { 0.0 })
        })
        .collect();
    let hits = values.iter().filter(|v| v.0).count();
    let values: Vec<f64> = values.into_iter().map(|v| v.1).collect();
    EstimatorReport::from_samples(label, eps, seed, &values, hits)
}

/// Hit fraction over `k` unforced trajectories.
pub fn run_basic_mc(
    spec: &RareEventSpec,
    model: &NoiseModel,
    eps: f64,
    k: usize,
    seed: u64,
) -> Result<EstimatorReport> {
    check_run(spec, model, eps, k)?;
    Ok(estimate("mc", spec, model, eps, k, None, seed))
}

/// Weighted hit average over `k` trajectories tilted by `forcing`.
pub fn run_importance_sampling(
    spec: &RareEventSpec,
    model: &NoiseModel,
    eps: f64,
    k: usize,
    forcing: &ForcingSequence,
    seed: u64,
) -> Result<EstimatorReport> {
    run_importance_sampling_labeled("is", spec, model, eps, k, forcing, seed)
}

fn run_importance_sampling_labeled(
    label: &str,
    spec: &RareEventSpec,
    model: &NoiseModel,
    eps: f64,
    k: usize,
    forcing: &ForcingSequence,
    seed: u64,
) -> Result<EstimatorReport> {
    check_run(spec, model, eps, k)?;
    if eps == 0.0 {
        return Err(Error::config("run.eps", "importance sampling needs eps > 0"));
    }
    if forcing.len() != spec.grid.steps || forcing.steps.iter().any(|h| h.len() != model.dim()) {
        return Err(Error::Dimension {
            module: "monte_carlo",
            expected: spec.grid.steps,
            actual: forcing.len(),
        });
    }
    Ok(estimate(label, spec, model, eps, k, Some(forcing), seed))
}

/// An estimator of an epsilon sweep: basic Monte Carlo or importance sampling
/// with a given forcing.
#[derive(Debug, Clone, Copy)]
pub enum SweepEstimator<'a> {
    Basic,
    Tilted { label: &'a str, forcing: &'a ForcingSequence },
}

impl SweepEstimator<'_> {
    pub fn label(&self) -> &str {
        match self {
            SweepEstimator::Basic => "mc",
            SweepEstimator::Tilted { label, .. } => label,
        }
    }
}

/// Every estimator at every `eps`, each with its own seed derived from `seed`.
/// Reports are ordered by `eps`, then estimator.
pub fn epsilon_sweep(
    spec: &RareEventSpec,
    model: &NoiseModel,
    eps_list: &[f64],
    k: usize,
    estimators: &[SweepEstimator<'_>],
    seed: u64,
) -> Result<Vec<EstimatorReport>> {
    if eps_list.is_empty() {
        return Err(Error::config("run.eps", "sweep needs at least one value"));
    }
    let mut out = Vec::with_capacity(eps_list.len() * estimators.len());
    for (i, &eps) in eps_list.iter().enumerate() {
        for (j, est) in estimators.iter().enumerate() {
            let s = derive_seed(seed, (i * estimators.len() + j) as u64);
            let report = match est {
                SweepEstimator::Basic => run_basic_mc(spec, model, eps, k, s)?,
                SweepEstimator::Tilted { label, forcing } => {
                    run_importance_sampling_labeled(label, spec, model, eps, k, forcing, s)?
                }
            };
            out.push(report);
        }
    }
    Ok(out)
}
