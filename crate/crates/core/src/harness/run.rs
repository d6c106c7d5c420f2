//! Subcommand pipelines.

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{EstimatorName, InitialGuess, RunConfig, SUBCOMMANDS};
use super::output::{
    write_json, write_path_csv, write_reports_csv, write_table_csv, Cell, Metadata, PathTable,
};
use crate::diagnostics::{analytic_center_law, analytic_exit_probability, wave_center};
use crate::error::{Error, Result};
use crate::flux::{drift, warn_if_unstable};
use crate::monte_carlo::{derive_seed, epsilon_sweep, simulate_sample, EstimatorReport, SweepEstimator, CI_MULTIPLIER};
use crate::noise::NoiseModel;
use crate::optimize::{
    midpoint_convexity_test, minimize_ball, minimize_pinned, OptimalPath, OptimizerOptions, RareEventSpec,
    Scenario,
};
use crate::rate::{PathMatrix, RateFunctional};

// sub-seed tags; sweep-eps uses small tags for its (eps, estimator) runs
const TAG_RANDOM_INIT: u64 = 1 << 40;
const TAG_CONVEXITY: u64 = 2 << 40;
const TAG_CENTER: u64 = 3 << 40;
const TAG_ESTIMATORS: u64 = 4 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Optimize,
    Mc,
    Is,
    SweepX0,
    SweepT,
    SweepEps,
    Convexity,
    CenterDiagnostics,
}

impl Subcommand {
    pub const ALL: [Subcommand; 8] = [
        Subcommand::Optimize,
        Subcommand::Mc,
        Subcommand::Is,
        Subcommand::SweepX0,
        Subcommand::SweepT,
        Subcommand::SweepEps,
        Subcommand::Convexity,
        Subcommand::CenterDiagnostics,
    ];

    pub fn name(self) -> &'static str {
        SUBCOMMANDS[Self::ALL.iter().position(|&s| s == self).unwrap()]
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown subcommand {s:?}")))
    }
}

/// Files written by a run and one-line summaries for the terminal.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

struct Context<'a> {
    config: &'a RunConfig,
    out: &'a Path,
    seed: u64,
    summary: RunSummary,
}

impl Context<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out.join(name);
        let file = File::create(&path)?;
        self.summary.files.push(path);
        Ok(BufWriter::new(file))
    }
}

/// Runs `cmd` with outputs under `out`; `seed` overrides `run.seed`.
pub fn run(cmd: Subcommand, config: &RunConfig, out: &Path, seed: Option<u64>) -> Result<RunSummary> {
    config.validate()?;
    if let Some(mode) = &config.run.mode {
        if mode != cmd.name() {
            log::warn!("run.mode is {mode:?}; running {cmd} as requested");
        }
    }
    let mut echo = config.clone();
    if let Some(s) = seed {
        echo.run.seed = s;
    }
    fs::create_dir_all(out)?;
    let mut ctx = Context {
        config: &echo,
        out,
        seed: echo.run.seed,
        summary: RunSummary::default(),
    };
    match cmd {
        Subcommand::Optimize => optimize(&mut ctx)?,
        Subcommand::Mc => estimators(&mut ctx, &[EstimatorName::Mc])?,
        Subcommand::Is => {
            let is: Vec<EstimatorName> = echo
                .run
                .estimators
                .iter()
                .copied()
                .filter(|e| *e != EstimatorName::Mc)
                .collect();
            let is = if is.is_empty() { vec![EstimatorName::IsDelta] } else { is };
            estimators(&mut ctx, &is)?
        }
        Subcommand::SweepEps => {
            let list = echo.run.estimators.clone();
            estimators(&mut ctx, &list)?
        }
        Subcommand::SweepX0 => sweep(&mut ctx, SweepAxis::Displacement)?,
        Subcommand::SweepT => sweep(&mut ctx, SweepAxis::Duration)?,
        Subcommand::Convexity => convexity(&mut ctx)?,
        Subcommand::CenterDiagnostics => center_diagnostics(&mut ctx)?,
    }
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        format_version: super::output::FORMAT_VERSION,
        subcommand: cmd.name(),
        seed: ctx.seed,
        config: &echo,
    };
    let w = ctx.create("meta.json")?;
    write_json(w, &meta)?;
    Ok(ctx.summary)
}

/// Warns when the transition layer comes within five widths of a boundary.
pub fn check_domain_margin(spec: &RareEventSpec) -> bool {
    let margin = 5.0 * spec.wave.width();
    let shift = spec.displacement().unwrap_or(0.0);
    let (lo, hi) = (shift.min(0.0), shift.max(0.0));
    let ok = spec.grid.left + margin <= lo && hi + margin <= spec.grid.right;
    if !ok {
        log::warn!(
            "shock within {margin} (five profile widths) of the domain boundary; center diagnostics are truncated"
        );
    }
    ok
}

pub fn build_model(config: &RunConfig, spec: &RareEventSpec) -> Result<NoiseModel> {
    NoiseModel::build(config.noise_kind()?, &spec.grid)
}

/// Initial guess of the requested kind satisfying the pinning of `spec`.
pub fn initial_guess(spec: &RareEventSpec, kind: InitialGuess, seed: u64) -> Result<PathMatrix> {
    let mut path = match kind {
        InitialGuess::Interpolation => spec.linear_interpolation_path(),
        InitialGuess::Shift => spec.linear_shift_path()?,
        InitialGuess::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_RANDOM_INIT));
            spec.random_path(0.1 * spec.wave.jump(), &mut rng)
        }
    };
    if spec.delta > 0.0 {
        let n = spec.grid.steps;
        spec.boundary.apply(path.slice_mut(n), n, n);
    }
    Ok(path)
}

/// Pinned or ball optimum depending on `spec.delta`.
pub fn optimize_event(
    spec: &RareEventSpec,
    model: &NoiseModel,
    init: InitialGuess,
    opts: &OptimizerOptions,
    seed: u64,
) -> Result<OptimalPath> {
    let guess = initial_guess(spec, init, seed)?;
    if spec.delta > 0.0 {
        minimize_ball(spec, model, &guess, opts)
    } else {
        minimize_pinned(spec, model, &guess, opts)
    }
}

fn pinned(spec: &RareEventSpec) -> Result<RareEventSpec> {
    spec.with_delta(0.0)
}

fn path_table(spec: &RareEventSpec, path: &PathMatrix) -> PathTable {
    PathTable {
        centers: spec.grid.centers(),
        times: (0..=spec.grid.steps).map(|n| spec.grid.time(n)).collect(),
        path: path.clone(),
    }
}

fn status_text(p: &OptimalPath) -> String {
    format!("{:?}", p.status)
}

fn optimize(ctx: &mut Context<'_>) -> Result<()> {
    let config = ctx.config;
    let spec = config.rare_event()?;
    warn_if_unstable(&spec.grid, &spec.wave);
    check_domain_margin(&spec);
    let model = build_model(config, &spec)?;
    let opt = optimize_event(&spec, &model, config.run.init, &config.optimizer_options(), ctx.seed)?;
    let rf = RateFunctional::new(&spec.grid, &spec.wave, &model);
    let interp = rf.rate(&spec.linear_interpolation_path());
    let shift = spec
        .linear_shift_path()
        .map(|v| Cell::Num(rf.rate(&v)))
        .unwrap_or(Cell::Text(String::new()));
    write_path_csv(ctx.create("path.csv")?, &path_table(&spec, &opt.path))?;
    let row = vec![
        Cell::Num(spec.delta),
        Cell::Num(opt.rate_value),
        Cell::Num(opt.gradient_norm),
        Cell::Int(opt.iterations as u64),
        Cell::Text(status_text(&opt)),
        Cell::Num(opt.multiplier),
        Cell::Num(rf.discrete_lower_bound(&opt.path)),
        shift,
        Cell::Num(interp),
    ];
    write_table_csv(
        ctx.create("summary.csv")?,
        &[
            "delta",
            "rate",
            "gradient_norm",
            "iterations",
            "status",
            "multiplier",
            "lower_bound",
            "rate_shift_path",
            "rate_interpolation_path",
        ],
        &[row],
    )?;
    ctx.summary.lines.push(format!(
        "I* = {:.10e}, gradient norm = {:.3e}, iterations = {}, status = {}",
        opt.rate_value,
        opt.gradient_norm,
        opt.iterations,
        status_text(&opt)
    ));
    Ok(())
}

fn eps_list(config: &RunConfig) -> Result<Vec<f64>> {
    match (&config.run.eps_grid, config.run.eps) {
        (Some(g), _) => Ok(g.clone()),
        (None, Some(e)) => Ok(vec![e]),
        (None, None) => Err(Error::config("run.eps", "required (or run.eps_grid)")),
    }
}

fn estimators(ctx: &mut Context<'_>, names: &[EstimatorName]) -> Result<()> {
    let config = ctx.config;
    let spec = config.rare_event()?;
    if !(spec.delta > 0.0) {
        return Err(Error::config("scenario.delta", "estimators need delta > 0"));
    }
    warn_if_unstable(&spec.grid, &spec.wave);
    let model = build_model(config, &spec)?;
    let eps = eps_list(config)?;
    let opts = config.optimizer_options();
    let ball = if names.contains(&EstimatorName::IsDelta) {
        Some(optimize_event(&spec, &model, config.run.init, &opts, ctx.seed)?)
    } else {
        None
    };
    let zero = if names.contains(&EstimatorName::IsPinned) {
        let p = pinned(&spec)?;
        Some(optimize_event(&p, &model, config.run.init, &opts, ctx.seed)?)
    } else {
        None
    };
    let list: Vec<SweepEstimator<'_>> = names
        .iter()
        .map(|n| match n {
            EstimatorName::Mc => SweepEstimator::Basic,
            EstimatorName::IsDelta => SweepEstimator::Tilted {
                label: n.label(),
                forcing: &ball.as_ref().unwrap().forcing,
            },
            EstimatorName::IsPinned => SweepEstimator::Tilted {
                label: n.label(),
                forcing: &zero.as_ref().unwrap().forcing,
            },
        })
        .collect();
    let reports = epsilon_sweep(
        &spec,
        &model,
        &eps,
        config.run.samples,
        &list,
        derive_seed(ctx.seed, TAG_ESTIMATORS),
    )?;
    write_reports_csv(ctx.create("report.csv")?, &reports)?;
    for r in &reports {
        ctx.summary.lines.push(report_line(r));
    }
    Ok(())
}

fn report_line(r: &EstimatorReport) -> String {
    format!(
        "eps = {:.4}, {:>8}: estimate = {:.6e} [{:.6e}, {:.6e}], rel. error = {:.3e}{}",
        r.epsilon,
        r.estimator,
        r.estimate,
        r.ci_low,
        r.ci_high,
        r.relative_error,
        if r.flagged_saturated { " (saturated)" } else { "" }
    )
}

#[derive(Debug, Clone, Copy)]
enum SweepAxis {
    Displacement,
    Duration,
}

/// One pinned displacement optimum with its test-path rates.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub x0: f64,
    pub duration: f64,
    pub optimum: OptimalPath,
    pub lower_bound: f64,
    pub rate_shift_path: f64,
    pub rate_interpolation_path: f64,
}

/// Pinned displacement optimum for `x0` on `spec`'s grid with duration `t`.
pub fn sweep_point(
    base: &RareEventSpec,
    model_kind: crate::noise::NoiseKind,
    x0: f64,
    t: f64,
    init: InitialGuess,
    opts: &OptimizerOptions,
    seed: u64,
) -> Result<SweepPoint> {
    let grid = base.grid.with_duration(t)?;
    let spec = RareEventSpec::new(Scenario::Displacement { x0 }, grid, base.base_wave, 0.0, 1)?;
    let model = NoiseModel::build(model_kind, &spec.grid)?;
    let optimum = optimize_event(&spec, &model, init, opts, seed)?;
    let rf = RateFunctional::new(&spec.grid, &spec.wave, &model);
    Ok(SweepPoint {
        x0,
        duration: t,
        lower_bound: rf.discrete_lower_bound(&optimum.path),
        rate_shift_path: rf.rate(&spec.linear_shift_path()?),
        rate_interpolation_path: rf.rate(&spec.linear_interpolation_path()),
        optimum,
    })
}

fn sweep(ctx: &mut Context<'_>, axis: SweepAxis) -> Result<()> {
    let config = ctx.config;
    let spec = config.rare_event()?;
    let x0 = spec
        .displacement()
        .ok_or_else(|| Error::config("scenario.kind", "sweeps need a displacement scenario"))?;
    warn_if_unstable(&spec.grid, &spec.wave);
    let kind = config.noise_kind()?;
    let opts = config.optimizer_options();
    let points: Vec<(f64, f64)> = match axis {
        SweepAxis::Displacement => config
            .run
            .x0_grid
            .as_ref()
            .ok_or_else(|| Error::config("run.x0_grid", "required for sweep-x0"))?
            .iter()
            .map(|&x| (x, spec.grid.duration))
            .collect(),
        SweepAxis::Duration => config
            .run
            .duration_grid
            .as_ref()
            .ok_or_else(|| Error::config("run.T_grid", "required for sweep-T"))?
            .iter()
            .map(|&t| (x0, t))
            .collect(),
    };
    let results: Vec<SweepPoint> = points
        .par_iter()
        .map(|&(x, t)| sweep_point(&spec, kind, x, t, config.run.init, &opts, ctx.seed))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<Cell>> = results
        .iter()
        .map(|p| {
            vec![
                Cell::Num(p.x0),
                Cell::Num(p.duration),
                Cell::Num(p.optimum.rate_value),
                Cell::Num(p.lower_bound),
                Cell::Num(p.rate_shift_path),
                Cell::Num(p.rate_interpolation_path),
                Cell::Num(p.optimum.gradient_norm),
                Cell::Int(p.optimum.iterations as u64),
                Cell::Text(status_text(&p.optimum)),
            ]
        })
        .collect();
    write_table_csv(
        ctx.create("sweep.csv")?,
        &[
            "x0",
            "T",
            "rate",
            "lower_bound",
            "rate_shift_path",
            "rate_interpolation_path",
            "gradient_norm",
            "iterations",
            "status",
        ],
        &rows,
    )?;
    for p in &results {
        ctx.summary.lines.push(format!(
            "x0 = {}, T = {}: I* = {:.10e} ({:?})",
            p.x0, p.duration, p.optimum.rate_value, p.optimum.status
        ));
    }
    Ok(())
}

fn convexity(ctx: &mut Context<'_>) -> Result<()> {
    let config = ctx.config;
    let spec = pinned(&config.rare_event()?)?;
    let model = build_model(config, &spec)?;
    let opt = optimize_event(&spec, &model, config.run.init, &config.optimizer_options(), ctx.seed)?;
    let rf = RateFunctional::new(&spec.grid, &spec.wave, &model);
    let mask = spec.free_mask(false);
    let trials = config.run.trials;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(ctx.seed, TAG_CONVEXITY));
    let fraction = midpoint_convexity_test(|p| rf.rate(p), &opt.path, &mask, trials, &mut rng);
    let frozen: Vec<Vec<f64>> = (0..spec.grid.steps)
        .map(|n| drift(opt.path.slice(n), &spec.wave, spec.grid.dx))
        .collect();
    let frozen_fraction = midpoint_convexity_test(
        |p| rf.rate_with_frozen_drift(p, &frozen),
        &opt.path,
        &mask,
        trials,
        &mut rng,
    );
    write_table_csv(
        ctx.create("convexity.csv")?,
        &["trials", "rate", "fraction", "frozen_drift_fraction"],
        &[vec![
            Cell::Int(trials as u64),
            Cell::Num(opt.rate_value),
            Cell::Num(fraction),
            Cell::Num(frozen_fraction),
        ]],
    )?;
    ctx.summary.lines.push(format!(
        "midpoint convexity: {fraction:.6} of {trials} pairs (frozen drift: {frozen_fraction:.6})"
    ));
    Ok(())
}

/// Terminal centers of `k` noisy runs of the displacement scenario.
pub fn terminal_centers(spec: &RareEventSpec, model: &NoiseModel, eps: f64, k: usize, seed: u64) -> Result<Vec<f64>> {
    (0..k as u64)
        .into_par_iter()
        .map(|i| {
            let s = simulate_sample(spec, model, eps, None, seed, i);
            wave_center(&s.terminal, &spec.initial, &spec.wave, spec.grid.dx)
        })
        .collect()
}

fn center_diagnostics(ctx: &mut Context<'_>) -> Result<()> {
    let config = ctx.config;
    let spec = config.rare_event()?;
    let x0 = spec
        .displacement()
        .ok_or_else(|| Error::config("scenario.kind", "center diagnostics need a displacement scenario"))?;
    check_domain_margin(&spec);
    let model = build_model(config, &spec)?;
    let eps = config.run.eps.ok_or_else(|| Error::config("run.eps", "required"))?;
    let k = config.run.samples;
    let t = spec.grid.duration;
    let centers = terminal_centers(&spec, &model, eps, k, derive_seed(ctx.seed, TAG_CENTER))?;
    let n = k as f64;
    let mean = crate::monte_carlo::pairwise_sum(&centers) / n;
    let dev: Vec<f64> = centers.iter().map(|c| (c - mean) * (c - mean)).collect();
    let variance = crate::monte_carlo::pairwise_sum(&dev) / (n - 1.0).max(1.0);
    let (a_mean, a_var) = analytic_center_law(eps, t, &model, spec.grid.dx, &spec.wave);
    let hits = centers.iter().filter(|&&c| c - a_mean >= x0).count();
    let p = hits as f64 / n;
    let half = CI_MULTIPLIER * (p * (1.0 - p)).sqrt() / n.sqrt();
    let analytic = analytic_exit_probability(x0, t, eps, &model, spec.grid.dx, &spec.wave)?;

    let rows: Vec<Vec<Cell>> = centers
        .iter()
        .enumerate()
        .map(|(i, &c)| vec![Cell::Int(i as u64), Cell::Num(c)])
        .collect();
    write_table_csv(ctx.create("centers.csv")?, &["sample", "center"], &rows)?;
    write_table_csv(
        ctx.create("center_summary.csv")?,
        &[
            "eps",
            "T",
            "K",
            "mean",
            "variance",
            "analytic_mean",
            "analytic_variance",
            "x0",
            "exit_estimate",
            "exit_ci_low",
            "exit_ci_high",
            "exit_analytic",
        ],
        &[vec![
            Cell::Num(eps),
            Cell::Num(t),
            Cell::Int(k as u64),
            Cell::Num(mean),
            Cell::Num(variance),
            Cell::Num(a_mean),
            Cell::Num(a_var),
            Cell::Num(x0),
            Cell::Num(p),
            Cell::Num(p - half),
            Cell::Num(p + half),
            Cell::Num(analytic),
        ]],
    )?;
    ctx.summary.lines.push(format!(
        "center variance {variance:.6e} (analytic {a_var:.6e}); P(center >= {x0}) = {p:.4e} (analytic {analytic:.4e})"
    ));
    Ok(())
}
