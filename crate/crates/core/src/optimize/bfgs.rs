//! BFGS quasi-Newton minimization with a dense or limited-memory inverse
//! Hessian approximation.

use std::collections::VecDeque;

use super::line_search::{strong_wolfe, LineSearchError, StepPoint, WolfeParams};

/// Inverse-Hessian storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianMemory {
    Dense,
    Limited(usize),
}

impl HessianMemory {
    /// Dense up to `dense_limit` variables, rank-20 limited memory above.
    pub fn for_size(n: usize, dense_limit: usize) -> Self {
        if n <= dense_limit {
            HessianMemory::Dense
        } else {
            HessianMemory::Limited(20)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    /// Stop when `||grad||_inf <= tolerance * max(1, |f|)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub memory: HessianMemory,
    pub wolfe: WolfeParams,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 5000,
            memory: HessianMemory::Dense,
            wolfe: WolfeParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfgsStatus {
    Converged,
    MaxIterations,
    /// The line search could not satisfy the Wolfe conditions; the best point
    /// found so far is returned.
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub gradient_inf: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: BfgsStatus,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

enum InverseHessian {
    Dense { h: Vec<f64>, n: usize, scaled: bool },
    Limited { pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>, cap: usize, gamma: f64 },
}

impl InverseHessian {
    fn new(memory: HessianMemory, n: usize) -> Self {
        match memory {
            HessianMemory::Dense => {
                let mut h = vec![0.0; n * n];
                for i in 0..n {
                    h[i * n + i] = 1.0;
                }
                InverseHessian::Dense { h, n, scaled: false }
            }
            HessianMemory::Limited(cap) => InverseHessian::Limited {
                pairs: VecDeque::with_capacity(cap),
                cap: cap.max(1),
                gamma: 1.0,
            },
        }
    }

    fn reset(&mut self) {
        match self {
            InverseHessian::Dense { h, n, scaled } => {
                h.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..*n {
                    h[i * *n + i] = 1.0;
                }
                *scaled = false;
            }
            InverseHessian::Limited { pairs, gamma, .. } => {
                pairs.clear();
                *gamma = 1.0;
            }
        }
    }

    /// `d = -H g`.
    fn direction(&self, g: &[f64], d: &mut [f64]) {
        match self {
            InverseHessian::Dense { h, n, .. } => {
                for i in 0..*n {
                    let row = &h[i * n..(i + 1) * n];
                    d[i] = -dot(row, g);
                }
            }
            InverseHessian::Limited { pairs, gamma, .. } => {
                d.iter_mut().zip(g).for_each(|(d, g)| *d = -g);
                let mut alphas = Vec::with_capacity(pairs.len());
                for (s, y, rho) in pairs.iter().rev() {
                    let a = rho * dot(s, d);
                    d.iter_mut().zip(y).for_each(|(d, y)| *d -= a * y);
                    alphas.push(a);
                }
                d.iter_mut().for_each(|v| *v *= gamma);
                for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
                    let b = rho * dot(y, d);
                    d.iter_mut().zip(s).for_each(|(d, s)| *d += (a - b) * s);
                }
            }
        }
    }

    /// Incorporates the curvature pair `(s, y)`; skipped when `y.s` is not
    /// safely positive.
    fn update(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let ys = dot(&y, &s);
        let yy = dot(&y, &y);
        if !(ys > 1e-12 * yy.sqrt() * dot(&s, &s).sqrt()) || !ys.is_finite() {
            return;
        }
        let rho = 1.0 / ys;
        match self {
            InverseHessian::Dense { h, n, scaled } => {
                let n = *n;
                if !*scaled {
                    // Nocedal-Wright initial scaling before the first update
                    let g0 = ys / yy;
                    h.iter_mut().for_each(|v| *v *= g0);
                    *scaled = true;
                }
                // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
                let mut hy = vec![0.0; n];
                for i in 0..n {
                    hy[i] = dot(&h[i * n..(i + 1) * n], &y);
                }
                let yhy = dot(&y, &hy);
                let coef = rho * rho * yhy + rho;
                for i in 0..n {
                    let row = &mut h[i * n..(i + 1) * n];
                    let (si, hyi) = (s[i], hy[i]);
                    for j in 0..n {
                        row[j] += coef * si * s[j] - rho * (hyi * s[j] + si * hy[j]);
                    }
                }
            }
            InverseHessian::Limited { pairs, cap, gamma } => {
                *gamma = ys / yy;
                if pairs.len() == *cap {
                    pairs.pop_front();
                }
                pairs.push_back((s, y, rho));
            }
        }
    }
}

/// Minimizes `objective`, which returns the value and writes the gradient.
pub fn minimize(
    mut objective: impl FnMut(&[f64], &mut [f64]) -> f64,
    x0: Vec<f64>,
    options: &BfgsOptions,
) -> BfgsOutcome {
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    let mut evaluations = 1;
    let mut inv_h = InverseHessian::new(options.memory, n);
    let mut d = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut iterations = 0;
    let mut status = BfgsStatus::MaxIterations;
    let mut restarted = false;

    if !f.is_finite() {
        return BfgsOutcome {
            gradient_inf: inf_norm(&g),
            x,
            value: f,
            gradient: g,
            iterations,
            evaluations,
            status: BfgsStatus::LineSearchFailed,
        };
    }

    while iterations < options.max_iterations {
        if inf_norm(&g) <= options.tolerance * f.abs().max(1.0) {
            status = BfgsStatus::Converged;
            break;
        }
        inv_h.direction(&g, &mut d);
        let mut slope0 = dot(&g, &d);
        if !(slope0 < 0.0) {
            inv_h.reset();
            inv_h.direction(&g, &mut d);
            slope0 = dot(&g, &d);
        }
        let mut wolfe = options.wolfe;
        if iterations == 0 || restarted {
            // first step along -g: unit step in the gradient scale is arbitrary
            wolfe.initial_step = (1.0 / inf_norm(&g)).min(1.0);
        }

        let mut best: Option<StepPoint> = None;
        let result = strong_wolfe(
            |alpha| {
                for i in 0..n {
                    trial[i] = x[i] + alpha * d[i];
                }
                let v = objective(&trial, &mut g_trial);
                evaluations += 1;
                (v, dot(&g_trial, &d))
            },
            f,
            slope0,
            &wolfe,
            &mut best,
        );

        let step = match result {
            Ok(p) => Some(p),
            Err(LineSearchError::Exhausted) | Err(LineSearchError::NotDescent) => best,
        };
        let Some(step) = step else {
            if !restarted {
                inv_h.reset();
                restarted = true;
                continue;
            }
            status = BfgsStatus::LineSearchFailed;
            break;
        };
        let accepted = result.is_ok();

        // a successful search leaves its final trial point in `trial`/`g_trial`;
        // the fallback point needs a fresh evaluation
        let s: Vec<f64> = d.iter().map(|di| step.alpha * di).collect();
        let f_new = if accepted {
            step.value
        } else {
            for i in 0..n {
                trial[i] = x[i] + s[i];
            }
            evaluations += 1;
            objective(&trial, &mut g_trial)
        };
        if !(f_new <= f) {
            if !restarted {
                inv_h.reset();
                restarted = true;
                continue;
            }
            status = BfgsStatus::LineSearchFailed;
            break;
        }
        let y: Vec<f64> = g_trial.iter().zip(&g).map(|(a, b)| a - b).collect();
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        f = f_new;
        iterations += 1;
        if accepted {
            inv_h.update(s, y);
            restarted = false;
        } else {
            inv_h.reset();
            restarted = true;
        }
    }

    BfgsOutcome {
        gradient_inf: inf_norm(&g),
        x,
        value: f,
        gradient: g,
        iterations,
        evaluations,
        status,
    }
}
