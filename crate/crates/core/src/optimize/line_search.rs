//! Strong Wolfe line search (bracketing + zoom with cubic interpolation).

/// Line search parameters.
#[derive(Debug, Clone, Copy)]
pub struct WolfeParams {
    pub c1: f64,
    pub c2: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub max_evals: usize,
}

impl Default for WolfeParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            c2: 0.9,
            initial_step: 1.0,
            max_step: 1e10,
            max_evals: 40,
        }
    }
}

/// Accepted step with the objective value and directional derivative there.
#[derive(Debug, Clone, Copy)]
pub struct StepPoint {
    pub alpha: f64,
    pub value: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSearchError {
    /// `direction` is not a descent direction.
    NotDescent,
    /// Evaluation budget exhausted without satisfying the Wolfe conditions.
    Exhausted,
}

/// Finds `alpha` meeting the strong Wolfe conditions along a ray.
///
/// `phi(alpha)` returns `(f(x + alpha d), f'(x + alpha d) . d)`. On
/// [`LineSearchError::Exhausted`] the best sufficient-decrease point seen, if
/// any, is returned through `best`.
pub fn strong_wolfe(
    mut phi: impl FnMut(f64) -> (f64, f64),
    f0: f64,
    slope0: f64,
    params: &WolfeParams,
    best: &mut Option<StepPoint>,
) -> Result<StepPoint, LineSearchError> {
    if !(slope0 < 0.0) {
        return Err(LineSearchError::NotDescent);
    }
    let WolfeParams { c1, c2, .. } = *params;
    let mut evals = 0;
    let mut prev = StepPoint {
        alpha: 0.0,
        value: f0,
        slope: slope0,
    };
    let mut alpha = params.initial_step.min(params.max_step);
    let mut note = |p: StepPoint, best: &mut Option<StepPoint>| {
        if p.value.is_finite() && p.value <= f0 + c1 * p.alpha * slope0 {
            if best.is_none_or(|b| p.value < b.value) {
                *best = Some(p);
            }
        }
    };

    loop {
        let (value, slope) = phi(alpha);
        evals += 1;
        let cur = StepPoint { alpha, value, slope };
        note(cur, best);
        if !value.is_finite() {
            // shrink back toward the last finite point
            alpha = 0.5 * (prev.alpha + alpha);
            if evals >= params.max_evals {
                return Err(LineSearchError::Exhausted);
            }
            continue;
        }
        if value > f0 + c1 * alpha * slope0 || (evals > 1 && value >= prev.value) {
            return zoom(&mut phi, f0, slope0, prev, cur, params, evals, best, &mut note);
        }
        if slope.abs() <= -c2 * slope0 {
            return Ok(cur);
        }
        if slope >= 0.0 {
            return zoom(&mut phi, f0, slope0, cur, prev, params, evals, best, &mut note);
        }
        if evals >= params.max_evals || alpha >= params.max_step {
            return Err(LineSearchError::Exhausted);
        }
        prev = cur;
        alpha = (2.0 * alpha).min(params.max_step);
    }
}

#[allow(clippy::too_many_arguments)]
fn zoom(
    phi: &mut impl FnMut(f64) -> (f64, f64),
    f0: f64,
    slope0: f64,
    mut lo: StepPoint,
    mut hi: StepPoint,
    params: &WolfeParams,
    mut evals: usize,
    best: &mut Option<StepPoint>,
    note: &mut impl FnMut(StepPoint, &mut Option<StepPoint>),
) -> Result<StepPoint, LineSearchError> {
    let WolfeParams { c1, c2, .. } = *params;
    loop {
        if evals >= params.max_evals {
            return Err(LineSearchError::Exhausted);
        }
        let (a, b) = if lo.alpha < hi.alpha {
            (lo.alpha, hi.alpha)
        } else {
            (hi.alpha, lo.alpha)
        };
        let width = b - a;
        if width <= f64::EPSILON * b.max(1e-300) {
            return Err(LineSearchError::Exhausted);
        }
        let mut alpha = cubic_minimizer(lo, hi).unwrap_or(0.5 * (a + b));
        // keep the trial safely inside the bracket
        let margin = 0.1 * width;
        if !(alpha > a + margin && alpha < b - margin) {
            alpha = 0.5 * (a + b);
        }
        let (value, slope) = phi(alpha);
        evals += 1;
        let cur = StepPoint { alpha, value, slope };
        note(cur, best);
        if !value.is_finite() || value > f0 + c1 * alpha * slope0 || value >= lo.value {
            hi = cur;
        } else {
            if slope.abs() <= -c2 * slope0 {
                return Ok(cur);
            }
            if slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
}

/// Minimizer of the cubic interpolating values and slopes at two points.
fn cubic_minimizer(p: StepPoint, q: StepPoint) -> Option<f64> {
    if !(p.value.is_finite() && q.value.is_finite() && p.slope.is_finite() && q.slope.is_finite()) {
        return None;
    }
    let d1 = p.slope + q.slope - 3.0 * (p.value - q.value) / (p.alpha - q.alpha);
    let disc = d1 * d1 - p.slope * q.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (q.alpha - p.alpha).signum() * disc.sqrt();
    let denom = q.slope - p.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = q.alpha - (q.alpha - p.alpha) * (q.slope + d2 - d1) / denom;
    t.is_finite().then_some(t)
}
