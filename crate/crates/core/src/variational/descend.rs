//! Steepest descent inside the winding-number +1 class.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    el_residual, energy_e0, h2_gram_flat, h2_precondition, objective, objective_gradient, winding, winding_number, z_profile,
    DiscretizedPath, EnergyConfig, VariationalError, ZProfile, DEFAULT_GRAD_TOL,
};
use crate::poly::VectorField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepPolicy {
    /// Previous step doubled, then halved until Armijo holds.
    Backtracking,
    /// Barzilai-Borwein trial step, then halved until Armijo holds.
    BarzilaiBorwein,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescendOptions {
    pub step: StepPolicy,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub h2_precondition: bool,
    /// Sufficient-decrease constant.
    pub armijo: f64,
}

impl Default for DescendOptions {
    fn default() -> Self {
        Self {
            step: StepPolicy::BarzilaiBorwein,
            max_iters: 50_000,
            grad_tol: DEFAULT_GRAD_TOL,
            h2_precondition: false,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub winding: i64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    /// The line search could not decrease the objective any further.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescendOutcome {
    pub path: DiscretizedPath,
    /// Row 0 is the starting point; one row per accepted step after that.
    pub trace: Vec<TraceRow>,
    pub termination: Termination,
    pub energy: f64,
    pub grad_norm: f64,
}

impl DescendOutcome {
    pub fn accepted_steps(&self) -> usize {
        self.trace.len() - 1
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

enum Reject {
    Winding,
    NonFinite,
    Decrease,
}

/// Change of the quadratic part `eps/2 |u|^2 + <u, v>` of `Eeps` along
/// `x + alpha d`, evaluated without cancellation: `alpha lin + alpha^2 curv`.
struct QuadraticPart {
    lin: f64,
    curv: f64,
}

impl QuadraticPart {
    fn along(x: &[f64], d: &[f64], v: Option<&[f64]>, eps: f64) -> Self {
        let gd = h2_gram_flat(d);
        let k = (x.len() / 2) as f64;
        let mut lin = eps * dot(x, &gd);
        if let Some(v) = v {
            lin += dot(v, &gd);
        }
        Self { lin: lin / k, curv: 0.5 * eps * dot(d, &gd) / k }
    }

    fn delta(&self, alpha: f64) -> f64 {
        alpha * self.lin + alpha * alpha * self.curv
    }
}

/// Gradient descent with an Armijo line search on `Eeps` (or `E0` when
/// `cfg.epsilon == 0`). Trial paths whose winding number is not +1 are
/// rejected like trial paths that fail to decrease the objective.
///
/// The objective is much larger than the decreases that matter near a
/// minimizer, so the line search compares differences: `E0` at the trial
/// and current paths, plus the exactly quadratic H2 part expanded in the
/// step. When that difference is within rounding of zero but fails the
/// Armijo test, the step is still accepted if the directional derivative
/// at the trial point satisfies `phi'(a) <= (1 - 2 c) |phi'(0)|`; a
/// positive rounding-level difference is then replaced by the trapezoid
/// estimate `a (phi'(0) + phi'(a)) / 2`. Trace energies
/// accumulate these decreases from the initial value, so they never
/// increase; the outcome's `energy` is evaluated afresh.
pub fn descend<F: VectorField + ?Sized>(
    path: &DiscretizedPath,
    sys: &F,
    cfg: &EnergyConfig,
    opts: &DescendOptions,
) -> Result<DescendOutcome, VariationalError> {
    let w = winding_number(path)?;
    if w != 1 {
        return Err(VariationalError::WrongWinding(w));
    }
    let eps = cfg.epsilon;
    let v_flat = match &cfg.v_eps {
        Some(v) if eps > 0.0 => {
            if v.k() != path.k() {
                return Err(VariationalError::SizeMismatch { expected: path.k(), got: v.k() });
            }
            Some(v.flat())
        }
        _ => None,
    };
    let mut x = path.flat();
    let mut f = objective(path, sys, cfg)?;
    let mut e0 = energy_e0(path, sys);
    let mut g = objective_gradient(path, sys, cfg)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(VariationalError::NonFinite("initial objective"));
    }
    let mut gnorm = norm(&g);
    let mut trace = vec![TraceRow { iter: 0, energy: f, grad_norm: gnorm, winding: 1, step: 0.0 }];
    // (step, slope g.d, s = x_new - x_old, y = g_new - g_old) of the last accepted step
    let mut last: Option<(f64, f64, Vec<f64>, Vec<f64>)> = None;
    let mut termination = Termination::MaxIters;

    for iter in 1..=opts.max_iters {
        if gnorm <= opts.grad_tol {
            termination = Termination::Converged;
            break;
        }
        let mut d: Vec<f64> = if opts.h2_precondition { h2_precondition(&g) } else { g.clone() };
        d.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let quad = (eps > 0.0).then(|| QuadraticPart::along(&x, &d, v_flat.as_deref(), eps));
        let first = 1e-2 / max_abs(&d).max(f64::MIN_POSITIVE);
        let mut alpha = match (&last, opts.step) {
            (None, _) => first,
            (Some((a, _, _, _)), StepPolicy::Backtracking) => 2.0 * a,
            (Some((a, s_slope, s, y)), StepPolicy::BarzilaiBorwein) => {
                // BB1 in the metric of the preconditioner: s^T P^-1 s = -a^2 g.d
                let sy = dot(s, y);
                if sy > 0.0 {
                    -a * a * s_slope / sy
                } else {
                    2.0 * a
                }
            }
        };
        let floor = 1e-16 * (1.0 + max_abs(&x)) / max_abs(&d).max(f64::MIN_POSITIVE);
        let mut reason = Reject::Decrease;
        let accepted = loop {
            if alpha < floor {
                break None;
            }
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            let Ok(candidate) = DiscretizedPath::from_flat(&trial) else {
                reason = Reject::NonFinite;
                alpha *= 0.5;
                continue;
            };
            if winding(&candidate).number != Some(1) {
                reason = Reject::Winding;
                alpha *= 0.5;
                continue;
            }
            let e0_trial = energy_e0(&candidate, sys);
            let delta = (e0_trial - e0) + quad.as_ref().map_or(0.0, |q| q.delta(alpha));
            if !delta.is_finite() {
                reason = Reject::NonFinite;
            } else if delta <= opts.armijo * alpha * slope {
                break Some((candidate, trial, e0_trial, delta, None));
            } else if delta <= 1e-12 * e0 {
                // Below the resolution of function values: the derivative
                // form of the sufficient-decrease test, with the decrease
                // taken from the trapezoid rule, both exact for quadratics.
                let g_trial = objective_gradient(&candidate, sys, cfg)?;
                let slope_trial = dot(&g_trial, &d);
                if slope_trial <= -(1.0 - 2.0 * opts.armijo) * slope {
                    let recorded = if delta <= 0.0 { delta } else { 0.5 * alpha * (slope + slope_trial) };
                    break Some((candidate, trial, e0_trial, recorded, Some(g_trial)));
                }
                reason = Reject::Decrease;
            } else {
                reason = Reject::Decrease;
            }
            alpha *= 0.5;
        };
        let Some((candidate, trial, e0_trial, delta, g_trial)) = accepted else {
            match reason {
                Reject::Winding => return Err(VariationalError::WindingBroken { iteration: iter }),
                Reject::NonFinite => return Err(VariationalError::NonFinite("objective")),
                Reject::Decrease => {
                    termination = Termination::Stalled;
                    break;
                }
            }
        };
        let g_new = match g_trial {
            Some(g) => g,
            None => objective_gradient(&candidate, sys, cfg)?,
        };
        if g_new.iter().any(|v| !v.is_finite()) {
            return Err(VariationalError::NonFinite("gradient"));
        }
        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        last = Some((alpha, slope, s, y));
        x = trial;
        e0 = e0_trial;
        f += delta;
        g = g_new;
        gnorm = norm(&g);
        trace.push(TraceRow { iter, energy: f, grad_norm: gnorm, winding: 1, step: alpha });
    }
    if termination == Termination::MaxIters && gnorm <= opts.grad_tol {
        termination = Termination::Converged;
    }
    let path = DiscretizedPath::from_flat(&x)?;
    let energy = objective(&path, sys, cfg)?;
    log::debug!("descend: {termination:?} after {} steps, energy {energy:e}, |grad| {gnorm:e}", trace.len() - 1);
    Ok(DescendOutcome { path, trace, termination, energy, grad_norm: gnorm })
}

/// Independent descents from several starting paths, in parallel. Results
/// keep the order of `starts`.
pub fn descend_many<F: VectorField + ?Sized>(
    starts: &[DiscretizedPath],
    sys: &F,
    cfg: &EnergyConfig,
    opts: &DescendOptions,
) -> Vec<Result<DescendOutcome, VariationalError>> {
    starts.par_iter().map(|p| descend(p, sys, cfg, opts)).collect()
}

/// `eps = 1e-1, 1e-2, ..., 1e-6`.
pub fn default_schedule() -> Vec<f64> {
    (1..=6).map(|k| 10f64.powi(-k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationStage {
    pub epsilon: f64,
    pub outcome: DescendOutcome,
    pub energy_e0: f64,
    pub el_residual: f64,
    pub z_profile: ZProfile,
}

/// Descends `Eeps` for each `eps` of `schedule` in turn, warm-starting
/// from the previous stage. With `amplitude_factor > 0` each stage uses the
/// auxiliary path of [`super::make_v_eps`].
pub fn continuation<F: VectorField + ?Sized>(
    path: &DiscretizedPath,
    sys: &F,
    schedule: &[f64],
    amplitude_factor: f64,
    opts: &DescendOptions,
) -> Result<Vec<ContinuationStage>, VariationalError> {
    let mut current = path.clone();
    let mut stages = Vec::with_capacity(schedule.len());
    for &eps in schedule {
        let cfg = if amplitude_factor > 0.0 {
            EnergyConfig::with_auxiliary(eps, path.k(), amplitude_factor)?
        } else {
            EnergyConfig::new(eps, None)?
        };
        let outcome = descend(&current, sys, &cfg, opts)?;
        current = outcome.path.clone();
        log::info!("continuation eps = {eps:e}: E0 = {:e}", energy_e0(&current, sys));
        stages.push(ContinuationStage {
            epsilon: eps,
            energy_e0: energy_e0(&current, sys),
            el_residual: el_residual(&current, sys, &cfg)?,
            z_profile: z_profile(&current, sys),
            outcome,
        });
    }
    Ok(stages)
}
