//! Log-likelihood of `theta = (a, b, beta)` from an observed SSADT dataset
//! and maximum likelihood fitting.
//!
//! Given the realized elevation index `kappa1`, interval `k` (1-based)
//! carries the stage-1 shape `f*alpha_1` for `k <= kappa1` and the stage-2
//! shape `f*alpha_2` afterwards, matching the simulation protocol. The
//! likelihood is the elevation-index pmf times gamma increment densities:
//!
//! ```text
//! l(theta) = log P_theta(kappa1)
//!          + sum_{i,k} [ (f*alpha_j - 1) ln g_ki - g_ki/beta
//!                        - ln Gamma(f*alpha_j) - f*alpha_j ln beta ].
//! ```
//!
//! The increment term collapses to four sufficient statistics (count, sum,
//! and log-sum per stage), so one evaluation costs O(1) after an O(nM)
//! summary pass plus O(M) for the pmf term. The pmf factor uses the
//! Birnbaum-Saunders approximation of the elevation law and can be excluded
//! through [`LikelihoodOptions`] for diagnostics: `kappa1` is a function of
//! the increments, so the increment term alone is itself a full likelihood
//! under the exact gamma-process law.
//!
//! Fitting maximizes over the scaled coordinates `(a, b/1000, ln beta)`
//! (the raw scales differ by five orders of magnitude) with a Nelder-Mead
//! simplex stage refined by a BFGS stage on numeric gradients, from the
//! supplied start and four jittered companions.

use serde::{Deserialize, Serialize};

use crate::firstpassage::{kappa1_pmf, BsMapping};
use crate::model::{arrhenius_rate, ModelParams, StressSpec};
use crate::simulate::ObservationSet;
use crate::specfun::log_gamma;
use crate::{Error, Result};

/// Relative objective-change tolerance for the optimizer stages.
const REL_F_TOL: f64 = 1e-10;
/// Step-size tolerance in scaled coordinates.
const PARAM_TOL: f64 = 1e-8;
/// Function-evaluation budget per start.
const MAX_EVALS_PER_START: u32 = 5000;
/// A start counts as converged when the scaled gradient norm is below this.
const GRAD_TOL: f64 = 1e-5;

/// Controls which factors enter the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikelihoodOptions {
    /// Include the elevation-index pmf factor (the default). Excluding it
    /// leaves the pure gamma increment likelihood.
    pub include_kappa_term: bool,
    /// Parameter mapping used by the pmf factor's lifetime approximation.
    pub mapping: BsMapping,
}

impl Default for LikelihoodOptions {
    fn default() -> Self {
        Self { include_kappa_term: true, mapping: BsMapping::Scale }
    }
}

/// Outcome of a maximum likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// The fitted parameters.
    pub theta_hat: ModelParams,
    /// Log-likelihood at `theta_hat`.
    pub loglik: f64,
    /// Whether the best start met the gradient criterion
    /// (norm below `1e-5` in scaled coordinates).
    pub converged: bool,
    /// Total objective evaluations across all starts.
    pub iterations: u32,
    /// Scaled gradient norm at `theta_hat`.
    pub gradient_norm: f64,
}

/// Per-stage sufficient statistics of the increment term.
struct DataSummary {
    count1: f64,
    count2: f64,
    sum_g1: f64,
    sum_g2: f64,
    sum_log_g1: f64,
    sum_log_g2: f64,
}

fn summarize(obs: &ObservationSet) -> Result<DataSummary> {
    let split = obs.kappa1 as usize;
    let mut s = DataSummary {
        count1: 0.0,
        count2: 0.0,
        sum_g1: 0.0,
        sum_g2: 0.0,
        sum_log_g1: 0.0,
        sum_log_g2: 0.0,
    };
    for row in &obs.increments {
        for (k0, &g) in row.iter().enumerate() {
            if !(g > 0.0) {
                return Err(Error::Domain(format!(
                    "increments must be positive, found {g} at interval {}",
                    k0 + 1
                )));
            }
            if k0 < split {
                s.count1 += 1.0;
                s.sum_g1 += g;
                s.sum_log_g1 += g.ln();
            } else {
                s.count2 += 1.0;
                s.sum_g2 += g;
                s.sum_log_g2 += g.ln();
            }
        }
    }
    Ok(s)
}

fn loglik_from_summary(
    theta: &ModelParams,
    obs: &ObservationSet,
    stress: &StressSpec,
    summary: &DataSummary,
    options: LikelihoodOptions,
) -> Result<f64> {
    if !(theta.beta > 0.0) {
        return Err(Error::Domain(format!(
            "the scale parameter must be positive, got {}",
            theta.beta
        )));
    }
    let f = f64::from(obs.plan.f);
    let shape1 = f * arrhenius_rate(theta, stress.levels[0])?;
    let shape2 = f * arrhenius_rate(theta, stress.levels[1])?;
    let ln_beta = theta.beta.ln();
    let stage = |shape: f64, count: f64, sum_log_g: f64, sum_g: f64| -> Result<f64> {
        Ok((shape - 1.0) * sum_log_g - sum_g / theta.beta
            - count * (log_gamma(shape)? + shape * ln_beta))
    };
    let mut total = stage(shape1, summary.count1, summary.sum_log_g1, summary.sum_g1)?
        + stage(shape2, summary.count2, summary.sum_log_g2, summary.sum_g2)?;
    if options.include_kappa_term {
        let pmf = kappa1_pmf(&obs.plan, theta, stress, options.mapping)?;
        total += pmf.prob(obs.kappa1).ln();
    }
    if !total.is_finite() {
        return Err(Error::Numerical(format!(
            "log-likelihood is not finite at a={}, b={}, beta={}",
            theta.a, theta.b, theta.beta
        )));
    }
    Ok(total)
}

/// Log-likelihood of `theta` for an observed dataset, with the
/// elevation-index pmf factor included (the default model).
///
/// # Errors
///
/// [`Error::Domain`] for nonpositive increments or scale;
/// [`Error::Numerical`] when the value is not finite.
pub fn log_likelihood(
    theta: &ModelParams,
    obs: &ObservationSet,
    stress: &StressSpec,
) -> Result<f64> {
    log_likelihood_with(theta, obs, stress, LikelihoodOptions::default())
}

/// [`log_likelihood`] with explicit [`LikelihoodOptions`].
///
/// # Errors
///
/// As [`log_likelihood`].
pub fn log_likelihood_with(
    theta: &ModelParams,
    obs: &ObservationSet,
    stress: &StressSpec,
    options: LikelihoodOptions,
) -> Result<f64> {
    let summary = summarize(obs)?;
    loglik_from_summary(theta, obs, stress, &summary, options)
}

/// Observed information of one dataset: the negative Hessian of the
/// log-likelihood at `theta`, by central second differences with the given
/// absolute step per component of `(a, b, beta)`.
///
/// Averaged over many simulated datasets this estimates the expected Fisher
/// information, giving a route to the information matrix that shares no
/// code with the analytic expression. Steps should respect each
/// component's curvature scale; `b` tolerates steps a few hundred times
/// larger than `a` because every `b` derivative carries a factor
/// `1/(273 + S_j)`.
///
/// # Errors
///
/// [`Error::Domain`] for nonpositive or non-finite steps; any evaluation
/// error of the log-likelihood at a stencil point (for example a `beta`
/// step that reaches zero).
pub fn numeric_observed_information(
    obs: &ObservationSet,
    stress: &StressSpec,
    theta: &ModelParams,
    steps: [f64; 3],
) -> Result<[[f64; 3]; 3]> {
    if steps.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
        return Err(Error::Domain(format!(
            "finite positive finite-difference steps required, got {steps:?}"
        )));
    }
    let at = |x: [f64; 3]| -> Result<f64> {
        log_likelihood(&ModelParams { a: x[0], b: x[1], beta: x[2] }, obs, stress)
    };
    let x0 = [theta.a, theta.b, theta.beta];
    let ll0 = at(x0)?;
    let mut hess = [[0.0; 3]; 3];
    for i in 0..3 {
        let mut xp = x0;
        xp[i] += steps[i];
        let mut xm = x0;
        xm[i] -= steps[i];
        hess[i][i] = (at(xp)? - 2.0 * ll0 + at(xm)?) / (steps[i] * steps[i]);
    }
    for i in 0..3 {
        for j in (i + 1)..3 {
            let mut xpp = x0;
            xpp[i] += steps[i];
            xpp[j] += steps[j];
            let mut xpm = x0;
            xpm[i] += steps[i];
            xpm[j] -= steps[j];
            let mut xmp = x0;
            xmp[i] -= steps[i];
            xmp[j] += steps[j];
            let mut xmm = x0;
            xmm[i] -= steps[i];
            xmm[j] -= steps[j];
            let v = (at(xpp)? - at(xpm)? - at(xmp)? + at(xmm)?) / (4.0 * steps[i] * steps[j]);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    Ok(std::array::from_fn(|i| std::array::from_fn(|j| -hess[i][j])))
}

fn to_scaled(theta: &ModelParams) -> [f64; 3] {
    [theta.a, theta.b / 1000.0, theta.beta.ln()]
}

fn from_scaled(x: &[f64; 3]) -> ModelParams {
    ModelParams { a: x[0], b: 1000.0 * x[1], beta: x[2].exp() }
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Central-difference gradient; infinite components mark evaluation failure.
fn numeric_gradient<F: FnMut(&[f64; 3]) -> f64>(f: &mut F, x: &[f64; 3]) -> [f64; 3] {
    let mut g = [0.0; 3];
    for i in 0..3 {
        let h = 1e-6 * (1.0 + x[i].abs());
        let mut xp = *x;
        let mut xm = *x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    g
}

/// Nelder-Mead simplex minimization stage.
fn nelder_mead<F: FnMut(&[f64; 3]) -> f64>(
    f: &mut F,
    x0: [f64; 3],
    max_evals: u32,
    evals: &mut u32,
) -> ([f64; 3], f64) {
    let start_evals = *evals;
    let mut pts: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    let fx0 = f(&x0);
    *evals += 1;
    pts.push((x0, fx0));
    for i in 0..3 {
        let mut x = x0;
        x[i] += 0.1 * (1.0 + x[i].abs());
        let fx = f(&x);
        *evals += 1;
        pts.push((x, fx));
    }
    loop {
        pts.sort_by(|p, q| p.1.partial_cmp(&q.1).unwrap_or(std::cmp::Ordering::Equal));
        let (best, worst) = (pts[0].1, pts[3].1);
        let spread: f64 = (0..3)
            .map(|i| (pts[3].0[i] - pts[0].0[i]).abs())
            .fold(0.0, f64::max);
        if *evals - start_evals >= max_evals
            || ((worst - best).abs() <= REL_F_TOL * (best.abs() + 1e-12) && spread <= PARAM_TOL)
        {
            return pts[0];
        }
        let mut centroid = [0.0; 3];
        for p in &pts[..3] {
            for i in 0..3 {
                centroid[i] += p.0[i] / 3.0;
            }
        }
        let along = |t: f64| -> [f64; 3] {
            let mut x = [0.0; 3];
            for i in 0..3 {
                x[i] = centroid[i] + t * (centroid[i] - pts[3].0[i]);
            }
            x
        };
        let xr = along(1.0);
        let fr = f(&xr);
        *evals += 1;
        if fr < pts[0].1 {
            let xe = along(2.0);
            let fe = f(&xe);
            *evals += 1;
            pts[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < pts[2].1 {
            pts[3] = (xr, fr);
        } else {
            let xc = along(0.5);
            let fc = f(&xc);
            *evals += 1;
            if fc < pts[3].1.min(fr) {
                pts[3] = (xc, fc);
            } else {
                // Shrink toward the best vertex.
                for j in 1..4 {
                    for i in 0..3 {
                        pts[j].0[i] = pts[0].0[i] + 0.5 * (pts[j].0[i] - pts[0].0[i]);
                    }
                    pts[j].1 = f(&pts[j].0);
                    *evals += 1;
                }
            }
        }
    }
}

/// BFGS refinement stage on numeric gradients. Returns the final point, its
/// value, and the gradient norm there.
fn bfgs<F: FnMut(&[f64; 3]) -> f64>(
    f: &mut F,
    x0: [f64; 3],
    fx0: f64,
    max_evals: u32,
    evals: &mut u32,
) -> ([f64; 3], f64, f64) {
    let start_evals = *evals;
    let mut x = x0;
    let mut fx = fx0;
    let mut g = numeric_gradient(f, &x);
    *evals += 6;
    let mut h = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    while *evals - start_evals < max_evals {
        if !g.iter().all(|v| v.is_finite()) {
            break;
        }
        let mut d = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                d[i] -= h[i][j] * g[j];
            }
        }
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            h = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            for i in 0..3 {
                d[i] = -g[i];
            }
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xt = x;
            for i in 0..3 {
                xt[i] += t * d[i];
            }
            let ft = f(&xt);
            *evals += 1;
            if ft <= fx + 1e-4 * t * slope {
                accepted = Some((xt, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fn_)) = accepted else { break };
        let gn = numeric_gradient(f, &xn);
        *evals += 6;
        let s: [f64; 3] = [xn[0] - x[0], xn[1] - x[1], xn[2] - x[2]];
        let y: [f64; 3] = [gn[0] - g[0], gn[1] - g[1], gn[2] - g[2]];
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 * norm3(&s) * norm3(&y) {
            // Standard BFGS inverse-Hessian update.
            let rho = 1.0 / sy;
            let mut hy = [0.0; 3];
            for i in 0..3 {
                for j in 0..3 {
                    hy[i] += h[i][j] * y[j];
                }
            }
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..3 {
                for j in 0..3 {
                    h[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
        let f_drop = (fx - fn_).abs();
        x = xn;
        fx = fn_;
        g = gn;
        if norm3(&g) <= GRAD_TOL * 1e-2
            || norm3(&s) <= PARAM_TOL
            || f_drop <= REL_F_TOL * (fx.abs() + 1e-12)
        {
            break;
        }
    }
    if g.iter().all(|v| v.is_finite()) && norm3(&g) > GRAD_TOL * 0.5 {
        newton_polish(f, &mut x, &mut g, max_evals, start_evals, evals);
        fx = f(&x);
        *evals += 1;
    }
    let gnorm = if g.iter().all(|v| v.is_finite()) { norm3(&g) } else { f64::INFINITY };
    (x, fx, gnorm)
}

/// Newton steps on the numeric gradient itself. Near the optimum of a
/// large-magnitude objective the per-step improvement falls below the f64
/// resolution of the value, so a value-based line search stalls while the
/// gradient is still measurable; solving `H d = -g` with a
/// finite-difference Hessian and accepting steps that shrink the gradient
/// norm drives it to the noise floor.
fn newton_polish<F: FnMut(&[f64; 3]) -> f64>(
    f: &mut F,
    x: &mut [f64; 3],
    g: &mut [f64; 3],
    max_evals: u32,
    start_evals: u32,
    evals: &mut u32,
) {
    for _ in 0..8 {
        if norm3(g) <= GRAD_TOL * 0.5 || *evals - start_evals >= max_evals {
            return;
        }
        let mut hess = [[0.0f64; 3]; 3];
        for i in 0..3 {
            let h = 1e-5 * (1.0 + x[i].abs());
            let mut xp = *x;
            xp[i] += h;
            let gp = numeric_gradient(f, &xp);
            *evals += 6;
            for j in 0..3 {
                hess[j][i] = (gp[j] - g[j]) / h;
            }
        }
        for i in 0..3 {
            for j in (i + 1)..3 {
                let sym = 0.5 * (hess[i][j] + hess[j][i]);
                hess[i][j] = sym;
                hess[j][i] = sym;
            }
        }
        let Some(delta) = solve3(&hess, &[-g[0], -g[1], -g[2]]) else { return };
        if !delta.iter().all(|v| v.is_finite()) || norm3(&delta) > 0.5 {
            return;
        }
        let xn = [x[0] + delta[0], x[1] + delta[1], x[2] + delta[2]];
        let gn = numeric_gradient(f, &xn);
        *evals += 6;
        if !gn.iter().all(|v| v.is_finite()) || norm3(&gn) >= norm3(g) {
            return;
        }
        *x = xn;
        *g = gn;
    }
}

/// Gauss elimination with partial pivoting for a 3x3 system.
fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0f64; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&r, &s| {
            m[r][col].abs().partial_cmp(&m[s][col].abs()).unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for r in (col + 1)..3 {
            let factor = m[r][col] / m[col][col];
            for j in col..4 {
                m[r][j] -= factor * m[col][j];
            }
        }
    }
    let mut out = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut acc = m[i][3];
        for j in (i + 1)..3 {
            acc -= m[i][j] * out[j];
        }
        out[i] = acc / m[i][i];
    }
    Some(out)
}

/// Maximum likelihood fit of `(a, b, beta)` by simplex search refined with
/// BFGS, from `init` plus four jittered starts.
///
/// # Errors
///
/// [`Error::Domain`] for invalid increments; [`Error::OptimizationFailure`]
/// when no start reaches the gradient criterion, carrying the best point
/// found.
pub fn fit_mle(obs: &ObservationSet, stress: &StressSpec, init: &ModelParams) -> Result<FitResult> {
    fit_mle_with(obs, stress, init, LikelihoodOptions::default())
}

/// [`fit_mle`] with explicit [`LikelihoodOptions`].
///
/// # Errors
///
/// As [`fit_mle`].
pub fn fit_mle_with(
    obs: &ObservationSet,
    stress: &StressSpec,
    init: &ModelParams,
    options: LikelihoodOptions,
) -> Result<FitResult> {
    let summary = summarize(obs)?;
    let mut cost = |x: &[f64; 3]| -> f64 {
        let theta = from_scaled(x);
        match loglik_from_summary(&theta, obs, stress, &summary, options) {
            Ok(l) => -l,
            Err(_) => f64::INFINITY,
        }
    };
    let x0 = to_scaled(init);
    let jitter: [[f64; 3]; 4] = [
        [0.3, 0.1, 0.25],
        [-0.3, -0.1, -0.25],
        [0.15, -0.2, 0.5],
        [-0.15, 0.2, -0.5],
    ];
    let mut evals: u32 = 0;
    let mut best: Option<([f64; 3], f64, f64)> = None;
    for start_idx in 0..5 {
        let mut start = x0;
        if start_idx > 0 {
            for i in 0..3 {
                start[i] += jitter[start_idx - 1][i];
            }
        }
        let budget_start = evals;
        let (xs, fs) = nelder_mead(&mut cost, start, MAX_EVALS_PER_START / 2, &mut evals);
        let remaining = MAX_EVALS_PER_START.saturating_sub(evals - budget_start);
        let (xr, fr, gnorm) = bfgs(&mut cost, xs, fs, remaining, &mut evals);
        if !fr.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((_, fb, _)) => fr < *fb,
        };
        if better {
            best = Some((xr, fr, gnorm));
        }
    }
    let Some((x, fneg, gnorm)) = best else {
        return Err(Error::OptimizationFailure {
            message: "all starts produced non-finite objectives".into(),
            best_theta: [init.a, init.b, init.beta],
            best_loglik: f64::NEG_INFINITY,
        });
    };
    let theta_hat = from_scaled(&x);
    if gnorm > GRAD_TOL {
        return Err(Error::OptimizationFailure {
            message: format!(
                "no start met the gradient criterion; best scaled gradient norm {gnorm:.3e}"
            ),
            best_theta: [theta_hat.a, theta_hat.b, theta_hat.beta],
            best_loglik: -fneg,
        });
    }
    Ok(FitResult {
        theta_hat,
        loglik: -fneg,
        converged: true,
        iterations: evals,
        gradient_norm: gnorm,
    })
}
