//! Budget-constrained optimal plan search and the surrounding sensitivity
//! and stability studies.
//!
//! The search space is the set of plans `(n, f, M)` whose total cost
//! `c_op f M + c_mea n M + c_it n` fits the budget, with `M` taken as
//! large as the remaining budget allows for each `(n, f)` (more
//! measurements never hurt the information). For a fixed elevation
//! threshold `omega1` the inner objective
//!
//! ```text
//! phi(omega1) = min over feasible (n, f, M) of Avar(xi_p)
//! ```
//!
//! is evaluated cell by cell; the outer minimization over `omega1` runs a
//! coarse log-spaced grid over `(0, D)` followed by golden-section
//! refinement of the best bracket. `phi` is the lower envelope of finitely
//! many curves that are continuous in `omega1`, so it is piecewise
//! continuous with kinks where the inner argmin switches; bracketing is
//! robust to those kinks where a smooth-function method is not.
//!
//! Plans whose information matrix is not positive definite (for example a
//! threshold so high the stress never elevates, leaving `a` and `b`
//! confounded) are skipped with a logged warning rather than failing the
//! search.
//!
//! The sensitivity study reruns the whole search at relatively perturbed
//! parameters `((1 + e1) a, (1 + e2) b, (1 + e3) beta)`; the stability
//! study simulates datasets at a given plan and refits them, reporting the
//! bias and mean squared error of each component.

use std::cmp::Reverse;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fisher::avar_quantile_with;
use crate::firstpassage::{bs_from_model, min_crossing_cdf, BsMapping};
use crate::inference::fit_mle;
use crate::model::{total_cost, CostModel, ModelParams, StressSpec, TestPlan};
use crate::simulate::simulate_batch;
use crate::{Error, Result};

/// Knobs of the outer `omega1` minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignOptions {
    /// Number of coarse log-spaced grid points over `[1e-4 D, 0.999 D]`.
    pub omega1_grid: u32,
    /// Golden-section stopping width as a fraction of `D`.
    pub refine_tol_frac: f64,
    /// Parameter mapping used for every variance evaluation.
    pub mapping: BsMapping,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self { omega1_grid: 200, refine_tol_frac: 1e-4, mapping: BsMapping::Scale }
    }
}

/// One evaluated `(plan, omega1)` point of the outer search: the inner
/// argmin cell at that threshold and its variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLogEntry {
    /// Units of the inner argmin.
    pub n: u32,
    /// Measurement interval of the inner argmin.
    pub f: u32,
    /// Measurement count of the inner argmin.
    pub m: u32,
    /// Threshold the cell was evaluated at.
    pub omega1: f64,
    /// The minimized asymptotic variance at this threshold.
    pub avar: f64,
}

/// Outcome of the full design search for one quantile level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    /// Quantile level the plan optimizes.
    pub p: f64,
    /// Optimal elevation threshold.
    pub omega1_star: f64,
    /// Units of the optimal plan.
    pub n_star: u32,
    /// Measurement interval of the optimal plan.
    pub f_star: u32,
    /// Measurement count of the optimal plan.
    pub m_star: u32,
    /// Coefficient of variation at the optimum, `sqrt(avar) / xi_p`.
    pub min_cv: f64,
    /// Minimized asymptotic variance.
    pub avar_star: f64,
    /// The target quantile at the evaluation parameters.
    pub xi_p_hat: f64,
    /// Probability the stress elevates before the final measurement,
    /// `G((M - 1) f)`: at least one interval actually runs at the second
    /// stress.
    pub elev_prob_mm1f: f64,
    /// Probability the threshold is crossed by the end of the test,
    /// `G(M f)`.
    pub elev_prob_mf: f64,
    /// Parameter mapping the search ran under.
    pub mapping_used: BsMapping,
    /// Coefficient of variation of the reported plan under the alternate
    /// mapping, when that evaluation succeeds; the two mappings disagree on
    /// the threshold-law dispersion, so this bounds the convention
    /// ambiguity.
    pub cv_alt_mapping: Option<f64>,
    /// Every evaluated threshold with its inner argmin, coarse grid first,
    /// then the golden-section points in evaluation order.
    pub grid_log: Vec<GridLogEntry>,
}

/// One row of the sensitivity study: a relative parameter perturbation and
/// the design search outcome at the perturbed parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    /// Relative perturbations `(e1, e2, e3)` of `(a, b, beta)`.
    pub eps: [f64; 3],
    /// The search outcome, when the row succeeded.
    pub report: Option<DesignReport>,
    /// The failure message, when it did not.
    pub error: Option<String>,
}

/// One row of the stability study: Monte Carlo bias and mean squared error
/// of the maximum likelihood estimates at a fixed plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    /// The plan the datasets were simulated under.
    pub plan: TestPlan,
    /// Requested replications.
    pub reps: u32,
    /// Replications dropped because the fit did not converge.
    pub excluded: u32,
    /// Mean of `theta_hat - theta` per component `(a, b, beta)`.
    pub bias: [f64; 3],
    /// Mean of `(theta_hat - theta)^2` per component.
    pub mse: [f64; 3],
}

/// Enumerates every `(n, f, M)` cell whose total cost fits the budget,
/// with `M` maximal for each `(n, f)`.
///
/// `n` ranges to `floor((C_b - 2 c_op) / (2 c_mea + c_it))` (the largest
/// unit count that leaves room for the cheapest test, `f = 1, M = 2`);
/// for each `n`, `f` ranges to `floor((C_b - 2 c_mea n - c_it n) /
/// (2 c_op))`; for each `(n, f)` the measurement count starts from
/// `floor((C_b - c_it n) / (c_mea n + c_op f))` and is then settled
/// against [`total_cost`] itself, because the floored quotient can land
/// one measurement short when the budget divides exactly in decimal but
/// not in binary (at the reference costs, `TC(3, 45, 15) = 1500`
/// exactly, yet the quotient rounds below 15). Cells with fewer than two
/// measurements are excluded.
///
/// # Errors
///
/// [`Error::InvalidConfig`] when the cost coefficients do not bound the
/// grid (`c_op = 0`, or `c_mea = c_it = 0`); [`Error::InfeasibleBudget`]
/// when no cell fits.
pub fn feasible_grid(costs: &CostModel) -> Result<Vec<(u32, u32, u32)>> {
    if costs.c_op <= 0.0 || (costs.c_mea <= 0.0 && costs.c_it <= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "cost coefficients must bound the plan grid: need c_op > 0 and c_mea + c_it > 0, \
             got c_op={}, c_mea={}, c_it={}",
            costs.c_op, costs.c_mea, costs.c_it
        )));
    }
    let cb = costs.budget;
    // The floored bounds are iteration caps only; each gets one index of
    // slack so an exact budget boundary cannot drop the last row. The
    // verified measurement count below decides actual feasibility.
    let n_upper = ((cb - 2.0 * costs.c_op) / (2.0 * costs.c_mea + costs.c_it)).floor() + 1.0;
    if !(n_upper >= 1.0) {
        return Err(Error::InfeasibleBudget(format!(
            "budget {cb} cannot pay for a single unit with two measurements"
        )));
    }
    let mut cells = Vec::new();
    for n in 1..=(n_upper as u32) {
        let nn = f64::from(n);
        let f_upper =
            ((cb - 2.0 * costs.c_mea * nn - costs.c_it * nn) / (2.0 * costs.c_op)).floor() + 1.0;
        if f_upper < 1.0 {
            continue;
        }
        for f in 1..=(f_upper as u32) {
            let ff = f64::from(f);
            // Same expression and operation order as `total_cost`, so the
            // grid and the cost report can never disagree on feasibility.
            let cost = |m: f64| costs.c_op * ff * m + costs.c_mea * nn * m + costs.c_it * nn;
            let mut m =
                ((cb - costs.c_it * nn) / (costs.c_mea * nn + costs.c_op * ff)).floor().max(0.0);
            while cost(m + 1.0) <= cb {
                m += 1.0;
            }
            while m >= 2.0 && cost(m) > cb {
                m -= 1.0;
            }
            if m >= 2.0 {
                cells.push((n, f, m as u32));
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::InfeasibleBudget(format!(
            "budget {cb} admits no plan with at least two measurements"
        )));
    }
    Ok(cells)
}

/// Whether candidate `(avar, (n, f, m))` beats the incumbent under the
/// deterministic tie order: smaller variance, then smaller `n`, then
/// smaller `f`, then larger `M`.
fn beats(cand: (f64, (u32, u32, u32)), best: (f64, (u32, u32, u32))) -> bool {
    if cand.0 != best.0 {
        return cand.0 < best.0;
    }
    let key = |(n, f, m): (u32, u32, u32)| (n, f, Reverse(m));
    key(cand.1) < key(best.1)
}

/// Minimizes the variance over the precomputed grid of cells at one
/// threshold. Cells with a non-positive-definite information matrix are
/// skipped with a warning; any other evaluation error fails the call.
fn phi_over_grid(
    cells: &[(u32, u32, u32)],
    omega1: f64,
    p: f64,
    params: &ModelParams,
    stress: &StressSpec,
    d: f64,
    mapping: BsMapping,
) -> Result<(f64, TestPlan)> {
    if !(omega1 > 0.0 && omega1 < d) {
        return Err(Error::Domain(format!(
            "elevation threshold omega1={omega1} must lie strictly inside (0, D={d})"
        )));
    }
    let evals: Vec<Option<(f64, (u32, u32, u32))>> = cells
        .par_iter()
        .map(|&(n, f, m)| {
            let plan = TestPlan::new(n, f, m, omega1, d)?;
            match avar_quantile_with(&plan, params, stress, d, p, mapping) {
                Ok(res) => Ok(Some((res.avar, (n, f, m)))),
                Err(Error::Conditioning { plan }) => {
                    log::warn!("skipping plan {plan}: information matrix not positive definite");
                    Ok(None)
                }
                Err(other) => Err(other),
            }
        })
        .collect::<Result<_>>()?;
    // Sequential reduction over the collected results keeps the argmin
    // independent of evaluation order.
    let mut best: Option<(f64, (u32, u32, u32))> = None;
    for cand in evals.into_iter().flatten() {
        if best.is_none_or(|b| beats(cand, b)) {
            best = Some(cand);
        }
    }
    match best {
        Some((avar, (n, f, m))) => Ok((avar, TestPlan::new(n, f, m, omega1, d)?)),
        None => Err(Error::Numerical(format!(
            "every feasible cell failed at omega1={omega1}: no plan has a positive definite \
             information matrix there"
        ))),
    }
}

/// Minimum asymptotic variance over all budget-feasible plans at a fixed
/// elevation threshold, and the plan attaining it (default mapping).
///
/// Ties are broken toward smaller `n`, then smaller `f`, then larger `M`.
///
/// # Errors
///
/// [`Error::Domain`] unless `0 < omega1 < d`; grid errors of
/// [`feasible_grid`]; [`Error::Numerical`] when every cell is skipped.
pub fn phi_of_omega1(
    omega1: f64,
    p: f64,
    params: &ModelParams,
    stress: &StressSpec,
    costs: &CostModel,
    d: f64,
) -> Result<(f64, TestPlan)> {
    let cells = feasible_grid(costs)?;
    phi_over_grid(&cells, omega1, p, params, stress, d, BsMapping::Scale)
}

/// Runs the full design search with default options (200 coarse points,
/// refinement to `1e-4 D`, scale mapping).
///
/// # Errors
///
/// As [`optimize_design_with`].
pub fn optimize_design(
    p: f64,
    params: &ModelParams,
    stress: &StressSpec,
    costs: &CostModel,
    d: f64,
) -> Result<DesignReport> {
    optimize_design_with(p, params, stress, costs, d, &DesignOptions::default())
}

/// Runs the full design search: coarse log-spaced grid over
/// `[1e-4 D, 0.999 D]`, then golden-section refinement of the bracket
/// around the best coarse point, tracking the best plan seen anywhere.
///
/// # Errors
///
/// Grid errors of [`feasible_grid`]; [`Error::InvalidConfig`] for
/// degenerate options; [`Error::Domain`] for `p` outside `(0, 1)`;
/// [`Error::Numerical`] when no threshold admits a usable plan.
pub fn optimize_design_with(
    p: f64,
    params: &ModelParams,
    stress: &StressSpec,
    costs: &CostModel,
    d: f64,
    options: &DesignOptions,
) -> Result<DesignReport> {
    if options.omega1_grid < 2 {
        return Err(Error::InvalidConfig(format!(
            "the coarse threshold grid needs at least 2 points, got {}",
            options.omega1_grid
        )));
    }
    if !(options.refine_tol_frac > 0.0) || !options.refine_tol_frac.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "refinement tolerance fraction must be positive, got {}",
            options.refine_tol_frac
        )));
    }
    let cells = feasible_grid(costs)?;
    let mapping = options.mapping;

    let mut grid_log = Vec::new();
    let mut best: Option<(f64, TestPlan)> = None;
    // One phi evaluation: log it and fold it into the running best. A
    // threshold where every cell fails is treated as +inf rather than an
    // error; only a search with no usable threshold at all fails.
    let evaluate = |omega1: f64,
                    grid_log: &mut Vec<GridLogEntry>,
                    best: &mut Option<(f64, TestPlan)>|
     -> Result<f64> {
        match phi_over_grid(&cells, omega1, p, params, stress, d, mapping) {
            Ok((avar, plan)) => {
                grid_log.push(GridLogEntry { n: plan.n, f: plan.f, m: plan.m, omega1, avar });
                let cand = (avar, (plan.n, plan.f, plan.m));
                let incumbent = best.as_ref().map(|(v, pl)| (*v, (pl.n, pl.f, pl.m)));
                if incumbent.is_none_or(|b| beats(cand, b)) {
                    *best = Some((avar, plan));
                }
                Ok(avar)
            }
            Err(Error::Numerical(_)) => Ok(f64::INFINITY),
            Err(other) => Err(other),
        }
    };

    let g = options.omega1_grid as usize;
    let (lo_log, hi_log) = ((1e-4 * d).ln(), (0.999 * d).ln());
    let omega_at = |i: usize| (lo_log + (hi_log - lo_log) * i as f64 / (g - 1) as f64).exp();
    let mut coarse = vec![f64::INFINITY; g];
    for (i, slot) in coarse.iter_mut().enumerate() {
        *slot = evaluate(omega_at(i), &mut grid_log, &mut best)?;
    }
    let coarse_best = coarse
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, v)| (i, *v))
        .filter(|(_, v)| v.is_finite());
    let Some((j, coarse_min)) = coarse_best else {
        return Err(Error::Numerical(
            "design search failed: no threshold on the coarse grid admits a plan with a \
             positive definite information matrix"
                .into(),
        ));
    };

    // Golden-section refinement of the bracket around the coarse argmin.
    let (mut lo, mut hi) = (omega_at(j.saturating_sub(1)), omega_at((j + 1).min(g - 1)));
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    let tol = options.refine_tol_frac * d;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = evaluate(x1, &mut grid_log, &mut best)?;
    let mut f2 = evaluate(x2, &mut grid_log, &mut best)?;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = evaluate(x1, &mut grid_log, &mut best)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = evaluate(x2, &mut grid_log, &mut best)?;
        }
    }

    let (avar_star, plan_star) = best.expect("a finite coarse minimum implies a best plan");
    assert!(
        avar_star <= coarse_min,
        "refinement must never worsen the coarse minimum: {avar_star} vs {coarse_min}"
    );
    debug_assert!(total_cost(&plan_star, costs) <= costs.budget);

    let result = avar_quantile_with(&plan_star, params, stress, d, p, mapping)?;
    let alt = match mapping {
        BsMapping::Scale => BsMapping::Rate,
        BsMapping::Rate => BsMapping::Scale,
    };
    let cv_alt_mapping =
        avar_quantile_with(&plan_star, params, stress, d, p, alt).map(|r| r.cv).ok();
    let bs1 = bs_from_model(params, stress.levels[0], plan_star.omega1, mapping)?;
    let f_star = f64::from(plan_star.f);
    let elev_prob_mm1f = min_crossing_cdf(f64::from(plan_star.m - 1) * f_star, plan_star.n, &bs1)?;
    let elev_prob_mf = min_crossing_cdf(f64::from(plan_star.m) * f_star, plan_star.n, &bs1)?;

    Ok(DesignReport {
        p,
        omega1_star: plan_star.omega1,
        n_star: plan_star.n,
        f_star: plan_star.f,
        m_star: plan_star.m,
        min_cv: result.cv,
        avar_star: result.avar,
        xi_p_hat: result.xi_p,
        elev_prob_mm1f,
        elev_prob_mf,
        mapping_used: mapping,
        cv_alt_mapping,
        grid_log,
    })
}

/// Reruns the design search at each relative perturbation
/// `((1 + e1) a, (1 + e2) b, (1 + e3) beta)` of the base parameters, with
/// default options. Per-row failures are recorded in the row; the study
/// continues.
pub fn sensitivity_study(
    eps_list: &[[f64; 3]],
    p: f64,
    params: &ModelParams,
    stress: &StressSpec,
    costs: &CostModel,
    d: f64,
) -> Vec<SensitivityRow> {
    sensitivity_study_with(eps_list, p, params, stress, costs, d, &DesignOptions::default())
}

/// [`sensitivity_study`] with explicit search options.
pub fn sensitivity_study_with(
    eps_list: &[[f64; 3]],
    p: f64,
    params: &ModelParams,
    stress: &StressSpec,
    costs: &CostModel,
    d: f64,
    options: &DesignOptions,
) -> Vec<SensitivityRow> {
    eps_list
        .iter()
        .map(|&eps| {
            let outcome = ModelParams::new(
                (1.0 + eps[0]) * params.a,
                (1.0 + eps[1]) * params.b,
                (1.0 + eps[2]) * params.beta,
            )
            .and_then(|perturbed| {
                optimize_design_with(p, &perturbed, stress, costs, d, options)
            });
            match outcome {
                Ok(report) => SensitivityRow { eps, report: Some(report), error: None },
                Err(e) => SensitivityRow { eps, report: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

/// Simulates `reps` datasets at each plan under the given parameters,
/// refits each dataset by maximum likelihood initialized at the truth, and
/// reports per-component bias and mean squared error. Deterministic given
/// the seed; every plan uses the same seed, so rows differ only through
/// the plans.
///
/// # Errors
///
/// [`Error::Domain`] for `reps < 100` (the summaries are meaningless
/// below that); simulation errors propagate; [`Error::Numerical`] when
/// more than 1% of the fits of any plan fail to converge, since the
/// surviving summary would be biased by the exclusions.
pub fn stability_study(
    plans: &[TestPlan],
    reps: u32,
    seed: u64,
    params: &ModelParams,
    stress: &StressSpec,
) -> Result<Vec<StabilityRow>> {
    if reps < 100 {
        return Err(Error::Domain(format!(
            "stability study needs at least 100 replications, got {reps}"
        )));
    }
    plans
        .iter()
        .map(|plan| {
            let datasets = simulate_batch(plan, params, stress, reps, seed)?;
            let fits: Vec<Option<ModelParams>> = datasets
                .par_iter()
                .map(|obs| fit_mle(obs, stress, params).ok().map(|r| r.theta_hat))
                .collect();
            let excluded = fits.iter().filter(|f| f.is_none()).count() as u32;
            if f64::from(excluded) >= 0.01 * f64::from(reps) {
                return Err(Error::Numerical(format!(
                    "{excluded} of {reps} fits failed at plan (n={}, f={}, M={}, omega1={}); \
                     refusing to summarize with more than 1% exclusions",
                    plan.n, plan.f, plan.m, plan.omega1
                )));
            }
            let kept = f64::from(reps - excluded);
            let mut bias = [0.0f64; 3];
            let mut mse = [0.0f64; 3];
            for theta in fits.into_iter().flatten() {
                let delta =
                    [theta.a - params.a, theta.b - params.b, theta.beta - params.beta];
                for (j, dj) in delta.iter().enumerate() {
                    bias[j] += dj / kept;
                    mse[j] += dj * dj / kept;
                }
            }
            Ok(StabilityRow { plan: *plan, reps, excluded, bias, mse })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case_params() -> ModelParams {
        ModelParams { a: 4.11, b: -4006.46, beta: 0.0594 }
    }

    fn case_stress() -> StressSpec {
        StressSpec { s0: 50.0, levels: vec![83.0, 133.0], unit_hours: 4.0 }
    }

    fn case_costs() -> CostModel {
        CostModel { c_op: 1.9, c_mea: 1.3, c_it: 53.0, budget: 1500.0 }
    }

    fn rel_close(got: f64, want: f64, tol: f64) -> bool {
        (got - want).abs() <= tol * want.abs().max(1e-300)
    }

    #[test]
    fn grid_matches_frozen_case_counts() {
        let cells = feasible_grid(&case_costs()).unwrap();
        assert_eq!(cells.len(), 5115, "cell count");
        assert_eq!(cells.iter().map(|c| c.0).max(), Some(26), "n_max");
        assert_eq!(
            cells.iter().filter(|c| c.0 == 13).map(|c| c.1).max(),
            Some(204),
            "f_max at n=13"
        );
        assert_eq!(
            cells.iter().find(|c| c.0 == 13 && c.1 == 52).map(|c| c.2),
            Some(7),
            "M at (13, 52)"
        );
        assert_eq!(cells.iter().map(|c| c.2).max(), Some(452), "largest M");
        assert_eq!(
            cells.iter().map(|c| u64::from(c.2) - 1).sum::<u64>(),
            32_701,
            "total interior measurements"
        );
        // Exact-decimal budget boundaries that a floored quotient would
        // drop: each of these plans costs exactly the budget.
        for probe in [(3, 45, 15), (11, 89, 5), (17, 146, 2), (21, 6, 10)] {
            assert!(cells.contains(&probe), "boundary cell {probe:?} missing from the grid");
        }
    }

    #[test]
    fn every_grid_cell_fits_the_budget_and_maximizes_m() {
        let costs = case_costs();
        let cells = feasible_grid(&costs).unwrap();
        for &(n, f, m) in &cells {
            let plan = TestPlan::new(n, f, m, 0.05, 5.0).unwrap();
            assert!(
                total_cost(&plan, &costs) <= costs.budget,
                "cell ({n},{f},{m}) exceeds the budget"
            );
            let bigger = TestPlan::new(n, f, m + 1, 0.05, 5.0).unwrap();
            assert!(
                total_cost(&bigger, &costs) > costs.budget,
                "cell ({n},{f},{m}) could afford another measurement"
            );
        }
    }

    #[test]
    fn hopeless_budgets_and_unbounded_costs_are_rejected() {
        let tiny = CostModel { budget: 10.0, ..case_costs() };
        assert!(matches!(feasible_grid(&tiny), Err(Error::InfeasibleBudget(_))));
        let free_time = CostModel { c_op: 0.0, ..case_costs() };
        assert!(matches!(feasible_grid(&free_time), Err(Error::InvalidConfig(_))));
        // A budget that pays for one unit but never two measurements.
        let no_room = CostModel { c_op: 1.9, c_mea: 1.3, c_it: 53.0, budget: 56.0 };
        assert!(matches!(feasible_grid(&no_room), Err(Error::InfeasibleBudget(_))));
    }

    #[test]
    fn phi_rejects_thresholds_outside_the_open_interval() {
        let (params, stress, costs) = (case_params(), case_stress(), case_costs());
        for omega1 in [0.0, 5.0, -0.1, 5.4] {
            assert!(matches!(
                phi_of_omega1(omega1, 0.5, &params, &stress, &costs, 5.0),
                Err(Error::Domain(_))
            ));
        }
    }

    #[test]
    fn phi_minimum_matches_frozen_case_values() {
        let (params, stress, costs) = (case_params(), case_stress(), case_costs());
        let (avar, plan) = phi_of_omega1(0.0502, 0.5, &params, &stress, &costs, 5.0).unwrap();
        assert_eq!(
            (plan.n, plan.f, plan.m),
            FROZEN_PHI_0502.1,
            "inner argmin at omega1 = 0.0502"
        );
        assert!(
            rel_close(avar, FROZEN_PHI_0502.0, 1e-9),
            "phi(0.0502) = {avar} vs frozen {}",
            FROZEN_PHI_0502.0
        );
        // At omega1 = 0.2 most plans barely elevate, so even the best cell's
        // information matrix is poorly conditioned and the solve amplifies
        // last-digit differences against the reference implementation by its
        // condition number (observed 2.3e-9); the tolerance allows for that.
        let (avar2, plan2) = phi_of_omega1(0.2, 0.5, &params, &stress, &costs, 5.0).unwrap();
        assert_eq!((plan2.n, plan2.f, plan2.m), FROZEN_PHI_02.1);
        assert!(
            rel_close(avar2, FROZEN_PHI_02.0, 1e-7),
            "phi(0.2) = {avar2} vs frozen {}",
            FROZEN_PHI_02.0
        );
    }

    #[test]
    fn optimal_design_matches_frozen_case_study() {
        let (params, stress, costs) = (case_params(), case_stress(), case_costs());
        let report = optimize_design(0.5, &params, &stress, &costs, 5.0).unwrap();
        assert_eq!(
            (report.n_star, report.f_star, report.m_star),
            FROZEN_OPT_P5.1,
            "global argmin plan"
        );
        assert!(
            (report.omega1_star - FROZEN_OPT_P5.0).abs() <= 2e-3,
            "omega1* = {} vs frozen {}",
            report.omega1_star,
            FROZEN_OPT_P5.0
        );
        assert!(
            rel_close(report.avar_star, FROZEN_OPT_P5.2, 1e-5),
            "avar* = {} vs frozen {}",
            report.avar_star,
            FROZEN_OPT_P5.2
        );
        assert!(rel_close(report.min_cv, FROZEN_OPT_P5.3, 1e-5));

        // Structural invariants of the report.
        let plan = TestPlan::new(
            report.n_star,
            report.f_star,
            report.m_star,
            report.omega1_star,
            5.0,
        )
        .unwrap();
        assert!(total_cost(&plan, &costs) <= costs.budget);
        assert!(
            (report.min_cv - report.avar_star.sqrt() / report.xi_p_hat).abs()
                <= 1e-12 * report.min_cv
        );
        assert!(report.elev_prob_mm1f >= 0.0 && report.elev_prob_mm1f <= 1.0);
        assert!(report.elev_prob_mf >= report.elev_prob_mm1f);
        assert_eq!(report.mapping_used, BsMapping::Scale);
        assert!(report.cv_alt_mapping.is_some_and(|cv| cv > 0.0));
        assert!(!report.grid_log.is_empty());
        for entry in &report.grid_log {
            let logged = TestPlan::new(entry.n, entry.f, entry.m, entry.omega1, 5.0).unwrap();
            assert!(total_cost(&logged, &costs) <= costs.budget);
            assert!(
                report.avar_star <= entry.avar,
                "best avar must not exceed any logged evaluation"
            );
        }
    }

    #[test]
    fn cv_decreases_in_p_across_the_case_study() {
        let (params, stress, costs) = (case_params(), case_stress(), case_costs());
        let low = optimize_design(0.1, &params, &stress, &costs, 5.0).unwrap();
        let high = optimize_design(0.9, &params, &stress, &costs, 5.0).unwrap();
        assert_eq!((low.n_star, low.f_star, low.m_star), FROZEN_OPT_P1.1);
        assert_eq!((high.n_star, high.f_star, high.m_star), FROZEN_OPT_P9.1);
        assert!(rel_close(low.min_cv, FROZEN_OPT_P1.3, 1e-5));
        assert!(rel_close(high.min_cv, FROZEN_OPT_P9.3, 1e-5));
        assert!(
            low.min_cv > high.min_cv,
            "minimum CV should fall as p grows: {} vs {}",
            low.min_cv,
            high.min_cv
        );
    }

    #[test]
    fn doubling_the_coarse_grid_never_worsens_the_minimum() {
        // A 2k-1 point log grid contains every point of the k point grid,
        // so the refined search over the denser grid can only improve on
        // the coarse minimum of the sparser one. A small budget keeps the
        // cell grid tiny.
        let (params, stress) = (case_params(), case_stress());
        let costs = CostModel { c_op: 1.9, c_mea: 1.3, c_it: 53.0, budget: 200.0 };
        let sparse = DesignOptions { omega1_grid: 21, ..DesignOptions::default() };
        let dense = DesignOptions { omega1_grid: 41, ..DesignOptions::default() };
        let cells = feasible_grid(&costs).unwrap();
        let (lo_log, hi_log) = ((1e-4 * 5.0f64).ln(), (0.999 * 5.0f64).ln());
        let mut sparse_coarse_min = f64::INFINITY;
        for i in 0..21 {
            let om = (lo_log + (hi_log - lo_log) * f64::from(i) / 20.0).exp();
            if let Ok((avar, _)) =
                phi_over_grid(&cells, om, 0.5, &params, &stress, 5.0, BsMapping::Scale)
            {
                sparse_coarse_min = sparse_coarse_min.min(avar);
            }
        }
        let dense_report =
            optimize_design_with(0.5, &params, &stress, &costs, 5.0, &dense).unwrap();
        let sparse_report =
            optimize_design_with(0.5, &params, &stress, &costs, 5.0, &sparse).unwrap();
        assert!(
            dense_report.avar_star <= sparse_coarse_min,
            "dense search {} must not exceed the sparse coarse minimum {sparse_coarse_min}",
            dense_report.avar_star
        );
        assert!(
            sparse_report.avar_star <= sparse_coarse_min,
            "refinement must improve on its own coarse grid"
        );
    }

    #[test]
    fn zero_perturbation_reproduces_the_baseline_search() {
        let (params, stress, costs) = (case_params(), case_stress(), case_costs());
        let options = DesignOptions { omega1_grid: 24, ..DesignOptions::default() };
        let rows = sensitivity_study_with(
            &[[0.0, 0.0, 0.0], [0.0, 0.0, -1.5]],
            0.3,
            &params,
            &stress,
            &costs,
            5.0,
            &options,
        );
        assert_eq!(rows.len(), 2);
        let baseline =
            optimize_design_with(0.3, &params, &stress, &costs, 5.0, &options).unwrap();
        let zero = rows[0].report.as_ref().expect("zero perturbation must succeed");
        assert_eq!(rows[0].eps, [0.0, 0.0, 0.0]);
        assert_eq!(
            (zero.n_star, zero.f_star, zero.m_star, zero.omega1_star, zero.avar_star),
            (
                baseline.n_star,
                baseline.f_star,
                baseline.m_star,
                baseline.omega1_star,
                baseline.avar_star
            ),
            "identical inputs must reproduce the baseline bitwise"
        );
        assert!(rows[1].report.is_none(), "beta <= 0 cannot produce a report");
        let msg = rows[1].error.as_ref().expect("failure must carry a message");
        assert!(msg.contains("beta"), "error should name the offending parameter: {msg}");
    }

    #[test]
    fn stability_study_reports_unbiasedness_scale_and_is_deterministic() {
        let (params, stress) = (case_params(), case_stress());
        let plan = TestPlan::new(13, 52, 7, 0.0502, 5.0).unwrap();
        let rows = stability_study(&[plan], 200, 0x5EED, &params, &stress).unwrap();
        assert_eq!(rows.len(), 1);
        let row = &rows[0];
        assert_eq!(row.reps, 200);
        assert!(
            f64::from(row.excluded) < 2.0,
            "fits at the case plan should essentially all converge, {} excluded",
            row.excluded
        );
        for j in 0..3 {
            assert!(
                row.mse[j] >= row.bias[j] * row.bias[j] - 1e-12,
                "MSE must dominate squared bias in component {j}"
            );
        }
        assert!(
            row.bias[2].abs() < 0.02,
            "beta bias should be small at the case plan, got {}",
            row.bias[2]
        );
        let again = stability_study(&[plan], 200, 0x5EED, &params, &stress).unwrap();
        assert_eq!(rows, again, "same seed must reproduce the rows exactly");
    }

    #[test]
    fn stability_study_rejects_too_few_replications() {
        let (params, stress) = (case_params(), case_stress());
        let plan = TestPlan::new(13, 52, 7, 0.0502, 5.0).unwrap();
        assert!(matches!(
            stability_study(&[plan], 99, 1, &params, &stress),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn design_report_survives_json_roundtrip() {
        let (params, stress, costs) = (case_params(), case_stress(), case_costs());
        let options = DesignOptions { omega1_grid: 8, ..DesignOptions::default() };
        let report =
            optimize_design_with(0.5, &params, &stress, &costs, 5.0, &options).unwrap();
        let text = serde_json::to_string(&report).unwrap();
        let back: DesignReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report, back);
    }

    // Frozen against an independent high-precision sweep of the same
    // search space (vectorized evaluation of the displayed information
    // formulas and the delta-method variance, validated by finite
    // differences). Tuples are (omega1 or avar, (n, f, M), avar, cv) as
    // noted per constant.
    // Reference values computed by an independent NumPy/SciPy implementation
    // of the same search (identical grid, coarse points, and golden-section
    // updates). phi values are deterministic per threshold and frozen at
    // 1e-9; optimizer outputs carry the refinement's bracket width, so the
    // threshold is checked at the 2e-3 level and the best variance at 1e-5.
    const FROZEN_PHI_0502: (f64, (u32, u32, u32)) = (9597558171.8531075, (12, 17, 18));
    const FROZEN_PHI_02: (f64, (u32, u32, u32)) = (133726498629919.36, (2, 13, 51));
    const FROZEN_OPT_P5: (f64, (u32, u32, u32), f64, f64) =
        (0.0285044606, (16, 8, 18), 8547090041.8546925, 0.27461874203442982);
    const FROZEN_OPT_P1: (f64, (u32, u32, u32), f64, f64) =
        (0.0281259016, (16, 8, 18), 7136087376.6437025, 0.28851311806683022);
    const FROZEN_OPT_P9: (f64, (u32, u32, u32), f64, f64) =
        (0.0288165688, (16, 8, 18), 10209245406.672995, 0.26103780232783136);
}
