//! Analytic expected Fisher information for two-level plans and the
//! delta-method asymptotic variance of a lifetime-quantile estimate.
//!
//! The log-likelihood splits into the elevation-index pmf factor and the
//! gamma increment term, and so does the information. The increment part is
//! closed-form in the trigamma function once the expected stage occupation
//! is known: a unit spends `kappa1` intervals at the first stress, so with
//! `E_kappa = sum_{k<M} k P(kappa1 = k)` and `G* = P(kappa1 <= M-1)` the
//! expected stage-1 interval count is `E_kappa + M (1 - G*)` and the
//! stage-2 count is `M G* - E_kappa`. The pmf part contributes quadratic
//! forms in the helper sums `A`, `C`, `termD` (the source's `D`, renamed to
//! avoid colliding with the critical degradation level), built from
//!
//! ```text
//! g1(t)  = n [1 - Phi(c1(t))]^(n-1) phi(c1(t))
//! g1'(t) = -n(n-1)[1 - Phi(c1)]^(n-2) phi(c1)^2 - n c1 [1 - Phi(c1)]^(n-1) phi(c1)
//! ```
//!
//! with `c1`, `c2` evaluated at the stage-1 threshold law. Each helper is a
//! sum over measurement cells of `(increment of a boundary function)^2 /
//! P(kappa1 = k)` plus a group that telescopes to zero and is kept as
//! written. Cells whose numerator or probability vanishes are taken as
//! zero: they carry no information, and the guard is what keeps extreme
//! plans (threshold crossed essentially never or always) finite.
//!
//! `avar_quantile` combines `I(theta)` with the lifetime sensitivity vector
//! `h`: `Avar(xi_p) = h' I^{-1} h / f0(xi_p)^2`, solved with the `b` row
//! and column scaled by `1e-3` (the raw magnitudes differ by three orders)
//! and a positive-definiteness check that reports the offending plan.

use serde::{Deserialize, Serialize};

use crate::firstpassage::{bs_c1, bs_c2, bs_from_model, kappa1_pmf, BsMapping, BsParams};
use crate::lifetime::{h_vector, lifetime_pdf, lifetime_quantile, LifetimeBs};
use crate::model::{arrhenius_rate, ModelParams, StressSpec, TestPlan};
use crate::specfun::{norm_cdf, norm_pdf, trigamma};
use crate::{Error, Result};

/// Internal rescaling of the `b` parameter in the variance solve: `b` is
/// three orders of magnitude larger than `a`, so its information entries
/// are about six orders smaller. Working with `b * B_SCALE` multiplies the
/// `b` row and column of the matrix by `1 / B_SCALE` and balances the
/// pivots; the quadratic form is invariant, so nothing is undone on
/// output.
const B_SCALE: f64 = 1e-3;

/// Expected Fisher information, symmetric in the order `(a, b, beta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherMatrix {
    /// Row-major entries; `entries[i][j] == entries[j][i]` by construction.
    pub entries: [[f64; 3]; 3],
}

/// Delta-method asymptotic variance of the `p`-quantile estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvarResult {
    /// `h' I^{-1} h / f0(xi_p)^2`.
    pub avar: f64,
    /// Coefficient of variation `sqrt(avar) / xi_p`.
    pub cv: f64,
    /// The target quantile `xi_p` at the evaluation parameters.
    pub xi_p: f64,
    /// The plan the variance belongs to.
    pub plan: TestPlan,
}

/// Helper quantities of the elevation-index information: the stage-1
/// threshold functions and the scalar sums entering the matrix assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct HelperTerms {
    /// Stage-1 threshold-crossing parameters (first stress, threshold
    /// `omega1`).
    bs: BsParams,
    /// Number of units.
    n: u32,
    /// `sum_{k=1}^{M-1} k P(kappa1 = k)`.
    pub e_kappa: f64,
    /// `P(kappa1 <= M-1)`, the probability the stress is elevated before
    /// the final measurement.
    pub g_star: f64,
    /// Quadratic helper sum entering the `a`/`b` block as `A/4`.
    pub a_term: f64,
    /// Cross helper sum entering the `a,beta` and `b,beta` couplings.
    pub c_term: f64,
    /// Quadratic helper sum entering the `beta,beta` entry (the source's
    /// `D`, renamed to avoid the critical level `D`).
    pub term_d: f64,
}

impl HelperTerms {
    /// `c1(t)` of the stage-1 threshold law.
    ///
    /// # Errors
    ///
    /// [`Error::Domain`] for `t <= 0`.
    pub fn c1(&self, t: f64) -> Result<f64> {
        bs_c1(t, &self.bs)
    }

    /// `c2(t)` of the stage-1 threshold law.
    ///
    /// # Errors
    ///
    /// [`Error::Domain`] for `t <= 0`.
    pub fn c2(&self, t: f64) -> Result<f64> {
        bs_c2(t, &self.bs)
    }

    /// Derivative of the minimum-crossing cdf with respect to `c1`:
    /// `g1(t) = n [1 - Phi(c1)]^(n-1) phi(c1)`.
    ///
    /// # Errors
    ///
    /// [`Error::Domain`] for `t <= 0`.
    pub fn g1(&self, t: f64) -> Result<f64> {
        let c1 = self.c1(t)?;
        let surv = norm_cdf(-c1);
        Ok(f64::from(self.n) * surv.powi(self.n as i32 - 1) * norm_pdf(c1))
    }

    /// Derivative of [`HelperTerms::g1`] with respect to `c1`.
    ///
    /// # Errors
    ///
    /// [`Error::Domain`] for `t <= 0`.
    pub fn g1_prime(&self, t: f64) -> Result<f64> {
        let c1 = self.c1(t)?;
        let surv = norm_cdf(-c1);
        let phi = norm_pdf(c1);
        let nn = f64::from(self.n);
        let pair = if self.n >= 2 {
            nn * (nn - 1.0) * surv.powi(self.n as i32 - 2) * phi * phi
        } else {
            0.0
        };
        Ok(-pair - nn * c1 * surv.powi(self.n as i32 - 1) * phi)
    }
}

/// A quadratic cell `num / den` with the degenerate cells taken as zero.
///
/// A vanishing numerator contributes nothing regardless of the cell
/// probability. A vanishing cell probability also contributes nothing: the
/// boundary increments decay like the normal density while the cell
/// probability decays like the normal tail, so the true ratio tends to
/// zero whenever the probability does. Without the second guard a cell
/// whose probability underflows while its squared increment is still
/// representable (the tail is one density factor larger) would divide a
/// subnormal by zero and poison the sum.
fn guarded_cell(num: f64, den: f64) -> f64 {
    if num == 0.0 || den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn validate_two_level(plan: &TestPlan, stress: &StressSpec) -> Result<()> {
    if plan.m < 2 {
        return Err(Error::Domain(format!(
            "the information formulas need at least two measurements, got M = {}",
            plan.m
        )));
    }
    if stress.m() != 2 {
        return Err(Error::Unsupported(format!(
            "the information formulas cover two-level stress profiles, got m = {}",
            stress.m()
        )));
    }
    Ok(())
}

/// Computes the helper sums with the default (scale) parameter mapping.
///
/// # Errors
///
/// [`Error::Domain`] for `M < 2`; [`Error::Unsupported`] unless the stress
/// profile has two levels; [`Error::Numerical`] when a helper sum is not
/// finite.
pub fn helper_terms(
    plan: &TestPlan,
    params: &ModelParams,
    stress: &StressSpec,
) -> Result<HelperTerms> {
    helper_terms_with(plan, params, stress, BsMapping::Scale)
}

/// [`helper_terms`] with an explicit parameter mapping.
///
/// # Errors
///
/// As [`helper_terms`].
pub fn helper_terms_with(
    plan: &TestPlan,
    params: &ModelParams,
    stress: &StressSpec,
    mapping: BsMapping,
) -> Result<HelperTerms> {
    validate_two_level(plan, stress)?;
    let bs = bs_from_model(params, stress.levels[0], plan.omega1, mapping)?;
    let pmf = kappa1_pmf(plan, params, stress, mapping)?;
    let m = plan.m as usize;
    let f = f64::from(plan.f);
    let alpha1 = arrhenius_rate(params, stress.levels[0])?;
    let nn = f64::from(plan.n);
    let gamma1 = bs.gamma_scale;

    let e_kappa: f64 = (1..m).map(|k| k as f64 * pmf.prob(k as u32)).sum();
    let g_star = 1.0 - pmf.prob(plan.m);

    // Boundary functions on the measurement grid t = f..(M-1)f.
    let grid = m - 1;
    let mut q = vec![0.0; grid]; // c2 * g1, for A
    let mut r = vec![0.0; grid]; // sqrt(alpha1/t) * g1, for C and termD
    let mut cdf = vec![0.0; grid]; // minimum-crossing cdf G(t)
    let mut u_a = vec![0.0; grid]; // telescoping group of A
    let mut u_c = vec![0.0; grid]; // telescoping group of C
    let mut u_d = vec![0.0; grid]; // telescoping group of termD
    for k in 0..grid {
        let t = (k as f64 + 1.0) * f;
        let c1 = (t / gamma1).sqrt() - (gamma1 / t).sqrt();
        let c1 = c1 / bs.delta;
        let c2 = ((t / gamma1).sqrt() + (gamma1 / t).sqrt()) / bs.delta;
        let surv = norm_cdf(-c1);
        let phi = norm_pdf(c1);
        let g1 = nn * surv.powi(plan.n as i32 - 1) * phi;
        let pair = if plan.n >= 2 {
            nn * (nn - 1.0) * surv.powi(plan.n as i32 - 2) * phi * phi
        } else {
            0.0
        };
        let g1p = -pair - nn * c1 * surv.powi(plan.n as i32 - 1) * phi;
        let root = (alpha1 / t).sqrt();
        q[k] = c2 * g1;
        r[k] = root * g1;
        cdf[k] = 1.0 - surv.powi(plan.n as i32);
        u_a[k] = c1 * g1 + c2 * c2 * g1p;
        u_c[k] = r[k] + gamma1 * (alpha1 / t) * g1p;
        u_d[k] = 2.0 * gamma1 * r[k] + g1p * (gamma1 * root) * (gamma1 * root);
    }

    // Cell increments over k = 1..M, with the boundary cells closing the
    // telescopes: the first cell keeps the raw value, the last carries the
    // complement.
    let mut a_quad = 0.0;
    let mut c_quad = 0.0;
    let mut d_quad = 0.0;
    for k in 0..m {
        let (dq, dr, dg) = if k == 0 {
            (q[0], r[0], cdf[0])
        } else if k < m - 1 {
            (q[k] - q[k - 1], r[k] - r[k - 1], cdf[k] - cdf[k - 1])
        } else {
            (-q[grid - 1], -r[grid - 1], 1.0 - cdf[grid - 1])
        };
        a_quad += guarded_cell(dq * dq, dg);
        c_quad += guarded_cell(dq * dr, dg);
        d_quad += guarded_cell(dr * dr, dg);
    }
    d_quad *= gamma1 * gamma1;

    // Telescoping groups, kept exactly as written (they vanish
    // analytically and stay at rounding level numerically).
    let inner_a: f64 = (1..grid).map(|k| u_a[k] - u_a[k - 1]).sum();
    let inner_c: f64 = (1..grid).map(|k| u_c[k] - u_c[k - 1]).sum();
    let inner_d: f64 = (1..grid).map(|k| u_d[k] - u_d[k - 1]).sum();
    let a_lin = -inner_a - u_a[0] + u_a[grid - 1];
    let c_lin = -inner_c - u_c[0] + u_c[grid - 1];
    let d_lin = inner_d + u_d[0] - u_d[grid - 1];

    let terms = HelperTerms {
        bs,
        n: plan.n,
        e_kappa,
        g_star,
        a_term: a_quad + a_lin,
        c_term: c_quad + c_lin,
        term_d: d_quad + d_lin,
    };
    if ![terms.a_term, terms.c_term, terms.term_d].iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite information helper sums at plan (n={}, f={}, M={}, omega1={})",
            plan.n, plan.f, plan.m, plan.omega1
        )));
    }
    Ok(terms)
}

/// Elevation-index part of the information matrix.
fn kappa_part(terms: &HelperTerms, beta: f64, w1: f64, mapping: BsMapping) -> [[f64; 3]; 3] {
    // The coupling enters through d(gamma1)/d(beta); under the scale
    // mapping gamma1 ~ 1/beta and under the rate mapping gamma1 ~ beta,
    // flipping the sign of the cross terms.
    let sign = match mapping {
        BsMapping::Scale => 1.0,
        BsMapping::Rate => -1.0,
    };
    let gamma1 = terms.bs.gamma_scale;
    let kaa = terms.a_term / 4.0;
    let kax = sign * terms.c_term * gamma1 / (2.0 * beta);
    let kxx = terms.term_d / (beta * beta);
    [
        [kaa, w1 * kaa, kax],
        [w1 * kaa, w1 * w1 * kaa, w1 * kax],
        [kax, w1 * kax, kxx],
    ]
}

/// Expected Fisher information of `(a, b, beta)` under the default (scale)
/// parameter mapping.
///
/// # Errors
///
/// As [`helper_terms`]; [`Error::Numerical`] when an entry overflows.
pub fn fisher_info(
    plan: &TestPlan,
    params: &ModelParams,
    stress: &StressSpec,
) -> Result<FisherMatrix> {
    fisher_info_with(plan, params, stress, BsMapping::Scale)
}

/// [`fisher_info`] with an explicit parameter mapping.
///
/// # Errors
///
/// As [`fisher_info`].
pub fn fisher_info_with(
    plan: &TestPlan,
    params: &ModelParams,
    stress: &StressSpec,
    mapping: BsMapping,
) -> Result<FisherMatrix> {
    let terms = helper_terms_with(plan, params, stress, mapping)?;
    let f = f64::from(plan.f);
    let nn = f64::from(plan.n);
    let mm = f64::from(plan.m);
    let beta = params.beta;
    let alpha1 = arrhenius_rate(params, stress.levels[0])?;
    let alpha2 = arrhenius_rate(params, stress.levels[1])?;
    let w1 = 1.0 / (273.0 + stress.levels[0]);
    let w2 = 1.0 / (273.0 + stress.levels[1]);
    let psi1 = trigamma(f * alpha1)?;
    let psi2 = trigamma(f * alpha2)?;
    let ek = terms.e_kappa;
    let gs = terms.g_star;

    // Expected per-unit occupation mix: a weight pair (x1, x2) applied per
    // stage, as E_kappa * (x1 - x2) + M x1 (1 - G*) + M x2 G*.
    let mix = |x1: f64, x2: f64| (x1 - x2) * ek + mm * x1 * (1.0 - gs) + mm * x2 * gs;

    let kp = kappa_part(&terms, beta, w1, mapping);
    let i_aa = nn * f * f * mix(alpha1 * alpha1 * psi1, alpha2 * alpha2 * psi2) + kp[0][0];
    let i_bb = nn * f * f * mix(alpha1 * w1 * alpha1 * w1 * psi1, alpha2 * w2 * alpha2 * w2 * psi2)
        + kp[1][1];
    let i_ab =
        nn * f * f * mix(alpha1 * alpha1 * w1 * psi1, alpha2 * alpha2 * w2 * psi2) + kp[0][1];
    let i_ax = nn * f / beta * mix(alpha1, alpha2) + kp[0][2];
    let i_bx = nn * f / beta * mix(alpha1 * w1, alpha2 * w2) + kp[1][2];
    let i_xx = nn * f / (beta * beta) * mix(alpha1, alpha2) + kp[2][2];

    let entries = [[i_aa, i_ab, i_ax], [i_ab, i_bb, i_bx], [i_ax, i_bx, i_xx]];
    if !entries.iter().flatten().all(|v| v.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite information entry at plan (n={}, f={}, M={}, omega1={})",
            plan.n, plan.f, plan.m, plan.omega1
        )));
    }
    Ok(FisherMatrix { entries })
}

fn plan_label(plan: &TestPlan) -> String {
    format!("(n={}, f={}, M={}, omega1={})", plan.n, plan.f, plan.m, plan.omega1)
}

/// Solves `I y = h` with the `b` row and column scaled by [`B_SCALE`] and
/// returns the quadratic form `h' I^{-1} h`, refusing matrices that are not
/// positive definite.
fn quadratic_form(info: &FisherMatrix, h: &[f64; 3], plan: &TestPlan) -> Result<f64> {
    // Rescaling b to b * B_SCALE divides its score by B_SCALE, so the
    // matrix row and column and the h component scale by 1 / B_SCALE.
    let s = [1.0, 1.0 / B_SCALE, 1.0];
    let mut m = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = info.entries[i][j] * s[i] * s[j];
        }
    }
    let rhs = [h[0] * s[0], h[1] * s[1], h[2] * s[2]];

    // Sylvester criterion on the scaled symmetric matrix.
    let d1 = m[0][0];
    let d2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let d3 = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if !(d1 > 0.0 && d2 > 0.0 && d3 > 0.0) || ![d1, d2, d3].iter().all(|v| v.is_finite()) {
        return Err(Error::Conditioning { plan: plan_label(plan) });
    }

    // Gauss elimination with partial pivoting. A pivot collapsing by ten
    // orders against the matrix scale marks the system as numerically
    // singular (e.g. a plan whose stress never elevates leaves a and b
    // confounded, with exactly proportional rows).
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut aug = [[0.0f64; 4]; 3];
    for i in 0..3 {
        aug[i][..3].copy_from_slice(&m[i]);
        aug[i][3] = rhs[i];
    }
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| {
                aug[a][col]
                    .abs()
                    .partial_cmp(&aug[b][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if aug[pivot][col].abs() <= 1e-10 * scale {
            return Err(Error::Conditioning { plan: plan_label(plan) });
        }
        aug.swap(col, pivot);
        for row in (col + 1)..3 {
            let factor = aug[row][col] / aug[col][col];
            for j in col..4 {
                aug[row][j] -= factor * aug[col][j];
            }
        }
    }
    let mut y = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut acc = aug[i][3];
        for j in (i + 1)..3 {
            acc -= aug[i][j] * y[j];
        }
        y[i] = acc / aug[i][i];
    }
    let quad: f64 = rhs.iter().zip(&y).map(|(a, b)| a * b).sum();
    if !quad.is_finite() || quad <= 0.0 {
        return Err(Error::Conditioning { plan: plan_label(plan) });
    }
    Ok(quad)
}

/// Delta-method asymptotic variance and coefficient of variation of the
/// estimated `p`-quantile of the use-condition lifetime, under the default
/// (scale) parameter mapping.
///
/// # Errors
///
/// As [`fisher_info`]; [`Error::Domain`] for `p` outside `(0, 1)`;
/// [`Error::Conditioning`] naming the plan when the information matrix is
/// not positive definite.
pub fn avar_quantile(
    plan: &TestPlan,
    params: &ModelParams,
    stress: &StressSpec,
    d: f64,
    p: f64,
) -> Result<AvarResult> {
    avar_quantile_with(plan, params, stress, d, p, BsMapping::Scale)
}

/// [`avar_quantile`] with an explicit parameter mapping.
///
/// # Errors
///
/// As [`avar_quantile`].
pub fn avar_quantile_with(
    plan: &TestPlan,
    params: &ModelParams,
    stress: &StressSpec,
    d: f64,
    p: f64,
    mapping: BsMapping,
) -> Result<AvarResult> {
    let info = fisher_info_with(plan, params, stress, mapping)?;
    let lb = LifetimeBs::from_model(params, stress, d)?;
    let xi_p = lifetime_quantile(p, &lb)?;
    let h = h_vector(xi_p, params, stress, d)?;
    let density = lifetime_pdf(xi_p, &lb)?;
    let quad = quadratic_form(&info, &h, plan)?;
    let avar = quad / (density * density);
    if !avar.is_finite() {
        return Err(Error::Conditioning { plan: plan_label(plan) });
    }
    Ok(AvarResult { avar, cv: avar.sqrt() / xi_p, xi_p, plan: *plan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::firstpassage::KappaPmf;

    fn case_params() -> ModelParams {
        ModelParams { a: 4.11, b: -4006.46, beta: 0.0594 }
    }

    fn case_stress() -> StressSpec {
        StressSpec { s0: 50.0, levels: vec![83.0, 133.0], unit_hours: 4.0 }
    }

    fn case_plan() -> TestPlan {
        TestPlan::new(13, 52, 7, 0.0502, 5.0).unwrap()
    }

    fn rel_close(got: f64, want: f64, tol: f64) -> bool {
        (got - want).abs() <= tol * want.abs().max(1e-300)
    }

    #[test]
    fn single_unit_helpers_reduce_to_plain_normal_terms() {
        let plan = TestPlan::new(1, 52, 7, 0.0502, 5.0).unwrap();
        let terms = helper_terms(&plan, &case_params(), &case_stress()).unwrap();
        for t in [52.0, 156.0, 312.0] {
            let c1 = terms.c1(t).unwrap();
            assert!(
                rel_close(terms.g1(t).unwrap(), norm_pdf(c1), 1e-14),
                "n=1: g1 must be phi(c1) at t={t}"
            );
            assert!(
                rel_close(terms.g1_prime(t).unwrap(), -c1 * norm_pdf(c1), 1e-14),
                "n=1: g1' must be -c1 phi(c1) at t={t}"
            );
        }
    }

    #[test]
    fn expected_elevation_index_stays_below_cap_and_matches_pmf() {
        let (params, stress) = (case_params(), case_stress());
        for (n, f, m, om) in [(13, 52, 7, 0.0502), (5, 20, 3, 0.4), (26, 10, 12, 0.01)] {
            let plan = TestPlan::new(n, f, m, om, 5.0).unwrap();
            let terms = helper_terms(&plan, &params, &stress).unwrap();
            assert!(
                terms.e_kappa <= f64::from(m - 1),
                "E_kappa is a mean over 1..M-1 with deficient mass"
            );
            let pmf = kappa1_pmf(&plan, &params, &stress, BsMapping::Scale).unwrap();
            let direct: f64 = (1..m).map(|k| f64::from(k) * pmf.prob(k)).sum();
            assert!(rel_close(terms.e_kappa, direct, 1e-14));
            assert!(rel_close(terms.g_star, 1.0 - pmf.prob(m), 1e-14));
        }
    }

    #[test]
    fn helper_sums_match_frozen_case_values() {
        // Frozen against an independent high-precision evaluation of the
        // printed expressions, itself validated by finite differences of
        // the elevation pmf (relative agreement 6.4e-10).
        let terms = helper_terms(&case_plan(), &case_params(), &case_stress()).unwrap();
        assert!(rel_close(terms.a_term, 18.66447929577523, 1e-11), "A = {}", terms.a_term);
        assert!(rel_close(terms.c_term, 0.014516007667996135, 1e-11), "C = {}", terms.c_term);
        assert!(rel_close(terms.term_d, 13.023843293728108, 1e-11), "termD = {}", terms.term_d);
        assert!(rel_close(terms.e_kappa, 3.3559212280718107, 1e-12));
        assert!(rel_close(terms.g_star, 0.79212158356901, 1e-12));
    }

    #[test]
    fn information_matrix_matches_frozen_case_values() {
        let info = fisher_info(&case_plan(), &case_params(), &case_stress()).unwrap();
        let want = [
            [96.8438883035227, 0.2618385943813156, 252.66707494002344],
            [0.2618385943813156, 0.0007103913254486063, 0.6825330920484078],
            [252.66707494002344, 0.6825330920484078, 5742.904428572143],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    rel_close(info.entries[i][j], want[i][j], 1e-10),
                    "I[{i}][{j}] = {} vs {}",
                    info.entries[i][j],
                    want[i][j]
                );
            }
        }
    }

    #[test]
    fn information_matrix_is_symmetric_by_construction() {
        let info = fisher_info(&case_plan(), &case_params(), &case_stress()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(info.entries[i][j], info.entries[j][i]);
            }
        }
    }

    #[test]
    fn equal_stress_levels_cancel_the_occupation_dependence() {
        // With both levels equal the per-stage weights coincide, so the
        // increment part of I_aa must collapse to n f^2 M alpha^2
        // psi_1(f alpha) regardless of the elevation distribution.
        let stress = StressSpec { s0: 50.0, levels: vec![83.0, 83.0], unit_hours: 4.0 };
        let (plan, params) = (case_plan(), case_params());
        let info = fisher_info(&plan, &params, &stress).unwrap();
        let terms = helper_terms(&plan, &params, &stress).unwrap();
        let alpha = arrhenius_rate(&params, 83.0).unwrap();
        let f = 52.0;
        let want = 13.0 * f * f * 7.0 * alpha * alpha * trigamma(f * alpha).unwrap();
        let data_part = info.entries[0][0] - terms.a_term / 4.0;
        assert!(
            rel_close(data_part, want, 1e-12),
            "equal-stress data part {data_part} vs {want}"
        );
    }

    #[test]
    fn kappa_part_matches_finite_differences_of_the_pmf() {
        // The multinomial information of the elevation index is
        // sum_k (dp_k/dtheta_i)(dp_k/dtheta_j)/p_k; the analytic A, C,
        // termD assembly must reproduce it. Both mappings are checked since
        // they flip the beta couplings.
        let (plan, stress) = (case_plan(), case_stress());
        let base = case_params();
        for mapping in [BsMapping::Scale, BsMapping::Rate] {
            let terms = helper_terms_with(&plan, &base, &stress, mapping).unwrap();
            let w1 = 1.0 / (273.0 + stress.levels[0]);
            let analytic = kappa_part(&terms, base.beta, w1, mapping);

            let pmf_at = |theta: &ModelParams| -> Vec<f64> {
                kappa1_pmf(&plan, theta, &stress, mapping).unwrap().probs
            };
            let steps = [1e-6, 3e-4, base.beta * 1e-6];
            let bump = |i: usize, s: f64| -> ModelParams {
                let mut t = base;
                match i {
                    0 => t.a += s,
                    1 => t.b += s,
                    _ => t.beta += s,
                }
                t
            };
            let p0 = pmf_at(&base);
            let mut grads = [[0.0f64; 7]; 3];
            for i in 0..3 {
                let plus = pmf_at(&bump(i, steps[i]));
                let minus = pmf_at(&bump(i, -steps[i]));
                for k in 0..7 {
                    grads[i][k] = (plus[k] - minus[k]) / (2.0 * steps[i]);
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    let fd: f64 = (0..7).map(|k| grads[i][k] * grads[j][k] / p0[k]).sum();
                    assert!(
                        rel_close(analytic[i][j], fd, 1e-6),
                        "{mapping:?} mapping kappa-part [{i}][{j}]: analytic {} vs fd {fd}",
                        analytic[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn quantile_variance_matches_frozen_case_values() {
        let (plan, params, stress) = (case_plan(), case_params(), case_stress());
        let cases = [
            (0.1, 10311023446.573017, 0.3468058159895514),
            (0.5, 12851337300.04206, 0.3367403779469952),
            (0.9, 16039632014.591654, 0.32719283366209323),
        ];
        for (p, avar, cv) in cases {
            let got = avar_quantile(&plan, &params, &stress, 5.0, p).unwrap();
            assert!(
                rel_close(got.avar, avar, 1e-9),
                "avar(p={p}) = {} vs {avar}",
                got.avar
            );
            assert!(rel_close(got.cv, cv, 1e-9), "cv(p={p}) = {} vs {cv}", got.cv);
            assert!(
                (got.cv - got.avar.sqrt() / got.xi_p).abs() <= 1e-12 * got.cv,
                "cv must equal sqrt(avar)/xi_p"
            );
            assert!(got.avar > 0.0 && got.cv > 0.0);
        }
    }

    #[test]
    fn solving_the_scaled_system_reproduces_the_right_hand_side() {
        // Residual check of the pivoted solve: recompute I^{-1} h through
        // the public quadratic form at unit vectors and verify I x = h.
        let (plan, params, stress) = (case_plan(), case_params(), case_stress());
        let info = fisher_info(&plan, &params, &stress).unwrap();
        let lb = LifetimeBs::from_model(&params, &stress, 5.0).unwrap();
        let xi = lifetime_quantile(0.5, &lb).unwrap();
        let h = h_vector(xi, &params, &stress, 5.0).unwrap();
        // Solve by polarization: x_i = e_i' I^{-1} h recovered from
        // quadratic forms q(u) = u' I^{-1} u via
        // e_i' I^{-1} h = (q(h + e_i) - q(h - e_i)) / 4.
        let mut x = [0.0f64; 3];
        for i in 0..3 {
            let mut plus = h;
            let mut minus = h;
            let scale = h[i].abs().max(1.0);
            plus[i] += scale;
            minus[i] -= scale;
            let qp = quadratic_form(&info, &plus, &plan).unwrap();
            let qm = quadratic_form(&info, &minus, &plan).unwrap();
            x[i] = (qp - qm) / (4.0 * scale);
        }
        for i in 0..3 {
            let recomposed: f64 = (0..3).map(|j| info.entries[i][j] * x[j]).sum();
            // Backward-error bound: the row sum of |I_ij x_j| sets the
            // cancellation scale of the recomposition.
            let row_scale: f64 = (0..3).map(|j| (info.entries[i][j] * x[j]).abs()).sum();
            assert!(
                (recomposed - h[i]).abs() <= 1e-9 * row_scale.max(h[i].abs()),
                "residual row {i}: I x = {recomposed} vs h = {}",
                h[i]
            );
        }
    }

    #[test]
    fn doubling_units_roughly_halves_the_variance() {
        // The increment information scales linearly in n while the
        // elevation part shifts sublinearly, so the halving is approximate.
        let (params, stress) = (case_params(), case_stress());
        let base = avar_quantile(&case_plan(), &params, &stress, 5.0, 0.5).unwrap();
        let doubled_plan = TestPlan::new(26, 52, 7, 0.0502, 5.0).unwrap();
        let doubled = avar_quantile(&doubled_plan, &params, &stress, 5.0, 0.5).unwrap();
        let ratio = doubled.avar / base.avar;
        assert!(
            (2.0 * ratio - 1.0).abs() <= 0.1,
            "avar(2n)/avar(n) = {ratio}, expected 0.5 within 10%"
        );
    }

    #[test]
    fn degenerate_equal_stress_information_is_rejected_as_singular() {
        // Equal levels make the a and b rows proportional; the variance
        // solve must refuse and name the plan.
        let stress = StressSpec { s0: 50.0, levels: vec![83.0, 83.0], unit_hours: 4.0 };
        let err = avar_quantile(&case_plan(), &case_params(), &stress, 5.0, 0.5).unwrap_err();
        match err {
            Error::Conditioning { plan } => {
                assert!(plan.contains("n=13"), "plan label should identify the plan: {plan}");
            }
            other => panic!("expected a conditioning error, got {other}"),
        }
    }

    #[test]
    fn extreme_thresholds_keep_the_information_finite() {
        // With f = 204 and omega1 = 0.6181 the threshold is essentially
        // never crossed before the only interior measurement: the crossing
        // cdf underflows to zero while the density-scaled numerators are
        // still representable, so the degenerate-cell guard is load
        // bearing. The elevation part must vanish, the matrix must stay
        // finite, and since the stress then never elevates, a and b are
        // confounded and the variance solve must refuse the plan.
        let (params, stress) = (case_params(), case_stress());
        let plan = TestPlan::new(13, 204, 2, 0.6181, 5.0).unwrap();
        let terms = helper_terms(&plan, &params, &stress).unwrap();
        assert!(
            terms.a_term.abs() < 1e-200,
            "elevation information should vanish, got A = {}",
            terms.a_term
        );
        assert!((terms.g_star, terms.e_kappa) == (0.0, 0.0));
        let info = fisher_info(&plan, &params, &stress).unwrap();
        assert!(info.entries.iter().flatten().all(|v| v.is_finite()));
        assert!(matches!(
            avar_quantile(&plan, &params, &stress, 5.0, 0.5),
            Err(Error::Conditioning { .. })
        ));

        // The opposite extreme (threshold crossed almost surely at the
        // first measurement) keeps moderate arguments and a regular matrix.
        let tiny = TestPlan::new(13, 52, 7, 5.0e-7, 5.0).unwrap();
        let info_tiny = fisher_info(&tiny, &params, &stress).unwrap();
        assert!(info_tiny.entries.iter().flatten().all(|v| v.is_finite()));
        let avar = avar_quantile(&tiny, &params, &stress, 5.0, 0.5).unwrap();
        assert!(avar.avar.is_finite() && avar.avar > 0.0);
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let (params, stress) = (case_params(), case_stress());
        // A single-measurement plan can only arise through deserialization,
        // never through the validating constructor.
        let degenerate: TestPlan =
            serde_json::from_str(r#"{"n":13,"f":52,"m":1,"omega1":0.05,"d":5.0}"#).unwrap();
        assert!(matches!(
            helper_terms(&degenerate, &params, &stress),
            Err(Error::Domain(_))
        ));
        let three = StressSpec { s0: 50.0, levels: vec![83.0, 100.0, 133.0], unit_hours: 4.0 };
        assert!(matches!(
            fisher_info(&case_plan(), &params, &three),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            avar_quantile(&case_plan(), &params, &stress, 5.0, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn rate_mapping_flips_only_the_beta_couplings_of_the_kappa_part() {
        let (plan, params, stress) = (case_plan(), case_params(), case_stress());
        let w1 = 1.0 / (273.0 + stress.levels[0]);
        let scale_terms = helper_terms_with(&plan, &params, &stress, BsMapping::Scale).unwrap();
        let k_scale = kappa_part(&scale_terms, params.beta, w1, BsMapping::Scale);
        let k_flip = kappa_part(&scale_terms, params.beta, w1, BsMapping::Rate);
        for i in 0..3 {
            for j in 0..3 {
                if (i == 2) ^ (j == 2) {
                    assert_eq!(k_flip[i][j], -k_scale[i][j], "coupling sign must flip");
                } else {
                    assert_eq!(k_flip[i][j], k_scale[i][j], "block entries must not change");
                }
            }
        }
    }

    #[test]
    fn kappa_pmf_cells_used_by_helpers_sum_to_one() {
        // Guard against drift between the helper grid and the pmf: the
        // cells implied by the helper cdf boundaries are exactly the pmf.
        let (plan, params, stress) = (case_plan(), case_params(), case_stress());
        let pmf = kappa1_pmf(&plan, &params, &stress, BsMapping::Scale).unwrap();
        let total: f64 = (1..=plan.m).map(|k| pmf.prob(k)).sum();
        assert!((total - 1.0).abs() <= 1e-12);
        let _ = KappaPmf::new(plan.m, pmf.probs.clone()).unwrap();
    }
}
