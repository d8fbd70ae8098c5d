//! Birnbaum-Saunders (BS) approximations for threshold-crossing times.
//!
//! A gamma degradation process with rate `alpha` and scale `beta` crosses a
//! level increment `d_omega` at a random time whose distribution is well
//! approximated by a BS law with cdf
//!
//! ```text
//! F(t) = Phi(c1(t)),   c1(t) = (sqrt(t/gamma) - sqrt(gamma/t)) / delta
//! ```
//!
//! Two parameterizations of `(delta, gamma)` in terms of `(alpha, beta,
//! d_omega)` coexist in practice:
//!
//! * scale mapping (default): `delta = sqrt(beta / d_omega)`,
//!   `gamma = d_omega / (beta * alpha)` — consistent with the use-condition
//!   lifetime approximation and the published quantile table;
//! * rate mapping (diagnostic): `delta = 1 / sqrt(beta * d_omega)`,
//!   `gamma = beta * d_omega / alpha`.
//!
//! The minimum crossing time over `n` independent units has cdf
//! `G(t) = 1 - (1 - F(t))^n`; the discrete elevation index `kappa_1` (the
//! first measurement at which any unit's cumulative degradation reaches the
//! threshold) has the telescoping pmf built from `G` at multiples of the
//! measurement interval.
//!
//! For three stress levels the joint law of the two elevation indexes uses
//! the factorized joint survival
//!
//! ```text
//! Pr(tau_(1),1 > t1, tau_(1),2 > t2) ~= [S1(t1) * S2(t2 - t1)]^n
//! ```
//!
//! where `S1` is the stage-1 BS survival of the first threshold and `S2` the
//! stage-2 BS survival of the increment between thresholds. The factorized
//! form is an approximation: it is not monotone in `t1` at fixed `t2`, so it
//! is not a genuine joint survival function, and the rectangle probabilities
//! derived from it can be negative where stage-1 survival is nearly flat
//! across several measurement cells. The full table still sums to one and
//! marginalizes to the single-index pmf exactly, by telescoping.

use serde::{Deserialize, Serialize};

use crate::model::{arrhenius_rate, ModelParams, StressSpec, TestPlan};
use crate::specfun::{norm_cdf, norm_pdf};
use crate::{Error, Result};

/// Which `(delta, gamma)` parameterization to derive from the gamma-process
/// parameters. `Scale` reproduces the published lifetime quantiles and is
/// the default; `Rate` is kept as a diagnostic alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BsMapping {
    /// `delta = sqrt(beta/d_omega)`, `gamma = d_omega/(beta*alpha)`.
    #[default]
    Scale,
    /// `delta = 1/sqrt(beta*d_omega)`, `gamma = beta*d_omega/alpha`.
    Rate,
}

impl std::fmt::Display for BsMapping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BsMapping::Scale => "scale",
            BsMapping::Rate => "rate",
        })
    }
}

impl std::str::FromStr for BsMapping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scale" => Ok(BsMapping::Scale),
            "rate" => Ok(BsMapping::Rate),
            other => Err(Error::InvalidConfig(format!(
                "unknown BS mapping {other:?}, expected \"scale\" or \"rate\""
            ))),
        }
    }
}

/// Parameters of a Birnbaum-Saunders distribution: shape `delta` and scale
/// (median) `gamma_scale`, both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsParams {
    /// Shape parameter `delta`.
    pub delta: f64,
    /// Scale parameter `gamma`; also the distribution's median.
    pub gamma_scale: f64,
}

impl BsParams {
    /// Validates strict positivity of both parameters.
    pub fn new(delta: f64, gamma_scale: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "BS shape delta must be positive and finite, got {delta}"
            )));
        }
        if !(gamma_scale > 0.0) || !gamma_scale.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "BS scale gamma must be positive and finite, got {gamma_scale}"
            )));
        }
        Ok(Self { delta, gamma_scale })
    }
}

/// Builds the BS approximation of the time for a gamma process with the
/// given Arrhenius rate at `temp_c` to accumulate `d_omega` of degradation.
///
/// # Errors
///
/// [`Error::InvalidConfig`] for nonpositive `d_omega`; any error of
/// [`arrhenius_rate`].
pub fn bs_from_model(
    params: &ModelParams,
    temp_c: f64,
    d_omega: f64,
    mapping: BsMapping,
) -> Result<BsParams> {
    if !(d_omega > 0.0) || !d_omega.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "degradation increment d_omega must be positive and finite, got {d_omega}"
        )));
    }
    let alpha = arrhenius_rate(params, temp_c)?;
    let (delta, gamma_scale) = match mapping {
        BsMapping::Scale => ((params.beta / d_omega).sqrt(), d_omega / (params.beta * alpha)),
        BsMapping::Rate => (
            1.0 / (params.beta * d_omega).sqrt(),
            params.beta * d_omega / alpha,
        ),
    };
    BsParams::new(delta, gamma_scale)
}

/// The standardized argument `c1(t) = (sqrt(t/gamma) - sqrt(gamma/t))/delta`
/// of the BS cdf. Strictly increasing in `t`, zero at `t = gamma`.
///
/// # Errors
///
/// [`Error::Domain`] for `t <= 0`.
pub fn bs_c1(t: f64, bs: &BsParams) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "BS functions require t > 0, got {t}"
        )));
    }
    let r = (t / bs.gamma_scale).sqrt();
    Ok((r - 1.0 / r) / bs.delta)
}

/// The companion argument `c2(t) = (sqrt(t/gamma) + sqrt(gamma/t))/delta`,
/// which appears in the BS density and in the information-matrix algebra.
///
/// # Errors
///
/// [`Error::Domain`] for `t <= 0`.
pub fn bs_c2(t: f64, bs: &BsParams) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "BS functions require t > 0, got {t}"
        )));
    }
    let r = (t / bs.gamma_scale).sqrt();
    Ok((r + 1.0 / r) / bs.delta)
}

/// BS cumulative distribution `Phi(c1(t))`.
///
/// # Errors
///
/// [`Error::Domain`] for `t <= 0`.
pub fn bs_cdf(t: f64, bs: &BsParams) -> Result<f64> {
    Ok(norm_cdf(bs_c1(t, bs)?))
}

/// BS survival `1 - F(t)`, computed as `Phi(-c1(t))` for full accuracy in
/// the upper tail.
///
/// # Errors
///
/// [`Error::Domain`] for `t <= 0`.
pub fn bs_survival(t: f64, bs: &BsParams) -> Result<f64> {
    Ok(norm_cdf(-bs_c1(t, bs)?))
}

/// BS density `phi(c1(t)) * c2(t) / (2t)`.
///
/// # Errors
///
/// [`Error::Domain`] for `t <= 0`.
pub fn bs_pdf(t: f64, bs: &BsParams) -> Result<f64> {
    let c1 = bs_c1(t, bs)?;
    let c2 = bs_c2(t, bs)?;
    Ok(norm_pdf(c1) * c2 / (2.0 * t))
}

/// Joint density of the successive threshold-crossing times of one unit,
/// approximated as the product of per-step BS densities evaluated at the
/// successive differences (`t_0 = 0`).
///
/// # Errors
///
/// [`Error::InvalidConfig`] when `times` and `steps` have different or zero
/// lengths; [`Error::Domain`] when the times are not strictly increasing and
/// positive.
pub fn joint_passage_pdf(times: &[f64], steps: &[BsParams]) -> Result<f64> {
    if times.is_empty() || times.len() != steps.len() {
        return Err(Error::InvalidConfig(format!(
            "need one passage time per step, got {} times and {} steps",
            times.len(),
            steps.len()
        )));
    }
    let mut prev = 0.0;
    let mut density = 1.0;
    for (&t, bs) in times.iter().zip(steps) {
        if t <= prev {
            return Err(Error::Domain(format!(
                "passage times must be strictly increasing and positive, got {times:?}"
            )));
        }
        density *= bs_pdf(t - prev, bs)?;
        prev = t;
    }
    Ok(density)
}

/// Cdf of the minimum crossing time over `n` independent units,
/// `G(t) = 1 - (1 - F(t))^n`.
///
/// # Errors
///
/// [`Error::Domain`] for `t <= 0`; [`Error::InvalidConfig`] for `n = 0`.
pub fn min_crossing_cdf(t: f64, n: u32, bs: &BsParams) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "minimum crossing time needs at least one unit".into(),
        ));
    }
    Ok(1.0 - bs_survival(t, bs)?.powi(n as i32))
}

/// Joint survival of the componentwise minima of the two threshold-crossing
/// times over `n` units under the factorized approximation
/// `[S1(t1) * S2(t2 - t1)]^n` (see the module doc for its limitations).
///
/// `steps[0]` is the stage-1 BS law of the first threshold, `steps[1]` the
/// stage-2 BS law of the increment between the thresholds.
///
/// # Errors
///
/// [`Error::Domain`] unless `0 < t1 < t2`; [`Error::InvalidConfig`] for
/// `n = 0`.
pub fn joint_min_survival_m3(t1: f64, t2: f64, n: u32, steps: &[BsParams; 2]) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "joint minimum survival needs at least one unit".into(),
        ));
    }
    if !(t1 > 0.0) || !(t2 > t1) {
        return Err(Error::Domain(format!(
            "joint survival requires 0 < t1 < t2, got t1={t1}, t2={t2}"
        )));
    }
    let s1 = bs_survival(t1, &steps[0])?;
    let s2 = bs_survival(t2 - t1, &steps[1])?;
    Ok((s1 * s2).powi(n as i32))
}

/// Factorized joint survival extended to the closed corner conventions used
/// by the rectangle probabilities: a zero coordinate contributes survival 1,
/// and `y <= x` reduces to the stage-1 marginal survival (the second
/// crossing cannot precede the first).
fn joint_survival_corner(x: f64, y: f64, n: u32, steps: &[BsParams; 2]) -> Result<f64> {
    let s1 = if x <= 0.0 { 1.0 } else { bs_survival(x, &steps[0])? };
    let s2 = if y - x <= 0.0 {
        1.0
    } else {
        bs_survival(y - x, &steps[1])?
    };
    Ok((s1 * s2).powi(n as i32))
}

/// Distribution of the elevation measurement index: `probs[k-1]` is
/// `Pr(kappa = k)` for `k = 1..=m_measurements`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaPmf {
    /// Number of measurements `M`; the last cell absorbs "no crossing by
    /// measurement M-1".
    pub m_measurements: u32,
    /// Cell probabilities indexed by `k - 1`.
    pub probs: Vec<f64>,
}

impl KappaPmf {
    /// Validates the cell count, nonnegativity, and normalization within
    /// 1e-10.
    pub fn new(m_measurements: u32, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != m_measurements as usize {
            return Err(Error::InvalidConfig(format!(
                "pmf must have exactly M={m_measurements} cells, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Numerical(format!(
                "pmf cells must lie in [0,1], got {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::Numerical(format!(
                "pmf cells must sum to 1 within 1e-10, got {sum}"
            )));
        }
        Ok(Self { m_measurements, probs })
    }

    /// `Pr(kappa = k)` for `k` in `1..=M`.
    pub fn prob(&self, k: u32) -> f64 {
        self.probs[(k - 1) as usize]
    }
}

/// Pmf of the first elevation index `kappa_1` under a two-level plan:
/// `Pr(kappa_1 = k) = G(kf) - G((k-1)f)` for `k < M` and
/// `Pr(kappa_1 = M) = 1 - G((M-1)f)`, where `G` is the minimum-crossing cdf
/// of the first threshold under the first test stress. The cells telescope
/// to exactly one.
///
/// # Errors
///
/// Propagates construction errors from the BS mapping.
pub fn kappa1_pmf(
    plan: &TestPlan,
    params: &ModelParams,
    stress: &StressSpec,
    mapping: BsMapping,
) -> Result<KappaPmf> {
    let bs = bs_from_model(params, stress.levels[0], plan.omega1, mapping)?;
    let f = f64::from(plan.f);
    let m = plan.m as usize;
    let mut probs = Vec::with_capacity(m);
    // Survival powers S_k = Pr(no unit crossed by measurement k); the cell
    // probabilities are successive differences, so the sum telescopes.
    let mut s_prev = 1.0_f64;
    for k in 1..m {
        let s_k = bs_survival(k as f64 * f, &bs)?.powi(plan.n as i32);
        probs.push((s_prev - s_k).max(0.0));
        s_prev = s_k;
    }
    probs.push(s_prev);
    KappaPmf::new(plan.m, probs)
}

/// A three-stress-level plan: two elevation thresholds
/// `0 < omega1 < omega2 < D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanM3 {
    /// Number of test units.
    pub n: u32,
    /// Measurement frequency in time units.
    pub f: u32,
    /// Number of measurements.
    pub m: u32,
    /// First elevation threshold.
    pub omega1: f64,
    /// Second elevation threshold.
    pub omega2: f64,
    /// Critical degradation level.
    pub d: f64,
}

impl PlanM3 {
    /// Validates `n >= 1`, `f >= 1`, `m >= 2`, `0 < omega1 < omega2 < d`.
    pub fn new(n: u32, f: u32, m: u32, omega1: f64, omega2: f64, d: f64) -> Result<Self> {
        if n < 1 || f < 1 || m < 2 {
            return Err(Error::InvalidConfig(format!(
                "plan needs n >= 1, f >= 1, M >= 2, got n={n}, f={f}, M={m}"
            )));
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "critical level D must be positive and finite, got {d}"
            )));
        }
        if !(omega1 > 0.0 && omega1 < omega2 && omega2 < d) {
            return Err(Error::InvalidConfig(format!(
                "thresholds must satisfy 0 < omega1 < omega2 < D, got {omega1}, {omega2}, D={d}"
            )));
        }
        Ok(Self { n, f, m, omega1, omega2, d })
    }

    /// The two per-stage BS laws: first threshold under the first stress
    /// level, threshold increment under the second.
    fn steps(
        &self,
        params: &ModelParams,
        stress: &StressSpec,
        mapping: BsMapping,
    ) -> Result<[BsParams; 2]> {
        if stress.m() < 2 {
            return Err(Error::Unsupported(
                "the joint elevation-index pmf needs at least two test stress levels".into(),
            ));
        }
        Ok([
            bs_from_model(params, stress.levels[0], self.omega1, mapping)?,
            bs_from_model(params, stress.levels[1], self.omega2 - self.omega1, mapping)?,
        ])
    }
}

/// Joint pmf cell `Pr(kappa_1 = k1, kappa_2 = k2)` for a three-level plan,
/// computed by inclusion-exclusion of the factorized joint survival over
/// the measurement rectangle; `k2 = M` cells by complementation.
///
/// Cells can be slightly negative where the factorized approximation breaks
/// down (see the module doc); they are returned as computed so that the
/// telescoping identities hold exactly.
///
/// # Errors
///
/// [`Error::Domain`] unless `1 <= k1 <= k2 <= M`;
/// [`Error::Unsupported`] when `stress` has fewer than two test levels.
pub fn kappa_joint_pmf_m3(
    plan: &PlanM3,
    params: &ModelParams,
    stress: &StressSpec,
    mapping: BsMapping,
    k1: u32,
    k2: u32,
) -> Result<f64> {
    if !(1 <= k1 && k1 <= k2 && k2 <= plan.m) {
        return Err(Error::Domain(format!(
            "cell indexes must satisfy 1 <= k1 <= k2 <= M={}, got k1={k1}, k2={k2}",
            plan.m
        )));
    }
    let steps = plan.steps(params, stress, mapping)?;
    let f = f64::from(plan.f);
    let last = f64::from(plan.m - 1) * f;
    let n = plan.n;
    let js = |x: f64, y: f64| joint_survival_corner(x, y, n, &steps);

    let a = f64::from(k1 - 1) * f;
    let b = f64::from(k1) * f;
    if k1 == plan.m {
        // Neither threshold crossed by the last inspection before the end.
        return js(last, last);
    }
    if k2 == plan.m {
        // First crossing in cell k1, second not crossed by measurement M-1.
        return Ok(js(a, last)? - js(b, last)?);
    }
    let c = f64::from(k2 - 1) * f;
    let d = f64::from(k2) * f;
    Ok(js(a, c)? - js(b, c)? - js(a, d)? + js(b, d)?)
}

/// Full `M x M` joint pmf table for a three-level plan; `table[k1-1][k2-1]`
/// holds `Pr(kappa_1 = k1, kappa_2 = k2)` and cells with `k2 < k1` are zero.
///
/// # Errors
///
/// As [`kappa_joint_pmf_m3`].
pub fn kappa_joint_table_m3(
    plan: &PlanM3,
    params: &ModelParams,
    stress: &StressSpec,
    mapping: BsMapping,
) -> Result<Vec<Vec<f64>>> {
    let m = plan.m as usize;
    let mut table = vec![vec![0.0; m]; m];
    for k1 in 1..=plan.m {
        for k2 in k1..=plan.m {
            table[(k1 - 1) as usize][(k2 - 1) as usize] =
                kappa_joint_pmf_m3(plan, params, stress, mapping, k1, k2)?;
        }
    }
    Ok(table)
}
