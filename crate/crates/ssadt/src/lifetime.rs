//! Lifetime distribution at use conditions and its parameter sensitivities.
//!
//! A unit fails when its degradation crosses the critical level `D`. Under
//! the gamma-process model the use-condition lifetime is approximately
//! Birnbaum-Saunders with
//!
//! ```text
//! alpha* = sqrt(beta / D),      beta* = D / (beta * alpha0),
//! F0(t)  = Phi((1/alpha*) (sqrt(t/beta*) - sqrt(beta*/t))),
//! ```
//!
//! where `alpha0` is the Arrhenius rate at the use stress. The design
//! objective targets the `p`-quantile `xi_p = F0^{-1}(p)`, available in
//! closed form, and the delta method needs the gradient
//! `h = (dF0/da, dF0/db, dF0/dbeta)` evaluated at `xi_p`.
//!
//! Substituting the parameterization gives
//! `c(t) = sqrt(alpha0 t) - D / (beta sqrt(alpha0 t))`, from which the three
//! partial derivatives below follow by the chain rule; in particular the
//! printed `dF0/dbeta = (1/(beta alpha*)) sqrt(beta*/t) phi(c)` is the full
//! derivative, because the `beta`-dependence of `alpha*` cancels inside
//! `sqrt(t/beta*)/alpha*`.

use serde::{Deserialize, Serialize};

use crate::firstpassage::{bs_cdf, bs_from_model, bs_pdf, BsMapping, BsParams};
use crate::model::{ModelParams, StressSpec};
use crate::specfun::{norm_pdf, norm_quantile};
use crate::{Error, Result};

/// Birnbaum-Saunders parameters of the use-condition lifetime:
/// `alpha_star = sqrt(beta/D)` (shape) and `beta_star = D/(beta*alpha0)`
/// (scale and median).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeBs {
    /// Shape parameter `alpha*`.
    pub alpha_star: f64,
    /// Scale parameter `beta*`; the median lifetime.
    pub beta_star: f64,
}

impl LifetimeBs {
    /// Builds the lifetime law from the gamma-process parameters, the use
    /// stress of `stress`, and the critical level `d`.
    ///
    /// # Errors
    ///
    /// [`Error::InvalidConfig`] for nonpositive `d`; any error of the
    /// Arrhenius evaluation.
    pub fn from_model(params: &ModelParams, stress: &StressSpec, d: f64) -> Result<Self> {
        let bs = bs_from_model(params, stress.s0, d, BsMapping::Scale)?;
        Ok(Self { alpha_star: bs.delta, beta_star: bs.gamma_scale })
    }

    /// The same parameters as a generic BS law.
    fn as_bs(&self) -> BsParams {
        BsParams { delta: self.alpha_star, gamma_scale: self.beta_star }
    }
}

/// Use-condition lifetime cdf `F0(t)`.
///
/// # Errors
///
/// [`Error::Domain`] for `t <= 0`.
pub fn lifetime_cdf(t: f64, lb: &LifetimeBs) -> Result<f64> {
    bs_cdf(t, &lb.as_bs())
}

/// Use-condition lifetime density `f0(t)`.
///
/// # Errors
///
/// [`Error::Domain`] for `t <= 0`.
pub fn lifetime_pdf(t: f64, lb: &LifetimeBs) -> Result<f64> {
    bs_pdf(t, &lb.as_bs())
}

/// Closed-form lifetime quantile
/// `xi_p = beta* (alpha* z_p / 2 + sqrt((alpha* z_p / 2)^2 + 1))^2`.
///
/// # Errors
///
/// [`Error::Domain`] for `p` outside `(0, 1)`.
pub fn lifetime_quantile(p: f64, lb: &LifetimeBs) -> Result<f64> {
    let z = norm_quantile(p)?;
    let u = lb.alpha_star * z / 2.0;
    Ok(lb.beta_star * (u + (u * u + 1.0).sqrt()).powi(2))
}

/// Gradient of the lifetime cdf with respect to `(a, b, beta)`:
///
/// ```text
/// dF0/da    = (1/(2 alpha*)) (sqrt(t/beta*) + sqrt(beta*/t)) phi(c(t))
/// dF0/db    = dF0/da / (273 + s0)
/// dF0/dbeta = (1/(beta alpha*)) sqrt(beta*/t) phi(c(t))
/// ```
///
/// The `b`-derivative carries the use-stress temperature because the
/// lifetime depends on `b` only through the use-condition rate `alpha0`.
///
/// # Errors
///
/// [`Error::Domain`] for `t <= 0`; construction errors as
/// [`LifetimeBs::from_model`].
pub fn h_vector(t: f64, params: &ModelParams, stress: &StressSpec, d: f64) -> Result<[f64; 3]> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "the sensitivity vector requires t > 0, got {t}"
        )));
    }
    let lb = LifetimeBs::from_model(params, stress, d)?;
    let r = (t / lb.beta_star).sqrt();
    let c = (r - 1.0 / r) / lb.alpha_star;
    let phi = norm_pdf(c);
    let h_a = phi * (r + 1.0 / r) / (2.0 * lb.alpha_star);
    let h_b = h_a / (273.0 + stress.s0);
    let h_beta = phi / (r * params.beta * lb.alpha_star);
    Ok([h_a, h_b, h_beta])
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

    fn case_lifetime() -> LifetimeBs {
        LifetimeBs::from_model(&case_params(), &case_stress(), 5.0).unwrap()
    }

    /// Published quantile column: (p, reference xi_p) with 20-digit exact
    /// values recomputed from the closed form, against which the published
    /// 1-decimal table agrees to well under 0.1%.
    const XI_TABLE: [(f64, f64); 9] = [
        (0.1, 292795.57916711380393),
        (0.2, 307152.35481132122846),
        (0.3, 317950.31934071763462),
        (0.4, 327481.58354201404106),
        (0.5, 336650.26927525948244),
        (0.6, 346075.65585001723274),
        (0.7, 356450.03923287746244),
        (0.8, 368981.06762920184433),
        (0.9, 387073.48015804363298),
    ];

    #[test]
    fn lifetime_parameters_match_frozen_case_values() {
        let lb = case_lifetime();
        assert!(
            (lb.alpha_star - 0.10899541274750969996).abs() <= 1e-15,
            "alpha* = sqrt(0.0594/5), got {}",
            lb.alpha_star
        );
        assert!(
            ((lb.beta_star - 336650.26927525948244) / lb.beta_star).abs() <= 1e-14,
            "beta* = D/(beta*alpha0), got {}",
            lb.beta_star
        );
    }

    #[test]
    fn lifetime_cdf_is_half_at_the_median() {
        let lb = case_lifetime();
        assert_eq!(lifetime_cdf(lb.beta_star, &lb).unwrap(), 0.5);
    }

    #[test]
    fn lifetime_cdf_matches_published_first_decile() {
        // The published plan table lists xi_0.1 = 292795.6; the cdf there
        // must return 0.1 within 5e-4 (20-digit reference
        // 0.10000011484352181174 at t = 292795.6).
        let lb = case_lifetime();
        let got = lifetime_cdf(292795.6, &lb).unwrap();
        assert!(((got - 0.10000011484352181174) / got).abs() <= 1e-13);
        assert!((got - 0.1).abs() <= 5e-4, "F0(292795.6) should be near 0.1, got {got}");
    }

    #[test]
    fn lifetime_cdf_is_monotone_on_a_grid() {
        let lb = case_lifetime();
        let mut prev = -1.0;
        for i in 0..100 {
            let t = lb.beta_star * 10f64.powf(-1.0 + 2.0 * i as f64 / 99.0);
            let p = lifetime_cdf(t, &lb).unwrap();
            assert!(p >= prev, "cdf must be nondecreasing at t={t}");
            prev = p;
        }
    }

    #[test]
    fn lifetime_quantile_median_is_beta_star_exactly() {
        let lb = case_lifetime();
        assert_eq!(
            lifetime_quantile(0.5, &lb).unwrap(),
            lb.beta_star,
            "z_0.5 = 0 makes the quantile formula collapse to beta*"
        );
    }

    #[test]
    fn lifetime_quantile_matches_frozen_table() {
        let lb = case_lifetime();
        for (p, want) in XI_TABLE {
            let got = lifetime_quantile(p, &lb).unwrap();
            assert!(
                ((got - want) / want).abs() <= 1e-12,
                "xi_{p}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn lifetime_quantile_round_trips_through_the_cdf() {
        let lb = case_lifetime();
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let xi = lifetime_quantile(p, &lb).unwrap();
            let back = lifetime_cdf(xi, &lb).unwrap();
            assert!(
                (back - p).abs() <= 1e-10,
                "cdf(quantile({p})) = {back} drifted beyond 1e-10"
            );
        }
    }

    #[test]
    fn lifetime_pdf_matches_closed_form_at_the_median() {
        // At t = beta* the density is phi(0)/(alpha* beta*).
        let lb = case_lifetime();
        let got = lifetime_pdf(lb.beta_star, &lb).unwrap();
        let want = norm_pdf(0.0) / (lb.alpha_star * lb.beta_star);
        assert!(((got - want) / want).abs() <= 1e-14, "f0(beta*): got {got}, want {want}");
    }

    #[test]
    fn lifetime_pdf_matches_frozen_values_at_table_quantiles() {
        // f0(xi_p) enters the asymptotic variance; 20-digit references.
        let lb = case_lifetime();
        let cases = [
            (0.1, 5.5126052532214438383e-6),
            (0.5, 1.0872336347856692676e-5),
            (0.9, 4.1699225872504026427e-6),
        ];
        for (p, want) in cases {
            let xi = lifetime_quantile(p, &lb).unwrap();
            let got = lifetime_pdf(xi, &lb).unwrap();
            assert!(
                ((got - want) / want).abs() <= 1e-12,
                "f0(xi_{p}): got {got}, want {want}"
            );
        }
    }

    #[test]
    fn lifetime_pdf_matches_central_difference_of_cdf() {
        // Above the median the cdf sits against 1 and its f64 spacing
        // swamps a central difference, so difference the survival function
        // there; both forms test the same derivative.
        let lb = case_lifetime();
        let bs = lb.as_bs();
        for i in 0..20 {
            let t = lb.beta_star * 10f64.powf(-0.5 + i as f64 / 19.0);
            let h = 6e-6 * t;
            let fd = if t <= lb.beta_star {
                (lifetime_cdf(t + h, &lb).unwrap() - lifetime_cdf(t - h, &lb).unwrap()) / (2.0 * h)
            } else {
                (crate::firstpassage::bs_survival(t - h, &bs).unwrap()
                    - crate::firstpassage::bs_survival(t + h, &bs).unwrap())
                    / (2.0 * h)
            };
            let pdf = lifetime_pdf(t, &lb).unwrap();
            assert!(
                ((pdf - fd) / pdf).abs() <= 1e-6,
                "pdf/cdf-derivative mismatch at t={t}: {pdf} vs {fd}"
            );
        }
    }

    #[test]
    fn lifetime_pdf_integrates_to_one() {
        let lb = case_lifetime();
        let bs = lb.as_bs();
        let q = |z: f64| {
            let u = bs.delta * z / 2.0;
            bs.gamma_scale * (u + (u * u + 1.0).sqrt()).powi(2)
        };
        let (lo, hi) = (q(-6.5), q(6.5));
        let (ulo, uhi) = (lo.ln(), hi.ln());
        let steps = 8192;
        let h = (uhi - ulo) / steps as f64;
        let g = |u: f64| {
            let t = u.exp();
            lifetime_pdf(t, &lb).unwrap() * t
        };
        let mut acc = g(ulo) + g(uhi);
        for i in 1..steps {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(ulo + h * i as f64);
        }
        let integral = acc * h / 3.0;
        assert!(
            (integral - 1.0).abs() <= 1e-6,
            "lifetime density must integrate to 1, got {integral}"
        );
    }

    #[test]
    fn h_vector_b_component_is_a_component_over_use_temperature() {
        let params = case_params();
        let stress = case_stress();
        for t in [1e5, 3e5, 6e5] {
            let h = h_vector(t, &params, &stress, 5.0).unwrap();
            assert_eq!(
                h[1],
                h[0] / 323.0,
                "dF0/db must equal dF0/da / (273 + s0) exactly"
            );
        }
    }

    #[test]
    fn h_vector_matches_frozen_values_at_table_quantiles() {
        // 20-digit references for h(xi_p) at the case-study parameters.
        let params = case_params();
        let stress = case_stress();
        let lb = case_lifetime();
        let cases = [
            (0.1, 1.6140664478366466973, 29.066019004308399069),
            (0.5, 3.6601749591571468388, 61.619107056517623548),
            (0.9, 1.6140664478366466973, 25.279652640023139559),
        ];
        for (p, want_a, want_beta) in cases {
            let xi = lifetime_quantile(p, &lb).unwrap();
            let h = h_vector(xi, &params, &stress, 5.0).unwrap();
            assert!(
                ((h[0] - want_a) / want_a).abs() <= 1e-12,
                "dF0/da at xi_{p}: got {}, want {want_a}",
                h[0]
            );
            assert!(
                ((h[1] - want_a / 323.0) / h[1]).abs() <= 1e-14,
                "dF0/db at xi_{p}"
            );
            assert!(
                ((h[2] - want_beta) / want_beta).abs() <= 1e-12,
                "dF0/dbeta at xi_{p}: got {}, want {want_beta}",
                h[2]
            );
        }
    }

    #[test]
    fn h_vector_matches_central_differences_of_the_cdf() {
        // Central finite differences under parameter perturbation; this
        // exercises the full chain rule including the beta-dependence of
        // both alpha* and beta*.
        let params = case_params();
        let stress = case_stress();
        let lb = case_lifetime();
        let cdf_at = |a: f64, b: f64, beta: f64, t: f64| {
            let p = ModelParams { a, b, beta };
            lifetime_cdf(t, &LifetimeBs::from_model(&p, &stress, 5.0).unwrap()).unwrap()
        };
        for p in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let t = lifetime_quantile(p, &lb).unwrap();
            let h = h_vector(t, &params, &stress, 5.0).unwrap();
            let (da, db, dbeta) = (1e-6, 1e-3, 1e-8);
            let fd = [
                (cdf_at(params.a + da, params.b, params.beta, t)
                    - cdf_at(params.a - da, params.b, params.beta, t))
                    / (2.0 * da),
                (cdf_at(params.a, params.b + db, params.beta, t)
                    - cdf_at(params.a, params.b - db, params.beta, t))
                    / (2.0 * db),
                (cdf_at(params.a, params.b, params.beta + dbeta, t)
                    - cdf_at(params.a, params.b, params.beta - dbeta, t))
                    / (2.0 * dbeta),
            ];
            for (i, (&analytic, &numeric)) in h.iter().zip(&fd).enumerate() {
                assert!(
                    ((analytic - numeric) / analytic).abs() <= 1e-6,
                    "h[{i}] at p={p}: analytic {analytic} vs finite difference {numeric}"
                );
            }
        }
    }

    #[test]
    fn h_vector_components_are_positive() {
        let params = case_params();
        let stress = case_stress();
        for i in 0..30 {
            let t = 336650.0 * 10f64.powf(-1.0 + 2.0 * i as f64 / 29.0);
            let h = h_vector(t, &params, &stress, 5.0).unwrap();
            for (j, &v) in h.iter().enumerate() {
                assert!(v > 0.0, "h[{j}] must be positive at t={t}, got {v}");
            }
        }
    }

    #[test]
    fn lifetime_functions_reject_domain_violations() {
        let lb = case_lifetime();
        assert!(matches!(lifetime_cdf(0.0, &lb), Err(Error::Domain(_))));
        assert!(matches!(lifetime_pdf(-5.0, &lb), Err(Error::Domain(_))));
        assert!(matches!(lifetime_quantile(0.0, &lb), Err(Error::Domain(_))));
        assert!(matches!(lifetime_quantile(1.0, &lb), Err(Error::Domain(_))));
        assert!(matches!(
            h_vector(0.0, &case_params(), &case_stress(), 5.0),
            Err(Error::Domain(_))
        ));
        assert!(LifetimeBs::from_model(&case_params(), &case_stress(), 0.0).is_err());
    }
}
