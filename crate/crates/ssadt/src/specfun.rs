//! High-accuracy scalar special functions used throughout the crate.
//!
//! The planning formulas evaluate `ln Γ`, `ψ_0` (digamma), and `ψ_1`
//! (trigamma) at the tiny interval shapes `fα_j ≈ 0.01–0.7` that arise in
//! practice, and the normal cdf `Φ` in far tails (elevation probabilities
//! are `1 − O(1e−6)`). All three gamma-family functions therefore use an
//! upward recurrence shift to `x ≥ 8` followed by an asymptotic expansion,
//! which is uniformly accurate on the whole positive axis, and `Φ` is built
//! on a complementary-error-function evaluation that keeps relative accuracy
//! in the tails.
//!
//! Accuracy targets: `ln Γ` relative error ≤ 1e−12 on `[1e−6, 1e8]`
//! (absolute near its zeros at 1 and 2); `ψ_0`/`ψ_1` absolute error ≤ 1e−10
//! wherever the value itself is representable to that precision, relative
//! error ~1e−13 elsewhere; `Φ` absolute error ≤ 1e−12 and small relative
//! error down to the underflow threshold.

use crate::error::Error;
use crate::Result;

/// Shift threshold: arguments below this are raised by the recurrence
/// before the asymptotic series is applied.
const SHIFT_TO: f64 = 8.0;

/// `ln(2π)/2`, the constant term of Stirling's series.
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_74;

/// `ln Γ(x)` for `x > 0`.
///
/// Uses the recurrence `ln Γ(x) = ln Γ(x + k) − Σ_{i<k} ln(x + i)` to shift
/// the argument to at least 8, then Stirling's series with Bernoulli
/// coefficients through `B_14` (the first omitted term is below 1e−15 at
/// x = 8). Exact at the zeros `x = 1` and `x = 2`.
///
/// # Errors
/// `x ≤ 0` or non-finite `x` is a domain error.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma(x))
}

/// Infallible core of [`log_gamma`] for callers that have already
/// validated `x > 0`.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    // Shift upward: ln Γ(x) = ln Γ(x+k) − ln(x(x+1)⋯(x+k−1)).
    let mut shift_ln = 0.0;
    let mut y = x;
    while y < SHIFT_TO {
        shift_ln += y.ln();
        y += 1.0;
    }
    // Stirling: (y−1/2)ln y − y + ln(2π)/2 + Σ B_{2n}/(2n(2n−1) y^{2n−1}).
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv;
    for c in C {
        series += c * pow;
        pow *= inv2;
    }
    (y - 0.5) * y.ln() - y + HALF_LN_TWO_PI + series - shift_ln
}

/// Digamma `ψ_0(x) = d/dx ln Γ(x)` for `x > 0`.
///
/// Recurrence `ψ_0(x) = ψ_0(x + k) − Σ_{i<k} 1/(x + i)` to shift above 8,
/// then `ψ_0(y) ≈ ln y − 1/(2y) − Σ B_{2n}/(2n y^{2n})`. The possibly huge
/// `1/x` lead term is subtracted last so small-`x` accuracy is limited only
/// by representation of the result.
///
/// # Errors
/// `x ≤ 0` or non-finite `x` is a domain error.
pub fn digamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("digamma requires x > 0, got {x}")));
    }
    // Recurrence terms beyond the first are O(1); keep 1/x separate.
    let lead = 1.0 / x;
    let mut rest = 0.0;
    let mut y = x + 1.0;
    while y < SHIFT_TO {
        rest += 1.0 / y;
        y += 1.0;
    }
    const C: [f64; 7] = [
        -1.0 / 12.0,
        1.0 / 120.0,
        -1.0 / 252.0,
        1.0 / 240.0,
        -1.0 / 132.0,
        691.0 / 32_760.0,
        -1.0 / 12.0,
    ];
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv2;
    for c in C {
        series += c * pow;
        pow *= inv2;
    }
    let asymptotic = y.ln() - 0.5 * inv + series;
    Ok((asymptotic - rest) - lead)
}

/// Trigamma `ψ_1(x) = d²/dx² ln Γ(x)` for `x > 0`; always positive.
///
/// Recurrence `ψ_1(x) = ψ_1(x + k) + Σ_{i<k} 1/(x + i)²` to shift above 8,
/// then `ψ_1(y) ≈ 1/y + 1/(2y²) + Σ B_{2n}/y^{2n+1}`.
///
/// # Errors
/// `x ≤ 0` or non-finite `x` is a domain error.
pub fn trigamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("trigamma requires x > 0, got {x}")));
    }
    let lead = 1.0 / (x * x);
    let mut rest = 0.0;
    let mut y = x + 1.0;
    while y < SHIFT_TO {
        rest += 1.0 / (y * y);
        y += 1.0;
    }
    const C: [f64; 7] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
    ];
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv * inv2;
    for c in C {
        series += c * pow;
        pow *= inv2;
    }
    let asymptotic = inv + 0.5 * inv2 + series;
    Ok((asymptotic + rest) + lead)
}

/// `1/√(2π)`.
const INV_SQRT_TWO_PI: f64 = 0.398_942_280_401_432_7;
/// `1/√2`.
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// `1/√π`.
const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Standard normal density `φ(z) = e^{−z²/2}/√(2π)`.
pub fn norm_pdf(z: f64) -> f64 {
    INV_SQRT_TWO_PI * (-0.5 * z * z).exp()
}

/// Standard normal cdf `Φ(z) = erfc(−z/√2)/2`.
///
/// The complementary error function is evaluated by a non-alternating
/// power series below `x = 3` and a Lentz continued fraction above, so the
/// lower tail keeps small relative error down to `Φ(−37.5) ≈ 4.6e−308`.
/// Absolute error ≤ 1e−12 everywhere (observed ≲ 4e−16).
pub fn norm_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z < 0.0 {
        0.5 * erfc(-z * FRAC_1_SQRT_2)
    } else {
        1.0 - 0.5 * erfc(z * FRAC_1_SQRT_2)
    }
}

/// Complementary error function for `x ≥ 0`.
fn erfc(x: f64) -> f64 {
    if x < 3.0 {
        1.0 - erf_series(x)
    } else {
        erfc_cf(x)
    }
}

/// `erf(x)` for `0 ≤ x < 3` by the non-alternating series
/// `erf(x) = (2x/√π) e^{−x²} Σ_k (2x²)^k / (1·3⋯(2k+1))`;
/// every term is positive, so there is no cancellation.
fn erf_series(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let two_x2 = 2.0 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut odd = 1.0;
    loop {
        odd += 2.0;
        term *= two_x2 / odd;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    2.0 * INV_SQRT_PI * x * (-x * x).exp() * sum
}

/// `erfc(x)` for `x ≥ 3` by the Legendre continued fraction
/// `erfc(x) = e^{−x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))`,
/// evaluated with the modified Lentz algorithm.
fn erfc_cf(x: f64) -> f64 {
    // Modified Lentz on the denominator F = x + (1/2)/(x + 1/(x + (3/2)/…)),
    // partial numerators a_k = k/2, partial denominators x; erfc = e^{−x²}/(√π F).
    const TINY: f64 = 1e-300;
    const MAX_ITER: usize = 200;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..MAX_ITER {
        let a = 0.5 * k as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    INV_SQRT_PI * (-x * x).exp() / f
}

/// Standard normal quantile `Φ^{-1}(p)` for `0 < p < 1`.
///
/// Rational initial estimate refined by two Halley steps against
/// [`norm_cdf`]/[`norm_pdf`], giving relative error near machine precision
/// throughout `(0, 1)` and round-trip error ≪ 1e−9 for `|z| ≤ 6`.
///
/// # Errors
/// `p ∉ (0, 1)` (including NaN) is a domain error.
pub fn norm_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "norm_quantile requires 0 < p < 1, got {p}"
        )));
    }
    let mut z = acklam_initial(p);
    // Halley refinement: z ← z − r/(1 − z·r/2) with r = (Φ(z) − p)/φ(z).
    for _ in 0..2 {
        let pdf = norm_pdf(z);
        if pdf <= 0.0 || !pdf.is_finite() {
            break;
        }
        let r = (norm_cdf(z) - p) / pdf;
        z -= r / (1.0 - 0.5 * z * r);
    }
    Ok(z)
}

/// Rational approximation to the normal quantile (relative error ~1e−9),
/// used only to seed the Halley refinement.
fn acklam_initial(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}
