//! Planning and analysis toolkit for step-stress accelerated degradation
//! tests (SSADT) with gamma-process degradation paths.
//!
//! A unit's cumulative degradation under constant stress `S_j` is a gamma
//! process: increments over an interval of length `Δt` are distributed
//! `Ga(α_j·Δt, β)` (shape-scale), with the rate tied to temperature through
//! the Arrhenius link `α_j = exp(a + b/(273 + S_j))`. Tests run `n` units,
//! measured every `f` time units for `M` measurements; the stress is raised
//! from `S_1` to `S_2` at the first measurement index `κ_1` where any unit's
//! cumulative degradation reaches the elevation threshold `ω_1`.
//!
//! The crate provides:
//!
//! * [`specfun`] — log-gamma, digamma/trigamma, and normal cdf/pdf/quantile
//!   accurate enough for the tiny interval shapes (`fα ≈ 0.01–0.7`) and the
//!   far-tail probabilities the planning criterion needs;
//! * [`model`] — parameter/plan/cost types, the Arrhenius link, total cost;
//! * [`firstpassage`] — Birnbaum–Saunders (BS) approximations for
//!   threshold-crossing times, the minimum over `n` units, and the discrete
//!   elevation-index distributions;
//! * [`lifetime`] — the use-condition lifetime distribution, quantiles, and
//!   the sensitivity vector `h` feeding the delta method;
//! * [`simulate`] — reproducible Monte Carlo generation of SSADT datasets
//!   under the measurement-triggered elevation protocol;
//! * [`inference`] — the log-likelihood of `θ = (a, b, β)` and maximum
//!   likelihood fitting;
//! * [`fisher`] — the analytic expected Fisher information for `m = 2`
//!   plans and the delta-method asymptotic variance of a quantile estimate;
//! * [`design`] — the budget-constrained optimal plan search
//!   (exhaustive feasible grid nested in a one-dimensional threshold
//!   optimization), plus sensitivity and stability studies;
//! * [`cli`] — the command-line front end.

pub mod cli;
pub mod design;
pub mod error;
pub mod firstpassage;
pub mod fisher;
pub mod inference;
pub mod lifetime;
pub mod model;
pub mod simulate;
pub mod specfun;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
