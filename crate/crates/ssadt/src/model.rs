//! Domain types for the step-stress accelerated degradation test.
//!
//! A test runs `n` units under a stepwise-elevated temperature stress and
//! measures each unit's cumulative degradation every `f` time units, `M`
//! times in total. Degradation increments over an interval of length `f` at
//! stress level `S_j` follow a gamma distribution with shape `f * alpha_j`
//! and scale `beta`, where the rate obeys the Arrhenius law
//!
//! ```text
//! alpha_j = exp(a + b / (273 + S_j))
//! ```
//!
//! (the conventional 273-degree offset, not 273.15). Stress starts at the
//! first elevated level and is raised to the next level at the first
//! measurement where any unit's cumulative degradation reaches the threshold
//! `omega1`. A unit fails when its degradation crosses the critical level
//! `D`; the use-condition stress `s0` enters only through the lifetime
//! distribution at use conditions.
//!
//! All internal time is in abstract units (one unit = one inspection-clock
//! tick); `unit_hours` converts to hours purely for reporting, e.g. the test
//! duration `unit_hours * f * M`.
//!
//! The total cost of a plan is
//!
//! ```text
//! TC(n, f, M) = c_op * f * M + c_mea * n * M + c_it * n
//! ```
//!
//! and a plan is feasible when `TC <= budget`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Gamma-process parameters `theta = (a, b, beta)`.
///
/// `a` and `b` are the Arrhenius intercept and slope (`b` in units of
/// temperature degrees, typically negative); `beta` is the gamma scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Arrhenius intercept.
    pub a: f64,
    /// Arrhenius slope in temperature-degree units (negative for
    /// degradation that accelerates with temperature).
    pub b: f64,
    /// Gamma scale parameter, strictly positive.
    pub beta: f64,
}

impl ModelParams {
    /// Validates and constructs parameters: `a`, `b` finite, `beta > 0`.
    pub fn new(a: f64, b: f64, beta: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "model parameters a and b must be finite, got a={a}, b={b}"
            )));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "gamma scale beta must be a positive finite number, got {beta}"
            )));
        }
        Ok(Self { a, b, beta })
    }
}

/// Stress configuration: use stress, ordered test stress levels, and the
/// hours-per-time-unit conversion used only in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StressSpec {
    /// Use-condition stress in degrees Celsius.
    pub s0: f64,
    /// Test stress levels `S_1 < S_2 < ...` in degrees Celsius, all above
    /// the use stress.
    pub levels: Vec<f64>,
    /// Hours per abstract time unit, for reporting only.
    pub unit_hours: f64,
}

impl StressSpec {
    /// Validates ordering (`s0 < levels[0]`, levels strictly increasing),
    /// the physical bound `> -273` on every temperature, and
    /// `unit_hours > 0`.
    pub fn new(s0: f64, levels: Vec<f64>, unit_hours: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one test stress level is required".into(),
            ));
        }
        for &s in std::iter::once(&s0).chain(levels.iter()) {
            if !s.is_finite() || s <= -273.0 {
                return Err(Error::InvalidConfig(format!(
                    "stress temperatures must be finite and above -273 C, got {s}"
                )));
            }
        }
        if s0 >= levels[0] {
            return Err(Error::InvalidConfig(format!(
                "use stress s0={s0} must lie strictly below the first test level {}",
                levels[0]
            )));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "test stress levels must be strictly increasing, got {levels:?}"
            )));
        }
        if !(unit_hours > 0.0) || !unit_hours.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "unit_hours must be a positive finite number, got {unit_hours}"
            )));
        }
        Ok(Self { s0, levels, unit_hours })
    }

    /// Number of test stress levels `m`.
    pub fn m(&self) -> usize {
        self.levels.len()
    }
}

/// A concrete test plan: the decision variables of the design problem plus
/// the critical degradation level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestPlan {
    /// Number of test units.
    pub n: u32,
    /// Measurement frequency in time units (interval between inspections).
    pub f: u32,
    /// Number of measurements per unit.
    pub m: u32,
    /// Stress-elevation threshold on cumulative degradation, in `(0, D)`.
    pub omega1: f64,
    /// Critical degradation level defining failure.
    pub d: f64,
}

impl TestPlan {
    /// Validates `n >= 1`, `f >= 1`, `m >= 2`, `d > 0`, `0 < omega1 < d`.
    pub fn new(n: u32, f: u32, m: u32, omega1: f64, d: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidConfig("plan needs at least one unit".into()));
        }
        if f < 1 {
            return Err(Error::InvalidConfig(
                "measurement frequency f must be at least 1 time unit".into(),
            ));
        }
        if m < 2 {
            return Err(Error::InvalidConfig(format!(
                "plan needs at least two measurements, got M={m}"
            )));
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "critical level D must be positive and finite, got {d}"
            )));
        }
        if !(omega1 > 0.0 && omega1 < d) {
            return Err(Error::InvalidConfig(format!(
                "elevation threshold omega1={omega1} must lie strictly inside (0, D={d})"
            )));
        }
        Ok(Self { n, f, m, omega1, d })
    }

    /// Test duration in hours, `unit_hours * f * M` (reporting only).
    pub fn duration_hours(&self, stress: &StressSpec) -> f64 {
        stress.unit_hours * f64::from(self.f) * f64::from(self.m)
    }
}

/// Cost coefficients and the experiment budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    /// Operation cost per time unit.
    pub c_op: f64,
    /// Cost per measurement (per unit, per inspection).
    pub c_mea: f64,
    /// Cost per test item.
    pub c_it: f64,
    /// Total budget `C_b`.
    pub budget: f64,
}

impl CostModel {
    /// Validates nonnegative coefficients and a positive budget.
    pub fn new(c_op: f64, c_mea: f64, c_it: f64, budget: f64) -> Result<Self> {
        for (name, v) in [("c_op", c_op), ("c_mea", c_mea), ("c_it", c_it)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "cost coefficient {name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        if !(budget > 0.0) || !budget.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "budget must be positive and finite, got {budget}"
            )));
        }
        Ok(Self { c_op, c_mea, c_it, budget })
    }
}

/// Arrhenius reaction rate `alpha = exp(a + b / (273 + temp_c))`.
///
/// Strictly increasing in temperature when `b < 0`. The offset is the
/// conventional 273 (not 273.15).
///
/// # Errors
///
/// [`Error::Domain`] if `temp_c <= -273`; [`Error::Numerical`] if the
/// exponential overflows.
pub fn arrhenius_rate(params: &ModelParams, temp_c: f64) -> Result<f64> {
    if !temp_c.is_finite() || temp_c <= -273.0 {
        return Err(Error::Domain(format!(
            "temperature must be finite and above -273 C, got {temp_c}"
        )));
    }
    let rate = (params.a + params.b / (273.0 + temp_c)).exp();
    if !rate.is_finite() {
        return Err(Error::Numerical(format!(
            "Arrhenius rate overflowed at a={}, b={}, temp={temp_c}",
            params.a, params.b
        )));
    }
    Ok(rate)
}

/// Total experiment cost `TC(n, f, M) = c_op f M + c_mea n M + c_it n`.
///
/// Independent of `omega1`; exact arithmetic in the inputs.
pub fn total_cost(plan: &TestPlan, costs: &CostModel) -> f64 {
    let n = f64::from(plan.n);
    let f = f64::from(plan.f);
    let m = f64::from(plan.m);
    costs.c_op * f * m + costs.c_mea * n * m + costs.c_it * n
}

/// Raw JSON configuration consumed by the command-line interface.
///
/// Schema (unknown keys are rejected at every level):
///
/// ```json
/// {
///   "params": {"a": 4.11, "b": -4006.46, "beta": 0.0594},
///   "stress": {"s0": 50.0, "levels": [83.0, 133.0], "unit_hours": 4.0},
///   "plan":   {"D": 5.0},
///   "costs":  {"c_op": 1.9, "c_mea": 1.3, "c_it": 53.0, "budget": 1500.0},
///   "p": 0.5
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Gamma-process parameters.
    pub params: ModelParams,
    /// Stress configuration.
    pub stress: StressSpec,
    /// Plan-level constants (the critical degradation level).
    pub plan: PlanConfig,
    /// Cost coefficients and budget.
    pub costs: CostModel,
    /// Quantile order for the design objective, in `(0, 1)`.
    pub p: f64,
}

/// The plan-level constants of the configuration file: only the critical
/// degradation level; the decision variables `(n, f, M, omega1)` are chosen
/// by the design search or supplied per command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    /// Critical degradation level.
    #[serde(rename = "D")]
    pub d: f64,
}

/// A fully validated configuration: every structural and semantic invariant
/// of the domain types has been checked, so numeric code can consume it
/// without further guards.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Gamma-process parameters.
    pub params: ModelParams,
    /// Stress configuration.
    pub stress: StressSpec,
    /// Cost coefficients and budget.
    pub costs: CostModel,
    /// Critical degradation level.
    pub d: f64,
    /// Quantile order for the design objective.
    pub p: f64,
}

impl Config {
    /// Parses a configuration from JSON text; syntax errors are reported
    /// with line and column.
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::InvalidConfig(format!(
                "config parse error at line {}, column {}: {e}",
                e.line(),
                e.column()
            ))
        })
    }

    /// Checks every semantic invariant and returns the validated scenario.
    pub fn validate(&self) -> Result<Scenario> {
        let params = ModelParams::new(self.params.a, self.params.b, self.params.beta)?;
        let stress = StressSpec::new(
            self.stress.s0,
            self.stress.levels.clone(),
            self.stress.unit_hours,
        )?;
        let costs = CostModel::new(
            self.costs.c_op,
            self.costs.c_mea,
            self.costs.c_it,
            self.costs.budget,
        )?;
        if !(self.plan.d > 0.0) || !self.plan.d.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "critical level D must be positive and finite, got {}",
                self.plan.d
            )));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "quantile order p must lie in (0, 1), got {}",
                self.p
            )));
        }
        Ok(Scenario {
            params,
            stress,
            costs,
            d: self.plan.d,
            p: self.p,
        })
    }
}
