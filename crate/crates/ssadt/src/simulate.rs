//! Reproducible Monte Carlo generation of SSADT datasets.
//!
//! A simulated test follows the operational protocol directly: at each
//! measurement index `k = 1..M` every unit accrues an independent gamma
//! increment `Ga(f*alpha_j, beta)` over the interval `((k-1)f, kf]`, where
//! `j` is the stress stage in force during that interval. The stress is
//! raised from the first to the second level at the first measurement index
//! `kappa1` where any unit's cumulative degradation reaches the elevation
//! threshold `omega1` (capped at `M`), so intervals `k <= kappa1` carry the
//! stage-1 shape and intervals `k > kappa1` the stage-2 shape.
//!
//! Randomness is counter-based: each (replication, unit) pair owns a ChaCha
//! stream keyed on the dataset seed, so batches are deterministic, order
//! independent, and safe to generate in parallel, and replication `r` of a
//! batch does not depend on how many replications surround it.

use std::io;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{arrhenius_rate, ModelParams, StressSpec, TestPlan};
use crate::{Error, Result};

/// One simulated (or recorded) SSADT dataset: per-unit, per-interval
/// degradation increments together with the realized elevation index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    /// `increments[i][k-1]` is unit `i`'s increment over interval `k`,
    /// `i = 0..n`, `k = 1..M`; all entries are positive.
    pub increments: Vec<Vec<f64>>,
    /// First measurement index whose cumulative degradation reached
    /// `omega1` in some unit, capped at `M`.
    pub kappa1: u32,
    /// The plan the dataset was generated under.
    pub plan: TestPlan,
    /// The dataset seed (batch seed for batch members).
    pub seed: u64,
}

impl ObservationSet {
    /// Recomputes the elevation index from the stored increments: the first
    /// `k` with `max_i sum_{j<=k} g_ji >= omega1`, capped at `M`.
    pub fn recompute_kappa1(&self) -> u32 {
        let m = self.plan.m as usize;
        let mut cum = vec![0.0; self.increments.len()];
        for k in 0..m {
            for (c, row) in cum.iter_mut().zip(&self.increments) {
                *c += row[k];
            }
            if cum.iter().any(|&c| c >= self.plan.omega1) {
                return (k + 1) as u32;
            }
        }
        self.plan.m
    }
}

/// A counter-based random stream: `(seed, stream_id)` fully determines the
/// draw sequence, with `stream_id` packing (replication, unit).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    /// Dataset seed.
    pub seed: u64,
    /// Stream counter within the seed.
    pub stream_id: u64,
}

impl RngStream {
    /// Stream for `unit` within `replication`. Replications above `2^32`
    /// would collide with unit numbering and are rejected.
    pub fn for_unit(seed: u64, replication: u64, unit: u32) -> Self {
        debug_assert!(replication < 1 << 32, "replication counter exceeds stream capacity");
        Self { seed, stream_id: (replication << 32) | u64::from(unit) }
    }

    /// Instantiates the generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Draws one gamma increment with the given shape and scale.
///
/// Shapes far below one, routine here because interval shapes are
/// `f*alpha_j`, are handled by the boosting identity
/// `Ga(s) = Ga(s+1) * U^(1/s)`. When that product underflows, the true draw
/// lies below the range of `f64`, so the result is clamped to the smallest
/// positive normal float rather than resampled: increments stay strictly
/// positive and the clamp touches only mass that is unrepresentable anyway.
///
/// # Errors
///
/// [`Error::Domain`] for nonpositive shape or scale.
pub fn sample_gamma_increment<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    let dist = Gamma::new(shape, scale).map_err(|e| {
        Error::Domain(format!("gamma increment needs positive shape and scale: {e}"))
    })?;
    Ok(dist.sample(rng).max(f64::MIN_POSITIVE))
}

fn simulate_replication(
    plan: &TestPlan,
    params: &ModelParams,
    stress: &StressSpec,
    seed: u64,
    replication: u64,
) -> Result<ObservationSet> {
    if stress.m() != 2 {
        return Err(Error::Unsupported(format!(
            "simulation covers two-level stress profiles, got m = {}",
            stress.m()
        )));
    }
    let f = f64::from(plan.f);
    let shape1 = f * arrhenius_rate(params, stress.levels[0])?;
    let shape2 = f * arrhenius_rate(params, stress.levels[1])?;
    let n = plan.n as usize;
    let m = plan.m as usize;
    let mut rngs: Vec<ChaCha12Rng> = (0..n)
        .map(|i| RngStream::for_unit(seed, replication, i as u32).rng())
        .collect();
    let mut increments = vec![vec![0.0; m]; n];
    let mut cum = vec![0.0; n];
    let mut kappa1: Option<u32> = None;
    for k in 0..m {
        let shape = if kappa1.is_none() { shape1 } else { shape2 };
        for i in 0..n {
            let g = sample_gamma_increment(shape, params.beta, &mut rngs[i])?;
            increments[i][k] = g;
            cum[i] += g;
        }
        if kappa1.is_none() && cum.iter().any(|&c| c >= plan.omega1) {
            kappa1 = Some((k + 1) as u32);
        }
    }
    Ok(ObservationSet {
        increments,
        kappa1: kappa1.unwrap_or(plan.m),
        plan: plan.clone(),
        seed,
    })
}

/// Simulates one SSADT dataset under the measurement-triggered elevation
/// protocol.
///
/// # Errors
///
/// [`Error::Unsupported`] unless the stress profile has exactly two levels;
/// propagation of Arrhenius evaluation errors.
pub fn simulate_test(
    plan: &TestPlan,
    params: &ModelParams,
    stress: &StressSpec,
    seed: u64,
) -> Result<ObservationSet> {
    simulate_replication(plan, params, stress, seed, 0)
}

/// Simulates `reps` independent datasets; replication `r` uses the streams
/// `(seed, (r, unit))`, so the batch is deterministic and its members never
/// share streams.
///
/// # Errors
///
/// [`Error::Domain`] for `reps = 0`; otherwise as [`simulate_test`].
pub fn simulate_batch(
    plan: &TestPlan,
    params: &ModelParams,
    stress: &StressSpec,
    reps: u32,
    seed: u64,
) -> Result<Vec<ObservationSet>> {
    if reps == 0 {
        return Err(Error::Domain("a batch needs at least one replication".into()));
    }
    (0..u64::from(reps))
        .into_par_iter()
        .map(|r| simulate_replication(plan, params, stress, seed, r))
        .collect()
}

/// Writes datasets as CSV with header
/// `unit,k,time,stress_c,increment,cum_level,kappa1`.
///
/// Unit ids are 1-based and run consecutively across batch members so the
/// file stays flat; `time = k*f` in the model's time units; `stress_c` is
/// the level in force during interval `k` (the second level strictly after
/// `kappa1`). Floats are written in shortest round-trip form, so raw
/// increments survive a parse bit-exactly.
///
/// # Errors
///
/// [`Error::Io`] on write failure.
pub fn write_dataset_csv<W: io::Write>(
    writer: W,
    sets: &[ObservationSet],
    stress: &StressSpec,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["unit", "k", "time", "stress_c", "increment", "cum_level", "kappa1"])
        .map_err(io::Error::from)?;
    let mut unit_offset: u64 = 0;
    for set in sets {
        let f = f64::from(set.plan.f);
        for (i, row) in set.increments.iter().enumerate() {
            let mut cum = 0.0;
            for (k0, &g) in row.iter().enumerate() {
                let k = k0 as u32 + 1;
                cum += g;
                let level = if k <= set.kappa1 { stress.levels[0] } else { stress.levels[1] };
                w.write_record([
                    (unit_offset + i as u64 + 1).to_string(),
                    k.to_string(),
                    (f64::from(k) * f).to_string(),
                    level.to_string(),
                    g.to_string(),
                    cum.to_string(),
                    set.kappa1.to_string(),
                ])
                .map_err(io::Error::from)?;
            }
        }
        unit_offset += set.increments.len() as u64;
    }
    w.flush().map_err(Error::Io)?;
    Ok(())
}

/// Reads a dataset file written by [`write_dataset_csv`] back into
/// observation sets, splitting the flat unit numbering into groups of
/// `plan.n` units.
///
/// Only `unit`, `k`, `increment`, and `kappa1` carry state; the derived
/// columns are ignored. Rows must arrive in writer order (unit-major,
/// `k = 1..M` consecutive, units consecutive from 1). Increments round-trip
/// bit-exactly through the shortest-form float text, so the recorded
/// `kappa1` is revalidated against [`ObservationSet::recompute_kappa1`];
/// a mismatch means the file and the supplied plan disagree (for example a
/// different `omega1`). Parsed sets carry seed 0: the format does not
/// record the generator seed.
///
/// # Errors
///
/// [`Error::InvalidConfig`] for a malformed header, field, or row order,
/// a unit count that is not a multiple of `plan.n`, a nonpositive
/// increment, or a `kappa1` column inconsistent with the increments;
/// [`Error::Io`] on read failure.
pub fn read_dataset_csv<R: io::Read>(reader: R, plan: &TestPlan) -> Result<Vec<ObservationSet>> {
    let mut r = csv::Reader::from_reader(reader);
    let expected = ["unit", "k", "time", "stress_c", "increment", "cum_level", "kappa1"];
    let headers = r.headers().map_err(|e| {
        Error::InvalidConfig(format!("dataset header is unreadable: {e}"))
    })?;
    if headers.iter().ne(expected) {
        return Err(Error::InvalidConfig(format!(
            "dataset header must be {:?}, got {:?}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let m = plan.m as usize;
    let mut units: Vec<Vec<f64>> = Vec::new();
    let mut kappas: Vec<u32> = Vec::new();
    for (idx, record) in r.records().enumerate() {
        let line = idx + 2;
        let record =
            record.map_err(|e| Error::InvalidConfig(format!("dataset line {line}: {e}")))?;
        let field = |i: usize| -> Result<&str> {
            record.get(i).ok_or_else(|| {
                Error::InvalidConfig(format!("dataset line {line}: missing column {}", i + 1))
            })
        };
        let unit: u64 = field(0)?.parse().map_err(|e| {
            Error::InvalidConfig(format!("dataset line {line}: bad unit id: {e}"))
        })?;
        let k: u32 = field(1)?
            .parse()
            .map_err(|e| Error::InvalidConfig(format!("dataset line {line}: bad index k: {e}")))?;
        let increment: f64 = field(4)?.parse().map_err(|e| {
            Error::InvalidConfig(format!("dataset line {line}: bad increment: {e}"))
        })?;
        let kappa1: u32 = field(6)?.parse().map_err(|e| {
            Error::InvalidConfig(format!("dataset line {line}: bad kappa1: {e}"))
        })?;
        if !(increment > 0.0) || !increment.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "dataset line {line}: increments must be positive and finite, got {increment}"
            )));
        }
        if k == 1 {
            if unit != units.len() as u64 + 1 {
                return Err(Error::InvalidConfig(format!(
                    "dataset line {line}: expected unit {}, found unit {unit}",
                    units.len() + 1
                )));
            }
            units.push(Vec::with_capacity(m));
            kappas.push(kappa1);
        }
        let unit_count = units.len();
        let current = units.last_mut().ok_or_else(|| {
            Error::InvalidConfig(format!("dataset line {line}: row before any unit started"))
        })?;
        if unit != unit_count as u64 || k as usize != current.len() + 1 {
            return Err(Error::InvalidConfig(format!(
                "dataset line {line}: expected unit {unit_count} interval {}, found unit {unit} \
                 interval {k}",
                current.len() + 1
            )));
        }
        if kappa1 != kappas[unit_count - 1] {
            return Err(Error::InvalidConfig(format!(
                "dataset line {line}: kappa1 changed within a unit"
            )));
        }
        current.push(increment);
    }
    if units.is_empty() {
        return Err(Error::InvalidConfig("dataset contains no data rows".into()));
    }
    if let Some(short) = units.iter().position(|u| u.len() != m) {
        return Err(Error::InvalidConfig(format!(
            "unit {} has {} intervals, the plan needs {m}",
            short + 1,
            units[short].len()
        )));
    }
    let n = plan.n as usize;
    if units.len() % n != 0 {
        return Err(Error::InvalidConfig(format!(
            "{} units cannot form complete sets of n = {n}",
            units.len()
        )));
    }
    let mut sets = Vec::with_capacity(units.len() / n);
    for (group_idx, group) in units.chunks(n).enumerate() {
        let kappa_group = &kappas[group_idx * n..(group_idx + 1) * n];
        if kappa_group.iter().any(|&x| x != kappa_group[0]) {
            return Err(Error::InvalidConfig(format!(
                "replication {}: units disagree on kappa1",
                group_idx + 1
            )));
        }
        let set = ObservationSet {
            increments: group.to_vec(),
            kappa1: kappa_group[0],
            plan: *plan,
            seed: 0,
        };
        let recomputed = set.recompute_kappa1();
        if recomputed != set.kappa1 {
            return Err(Error::InvalidConfig(format!(
                "replication {}: recorded kappa1 = {} but the increments imply {} under \
                 omega1 = {}; the file was not generated under this plan",
                group_idx + 1,
                set.kappa1,
                recomputed,
                plan.omega1
            )));
        }
        sets.push(set);
    }
    Ok(sets)
}
