//! Dual approximation: binary search over makespan guesses, one pipeline run per guess.

use crate::model::{self, Instance, Model, Schedule};
use crate::pipeline::{epsilon_reciprocal, IpStats, PipelineError, PipelineOptions, Probe, Reject};
use crate::rat::{serde_opt_rat, serde_rat};
use crate::{preemptive, setup_class, splittable, Rat};
use num_traits::{One, Zero};
use serde::Serialize;
use std::collections::BTreeSet;

/// Upper bound `B ≥ OPT` and factor `b` with `B ≤ b·OPT`.
pub fn initial_bound(instance: &Instance) -> (Rat, u64) {
    match instance {
        Instance::SetupClass(c) => {
            let used: BTreeSet<usize> = c.jobs.iter().map(|j| j.class).collect();
            let b = c.jobs.iter().map(|j| j.p).sum::<Rat>() + used.iter().map(|&k| c.setups[k]).sum::<Rat>();
            (b, c.machines.min(c.jobs.len().max(1) as u64))
        }
        Instance::Splittable(j) => (j.jobs.iter().map(|x| x.p + x.s).sum(), j.machines),
        Instance::Preemptive(j) => (j.jobs.iter().map(|x| x.p + x.s).sum(), j.machines.min(j.jobs.len().max(1) as u64)),
    }
}

/// `⌈log₂(b/ε)⌉ + 1`.
pub fn iteration_limit(b: u64, eps: &Rat) -> Result<u32, PipelineError> {
    let target = b as i128 * epsilon_reciprocal(eps)?;
    let mut k = 0u32;
    while (1i128 << k) < target {
        k += 1;
    }
    Ok(k + 1)
}

/// Runs the model's pipeline for one guess.
pub fn probe(instance: &Instance, t: &Rat, eps: &Rat, opts: &PipelineOptions) -> Result<Probe, PipelineError> {
    match instance {
        Instance::SetupClass(c) => setup_class::solve(c, t, eps, opts),
        Instance::Splittable(j) => splittable::solve(j, t, eps, opts),
        Instance::Preemptive(j) => preemptive::solve(j, t, eps, opts),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProbeRecord {
    #[serde(rename = "T", with = "serde_rat")]
    pub t: Rat,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<Reject>,
    #[serde(with = "serde_opt_rat", skip_serializing_if = "Option::is_none")]
    pub makespan: Option<Rat>,
    #[serde(with = "serde_opt_rat", skip_serializing_if = "Option::is_none")]
    pub bound: Option<Rat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<IpStats>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchConfig {
    #[serde(with = "serde_rat")]
    pub eps: Rat,
    pub model: Model,
    #[serde(rename = "B", with = "serde_rat")]
    pub initial: Rat,
    pub b: u64,
    pub iteration_limit: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub config: SearchConfig,
    pub schedule: Schedule,
    pub makespan: Rat,
    /// Smallest accepted guess.
    pub accepted_t: Rat,
    /// Guess whose schedule is returned.
    pub schedule_t: Rat,
    /// `a` with makespan bound `(1 + aε)T` at the smallest accepted guess.
    pub guarantee: Rat,
    pub probes: Vec<ProbeRecord>,
}

impl SearchResult {
    pub fn iterations(&self) -> usize {
        self.probes.len()
    }

    /// No rejected guess lies above an accepted one.
    pub fn is_monotone(&self) -> bool {
        let lowest_accept = self.probes.iter().filter(|p| p.accepted).map(|p| p.t).min();
        let highest_reject = self.probes.iter().filter(|p| !p.accepted).map(|p| p.t).max();
        match (lowest_accept, highest_reject) {
            (Some(a), Some(r)) => r < a,
            _ => true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("the initial bound {0} was rejected")]
    InitialRejected(String),
}

/// Binary search on `[B/b, B]`, starting with `T = B`, until the interval is at most `εB/b` wide.
/// Returns the accepted schedule of smallest makespan.
pub fn search(instance: &Instance, eps: &Rat, opts: &PipelineOptions) -> Result<SearchResult, SearchError> {
    let (initial, b) = initial_bound(instance);
    let config = SearchConfig { eps: *eps, model: instance.model(), initial, b, iteration_limit: iteration_limit(b, eps)? };
    let mut probes = Vec::new();
    let mut best: Option<(Schedule, Rat, Rat)> = None;
    let run = |t: Rat, probes: &mut Vec<ProbeRecord>, best: &mut Option<(Schedule, Rat, Rat)>| -> Result<Option<Rat>, SearchError> {
        let outcome = probe(instance, &t, eps, opts)?;
        let record = match &outcome {
            Probe::Accepted(a) => ProbeRecord { t, accepted: true, reason: None, makespan: Some(a.makespan), bound: Some(a.bound), stats: a.stats.clone() },
            Probe::Rejected { reason, stats } => ProbeRecord { t, accepted: false, reason: Some(reason.clone()), makespan: None, bound: None, stats: stats.clone() },
        };
        probes.push(record);
        Ok(match outcome {
            Probe::Accepted(a) => {
                if best.as_ref().is_none_or(|(_, m, _)| a.makespan < *m) {
                    *best = Some((a.schedule, a.makespan, t));
                }
                Some(a.bound)
            }
            Probe::Rejected { .. } => None,
        })
    };
    if initial.is_zero() {
        // No jobs: the empty schedule is optimal and needs no probe.
        let schedule = match probe(instance, &Rat::one(), eps, opts)? {
            Probe::Accepted(a) => a.schedule,
            Probe::Rejected { .. } => unreachable!("an empty instance fits any guess"),
        };
        let zero = Rat::zero();
        return Ok(SearchResult { config, schedule, makespan: zero, accepted_t: zero, schedule_t: zero, guarantee: zero, probes });
    }
    let mut hi = initial;
    let mut hi_bound = run(hi, &mut probes, &mut best)?.ok_or_else(|| SearchError::InitialRejected(crate::rat::format_rat(&initial)))?;
    let mut lo = initial / Rat::from_integer(b as i128);
    let width = eps * lo;
    while hi - lo > width {
        let mid = (lo + hi) / Rat::from_integer(2);
        match run(mid, &mut probes, &mut best)? {
            Some(bound) => {
                hi = mid;
                hi_bound = bound;
            }
            None => lo = mid,
        }
    }
    assert!(probes.len() as u32 <= config.iteration_limit, "iteration limit exceeded");
    let (schedule, makespan, schedule_t) = best.expect("the initial bound was accepted");
    let guarantee = (hi_bound / hi - Rat::one()) / eps;
    debug_assert!(model::validate(instance, &schedule).is_ok());
    Ok(SearchResult { config, schedule, makespan, accepted_t: hi, schedule_t, guarantee, probes })
}
