//! Types shared by the model pipelines: options, probe outcomes and IP statistics.

use crate::preemptive::LayeredForm;
use crate::mcip::{Decoded, McipError, DEFAULT_CONFIG_CAP};
use crate::model::Schedule;
use crate::nfold::{NFoldProgram, SolveOptions, SolveStats};
use crate::rat::{reciprocal_int, Show};
use crate::Rat;
use serde::Serialize;
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineOptions {
    /// Replace module sizes by rounded container sizes (splittable and setup-class).
    pub container_rounding: bool,
    /// Bound the number of nontrivial machines (splittable).
    pub simple_schedule: bool,
    pub solver: SolveOptions,
    pub config_cap: usize,
    /// Program used for the layered schedule (preemptive).
    pub layered_form: LayeredForm,
    /// Directory receiving a JSON copy of every program handed to the solver.
    pub dump_dir: Option<PathBuf>,
}

impl PipelineOptions {
    /// Writes `program` to the dump directory as `program-<k>.json`, numbering after existing files.
    pub fn dump(&self, program: &NFoldProgram) {
        let Some(dir) = &self.dump_dir else { return };
        let taken = std::fs::read_dir(dir).map(|d| d.count()).unwrap_or(0);
        let path = dir.join(format!("program-{taken}.json"));
        if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, program.to_json())) {
            eprintln!("could not dump {}: {e}", path.display());
        }
    }

    pub(crate) fn dump_mcip<T>(&self, spec: &crate::mcip::McipSpec<T>) {
        if self.dump_dir.is_some() {
            self.dump(&crate::mcip::assemble(spec, true).0);
        }
    }
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { container_rounding: false, simple_schedule: true, solver: SolveOptions::default(), config_cap: DEFAULT_CONFIG_CAP, layered_form: LayeredForm::Auto, dump_dir: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IpStats {
    pub r: usize,
    pub s: usize,
    pub t: usize,
    pub n: usize,
    pub delta: i64,
    pub phi: i64,
    pub configurations: usize,
    pub modules: usize,
    pub augmentation_steps: usize,
    pub fallback: bool,
    pub lp_solves: usize,
    pub bnb_nodes: usize,
    pub objective: Option<i64>,
    pub threshold: i64,
}

impl IpStats {
    pub fn new(program: &NFoldProgram, stats: &SolveStats, configurations: usize, modules: usize, decoded: Option<&Decoded>, threshold: i64) -> Self {
        IpStats {
            r: program.r(),
            s: program.s(),
            t: program.t,
            n: program.n,
            delta: program.delta(),
            phi: program.phi(),
            configurations,
            modules,
            augmentation_steps: stats.augmentation_steps,
            fallback: stats.fallback,
            lp_solves: stats.lp_solves,
            bnb_nodes: stats.bnb_nodes,
            objective: decoded.map(|d| d.objective),
            threshold,
        }
    }
}

/// Why a makespan guess was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reject {
    /// Some job (or setup plus job) cannot finish by the guess.
    TooLong,
    /// Every medium setup band holds too much work.
    NoDelta,
    /// The free-space demand of the removed jobs exceeds the available space.
    NoRoom,
    /// The configuration program has no solution within the space threshold.
    NoSolution,
}

impl fmt::Display for Reject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reject::TooLong => "a job does not fit below the makespan guess",
            Reject::NoDelta => "no admissible medium setup band",
            Reject::NoRoom => "removed jobs need more space than available",
            Reject::NoSolution => "configuration program has no solution within the threshold",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Accepted {
    pub schedule: Schedule,
    pub makespan: Rat,
    /// Guaranteed makespan bound of the pipeline for this guess.
    pub bound: Rat,
    pub stats: Option<IpStats>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Probe {
    Accepted(Accepted),
    Rejected { reason: Reject, stats: Option<IpStats> },
}

impl Probe {
    pub fn accepted(&self) -> Option<&Accepted> {
        match self {
            Probe::Accepted(a) => Some(a),
            Probe::Rejected { .. } => None,
        }
    }

    pub fn stats(&self) -> Option<&IpStats> {
        match self {
            Probe::Accepted(a) => a.stats.as_ref(),
            Probe::Rejected { stats, .. } => stats.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error("epsilon must be 1/k for an integer k >= 2, got {0}")]
    BadEpsilon(String),
    #[error("makespan guess must be positive")]
    BadGuess,
    #[error(transparent)]
    Mcip(#[from] McipError),
}

/// `1/eps` when `eps = 1/k` with `k >= 2`.
pub fn epsilon_reciprocal(eps: &Rat) -> Result<i128, PipelineError> {
    match reciprocal_int(eps) {
        Some(k) if k >= 2 => Ok(k),
        _ => Err(PipelineError::BadEpsilon(Show(eps).to_string())),
    }
}
