//! Instances, schedules, validation, makespan and free space for the three scheduling models.
//!
//! Internally all indices are 0-based; the JSON encoding uses 1-based job, class and machine
//! numbers.

use crate::rat::{format_rat, parse_rat, Rat, Show};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    SetupClass,
    Splittable,
    Preemptive,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::SetupClass => "setup-class",
            Model::Splittable => "splittable",
            Model::Preemptive => "preemptive",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "setup-class" => Ok(Model::SetupClass),
            "splittable" => Ok(Model::Splittable),
            "preemptive" => Ok(Model::Preemptive),
            other => Err(format!("unknown model {other:?}")),
        }
    }
}

/// Job of the setup-class model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassJob {
    pub p: Rat,
    pub class: usize,
}

/// Job with its own setup time (splittable and preemptive models).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetupJob {
    pub p: Rat,
    pub s: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassInstance {
    pub machines: u64,
    pub jobs: Vec<ClassJob>,
    pub setups: Vec<Rat>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobInstance {
    pub machines: u64,
    pub jobs: Vec<SetupJob>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instance {
    SetupClass(ClassInstance),
    Splittable(JobInstance),
    Preemptive(JobInstance),
}

impl Instance {
    pub fn model(&self) -> Model {
        match self {
            Instance::SetupClass(_) => Model::SetupClass,
            Instance::Splittable(_) => Model::Splittable,
            Instance::Preemptive(_) => Model::Preemptive,
        }
    }

    pub fn machines(&self) -> u64 {
        match self {
            Instance::SetupClass(i) => i.machines,
            Instance::Splittable(i) | Instance::Preemptive(i) => i.machines,
        }
    }

    pub fn job_count(&self) -> usize {
        match self {
            Instance::SetupClass(i) => i.jobs.len(),
            Instance::Splittable(i) | Instance::Preemptive(i) => i.jobs.len(),
        }
    }

    /// Checks the structural invariants of the instance.
    pub fn check(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::BadInstance(msg));
        if self.machines() == 0 {
            return bad("machine count must be positive".into());
        }
        match self {
            Instance::SetupClass(i) => {
                if i.setups.len() > i.jobs.len() {
                    return bad("more classes than jobs".into());
                }
                for (k, s) in i.setups.iter().enumerate() {
                    if !s.is_positive() {
                        return bad(format!("class {} has non-positive setup", k + 1));
                    }
                }
                for (j, job) in i.jobs.iter().enumerate() {
                    if !job.p.is_positive() {
                        return bad(format!("job {} has non-positive processing time", j + 1));
                    }
                    if job.class >= i.setups.len() {
                        return bad(format!("job {} refers to unknown class", j + 1));
                    }
                }
            }
            Instance::Splittable(i) | Instance::Preemptive(i) => {
                for (j, job) in i.jobs.iter().enumerate() {
                    if !job.p.is_positive() || !job.s.is_positive() {
                        return bad(format!("job {} needs positive p and s", j + 1));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Part {
    pub job: usize,
    pub machine: u64,
    pub length: Rat,
}

/// `count` machines that each run one part of `job` with processing `length`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrivialRun {
    pub job: usize,
    pub count: u64,
    pub length: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedPart {
    pub job: usize,
    pub machine: u64,
    pub length: Rat,
    /// Start of the setup that precedes the processing.
    pub start: Rat,
}

impl TimedPart {
    pub fn end(&self, setup: &Rat) -> Rat {
        self.start + setup + self.length
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitSchedule {
    pub parts: Vec<Part>,
    pub trivial_runs: Vec<TrivialRun>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schedule {
    /// Machine of each job.
    SetupClass(Vec<u64>),
    Splittable(SplitSchedule),
    Preemptive(Vec<TimedPart>),
}

impl Schedule {
    pub fn model(&self) -> Model {
        match self {
            Schedule::SetupClass(_) => Model::SetupClass,
            Schedule::Splittable(_) => Model::Splittable,
            Schedule::Preemptive(_) => Model::Preemptive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("schedule is for the {schedule} model but the instance is {instance}")]
    ModelMismatch { instance: &'static str, schedule: &'static str },
    #[error("makespan {makespan} exceeds the bound {bound}")]
    BoundExceeded { makespan: String, bound: String },
    #[error("layered free space needs a positive layer width dividing the bound")]
    BadLayerWidth,
    #[error("layered free space is only defined for time-stamped schedules")]
    NotLayered,
    #[error("invalid instance: {0}")]
    BadInstance(String),
    #[error("invalid schedule: {0}")]
    Invalid(Violation),
    #[error("json: {0}")]
    Json(String),
}

/// First violated schedule invariant, with a witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ModelMismatch,
    WrongLength { expected: usize, found: usize },
    UnknownJob { job: usize },
    MachineOutOfRange { machine: u64 },
    NonPositiveLength { job: usize },
    NegativeStart { job: usize },
    ZeroCount { job: usize },
    Mass { job: usize, expected: Rat, found: Rat },
    TooManyMachines { used: u128, available: u64 },
    MachineOverlap { machine: u64, first: usize, second: usize, at: Rat },
    JobOverlap { job: usize, machines: (u64, u64), at: Rat },
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::ModelMismatch => "model-mismatch",
            Violation::WrongLength { .. } => "assignment-length",
            Violation::UnknownJob { .. } => "unknown-job",
            Violation::MachineOutOfRange { .. } => "machine-range",
            Violation::NonPositiveLength { .. } => "part-length",
            Violation::NegativeStart { .. } => "negative-start",
            Violation::ZeroCount { .. } => "run-count",
            Violation::Mass { .. } => "mass",
            Violation::TooManyMachines { .. } => "machine-count",
            Violation::MachineOverlap { .. } => "machine-overlap",
            Violation::JobOverlap { .. } => "job-overlap",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.kind())?;
        match self {
            Violation::ModelMismatch => write!(f, "schedule and instance models differ"),
            Violation::WrongLength { expected, found } => {
                write!(f, "expected {expected} assignments, found {found}")
            }
            Violation::UnknownJob { job } => write!(f, "job {} does not exist", job + 1),
            Violation::MachineOutOfRange { machine } => {
                write!(f, "machine {} does not exist", machine + 1)
            }
            Violation::NonPositiveLength { job } => {
                write!(f, "job {} has a part of non-positive length", job + 1)
            }
            Violation::NegativeStart { job } => write!(f, "job {} has a part starting before 0", job + 1),
            Violation::ZeroCount { job } => write!(f, "job {} has an empty trivial run", job + 1),
            Violation::Mass { job, expected, found } => write!(
                f,
                "job {} receives {} instead of {}",
                job + 1,
                Show(found),
                Show(expected)
            ),
            Violation::TooManyMachines { used, available } => {
                write!(f, "{used} machines used, {available} available")
            }
            Violation::MachineOverlap { machine, first, second, at } => write!(
                f,
                "machine {} runs jobs {} and {} together at time {}",
                machine + 1,
                first + 1,
                second + 1,
                Show(at)
            ),
            Violation::JobOverlap { job, machines, at } => write!(
                f,
                "job {} runs on machines {} and {} together at time {}",
                job + 1,
                machines.0 + 1,
                machines.1 + 1,
                Show(at)
            ),
        }
    }
}

/// Checks every schedule invariant of the instance's model.
pub fn validate(instance: &Instance, schedule: &Schedule) -> Result<(), Violation> {
    let m = instance.machines();
    match (instance, schedule) {
        (Instance::SetupClass(inst), Schedule::SetupClass(sigma)) => {
            if sigma.len() != inst.jobs.len() {
                return Err(Violation::WrongLength { expected: inst.jobs.len(), found: sigma.len() });
            }
            if let Some(&machine) = sigma.iter().find(|&&i| i >= m) {
                return Err(Violation::MachineOutOfRange { machine });
            }
            Ok(())
        }
        (Instance::Splittable(inst), Schedule::Splittable(s)) => validate_splittable(inst, s),
        (Instance::Preemptive(inst), Schedule::Preemptive(parts)) => validate_preemptive(inst, parts),
        _ => Err(Violation::ModelMismatch),
    }
}

fn validate_splittable(inst: &JobInstance, s: &SplitSchedule) -> Result<(), Violation> {
    let n = inst.jobs.len();
    let m = inst.machines;
    let mut mass = vec![Rat::zero(); n];
    let mut machines = BTreeSet::new();
    for part in &s.parts {
        if part.job >= n {
            return Err(Violation::UnknownJob { job: part.job });
        }
        if part.machine >= m {
            return Err(Violation::MachineOutOfRange { machine: part.machine });
        }
        if !part.length.is_positive() {
            return Err(Violation::NonPositiveLength { job: part.job });
        }
        mass[part.job] += part.length;
        machines.insert(part.machine);
    }
    let mut used = machines.len() as u128;
    for run in &s.trivial_runs {
        if run.job >= n {
            return Err(Violation::UnknownJob { job: run.job });
        }
        if run.count == 0 {
            return Err(Violation::ZeroCount { job: run.job });
        }
        if !run.length.is_positive() {
            return Err(Violation::NonPositiveLength { job: run.job });
        }
        mass[run.job] += run.length * Rat::from_integer(run.count as i128);
        used += run.count as u128;
    }
    for (j, job) in inst.jobs.iter().enumerate() {
        if mass[j] != job.p {
            return Err(Violation::Mass { job: j, expected: job.p, found: mass[j] });
        }
    }
    if used > m as u128 {
        return Err(Violation::TooManyMachines { used, available: m });
    }
    Ok(())
}

fn validate_preemptive(inst: &JobInstance, parts: &[TimedPart]) -> Result<(), Violation> {
    let n = inst.jobs.len();
    let mut mass = vec![Rat::zero(); n];
    for part in parts {
        if part.job >= n {
            return Err(Violation::UnknownJob { job: part.job });
        }
        if part.machine >= inst.machines {
            return Err(Violation::MachineOutOfRange { machine: part.machine });
        }
        if !part.length.is_positive() {
            return Err(Violation::NonPositiveLength { job: part.job });
        }
        if part.start.is_negative() {
            return Err(Violation::NegativeStart { job: part.job });
        }
        mass[part.job] += part.length;
    }
    for (j, job) in inst.jobs.iter().enumerate() {
        if mass[j] != job.p {
            return Err(Violation::Mass { job: j, expected: job.p, found: mass[j] });
        }
    }
    let interval = |p: &TimedPart| (p.start, p.end(&inst.jobs[p.job].s));
    let mut by_machine: BTreeMap<u64, Vec<&TimedPart>> = BTreeMap::new();
    for part in parts {
        by_machine.entry(part.machine).or_default().push(part);
    }
    for (&machine, list) in &mut by_machine {
        list.sort_by(|a, b| a.start.cmp(&b.start).then(a.job.cmp(&b.job)));
        for w in list.windows(2) {
            let (_, end) = interval(w[0]);
            if w[1].start < end {
                return Err(Violation::MachineOverlap {
                    machine,
                    first: w[0].job,
                    second: w[1].job,
                    at: w[1].start,
                });
            }
        }
    }
    let mut by_job: Vec<Vec<&TimedPart>> = vec![Vec::new(); n];
    for part in parts {
        by_job[part.job].push(part);
    }
    for (job, list) in by_job.iter_mut().enumerate() {
        list.sort_by(|a, b| a.start.cmp(&b.start).then(a.machine.cmp(&b.machine)));
        for w in list.windows(2) {
            let (_, end) = interval(w[0]);
            if w[1].start < end {
                return Err(Violation::JobOverlap {
                    job,
                    machines: (w[0].machine, w[1].machine),
                    at: w[1].start,
                });
            }
        }
    }
    Ok(())
}

/// Loads of the machines that carry work, keyed by machine; trivial runs are reported separately
/// as `(load, count)`.
pub fn machine_loads(instance: &Instance, schedule: &Schedule) -> Result<(BTreeMap<u64, Rat>, Vec<(Rat, u64)>), ModelError> {
    mismatch(instance, schedule)?;
    let mut loads: BTreeMap<u64, Rat> = BTreeMap::new();
    let mut runs = Vec::new();
    match (instance, schedule) {
        (Instance::SetupClass(inst), Schedule::SetupClass(sigma)) => {
            let mut seen = BTreeSet::new();
            for (j, &i) in sigma.iter().enumerate() {
                let job = &inst.jobs[j];
                let load = loads.entry(i).or_insert_with(Rat::zero);
                *load += job.p;
                if seen.insert((i, job.class)) {
                    *load += inst.setups[job.class];
                }
            }
        }
        (Instance::Splittable(inst), Schedule::Splittable(s)) => {
            for part in &s.parts {
                *loads.entry(part.machine).or_insert_with(Rat::zero) += inst.jobs[part.job].s + part.length;
            }
            for run in &s.trivial_runs {
                runs.push((inst.jobs[run.job].s + run.length, run.count));
            }
        }
        (Instance::Preemptive(inst), Schedule::Preemptive(parts)) => {
            for part in parts {
                *loads.entry(part.machine).or_insert_with(Rat::zero) += inst.jobs[part.job].s + part.length;
            }
        }
        _ => unreachable!(),
    }
    Ok((loads, runs))
}

fn mismatch(instance: &Instance, schedule: &Schedule) -> Result<(), ModelError> {
    if instance.model() != schedule.model() {
        return Err(ModelError::ModelMismatch {
            instance: instance.model().name(),
            schedule: schedule.model().name(),
        });
    }
    Ok(())
}

/// Maximum completion time. Setup-class counts each class setup once per machine it appears on;
/// splittable counts one setup per part and per trivial-run machine.
pub fn makespan(instance: &Instance, schedule: &Schedule) -> Result<Rat, ModelError> {
    if let (Instance::Preemptive(inst), Schedule::Preemptive(parts)) = (instance, schedule) {
        return Ok(parts.iter().map(|p| p.end(&inst.jobs[p.job].s)).max().unwrap_or_else(Rat::zero));
    }
    let (loads, runs) = machine_loads(instance, schedule)?;
    let best = loads.values().chain(runs.iter().map(|(l, _)| l)).max().copied();
    Ok(best.unwrap_or_else(Rat::zero))
}

/// Idle time within `[0, bound]` over all machines. With `layer_width`, only completely free
/// slots `[k·w, (k+1)·w)` count.
pub fn free_space(instance: &Instance, schedule: &Schedule, bound: &Rat, layer_width: Option<&Rat>) -> Result<Rat, ModelError> {
    let c_max = makespan(instance, schedule)?;
    if c_max > *bound {
        return Err(ModelError::BoundExceeded { makespan: format_rat(&c_max), bound: format_rat(bound) });
    }
    let m = Rat::from_integer(instance.machines() as i128);
    match layer_width {
        None => {
            let (loads, runs) = machine_loads(instance, schedule)?;
            let busy: Rat = loads.values().copied().sum::<Rat>()
                + runs.iter().map(|(l, c)| l * Rat::from_integer(*c as i128)).sum::<Rat>();
            Ok(m * bound - busy)
        }
        Some(w) => {
            let Schedule::Preemptive(parts) = schedule else {
                return Err(ModelError::NotLayered);
            };
            let Instance::Preemptive(inst) = instance else { unreachable!() };
            if !w.is_positive() || !(bound / w).is_integer() {
                return Err(ModelError::BadLayerWidth);
            }
            let mut used: BTreeSet<(u64, i128)> = BTreeSet::new();
            for part in parts {
                let end = part.end(&inst.jobs[part.job].s);
                if end == part.start {
                    continue;
                }
                let first = (part.start / w).floor().to_integer();
                let last = (end / w).ceil().to_integer();
                for k in first..last {
                    used.insert((part.machine, k));
                }
            }
            let slots = (bound / w).to_integer() * instance.machines() as i128;
            Ok(Rat::from_integer(slots - used.len() as i128) * w)
        }
    }
}

// ----- JSON encoding -----

#[derive(Serialize, Deserialize)]
struct JobJson {
    #[serde(with = "crate::rat::serde_rat")]
    p: Rat,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::rat::serde_opt_rat")]
    s: Option<Rat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct ClassJson {
    #[serde(with = "crate::rat::serde_rat")]
    s: Rat,
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    model: Model,
    machines: u64,
    jobs: Vec<JobJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    classes: Vec<ClassJson>,
}

pub fn instance_from_json(text: &str) -> Result<Instance, ModelError> {
    let raw: InstanceJson = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
    let missing = |what: &str, j: usize| ModelError::BadInstance(format!("job {} lacks {what}", j + 1));
    let instance = match raw.model {
        Model::SetupClass => {
            let mut jobs = Vec::with_capacity(raw.jobs.len());
            for (j, job) in raw.jobs.iter().enumerate() {
                let class = job.class.ok_or_else(|| missing("a class", j))?;
                if class == 0 {
                    return Err(ModelError::BadInstance(format!("job {} has class 0; classes start at 1", j + 1)));
                }
                jobs.push(ClassJob { p: job.p, class: class - 1 });
            }
            Instance::SetupClass(ClassInstance {
                machines: raw.machines,
                jobs,
                setups: raw.classes.iter().map(|c| c.s).collect(),
            })
        }
        model => {
            let mut jobs = Vec::with_capacity(raw.jobs.len());
            for (j, job) in raw.jobs.iter().enumerate() {
                jobs.push(SetupJob { p: job.p, s: job.s.ok_or_else(|| missing("a setup time", j))? });
            }
            let inst = JobInstance { machines: raw.machines, jobs };
            if model == Model::Splittable {
                Instance::Splittable(inst)
            } else {
                Instance::Preemptive(inst)
            }
        }
    };
    instance.check()?;
    Ok(instance)
}

pub fn instance_to_json(instance: &Instance) -> String {
    let raw = match instance {
        Instance::SetupClass(i) => InstanceJson {
            model: Model::SetupClass,
            machines: i.machines,
            jobs: i.jobs.iter().map(|j| JobJson { p: j.p, s: None, class: Some(j.class + 1) }).collect(),
            classes: i.setups.iter().map(|&s| ClassJson { s }).collect(),
        },
        Instance::Splittable(i) | Instance::Preemptive(i) => InstanceJson {
            model: instance.model(),
            machines: i.machines,
            jobs: i.jobs.iter().map(|j| JobJson { p: j.p, s: Some(j.s), class: None }).collect(),
            classes: Vec::new(),
        },
    };
    serde_json::to_string_pretty(&raw).expect("instance serializes")
}

#[derive(Serialize, Deserialize)]
struct PartJson {
    job: usize,
    machine: u64,
    #[serde(with = "crate::rat::serde_rat")]
    length: Rat,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::rat::serde_opt_rat")]
    start: Option<Rat>,
}

#[derive(Serialize, Deserialize)]
struct RunJson {
    job: usize,
    count: u64,
    #[serde(with = "crate::rat::serde_rat")]
    length: Rat,
}

#[derive(Serialize, Deserialize)]
struct ScheduleJson {
    model: Model,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    assignment: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parts: Option<Vec<PartJson>>,
    #[serde(default, rename = "trivialRuns", skip_serializing_if = "Option::is_none")]
    trivial_runs: Option<Vec<RunJson>>,
}

pub fn schedule_to_json(schedule: &Schedule) -> String {
    let raw = match schedule {
        Schedule::SetupClass(sigma) => ScheduleJson {
            model: Model::SetupClass,
            assignment: Some(sigma.iter().map(|i| i + 1).collect()),
            parts: None,
            trivial_runs: None,
        },
        Schedule::Splittable(s) => ScheduleJson {
            model: Model::Splittable,
            assignment: None,
            parts: Some(
                s.parts
                    .iter()
                    .map(|p| PartJson { job: p.job + 1, machine: p.machine + 1, length: p.length, start: None })
                    .collect(),
            ),
            trivial_runs: Some(
                s.trivial_runs
                    .iter()
                    .map(|r| RunJson { job: r.job + 1, count: r.count, length: r.length })
                    .collect(),
            ),
        },
        Schedule::Preemptive(parts) => ScheduleJson {
            model: Model::Preemptive,
            assignment: None,
            parts: Some(
                parts
                    .iter()
                    .map(|p| PartJson { job: p.job + 1, machine: p.machine + 1, length: p.length, start: Some(p.start) })
                    .collect(),
            ),
            trivial_runs: None,
        },
    };
    serde_json::to_string(&raw).expect("schedule serializes")
}

pub fn schedule_from_json(text: &str) -> Result<Schedule, ModelError> {
    let raw: ScheduleJson = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
    let one_based = |x: u64, what: &str| {
        x.checked_sub(1).ok_or_else(|| ModelError::Json(format!("{what} numbers start at 1")))
    };
    match raw.model {
        Model::SetupClass => {
            let sigma = raw.assignment.ok_or_else(|| ModelError::Json("missing assignment".into()))?;
            Ok(Schedule::SetupClass(sigma.into_iter().map(|i| one_based(i, "machine")).collect::<Result<_, _>>()?))
        }
        Model::Splittable => {
            let mut s = SplitSchedule::default();
            for p in raw.parts.unwrap_or_default() {
                s.parts.push(Part {
                    job: one_based(p.job as u64, "job")? as usize,
                    machine: one_based(p.machine, "machine")?,
                    length: p.length,
                });
            }
            for r in raw.trivial_runs.unwrap_or_default() {
                s.trivial_runs.push(TrivialRun { job: one_based(r.job as u64, "job")? as usize, count: r.count, length: r.length });
            }
            Ok(Schedule::Splittable(s))
        }
        Model::Preemptive => {
            let mut parts = Vec::new();
            for p in raw.parts.unwrap_or_default() {
                parts.push(TimedPart {
                    job: one_based(p.job as u64, "job")? as usize,
                    machine: one_based(p.machine, "machine")?,
                    length: p.length,
                    start: p.start.ok_or_else(|| ModelError::Json("preemptive part lacks a start".into()))?,
                });
            }
            Ok(Schedule::Preemptive(parts))
        }
    }
}

/// Parses a rational from CLI or JSON text; re-exported for callers.
pub fn parse_time(text: &str) -> Result<Rat, ModelError> {
    parse_rat(text).map_err(|e| ModelError::Json(e.to_string()))
}
