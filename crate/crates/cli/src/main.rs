use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use setupsched::driver::{self, ProbeRecord, SearchError};
use setupsched::mcip::McipError;
use setupsched::model::{self, Instance, Model, Schedule};
use setupsched::nfold::{Backend, NFoldError};
use setupsched::oracle::{self, OracleError, OracleKind};
use setupsched::pipeline::{IpStats, PipelineError, PipelineOptions, Probe};
use setupsched::rat::{format_rat, parse_rat};
use setupsched::{gen, splittable, Rat};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "setupsched", version, about = "Makespan scheduling with setup times")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded random instance.
    Generate(GenerateArgs),
    /// Schedule an instance and report the run.
    Solve(SolveArgs),
    /// Check a schedule against an instance.
    Validate {
        instance: PathBuf,
        schedule: PathBuf,
    },
    /// Exact optimum (setup-class, splittable) or lower bound (preemptive).
    Oracle {
        instance: PathBuf,
        /// Largest search space the exhaustive oracle may visit.
        #[arg(long, default_value_t = oracle::DEFAULT_CAP)]
        cap: u128,
        /// Write the optimal schedule here when one is known.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Solve a range of seeded instances and print a ratio table as CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    model: Model,
    #[arg(long, short = 'n')]
    jobs: usize,
    #[arg(long, short = 'm')]
    machines: u64,
    /// Setup classes (setup-class model).
    #[arg(long, short = 'k')]
    classes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Times are drawn from 1..=grid.
    #[arg(long, default_value_t = 10)]
    grid: u32,
    /// Drawn times are divided by this.
    #[arg(long, default_value_t = 1)]
    denominator: u32,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        matches!(self, Switch::On)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Augment,
    Exact,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "1/2", value_parser = parse_rat_arg)]
    epsilon: Rat,
    #[arg(long, value_enum, default_value = "augment")]
    backend: BackendArg,
    #[arg(long, value_enum, default_value = "off")]
    container_rounding: Switch,
    #[arg(long, value_enum, default_value = "on")]
    simple_schedule: Switch,
    /// Write every n-fold program as JSON into this directory.
    #[arg(long)]
    dump_programs: Option<PathBuf>,
}

impl SolverArgs {
    fn options(&self) -> PipelineOptions {
        let mut opts = PipelineOptions {
            container_rounding: self.container_rounding.on(),
            simple_schedule: self.simple_schedule.on(),
            dump_dir: self.dump_programs.clone(),
            ..Default::default()
        };
        opts.solver.backend = match self.backend {
            BackendArg::Augment => Backend::Augment,
            BackendArg::Exact => Backend::Exact,
        };
        opts
    }
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// Refuse instances of another model.
    #[arg(long)]
    model: Option<Model>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Probe this single guess instead of searching.
    #[arg(long = "fixed-T", value_parser = parse_rat_arg)]
    fixed_t: Option<Rat>,
    /// Compare against the oracle; skipped when its search space exceeds the cap.
    #[arg(long, default_value_t = false)]
    oracle: bool,
    #[arg(long, default_value_t = oracle::DEFAULT_CAP)]
    oracle_cap: u128,
    /// Schedule file; stdout when absent.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    /// Report file; stderr when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    model: Model,
    #[arg(long, short = 'n')]
    jobs: usize,
    #[arg(long, short = 'm')]
    machines: u64,
    #[arg(long, short = 'k')]
    classes: Option<usize>,
    /// Seed range `a..b` (end exclusive) or a single seed.
    #[arg(long, default_value = "0..10", value_parser = parse_seeds)]
    seeds: std::ops::Range<u64>,
    #[arg(long, default_value_t = 10)]
    grid: u32,
    #[arg(long, default_value_t = 1)]
    denominator: u32,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = oracle::DEFAULT_CAP)]
    oracle_cap: u128,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

fn parse_rat_arg(s: &str) -> Result<Rat, String> {
    parse_rat(s).map_err(|e| e.0)
}

fn parse_seeds(s: &str) -> Result<std::ops::Range<u64>, String> {
    let num = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("bad seed {x:?}: {e}"));
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b)?);
            if a >= b {
                return Err(format!("empty seed range {s}"));
            }
            Ok(a..b)
        }
        None => num(s).map(|a| a..a + 1),
    }
}

/// Error carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const VIOLATION: u8 = 1;
const USAGE: u8 = 2;
const CAP: u8 = 3;

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: USAGE, error }
    }
}

fn fail(code: u8, error: impl Into<anyhow::Error>) -> Failure {
    Failure { code, error: error.into() }
}

fn pipeline_failure(e: PipelineError) -> Failure {
    let code = match &e {
        PipelineError::Mcip(McipError::ConfigCap(_) | McipError::ModuleCap(_) | McipError::Solver(NFoldError::CapExceeded(_))) => CAP,
        _ => USAGE,
    };
    fail(code, e)
}

fn read_instance(path: &Path) -> Result<Instance, Failure> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let instance = model::instance_from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    instance.check().with_context(|| format!("checking {}", path.display()))?;
    Ok(instance)
}

fn write_out(path: Option<&Path>, text: &str, to_stderr: bool) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None if to_stderr => eprintln!("{text}"),
        None => println!("{text}"),
    }
    Ok(())
}

fn digest(instance: &Instance) -> String {
    format!("sha256:{:x}", Sha256::digest(model::instance_to_json(instance).as_bytes()))
}

fn decimal(x: &Rat) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct OracleReport {
    kind: OracleKind,
    value: String,
    /// Makespan divided by the oracle value.
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio_decimal: Option<f64>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RunReport {
    instance: String,
    model: Model,
    jobs: usize,
    machines: u64,
    epsilon: String,
    accepted: bool,
    #[serde(rename = "acceptedT", skip_serializing_if = "Option::is_none")]
    accepted_t: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    makespan: Option<String>,
    /// Proven makespan bound of the returned schedule.
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nontrivial_machines: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_skipped: Option<String>,
    wall_millis: f64,
    iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    iteration_limit: Option<u32>,
    /// Statistics of the program behind the returned schedule, or of the rejected probe.
    #[serde(skip_serializing_if = "Option::is_none")]
    ip: Option<IpStats>,
    probes: Vec<ProbeRecord>,
}

struct Outcome {
    schedule: Option<Schedule>,
    makespan: Option<Rat>,
    accepted_t: Option<Rat>,
    bound: Option<Rat>,
    iteration_limit: Option<u32>,
    probes: Vec<ProbeRecord>,
    ip: Option<IpStats>,
}

fn record(t: Rat, probe: &Probe) -> ProbeRecord {
    match probe {
        Probe::Accepted(a) => ProbeRecord { t, accepted: true, reason: None, makespan: Some(a.makespan), bound: Some(a.bound), stats: a.stats.clone() },
        Probe::Rejected { reason, stats } => ProbeRecord { t, accepted: false, reason: Some(reason.clone()), makespan: None, bound: None, stats: stats.clone() },
    }
}

fn run(instance: &Instance, eps: &Rat, fixed: Option<Rat>, opts: &PipelineOptions) -> Result<Outcome, Failure> {
    if let Some(t) = fixed {
        if t <= Rat::from_integer(0) {
            return Err(fail(USAGE, PipelineError::BadGuess));
        }
        let probe = driver::probe(instance, &t, eps, opts).map_err(pipeline_failure)?;
        let rec = record(t, &probe);
        let ip = rec.stats.clone();
        return Ok(match probe {
            Probe::Accepted(a) => Outcome {
                schedule: Some(a.schedule),
                makespan: Some(a.makespan),
                accepted_t: Some(t),
                bound: Some(a.bound),
                iteration_limit: None,
                probes: vec![rec],
                ip,
            },
            Probe::Rejected { .. } => Outcome { schedule: None, makespan: None, accepted_t: None, bound: None, iteration_limit: None, probes: vec![rec], ip },
        });
    }
    let result = driver::search(instance, eps, opts).map_err(|e| match e {
        SearchError::Pipeline(p) => pipeline_failure(p),
        other => fail(VIOLATION, other),
    })?;
    let kept = result.probes.iter().find(|p| p.accepted && p.t == result.schedule_t);
    Ok(Outcome {
        ip: kept.and_then(|p| p.stats.clone()),
        bound: kept.and_then(|p| p.bound),
        schedule: Some(result.schedule),
        makespan: Some(result.makespan),
        accepted_t: Some(result.accepted_t),
        iteration_limit: Some(result.config.iteration_limit),
        probes: result.probes,
    })
}

fn nontrivial(schedule: &Schedule) -> Option<usize> {
    match schedule {
        Schedule::Splittable(s) => Some(splittable::composite_machines(s)),
        _ => None,
    }
}

fn solve(args: SolveArgs) -> Result<(), Failure> {
    let instance = read_instance(&args.instance)?;
    if let Some(m) = args.model {
        if m != instance.model() {
            return Err(fail(USAGE, anyhow::anyhow!("instance is {}, not {}", instance.model().name(), m.name())));
        }
    }
    let opts = args.solver.options();
    let eps = args.solver.epsilon;
    let start = Instant::now();
    let outcome = run(&instance, &eps, args.fixed_t, &opts)?;
    let wall = start.elapsed();
    let (oracle, oracle_skipped) = if args.oracle {
        match oracle::oracle(&instance, args.oracle_cap) {
            Ok(o) => {
                let ratio = outcome.makespan.filter(|_| o.value > Rat::from_integer(0)).map(|ms| ms / o.value);
                let report = OracleReport { kind: o.kind, value: format_rat(&o.value), ratio: ratio.as_ref().map(format_rat), ratio_decimal: ratio.as_ref().map(decimal) };
                (Some(report), None)
            }
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    if let Some(schedule) = &outcome.schedule {
        model::validate(&instance, schedule).map_err(|v| fail(VIOLATION, anyhow::anyhow!("solver produced an invalid schedule: {v}")))?;
    }
    let report = RunReport {
        instance: digest(&instance),
        model: instance.model(),
        jobs: instance.job_count(),
        machines: instance.machines(),
        epsilon: format_rat(&eps),
        accepted: outcome.schedule.is_some(),
        accepted_t: outcome.accepted_t.as_ref().map(format_rat),
        makespan: outcome.makespan.as_ref().map(format_rat),
        bound: outcome.bound.as_ref().map(format_rat),
        nontrivial_machines: outcome.schedule.as_ref().and_then(nontrivial),
        oracle,
        oracle_skipped,
        wall_millis: wall.as_secs_f64() * 1e3,
        iterations: outcome.probes.len(),
        iteration_limit: outcome.iteration_limit,
        ip: outcome.ip,
        probes: outcome.probes,
    };
    let report_text = serde_json::to_string_pretty(&report).context("serializing the report")?;
    match &outcome.schedule {
        Some(schedule) => {
            write_out(args.output.as_deref(), &model::schedule_to_json(schedule), false)?;
            write_out(args.report.as_deref(), &report_text, true)?;
            Ok(())
        }
        None => {
            write_out(args.report.as_deref(), &report_text, true)?;
            let reason = report.probes[0].reason.as_ref().map(|r| r.to_string()).unwrap_or_default();
            Err(fail(VIOLATION, anyhow::anyhow!("guess {} rejected: {reason}", report.probes[0].t)))
        }
    }
}

fn validate(instance: &Path, schedule: &Path) -> Result<(), Failure> {
    let inst = read_instance(instance)?;
    let text = std::fs::read_to_string(schedule).with_context(|| format!("reading {}", schedule.display()))?;
    let sched = model::schedule_from_json(&text).with_context(|| format!("parsing {}", schedule.display()))?;
    model::validate(&inst, &sched).map_err(|v| fail(VIOLATION, anyhow::anyhow!("invalid schedule ({}): {v}", v.kind())))?;
    let ms = model::makespan(&inst, &sched).map_err(|e| fail(VIOLATION, e))?;
    println!("valid, makespan {}", format_rat(&ms));
    Ok(())
}

fn run_oracle(instance: &Path, cap: u128, witness: Option<&Path>) -> Result<(), Failure> {
    let inst = read_instance(instance)?;
    let result = oracle::oracle(&inst, cap).map_err(|e| match e {
        OracleError::Cap { .. } => fail(CAP, e),
        OracleError::Unsupported => fail(USAGE, e),
    })?;
    let value = format_rat(&result.value);
    println!("{}", serde_json::json!({ "instance": digest(&inst), "kind": result.kind, "value": value }));
    if let (Some(path), Some(w)) = (witness, &result.witness) {
        write_out(Some(path), &model::schedule_to_json(w), false)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BenchRow {
    seed: u64,
    model: &'static str,
    jobs: usize,
    machines: u64,
    epsilon: String,
    accepted_t: String,
    makespan: String,
    /// Makespan over the accepted guess.
    ratio_t: f64,
    /// Proven bound over the accepted guess.
    bound_t: f64,
    oracle_kind: String,
    oracle: String,
    ratio_oracle: String,
    nontrivial_machines: String,
    iterations: usize,
    wall_millis: f64,
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    let opts = args.solver.options();
    let eps = args.solver.epsilon;
    let mut writer = csv::Writer::from_writer(Vec::new());
    for seed in args.seeds.clone() {
        let params = gen::GenParams {
            model: args.model,
            jobs: args.jobs,
            machines: args.machines,
            classes: args.classes,
            seed,
            grid: args.grid,
            denominator: args.denominator,
        };
        let instance = gen::instance(&params).map_err(|e| fail(USAGE, e))?;
        let start = Instant::now();
        let outcome = run(&instance, &eps, None, &opts)?;
        let wall = start.elapsed();
        let (schedule, makespan, t) = match (&outcome.schedule, outcome.makespan, outcome.accepted_t) {
            (Some(s), Some(ms), Some(t)) => (s, ms, t),
            _ => unreachable!("the search returns a schedule"),
        };
        let (kind, value, ratio) = match oracle::oracle(&instance, args.oracle_cap) {
            Ok(o) => {
                let kind = serde_json::to_value(o.kind).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
                let ratio = if o.value > Rat::from_integer(0) { format!("{:.6}", decimal(&(makespan / o.value))) } else { String::new() };
                (kind, format_rat(&o.value), ratio)
            }
            Err(_) => ("skipped".to_owned(), String::new(), String::new()),
        };
        let positive = t > Rat::from_integer(0);
        writer
            .serialize(BenchRow {
                seed,
                model: args.model.name(),
                jobs: args.jobs,
                machines: args.machines,
                epsilon: format_rat(&eps),
                accepted_t: format_rat(&t),
                makespan: format_rat(&makespan),
                ratio_t: if positive { decimal(&(makespan / t)) } else { 0.0 },
                bound_t: match (positive, outcome.bound) {
                    (true, Some(b)) => decimal(&(b / t)),
                    _ => 0.0,
                },
                oracle_kind: kind,
                oracle: value,
                ratio_oracle: ratio,
                nontrivial_machines: nontrivial(schedule).map(|c| c.to_string()).unwrap_or_default(),
                iterations: outcome.probes.len(),
                wall_millis: wall.as_secs_f64() * 1e3,
            })
            .context("writing CSV")?;
    }
    let bytes = writer.into_inner().map_err(|e| anyhow::anyhow!("flushing CSV: {e}"))?;
    let text = String::from_utf8(bytes).context("CSV is UTF-8")?;
    match &args.output {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<(), Failure> {
    let params = gen::GenParams {
        model: args.model,
        jobs: args.jobs,
        machines: args.machines,
        classes: args.classes,
        seed: args.seed,
        grid: args.grid,
        denominator: args.denominator,
    };
    let instance = gen::instance(&params).map_err(|e| fail(USAGE, e))?;
    write_out(args.output.as_deref(), &model::instance_to_json(&instance), false)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Validate { instance, schedule } => validate(&instance, &schedule),
        Command::Oracle { instance, cap, witness } => run_oracle(&instance, cap, witness.as_deref()),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
