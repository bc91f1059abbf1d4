//! Splittable pipeline.
//!
//! Jobs with setup below `εT` are removed (their total `s + p` becomes the free-space demand
//! `L`); the rest are rounded up to multiples of `ε²T`. The configuration program places pieces
//! `(q, s)`; a piece with `s + q = T̄` alone on a machine is a full machine, and such machines are
//! reported as counted runs. Removed jobs are streamed back into the remaining space by next-fit,
//! whole empty machines again collapsing into runs, so the output size does not depend on `m`.

use crate::mcip::{self, BasicObject, Decoded, GlobalRow, Group, McipSpec, ModuleDef};
use crate::model::{self, Instance, JobInstance, Part, Schedule, SetupJob, SplitSchedule, TrivialRun};
use crate::pipeline::{epsilon_reciprocal, Accepted, IpStats, PipelineError, PipelineOptions, Probe, Reject};
use crate::rat::{ceil_to, floor_units, units};
use crate::setup_class::container_units;
use crate::Rat;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, VecDeque};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplittableTranscript {
    pub eps: Rat,
    pub t: Rat,
    /// `ε²T`.
    pub unit: Rat,
    /// Jobs with setup at least `εT`, in index order; reduced job `i` is original job `kept[i]`.
    pub kept: Vec<usize>,
    /// Jobs with setup below `εT`, by nondecreasing processing time.
    pub removed: Vec<usize>,
    pub free_demand: Rat,
    pub container_rounding: bool,
    pub t_bar: Rat,
    pub t_breve: Rat,
    /// Bounds on machines that are neither empty nor full, and on machines with two or more
    /// pieces, when the simple-schedule rows are active.
    pub nontrivial_bound: Option<(u64, u64)>,
}

/// `max(C(n,2), n)`: nontrivial machines a simple schedule may need.
pub fn simple_bound(n: u64) -> u64 {
    pairs(n).max(n)
}

pub fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

pub fn t_bar(t: &Rat, eps: &Rat, containers: bool) -> Rat {
    let f = Rat::one() + Rat::from_integer(2) * eps;
    if containers {
        f * f * t
    } else {
        f * t
    }
}

pub fn simplify(inst: &JobInstance, t: &Rat, eps: &Rat, opts: &PipelineOptions) -> Result<(JobInstance, SplittableTranscript), PipelineError> {
    epsilon_reciprocal(eps)?;
    let unit = eps * eps * t;
    let big = eps * t;
    let kept: Vec<usize> = (0..inst.jobs.len()).filter(|&j| inst.jobs[j].s >= big).collect();
    let mut removed: Vec<usize> = (0..inst.jobs.len()).filter(|&j| inst.jobs[j].s < big).collect();
    removed.sort_by(|&a, &b| inst.jobs[a].p.cmp(&inst.jobs[b].p).then(a.cmp(&b)));
    let free_demand = removed.iter().map(|&j| inst.jobs[j].s + inst.jobs[j].p).sum();
    let reduced = JobInstance {
        machines: inst.machines,
        jobs: kept.iter().map(|&j| SetupJob { p: ceil_to(&inst.jobs[j].p, &unit), s: ceil_to(&inst.jobs[j].s, &unit) }).collect(),
    };
    let tb = t_bar(t, eps, opts.container_rounding);
    let tr = SplittableTranscript {
        eps: *eps,
        t: *t,
        unit,
        nontrivial_bound: opts.simple_schedule.then(|| (simple_bound(kept.len() as u64), pairs(kept.len() as u64))),
        kept,
        removed,
        free_demand,
        container_rounding: opts.container_rounding,
        t_breve: tb + eps * t,
        t_bar: tb,
    };
    Ok((reduced, tr))
}

/// A piece of `q` units with a setup of `s` units; `full` when it fills a machine alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Piece {
    pub q: i64,
    pub s: i64,
    pub full: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMcip {
    pub spec: McipSpec<Piece>,
    /// Per group, whether it holds full pieces.
    pub full_groups: Vec<bool>,
}

impl SplitMcip {
    /// Empty configuration or a single full piece.
    pub fn is_trivial(&self, config: &[u32]) -> bool {
        let total: u32 = config.iter().sum();
        total == 0 || (total == 1 && config.iter().zip(&self.full_groups).any(|(&c, &f)| c == 1 && f))
    }

    pub fn is_composite(config: &[u32]) -> bool {
        config.iter().sum::<u32>() >= 2
    }
}

/// Builds the configuration program. `containers` gives `ε` when sizes are container-rounded;
/// `nontrivial` adds the simple-schedule rows: at most `.0` configurations other than empty or a
/// single full piece, and at most `.1` with two or more pieces.
pub fn build_mcip(reduced: &JobInstance, unit: &Rat, bound: &Rat, containers: Option<&Rat>, nontrivial: Option<(u64, u64)>, config_cap: usize) -> Result<SplitMcip, PipelineError> {
    let bound_u = floor_units(bound, unit);
    let mut setups: Vec<i64> = reduced.jobs.iter().map(|j| units(&j.s, unit)).collect();
    setups.sort_unstable();
    setups.dedup();
    let objects: Vec<BasicObject> = reduced
        .jobs
        .iter()
        .map(|j| BasicObject { values: vec![units(&j.p, unit)], key: setups.binary_search(&units(&j.s, unit)).unwrap() as u32 })
        .collect();
    let mut raw: Vec<(i64, bool, u32, Piece)> = Vec::new();
    for (key, &s) in setups.iter().enumerate() {
        let most = objects.iter().filter(|o| o.key == key as u32).map(|o| o.values[0]).max().unwrap_or(0);
        for q in 1..=most.min(bound_u - s) {
            let full = s + q == bound_u;
            let size = match containers {
                Some(eps) if !full => container_units(s + q, eps),
                _ => s + q,
            };
            if size <= bound_u {
                raw.push((size, full, key as u32, Piece { q, s, full }));
            }
        }
    }
    let mut keys: Vec<(i64, bool)> = raw.iter().map(|r| (r.0, r.1)).collect();
    keys.sort_unstable();
    keys.dedup();
    let groups = keys.iter().map(|&(size, _)| Group { size, layers: None }).collect();
    let full_groups = keys.iter().map(|&(_, f)| f).collect();
    let modules = raw
        .into_iter()
        .map(|(size, full, key, tag)| ModuleDef {
            values: vec![tag.q],
            size,
            group: keys.binary_search(&(size, full)).unwrap(),
            key,
            cap: None,
            local: vec![],
            tag,
        })
        .collect();
    let spec = McipSpec {
        objects,
        modules,
        groups,
        configs: vec![],
        machines: reduced.machines as i64,
        bound: bound_u,
        global_rows: vec![],
        local_rhs: vec![],
    };
    let mut sm = SplitMcip { spec, full_groups };
    sm.spec.configs = mcip::realizable_configurations(&sm.spec, config_cap)?;
    if let Some((limit, composite)) = nontrivial {
        let coeff = sm.spec.configs.iter().map(|c| i64::from(!sm.is_trivial(c))).collect();
        sm.spec.global_rows.push(GlobalRow { coeff, rhs: limit as i64 });
        let coeff = sm.spec.configs.iter().map(|c| i64::from(SplitMcip::is_composite(c))).collect();
        sm.spec.global_rows.push(GlobalRow { coeff, rhs: composite as i64 });
    }
    Ok(sm)
}

/// Schedule for the rounded instance: nontrivial configurations become explicit machines
/// `0, 1, …`, full pieces become runs.
pub fn extract(reduced: &JobInstance, unit: &Rat, sm: &SplitMcip, decoded: &Decoded) -> SplitSchedule {
    let spec = &sm.spec;
    let mut slots: Vec<VecDeque<u64>> = vec![VecDeque::new(); spec.groups.len()];
    let mut machine = 0u64;
    let mut sizes = Vec::new();
    for (c, &count) in decoded.config_counts.iter().enumerate() {
        if sm.is_trivial(&spec.configs[c]) {
            continue;
        }
        for _ in 0..count {
            for (g, &k) in spec.configs[c].iter().enumerate() {
                for _ in 0..k {
                    slots[g].push_back(machine);
                }
            }
            sizes.push(spec.config_size(&spec.configs[c]));
            machine += 1;
        }
    }
    let mut pieces: BTreeMap<(u64, usize), i64> = BTreeMap::new();
    let mut runs = Vec::new();
    for (j, list) in decoded.modules.iter().enumerate() {
        for &(k, copies) in list {
            let module = &spec.modules[k];
            if module.tag.full {
                runs.push(TrivialRun { job: j, count: copies as u64, length: Rat::from_integer(module.tag.q as i128) * unit });
                continue;
            }
            for _ in 0..copies {
                let i = slots[module.group].pop_front().expect("a free slot for every piece");
                *pieces.entry((i, j)).or_insert(0) += module.tag.q;
            }
        }
    }
    assert!(slots.iter().all(|s| s.is_empty()), "every slot is filled");
    let parts: Vec<Part> = pieces.into_iter().map(|((machine, job), q)| Part { job, machine, length: Rat::from_integer(q as i128) * unit }).collect();
    let schedule = SplitSchedule { parts, trivial_runs: runs };
    let inst = Instance::Splittable(reduced.clone());
    let (loads, _) = model::machine_loads(&inst, &Schedule::Splittable(schedule.clone())).expect("model matches");
    for (i, &size) in sizes.iter().enumerate() {
        let load = loads.get(&(i as u64)).copied().unwrap_or_else(Rat::zero);
        assert!(load <= Rat::from_integer(size as i128) * unit, "machine load exceeds its configuration");
    }
    schedule
}

/// Machines carrying parts of two or more jobs.
pub fn composite_machines(schedule: &SplitSchedule) -> usize {
    let mut jobs: BTreeMap<u64, std::collections::BTreeSet<usize>> = BTreeMap::new();
    for p in &schedule.parts {
        jobs.entry(p.machine).or_default().insert(p.job);
    }
    jobs.values().filter(|js| js.len() >= 2).count()
}

/// Rewrites every machine carrying a single job as a run and renumbers the rest densely.
pub fn compact(schedule: SplitSchedule) -> SplitSchedule {
    let mut by_machine: BTreeMap<u64, Vec<Part>> = BTreeMap::new();
    for p in schedule.parts {
        by_machine.entry(p.machine).or_default().push(p);
    }
    let mut runs: BTreeMap<(usize, Rat), u64> = BTreeMap::new();
    for r in schedule.trivial_runs {
        *runs.entry((r.job, r.length)).or_insert(0) += r.count;
    }
    let mut parts = Vec::new();
    let mut next = 0u64;
    for (_, mut ps) in by_machine {
        ps.sort_by_key(|p| p.job);
        if ps.iter().all(|p| p.job == ps[0].job) {
            let length = ps.iter().map(|p| p.length).sum();
            *runs.entry((ps[0].job, length)).or_insert(0) += 1;
            continue;
        }
        // Pieces of one job on one machine share a setup.
        let mut merged: Vec<Part> = Vec::new();
        for p in ps {
            match merged.last_mut() {
                Some(last) if last.job == p.job => last.length += p.length,
                _ => merged.push(Part { machine: next, ..p }),
            }
        }
        parts.extend(merged);
        next += 1;
    }
    let trivial_runs = runs.into_iter().map(|((job, length), count)| TrivialRun { job, count, length }).collect();
    SplitSchedule { parts, trivial_runs }
}

/// Restores original job indices and times, then streams the removed jobs into free space.
pub fn desimplify(inst: &JobInstance, tr: &SplittableTranscript, reduced: &SplitSchedule) -> SplitSchedule {
    // Original indices; drop the rounding surplus from an explicit part, or evenly from a run.
    let mut parts: Vec<Part> = reduced.parts.iter().map(|p| Part { job: tr.kept[p.job], ..p.clone() }).collect();
    let mut runs: Vec<TrivialRun> = reduced.trivial_runs.iter().map(|r| TrivialRun { job: tr.kept[r.job], ..r.clone() }).collect();
    for &j in &tr.kept {
        let mass: Rat = parts.iter().filter(|p| p.job == j).map(|p| p.length).sum::<Rat>()
            + runs.iter().filter(|r| r.job == j).map(|r| r.length * Rat::from_integer(r.count as i128)).sum::<Rat>();
        let surplus = mass - inst.jobs[j].p;
        assert!(!surplus.is_negative() && surplus < tr.unit, "rounding surplus below one grid step");
        if surplus.is_zero() {
            continue;
        }
        if let Some(p) = parts.iter_mut().filter(|p| p.job == j).next_back() {
            p.length -= surplus;
        } else {
            let r = runs.iter_mut().find(|r| r.job == j).expect("job is scheduled");
            r.length -= surplus / Rat::from_integer(r.count as i128);
        }
    }

    let explicit: u64 = parts.iter().map(|p| p.machine + 1).max().unwrap_or(0);
    let run_machines: u64 = runs.iter().map(|r| r.count).sum();
    let spare = inst.machines - explicit - run_machines;
    let full = Instance::Splittable(inst.clone());
    let (loads, _) = model::machine_loads(&full, &Schedule::Splittable(SplitSchedule { parts: parts.clone(), trivial_runs: vec![] })).expect("model matches");
    let cap = tr.t_bar;

    // Stream setup, job, setup, job, … over explicit machines, then empty ones. Whole empty
    // machines covered by one job's processing become runs.
    let mut machine = 0u64;
    let mut fresh_used = 0u64;
    let mut fill = loads.get(&0).copied().unwrap_or_else(Rat::zero);
    let mut pieces: BTreeMap<(u64, usize), Rat> = BTreeMap::new();
    let advance = |machine: &mut u64, fill: &mut Rat, fresh_used: &mut u64| {
        *machine += 1;
        if *machine >= explicit {
            *fresh_used += 1;
            assert!(*fresh_used <= spare, "free space suffices for the removed jobs");
        }
        *fill = loads.get(machine).copied().unwrap_or_else(Rat::zero);
    };
    if explicit == 0 && !tr.removed.is_empty() {
        fresh_used = 1;
        assert!(spare >= 1, "free space suffices for the removed jobs");
    }
    for &j in &tr.removed {
        let job = &inst.jobs[j];
        let mut setup = job.s;
        while setup.is_positive() {
            if fill >= cap {
                advance(&mut machine, &mut fill, &mut fresh_used);
            }
            let take = setup.min(cap - fill);
            fill += take;
            setup -= take;
        }
        let mut rest = job.p;
        while rest.is_positive() {
            if fill >= cap {
                advance(&mut machine, &mut fill, &mut fresh_used);
            }
            if machine >= explicit && fill.is_zero() && rest >= cap {
                // Whole machines of this job; the last one stays open for what follows.
                let whole = (rest / cap).floor().to_integer() as u64;
                let whole = if rest == cap * Rat::from_integer(whole as i128) { whole - 1 } else { whole };
                if whole > 0 {
                    runs.push(TrivialRun { job: j, count: whole, length: cap });
                    rest -= cap * Rat::from_integer(whole as i128);
                    fresh_used += whole;
                    assert!(fresh_used <= spare, "free space suffices for the removed jobs");
                    continue;
                }
            }
            let take = rest.min(cap - fill);
            *pieces.entry((machine, j)).or_insert_with(Rat::zero) += take;
            fill += take;
            rest -= take;
        }
    }
    parts.extend(pieces.into_iter().map(|((machine, job), length)| Part { job, machine, length }));
    compact(SplitSchedule { parts, trivial_runs: runs })
}

pub fn solve(inst: &JobInstance, t: &Rat, eps: &Rat, opts: &PipelineOptions) -> Result<Probe, PipelineError> {
    epsilon_reciprocal(eps)?;
    if !t.is_positive() {
        return Err(PipelineError::BadGuess);
    }
    if inst.jobs.iter().any(|j| j.s >= *t) {
        return Ok(Probe::Rejected { reason: Reject::TooLong, stats: None });
    }
    let (reduced, tr) = simplify(inst, t, eps, opts)?;
    let space = Rat::from_integer(inst.machines as i128) * tr.t_bar - tr.free_demand;
    if space.is_negative() {
        return Ok(Probe::Rejected { reason: Reject::NoRoom, stats: None });
    }
    let threshold = floor_units(&space, &tr.unit);
    let sm = build_mcip(&reduced, &tr.unit, &tr.t_bar, opts.container_rounding.then_some(eps), tr.nontrivial_bound, opts.config_cap)?;
    opts.dump_mcip(&sm.spec);
    let (decoded, solve_stats, program) = mcip::solve(&sm.spec, Some(threshold), &opts.solver)?;
    let stats = IpStats::new(&program, &solve_stats, sm.spec.configs.len(), sm.spec.modules.len(), decoded.as_ref(), threshold);
    let Some(decoded) = decoded else {
        return Ok(Probe::Rejected { reason: Reject::NoSolution, stats: Some(stats) });
    };
    let reduced_schedule = extract(&reduced, &tr.unit, &sm, &decoded);
    if let Some((_, composite)) = tr.nontrivial_bound {
        assert!(composite_machines(&reduced_schedule) as u64 <= composite, "simple-schedule bound");
    }
    let free = model::free_space(&Instance::Splittable(reduced.clone()), &Schedule::Splittable(reduced_schedule.clone()), &tr.t_bar, None)
        .expect("extracted schedule meets the bound");
    assert!(free >= tr.free_demand, "extracted schedule leaves the required free space");
    let schedule = Schedule::Splittable(desimplify(inst, &tr, &reduced_schedule));
    let full = Instance::Splittable(inst.clone());
    if let Err(v) = model::validate(&full, &schedule) {
        panic!("splittable pipeline produced an invalid schedule: {v}");
    }
    let makespan = model::makespan(&full, &schedule).expect("model matches");
    assert!(makespan <= tr.t_breve, "makespan exceeds the guaranteed bound");
    Ok(Probe::Accepted(Accepted { schedule, makespan, bound: tr.t_breve, stats: Some(stats) }))
}
