//! Setup-class pipeline.
//!
//! Simplification: jobs of classes with small setups (`s < ε³T`) that are themselves small
//! (`p < εT`) are removed and accounted for as free-space demand `L`; remaining small setups are
//! raised to `ε³T`; tiny jobs (`p < ε⁴T`) are replaced by placeholders of size `ε⁴T` per class;
//! all times are rounded geometrically and then up to multiples of `ε⁵T`. The rounded instance is
//! scheduled through the configuration program and the steps are undone in reverse order.

use crate::mcip::{self, BasicObject, Decoded, Group, McipSpec, ModuleDef};
use crate::model::{self, ClassInstance, ClassJob, Instance, Schedule};
use crate::pipeline::{epsilon_reciprocal, Accepted, IpStats, PipelineError, PipelineOptions, Probe, Reject};
use crate::rat::{floor_units, geometric_round, units};
use crate::Rat;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Job(usize),
    Placeholder,
}

/// A job of the rounded instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedJob {
    pub origin: Origin,
    pub class: usize,
    pub before_rounding: Rat,
    pub rounded: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetupClassTranscript {
    pub eps: Rat,
    pub t: Rat,
    /// `ε⁵T`; every rounded time is a multiple of it.
    pub unit: Rat,
    /// Small jobs of small-setup classes, removed before solving.
    pub removed: Vec<usize>,
    /// Free space the removed jobs need: their processing plus the setups of classes in `q_classes`.
    pub free_demand: Rat,
    /// Classes all of whose jobs were removed.
    pub q_classes: Vec<usize>,
    pub original_setups: Vec<Rat>,
    /// Setups after raising small ones to `ε³T`.
    pub raised_setups: Vec<Rat>,
    pub rounded_setups: Vec<Rat>,
    /// Tiny jobs per class, replaced by placeholders.
    pub tiny: Vec<Vec<usize>>,
    pub placeholders: Vec<u64>,
    pub jobs: Vec<ReducedJob>,
    pub machines: u64,
    pub container_rounding: bool,
    /// Makespan bound for the rounded instance (includes the container factor when active).
    pub t_bar: Rat,
    /// Makespan bound after undoing every step.
    pub t_breve: Rat,
}

impl SetupClassTranscript {
    pub fn reduced_instance(&self) -> ClassInstance {
        ClassInstance {
            machines: self.machines,
            jobs: self.jobs.iter().map(|j| ClassJob { p: j.rounded, class: j.class }).collect(),
            setups: self.rounded_setups.clone(),
        }
    }

    /// `(1+ε)·T̄`: bound after placeholders are swapped back for tiny jobs.
    pub fn t_prime(&self) -> Rat {
        (Rat::one() + self.eps) * self.t_bar
    }
}

/// `T̄ = (1+ε²)(1+ε)(1+3ε)T`, times `(1+2ε)` with container rounding.
pub fn t_bar(t: &Rat, eps: &Rat, containers: bool) -> Rat {
    let one = Rat::one();
    let base = (one + eps * eps) * (one + eps) * (one + Rat::from_integer(3) * eps) * t;
    if containers {
        base * (one + Rat::from_integer(2) * eps)
    } else {
        base
    }
}

/// `T̆ = (1+ε)²T̄ + εT + 2ε³T`.
pub fn t_breve(t: &Rat, eps: &Rat, t_bar: &Rat) -> Rat {
    let one = Rat::one();
    (one + eps) * (one + eps) * t_bar + eps * t + Rat::from_integer(2) * eps * eps * eps * t
}

/// Runs the four simplification steps. Requires `ε = 1/k` with `k ≥ 2` and all times at most `T`.
pub fn simplify(inst: &ClassInstance, t: &Rat, eps: &Rat, containers: bool) -> Result<(ClassInstance, SetupClassTranscript), PipelineError> {
    epsilon_reciprocal(eps)?;
    let e = *eps;
    let e3 = e * e * e;
    let (e4, e5) = (e3 * e, e3 * e * e);
    let unit = e5 * t;
    let k = inst.setups.len();
    let small_setup: Vec<bool> = inst.setups.iter().map(|s| *s < e3 * t).collect();
    let removed: Vec<usize> = (0..inst.jobs.len()).filter(|&j| small_setup[inst.jobs[j].class] && inst.jobs[j].p < e * t).collect();
    let mut has_job = vec![false; k];
    let mut has_kept = vec![false; k];
    for (j, job) in inst.jobs.iter().enumerate() {
        has_job[job.class] = true;
        if removed.binary_search(&j).is_err() {
            has_kept[job.class] = true;
        }
    }
    let q_classes: Vec<usize> = (0..k).filter(|&c| has_job[c] && !has_kept[c]).collect();
    let free_demand = removed.iter().map(|&j| inst.jobs[j].p).sum::<Rat>() + q_classes.iter().map(|&c| inst.setups[c]).sum::<Rat>();
    let raised_setups: Vec<Rat> = (0..k).map(|c| if small_setup[c] { e3 * t } else { inst.setups[c] }).collect();
    let rounded_setups: Vec<Rat> = raised_setups.iter().map(|s| geometric_round(s, &e, &(e3 * t), &unit)).collect();

    let mut tiny = vec![Vec::new(); k];
    let mut jobs = Vec::new();
    for (j, job) in inst.jobs.iter().enumerate() {
        if removed.binary_search(&j).is_ok() {
            continue;
        }
        if job.p < e4 * t {
            tiny[job.class].push(j);
        } else {
            let rounded = geometric_round(&job.p, &e, &(e4 * t), &unit);
            jobs.push(ReducedJob { origin: Origin::Job(j), class: job.class, before_rounding: job.p, rounded });
        }
    }
    let mut placeholders = vec![0u64; k];
    for c in 0..k {
        let mass: Rat = tiny[c].iter().map(|&j| inst.jobs[j].p).sum();
        placeholders[c] = (mass / (e4 * t)).ceil().to_integer() as u64;
        for _ in 0..placeholders[c] {
            jobs.push(ReducedJob { origin: Origin::Placeholder, class: c, before_rounding: e4 * t, rounded: e4 * t });
        }
    }
    let machines = inst.machines.min(inst.jobs.len().max(1) as u64);
    let tb = t_bar(t, &e, containers);
    let transcript = SetupClassTranscript {
        eps: e,
        t: *t,
        unit,
        removed,
        free_demand,
        q_classes,
        original_setups: inst.setups.clone(),
        raised_setups,
        rounded_setups,
        tiny,
        placeholders,
        jobs,
        machines,
        container_rounding: containers,
        t_bar: tb,
        t_breve: t_breve(t, &e, &tb),
    };
    Ok((transcript.reduced_instance(), transcript))
}

/// A batch: one setup plus `counts[d]` jobs of processing time `times[d]` (in units).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub setup: i64,
    pub counts: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMcip {
    pub spec: McipSpec<Batch>,
    /// Distinct processing times in units.
    pub times: Vec<i64>,
    /// Basic object index to class.
    pub classes: Vec<usize>,
}

/// Container size for content `h` (in units): geometric rounding with base one unit.
pub fn container_units(h: i64, eps: &Rat) -> i64 {
    units(&geometric_round(&Rat::from_integer(h as i128), eps, &Rat::one(), &Rat::one()), &Rat::one())
}

/// Builds the configuration program of a rounded instance. All times must be multiples of
/// `unit`; `containers` gives `ε` when module sizes are container-rounded.
pub fn build_mcip(reduced: &ClassInstance, unit: &Rat, bound: &Rat, containers: Option<&Rat>, config_cap: usize) -> Result<ClassMcip, PipelineError> {
    let bound_u = floor_units(bound, unit);
    let mut times: Vec<i64> = reduced.jobs.iter().map(|j| units(&j.p, unit)).collect();
    times.sort_unstable();
    times.dedup();
    let d = times.len();
    let mut classes: Vec<usize> = reduced.jobs.iter().map(|j| j.class).collect();
    classes.sort_unstable();
    classes.dedup();
    let mut setups: Vec<i64> = classes.iter().map(|&c| units(&reduced.setups[c], unit)).collect();
    setups.sort_unstable();
    setups.dedup();
    let mut objects = Vec::new();
    for &c in &classes {
        let mut values = vec![0i64; d];
        for j in reduced.jobs.iter().filter(|j| j.class == c) {
            values[times.binary_search(&units(&j.p, unit)).unwrap()] += 1;
        }
        let key = setups.binary_search(&units(&reduced.setups[c], unit)).unwrap() as u32;
        objects.push(BasicObject { values, key });
    }

    let mut raw: Vec<(i64, u32, Vec<u32>)> = Vec::new();
    for (key, &s) in setups.iter().enumerate() {
        let mut limit = vec![0i64; d];
        for o in objects.iter().filter(|o| o.key == key as u32) {
            for (l, v) in limit.iter_mut().zip(&o.values) {
                *l = (*l).max(*v);
            }
        }
        let mut cur = vec![0u32; d];
        batches(0, s, bound_u, &times, &limit, &mut cur, &mut |counts, h| {
            let size = match containers {
                Some(eps) => container_units(h, eps),
                None => h,
            };
            if size <= bound_u {
                raw.push((size, key as u32, counts.to_vec()));
            }
        });
    }
    let mut sizes: Vec<i64> = raw.iter().map(|r| r.0).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let groups: Vec<Group> = sizes.iter().map(|&size| Group { size, layers: None }).collect();
    let modules: Vec<ModuleDef<Batch>> = raw
        .into_iter()
        .map(|(size, key, counts)| ModuleDef {
            values: counts.iter().map(|&c| c as i64).collect(),
            size,
            group: sizes.binary_search(&size).unwrap(),
            key,
            cap: None,
            local: vec![],
            tag: Batch { setup: setups[key as usize], counts },
        })
        .collect();
    let mut spec = McipSpec {
        objects,
        modules,
        groups,
        configs: vec![],
        machines: reduced.machines as i64,
        bound: bound_u,
        global_rows: vec![],
        local_rhs: vec![],
    };
    spec.configs = mcip::realizable_configurations(&spec, config_cap)?;
    Ok(ClassMcip { spec, times, classes })
}

fn batches(i: usize, size: i64, bound: i64, times: &[i64], limit: &[i64], cur: &mut Vec<u32>, emit: &mut dyn FnMut(&[u32], i64)) {
    if i == times.len() {
        if cur.iter().any(|&c| c > 0) {
            emit(cur, size);
        }
        return;
    }
    let mut c = 0;
    let mut sz = size;
    loop {
        cur[i] = c as u32;
        batches(i + 1, sz, bound, times, limit, cur, emit);
        c += 1;
        sz += times[i];
        if c > limit[i] || sz > bound {
            break;
        }
    }
    cur[i] = 0;
}

/// Matches machines to configurations and fills their slots with batches. Returns the machine of
/// every job of the rounded instance.
pub fn extract(reduced: &ClassInstance, unit: &Rat, cm: &ClassMcip, decoded: &Decoded) -> Vec<u64> {
    let spec = &cm.spec;
    let mut slots: Vec<VecDeque<u64>> = vec![VecDeque::new(); spec.groups.len()];
    let mut config_of = Vec::new();
    let mut machine = 0u64;
    for (c, &count) in decoded.config_counts.iter().enumerate() {
        for _ in 0..count {
            for (g, &k) in spec.configs[c].iter().enumerate() {
                for _ in 0..k {
                    slots[g].push_back(machine);
                }
            }
            config_of.push(c);
            machine += 1;
        }
    }
    assert_eq!(machine, reduced.machines, "every machine is matched to one configuration");
    let mut pools: BTreeMap<(usize, i64), VecDeque<usize>> = BTreeMap::new();
    for (j, job) in reduced.jobs.iter().enumerate() {
        pools.entry((job.class, units(&job.p, unit))).or_default().push_back(j);
    }
    let mut sigma = vec![u64::MAX; reduced.jobs.len()];
    // Per machine: total batch content (setup plus jobs) and setups repeated for one class.
    let mut placed = vec![(0i64, 0i64); machine as usize];
    let mut seen = std::collections::BTreeSet::new();
    let containers_off = spec.modules.iter().all(|m| m.size == m.tag.setup + cm.times.iter().zip(&m.tag.counts).map(|(t, &k)| t * k as i64).sum::<i64>());
    for (obj, list) in decoded.modules.iter().enumerate() {
        let class = cm.classes[obj];
        for &(k, copies) in list {
            let module = &spec.modules[k];
            for _ in 0..copies {
                let i = slots[module.group].pop_front().expect("a free slot for every module");
                let content = module.tag.setup + cm.times.iter().zip(&module.tag.counts).map(|(t, &k)| t * k as i64).sum::<i64>();
                placed[i as usize].0 += content;
                if !seen.insert((i, class)) {
                    placed[i as usize].1 += module.tag.setup;
                }
                for (d, &cnt) in module.tag.counts.iter().enumerate().filter(|(_, &c)| c > 0) {
                    let pool = pools.get_mut(&(class, cm.times[d])).expect("jobs of the batch exist");
                    for _ in 0..cnt {
                        sigma[pool.pop_front().expect("demand covers the batch")] = i;
                    }
                }
            }
        }
    }
    assert!(sigma.iter().all(|&i| i != u64::MAX), "every job is placed");
    assert!(slots.iter().all(|s| s.is_empty()), "every slot is filled");

    // Load equals the sum of batch sizes placed on the machine minus repeated setups of a class;
    // without containers the batches fill the configuration exactly.
    let inst = Instance::SetupClass(reduced.clone());
    let (loads, _) = model::machine_loads(&inst, &Schedule::SetupClass(sigma.clone())).expect("model matches");
    for (i, &c) in config_of.iter().enumerate() {
        let load = loads.get(&(i as u64)).copied().unwrap_or_else(Rat::zero);
        let size = Rat::from_integer(spec.config_size(&spec.configs[c]) as i128) * unit;
        let (contents, repeats) = &placed[i];
        assert_eq!(load, Rat::from_integer((contents - repeats) as i128) * unit, "machine load");
        assert!(load <= size, "machine load exceeds its configuration");
        if containers_off {
            assert_eq!(Rat::from_integer(*contents as i128) * unit, size, "batches fill the configuration");
        }
    }
    sigma
}

/// Undoes the simplification: original times, tiny jobs for placeholders, original setups, then
/// the removed jobs into the free space. Returns the machine of every original job.
pub fn desimplify(inst: &ClassInstance, tr: &SetupClassTranscript, reduced_sigma: &[u64]) -> Vec<u64> {
    let e = tr.eps;
    let t = tr.t;
    let mut sigma = vec![u64::MAX; inst.jobs.len()];
    let mut holders: BTreeMap<(usize, u64), u64> = BTreeMap::new();
    for (rj, &i) in tr.jobs.iter().zip(reduced_sigma) {
        match rj.origin {
            Origin::Job(j) => sigma[j] = i,
            Origin::Placeholder => *holders.entry((rj.class, i)).or_insert(0) += 1,
        }
    }
    // Each machine takes tiny jobs of a class while their mass is below its placeholder mass.
    let piece = e * e * e * e * t;
    for (c, list) in tr.tiny.iter().enumerate() {
        let mut next = 0;
        for (&(class, i), &a) in holders.range((c, 0)..=(c, u64::MAX)) {
            debug_assert_eq!(class, c);
            let cap = Rat::from_integer(a as i128) * piece;
            let mut mass = Rat::zero();
            while next < list.len() && mass < cap {
                sigma[list[next]] = i;
                mass += inst.jobs[list[next]].p;
                next += 1;
            }
        }
        assert_eq!(next, list.len(), "placeholders cover the tiny jobs of class {c}");
    }

    // Removed jobs: small groups join a machine that already runs a large job of their class, or
    // travel as a container with their setup; everything else is inserted by next-fit.
    let m = tr.machines;
    let full = Instance::SetupClass(inst.clone());
    let mut load = vec![Rat::zero(); m as usize];
    let mut present: Vec<Vec<bool>> = vec![vec![false; inst.setups.len()]; m as usize];
    for (j, &i) in sigma.iter().enumerate() {
        if i == u64::MAX {
            continue;
        }
        let job = &inst.jobs[j];
        load[i as usize] += job.p;
        if !present[i as usize][job.class] {
            present[i as usize][job.class] = true;
            load[i as usize] += inst.setups[job.class];
        }
    }
    let t_prime = tr.t_prime();
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &j in &tr.removed {
        by_class.entry(inst.jobs[j].class).or_default().push(j);
    }
    let mut items: Vec<(Vec<usize>, Rat)> = Vec::new();
    for (&c, jobs) in &by_class {
        let mass: Rat = jobs.iter().map(|&j| inst.jobs[j].p).sum();
        if mass > e * e * t {
            items.extend(jobs.iter().map(|&j| (vec![j], inst.jobs[j].p)));
        } else if tr.q_classes.binary_search(&c).is_ok() {
            items.push((jobs.clone(), mass + inst.setups[c]));
        } else {
            let hosts = (0..m as usize).filter(|&i| (0..inst.jobs.len()).any(|j| sigma[j] == i as u64 && inst.jobs[j].class == c && inst.jobs[j].p >= e * t));
            let host = hosts.max_by(|&a, &b| (t_prime - load[a]).cmp(&(t_prime - load[b])).then(b.cmp(&a))).expect("a large job of the class is scheduled");
            for &j in jobs {
                sigma[j] = host as u64;
            }
            load[host] += mass;
        }
    }
    let mut i = 0usize;
    for (jobs, mass) in items {
        while i < m as usize && load[i] >= t_prime {
            i += 1;
        }
        assert!(i < m as usize, "free space suffices for the removed jobs");
        for j in jobs {
            sigma[j] = i as u64;
        }
        load[i] += mass;
    }
    debug_assert!(model::validate(&full, &Schedule::SetupClass(sigma.clone())).is_ok());
    sigma
}

/// Decides a makespan guess: a schedule of makespan at most `T̆`, or a rejection meaning no
/// schedule of makespan `T` exists.
pub fn solve(inst: &ClassInstance, t: &Rat, eps: &Rat, opts: &PipelineOptions) -> Result<Probe, PipelineError> {
    epsilon_reciprocal(eps)?;
    if !t.is_positive() {
        return Err(PipelineError::BadGuess);
    }
    if inst.jobs.iter().any(|j| j.p + inst.setups[j.class] > *t) {
        return Ok(Probe::Rejected { reason: Reject::TooLong, stats: None });
    }
    let (reduced, tr) = simplify(inst, t, eps, opts.container_rounding)?;
    if inst.jobs.is_empty() {
        return Ok(Probe::Accepted(Accepted { schedule: Schedule::SetupClass(vec![]), makespan: Rat::zero(), bound: tr.t_breve, stats: None }));
    }
    let space = Rat::from_integer(tr.machines as i128) * tr.t_bar - tr.free_demand;
    if space.is_negative() {
        return Ok(Probe::Rejected { reason: Reject::NoRoom, stats: None });
    }
    let threshold = floor_units(&space, &tr.unit);
    let cm = build_mcip(&reduced, &tr.unit, &tr.t_bar, opts.container_rounding.then_some(eps), opts.config_cap)?;
    opts.dump_mcip(&cm.spec);
    let (decoded, solve_stats, program) = mcip::solve(&cm.spec, Some(threshold), &opts.solver)?;
    let stats = IpStats::new(&program, &solve_stats, cm.spec.configs.len(), cm.spec.modules.len(), decoded.as_ref(), threshold);
    let Some(decoded) = decoded else {
        return Ok(Probe::Rejected { reason: Reject::NoSolution, stats: Some(stats) });
    };
    let reduced_sigma = extract(&reduced, &tr.unit, &cm, &decoded);
    let reduced_schedule = Schedule::SetupClass(reduced_sigma.clone());
    let free = model::free_space(&Instance::SetupClass(reduced.clone()), &reduced_schedule, &tr.t_bar, None).expect("extracted schedule meets the bound");
    assert!(free >= tr.free_demand, "extracted schedule leaves the required free space");
    let sigma = desimplify(inst, &tr, &reduced_sigma);
    let full = Instance::SetupClass(inst.clone());
    let schedule = Schedule::SetupClass(sigma);
    if let Err(v) = model::validate(&full, &schedule) {
        panic!("setup-class pipeline produced an invalid schedule: {v}");
    }
    let makespan = model::makespan(&full, &schedule).expect("model matches");
    assert!(makespan <= tr.t_breve, "makespan exceeds the guaranteed bound");
    Ok(Probe::Accepted(Accepted { schedule, makespan, bound: tr.t_breve, stats: Some(stats) }))
}
