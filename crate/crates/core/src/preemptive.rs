//! Preemptive pipeline.
//!
//! Jobs are split by setup into big (`s ≥ δT`), medium (`μT ≤ s < δT`) and small (`s < μT`),
//! with `μ = ε²δ` and `δ` the largest power of `ε` whose medium band carries at most `mεT`.
//! Small jobs (`p < εT`) with medium setups and with small setups are removed; big jobs with small
//! setups lose their setup. Times are rounded up to the layer width `εδT` (medium setups to
//! `εμT`), and the configuration program places blocks at layer boundaries, at most one block per
//! machine and per job in each layer. The removed jobs and setups are put back afterwards.

use crate::mcip::{self, BasicObject, Decoded, Group, McipError, McipSpec, ModuleDef};
use crate::nfold::{self, NFoldProgram};
use crate::model::{self, Instance, JobInstance, Schedule, SetupJob, TimedPart};
use crate::pipeline::{epsilon_reciprocal, Accepted, IpStats, PipelineError, PipelineOptions, Probe, Reject};
use crate::rat::{ceil_to, floor_units, units};
use crate::Rat;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use std::collections::{BTreeMap, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Band {
    Big,
    Medium,
    Small,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreemptiveTranscript {
    pub eps: Rat,
    pub t: Rat,
    pub delta: Rat,
    pub mu: Rat,
    /// `εμT`; all rounded times are multiples of it.
    pub unit: Rat,
    /// `εδT`, the layer width.
    pub layer: Rat,
    pub layers: usize,
    pub band: Vec<Band>,
    /// Jobs of the rounded instance, by original index.
    pub kept: Vec<usize>,
    /// Small jobs with medium setups.
    pub removed_medium: Vec<usize>,
    /// Small jobs with small setups.
    pub removed_small: Vec<usize>,
    /// Big jobs with small setups, scheduled with setup zero.
    pub zeroed: Vec<usize>,
    pub free_demand: Rat,
    pub machines: u64,
    /// `(1+3ε)T`.
    pub t_bar: Rat,
    /// Bound after the small-setup jobs and setups are back.
    pub t_windows: Rat,
    pub t_breve: Rat,
}

fn pow(x: &Rat, k: u32) -> Rat {
    (0..k).fold(Rat::one(), |acc, _| acc * x)
}

/// Medium-band mass `Σ (s+p)` over jobs with `ε²δT ≤ s < δT`.
pub fn band_mass(inst: &JobInstance, t: &Rat, eps: &Rat, delta: &Rat) -> Rat {
    let (lo, hi) = (eps * eps * delta * t, delta * t);
    inst.jobs.iter().filter(|j| j.s >= lo && j.s < hi).map(|j| j.s + j.p).sum()
}

/// First `δ = ε^i`, `i = 1, …, 2/ε²`, whose medium band carries at most `mεT`.
pub fn choose_delta(inst: &JobInstance, t: &Rat, eps: &Rat, machines: u64) -> Result<Option<Rat>, PipelineError> {
    let k = epsilon_reciprocal(eps)?;
    let limit = Rat::from_integer(machines as i128) * eps * t;
    for i in 1..=(2 * k * k) as u32 {
        let delta = pow(eps, i);
        if band_mass(inst, t, eps, &delta) <= limit {
            return Ok(Some(delta));
        }
    }
    Ok(None)
}

/// Layer count `1/(εδ) + 3/δ`.
pub fn layer_count(eps: &Rat, delta: &Rat) -> usize {
    let v = Rat::one() / (eps * delta) + Rat::from_integer(3) / delta;
    assert!(v.is_integer());
    v.to_integer() as usize
}

pub fn simplify(inst: &JobInstance, t: &Rat, eps: &Rat, delta: &Rat) -> Result<(JobInstance, PreemptiveTranscript), PipelineError> {
    epsilon_reciprocal(eps)?;
    let mu = eps * eps * delta;
    let unit = eps * mu * t;
    let layer = eps * delta * t;
    let band: Vec<Band> = inst
        .jobs
        .iter()
        .map(|j| {
            if j.s >= delta * t {
                Band::Big
            } else if j.s >= mu * t {
                Band::Medium
            } else {
                Band::Small
            }
        })
        .collect();
    let big_job = |j: usize| inst.jobs[j].p >= eps * t;
    let n = inst.jobs.len();
    let removed_medium: Vec<usize> = (0..n).filter(|&j| band[j] == Band::Medium && !big_job(j)).collect();
    let removed_small: Vec<usize> = (0..n).filter(|&j| band[j] == Band::Small && !big_job(j)).collect();
    let zeroed: Vec<usize> = (0..n).filter(|&j| band[j] == Band::Small && big_job(j)).collect();
    let kept: Vec<usize> = (0..n).filter(|&j| !removed_medium.contains(&j) && !removed_small.contains(&j)).collect();
    let free_demand = removed_small.iter().map(|&j| inst.jobs[j].s + inst.jobs[j].p).sum();
    let machines = inst.machines.min(n.max(1) as u64);
    let reduced = JobInstance {
        machines,
        jobs: kept
            .iter()
            .map(|&j| {
                let job = &inst.jobs[j];
                let s = match band[j] {
                    Band::Big => ceil_to(&job.s, &layer),
                    Band::Medium => ceil_to(&job.s, &unit),
                    Band::Small => Rat::zero(),
                };
                SetupJob { p: ceil_to(&job.p, &layer), s }
            })
            .collect(),
    };
    let layers = layer_count(eps, delta);
    let t_bar = (Rat::one() + Rat::from_integer(3) * eps) * t;
    let gamma = eps * delta;
    let t_windows = (Rat::one() + mu / gamma) * t_bar + (mu + eps) * t;
    let t_breve = t_windows + (eps + delta) * t;
    let tr = PreemptiveTranscript {
        eps: *eps,
        t: *t,
        delta: *delta,
        mu,
        unit,
        layer,
        layers,
        band,
        kept,
        removed_medium,
        removed_small,
        zeroed,
        free_demand,
        machines,
        t_bar,
        t_windows,
        t_breve,
    };
    Ok((reduced, tr))
}

/// A module: block of `s + q` (plus idle buffer `b`) starting at layer `start`, spanning `span`
/// layers. All values in units of `εμT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub start: usize,
    pub span: usize,
    pub q: i64,
    pub s: i64,
    pub b: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayeredMcip {
    pub spec: McipSpec<Block>,
    /// Layer width in units.
    pub width: i64,
}

/// Builds the extended configuration program: one local `≤ 1` row per layer keeps the blocks of a
/// job in distinct layers, and configurations use each layer at most once.
pub fn build_mcip(reduced: &JobInstance, tr: &PreemptiveTranscript, config_cap: usize) -> Result<LayeredMcip, PipelineError> {
    let unit = &tr.unit;
    let width = units(&tr.layer, unit);
    let bound = floor_units(&tr.t_bar, unit);
    let xi = tr.layers;
    assert_eq!(bound, width * xi as i64);
    let band: Vec<Band> = tr.kept.iter().map(|&j| tr.band[j]).collect();
    let mut keys: Vec<(Band, i64)> = reduced.jobs.iter().zip(&band).map(|(j, &b)| (b, units(&j.s, unit))).collect();
    keys.sort_unstable();
    keys.dedup();
    let objects: Vec<BasicObject> = reduced
        .jobs
        .iter()
        .zip(&band)
        .map(|(j, &b)| BasicObject { values: vec![units(&j.p, unit)], key: keys.binary_search(&(b, units(&j.s, unit))).unwrap() as u32 })
        .collect();
    let mut blocks: Vec<(u32, Block)> = Vec::new();
    for (key, &(b, s)) in keys.iter().enumerate() {
        let most = objects.iter().filter(|o| o.key == key as u32).map(|o| o.values[0]).max().unwrap_or(0);
        let pieces: Vec<i64> = match b {
            Band::Big => (1..).map(|x| x * width).take_while(|&q| q <= most.min(bound)).collect(),
            Band::Medium => (1..=most.min(bound)).collect(),
            Band::Small => vec![width],
        };
        for q in pieces {
            let size = (s + q + width - 1) / width * width;
            let span = (size / width) as usize;
            for start in 0..=xi.saturating_sub(span) {
                if span <= xi {
                    blocks.push((key as u32, Block { start, span, q, s, b: size - s - q }));
                }
            }
        }
    }
    let mut group_keys: Vec<(usize, usize)> = blocks.iter().map(|(_, b)| (b.start, b.span)).collect();
    group_keys.sort_unstable();
    group_keys.dedup();
    let groups = group_keys.iter().map(|&(start, span)| Group { size: span as i64 * width, layers: Some((start, span)) }).collect();
    let modules = blocks
        .into_iter()
        .map(|(key, blk)| {
            let mut local = vec![0i64; xi];
            for l in &mut local[blk.start..blk.start + blk.span] {
                *l = 1;
            }
            ModuleDef {
                values: vec![blk.q],
                size: blk.span as i64 * width,
                group: group_keys.binary_search(&(blk.start, blk.span)).unwrap(),
                key,
                cap: Some(1),
                local,
                tag: blk,
            }
        })
        .collect();
    let mut spec = McipSpec {
        objects,
        modules,
        groups,
        configs: vec![],
        machines: reduced.machines as i64,
        bound,
        global_rows: vec![],
        local_rhs: vec![1; xi],
    };
    spec.configs = mcip::realizable_configurations(&spec, config_cap)?;
    Ok(LayeredMcip { spec, width })
}

/// Layered schedule of the rounded instance together with the layers each machine allocates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layered {
    pub parts: Vec<TimedPart>,
    /// Per machine, whether each layer is allocated to a block.
    pub used: Vec<Vec<bool>>,
}

impl Layered {
    pub fn free_slots(&self) -> usize {
        self.used.iter().map(|u| u.iter().filter(|&&x| !x).count()).sum()
    }
}

pub fn extract(reduced: &JobInstance, tr: &PreemptiveTranscript, lm: &LayeredMcip, decoded: &Decoded) -> Layered {
    let spec = &lm.spec;
    let mut slots: Vec<VecDeque<u64>> = vec![VecDeque::new(); spec.groups.len()];
    let mut used = Vec::new();
    for (c, &count) in decoded.config_counts.iter().enumerate() {
        for _ in 0..count {
            let machine = used.len() as u64;
            let mut mask = vec![false; tr.layers];
            for (g, &k) in spec.configs[c].iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let (start, span) = spec.groups[g].layers.expect("layered group");
                for l in &mut mask[start..start + span] {
                    assert!(!*l, "configuration uses a layer twice");
                    *l = true;
                }
                slots[g].push_back(machine);
            }
            used.push(mask);
        }
    }
    let mut parts = Vec::new();
    for (j, list) in decoded.modules.iter().enumerate() {
        for &(k, copies) in list {
            let module = &spec.modules[k];
            for _ in 0..copies {
                let machine = slots[module.group].pop_front().expect("allocated space for every block");
                let blk = module.tag;
                assert_eq!(Rat::from_integer(blk.s as i128) * tr.unit, reduced.jobs[j].s, "block carries the job's setup");
                parts.push(TimedPart {
                    job: j,
                    machine,
                    length: Rat::from_integer(blk.q as i128) * tr.unit,
                    start: Rat::from_integer(blk.start as i128) * tr.layer,
                });
            }
        }
    }
    assert!(slots.iter().all(|s| s.is_empty()), "every allocated space is filled");
    parts.sort_by(|a, b| (a.machine, a.start, a.job).cmp(&(b.machine, b.start, b.job)));
    Layered { parts, used }
}

/// Blocks of the per-layer capacity program: for each key, start layer and span, with the largest
/// piece that fits the span (at most the job's rounded length).
pub fn capacity_blocks(reduced: &JobInstance, tr: &PreemptiveTranscript) -> Vec<(u32, Block)> {
    let unit = &tr.unit;
    let width = units(&tr.layer, unit);
    let xi = tr.layers;
    let mut keys: Vec<(i64, i64)> = reduced.jobs.iter().map(|j| (units(&j.s, unit), units(&j.p, unit))).collect();
    keys.sort_unstable();
    keys.dedup();
    let mut out = Vec::new();
    for (key, &(s, p)) in keys.iter().enumerate() {
        let first = (s + 1 + width - 1) / width;
        let last = ((s + p + width - 1) / width).min(xi as i64);
        for span in first..=last {
            let q = (span * width - s).min(p);
            let b = span * width - s - q;
            for start in 0..=xi - span as usize {
                out.push((key as u32, Block { start, span: span as usize, q, s, b }));
            }
        }
    }
    out
}

/// Key of each rounded job in [`capacity_blocks`].
fn capacity_keys(reduced: &JobInstance, unit: &Rat) -> Vec<u32> {
    let mut keys: Vec<(i64, i64)> = reduced.jobs.iter().map(|j| (units(&j.s, unit), units(&j.p, unit))).collect();
    keys.sort_unstable();
    keys.dedup();
    reduced.jobs.iter().map(|j| keys.binary_search(&(units(&j.s, unit), units(&j.p, unit))).unwrap() as u32).collect()
}

/// The block program without configurations. One brick per job: block variables, one `≤ 1` row
/// per layer and a coverage row `Σ q·y ≥ p̄`; one global row per layer caps the blocks covering
/// it at `m`. Intervals with at most `m` covering each layer split into `m` machines with
/// disjoint layers, so this has the same optimum as the configuration program.
pub fn capacity_program(reduced: &JobInstance, tr: &PreemptiveTranscript, blocks: &[(u32, Block)]) -> NFoldProgram {
    let xi = tr.layers;
    let nb = blocks.len();
    let t = nb + xi + 1 + xi;
    let n = reduced.jobs.len();
    let m = reduced.machines as i64;
    let covers = |b: &Block, l: usize| b.start <= l && l < b.start + b.span;
    let mut a1 = vec![vec![0i64; t]; xi];
    let mut a2 = vec![vec![0i64; t]; 1 + xi];
    for (k, (_, b)) in blocks.iter().enumerate() {
        a2[0][k] = b.q;
        for l in 0..xi {
            if covers(b, l) {
                a1[l][k] = 1;
                a2[1 + l][k] = 1;
            }
        }
    }
    a2[0][nb + xi] = -1;
    for l in 0..xi {
        a2[1 + l][nb + l] = 1;
        a1[l][nb + xi + 1 + l] = 1;
    }
    let keys = capacity_keys(reduced, &tr.unit);
    let (mut w, mut upper) = (vec![0i64; n * t], vec![0i64; n * t]);
    let mut b = vec![m; xi];
    for (q, job) in reduced.jobs.iter().enumerate() {
        let base = q * t;
        let p = units(&job.p, &tr.unit);
        for (k, (key, blk)) in blocks.iter().enumerate() {
            w[base + k] = blk.span as i64 * units(&tr.layer, &tr.unit);
            if *key == keys[q] {
                upper[base + k] = 1;
            }
        }
        for l in 0..xi {
            upper[base + nb + l] = 1;
        }
        upper[base + nb + xi] = blocks.iter().filter(|(key, _)| *key == keys[q]).map(|(_, blk)| blk.q).max().unwrap_or(0) * xi as i64;
        if q == 0 {
            for l in 0..xi {
                upper[base + nb + xi + 1 + l] = m;
            }
        }
        b.push(p);
        b.extend(std::iter::repeat_n(1, xi));
    }
    NFoldProgram { n, t, a1, a2, w, lower: vec![0; n * t], upper, b }
}

/// Places chosen blocks (by rounded job) on machines. Surplus pieces are trimmed from the latest
/// blocks first, then blocks are taken by start layer and given any machine free from there on.
pub fn place_blocks(reduced: &JobInstance, tr: &PreemptiveTranscript, chosen: &[(usize, Block)]) -> Layered {
    let width = units(&tr.layer, &tr.unit);
    let mut by_job: BTreeMap<usize, Vec<Block>> = BTreeMap::new();
    for &(j, b) in chosen {
        by_job.entry(j).or_default().push(b);
    }
    let mut blocks: Vec<(usize, Block)> = Vec::new();
    for (j, mut list) in by_job {
        list.sort_by_key(|b| std::cmp::Reverse(b.start));
        let mut extra: i64 = list.iter().map(|b| b.q).sum::<i64>() - units(&reduced.jobs[j].p, &tr.unit);
        assert!(extra >= 0, "blocks cover the job");
        for b in list.iter_mut() {
            let cut = extra.min(b.q);
            b.q -= cut;
            extra -= cut;
            let size = (b.s + b.q + width - 1) / width * width;
            b.span = (size / width) as usize;
            b.b = size - b.s - b.q;
        }
        blocks.extend(list.into_iter().filter(|b| b.q > 0).map(|b| (j, b)));
    }
    blocks.sort_by_key(|(j, b)| (b.start, *j));
    let machines = tr.machines as usize;
    let mut free_from = vec![0usize; machines];
    let mut used = vec![vec![false; tr.layers]; machines];
    let mut parts = Vec::new();
    for (j, b) in blocks {
        let machine = (0..machines).find(|&i| free_from[i] <= b.start).expect("at most m blocks cover any layer");
        free_from[machine] = b.start + b.span;
        for l in &mut used[machine][b.start..b.start + b.span] {
            *l = true;
        }
        parts.push(TimedPart {
            job: j,
            machine: machine as u64,
            length: Rat::from_integer(b.q as i128) * tr.unit,
            start: Rat::from_integer(b.start as i128) * tr.layer,
        });
    }
    parts.sort_by(|a, b| (a.machine, a.start, a.job).cmp(&(b.machine, b.start, b.job)));
    Layered { parts, used }
}

/// Whether every block starts at a multiple of `width`, no two blocks share a layer on a machine,
/// and no job has two blocks in one layer.
pub fn is_layered(inst: &JobInstance, parts: &[TimedPart], width: &Rat) -> bool {
    let mut machine_layers = BTreeMap::new();
    let mut job_layers = BTreeMap::new();
    for p in parts {
        let k = p.start / width;
        if !k.is_integer() {
            return false;
        }
        let first = k.to_integer();
        let end = p.end(&inst.jobs[p.job].s);
        let span = ((end - p.start) / width).ceil().to_integer().max(1);
        for l in first..first + span {
            if machine_layers.insert((p.machine, l), p.job).is_some() || job_layers.insert((p.job, l), p.machine).is_some() {
                return false;
            }
        }
    }
    true
}

/// Undoes the simplifications on a layered schedule of the rounded instance.
pub fn desimplify(inst: &JobInstance, tr: &PreemptiveTranscript, layered: &Layered) -> Vec<TimedPart> {
    let machines = tr.machines;
    let w = tr.layer;
    let xi = tr.layers as i128;
    let setup_in_rounded = |j: usize| if tr.zeroed.contains(&j) { Rat::zero() } else { inst.jobs[j].s };

    // Original times with the rounded block starts; surplus processing comes off the last blocks.
    let mut blocks: Vec<TimedPart> = layered.parts.iter().map(|p| TimedPart { job: tr.kept[p.job], ..p.clone() }).collect();
    for &j in &tr.kept {
        let mut surplus: Rat = blocks.iter().filter(|p| p.job == j).map(|p| p.length).sum::<Rat>() - inst.jobs[j].p;
        assert!(!surplus.is_negative());
        for p in blocks.iter_mut().rev().filter(|p| p.job == j) {
            if !surplus.is_positive() {
                break;
            }
            let cut = surplus.min(p.length);
            p.length -= cut;
            surplus -= cut;
        }
    }
    blocks.retain(|p| p.length.is_positive());

    // Small jobs with small setups go into free slots, machine by machine. A piece that starts a
    // slot without its setup right before it gets one in the window opened at that boundary.
    struct Piece {
        job: usize,
        machine: u64,
        at: Rat,
        length: Rat,
        own_setup: bool,
    }
    let mut pieces: Vec<Piece> = Vec::new();
    let free: Vec<Vec<usize>> = layered.used.iter().map(|u| (0..u.len()).filter(|&l| !u[l]).collect()).collect();
    let slot_start = |m: usize, s: usize| Rat::from_integer(free[m][s] as i128) * w;
    // Current machine, index into its free slots, and fill position inside that slot.
    let (mut machine, mut slot) = (0usize, 0usize);
    let mut pos = Rat::zero();
    let mut fresh = true;
    for &j in &tr.removed_small {
        let job = &inst.jobs[j];
        loop {
            if !fresh && slot < free[machine].len() {
                break;
            }
            if !fresh {
                machine += 1;
                slot = 0;
            }
            fresh = false;
            assert!(machine < free.len(), "free slots suffice for the small jobs");
            if !free[machine].is_empty() {
                pos = slot_start(machine, 0);
            }
        }
        let mut own = false;
        if job.s < slot_start(machine, slot) + w - pos {
            pos += job.s;
            own = true;
        } else {
            // The setup does not fit; the job continues in the next slot without it.
            slot += 1;
            if slot < free[machine].len() {
                pos = slot_start(machine, slot);
            }
        }
        let mut rest = job.p;
        while rest.is_positive() {
            if slot >= free[machine].len() {
                pieces.push(Piece { job: j, machine: machine as u64, at: tr.t_bar, length: rest, own_setup: false });
                rest = Rat::zero();
                continue;
            }
            let end = slot_start(machine, slot) + w;
            let take = rest.min(end - pos);
            let at = if own { pos - job.s } else { pos };
            pieces.push(Piece { job: j, machine: machine as u64, at, length: take, own_setup: own });
            own = false;
            pos += take;
            rest -= take;
            if pos == end {
                slot += 1;
                if slot < free[machine].len() {
                    pos = slot_start(machine, slot);
                }
            }
        }
    }

    // Windows of length μT at every layer boundary 0, W, …, ΞW shift later times.
    let window = tr.mu * tr.t;
    let shift = |t: &Rat| -> Rat {
        let k = (t / w).floor().to_integer().min(xi) + 1;
        t + window * Rat::from_integer(k)
    };
    let mut out: Vec<TimedPart> = Vec::new();
    for p in &blocks {
        let s_real = inst.jobs[p.job].s;
        let content = shift(&p.start) + setup_in_rounded(p.job);
        let start = content - s_real;
        out.push(TimedPart { job: p.job, machine: p.machine, start, length: p.length });
    }
    for p in &pieces {
        let s = inst.jobs[p.job].s;
        let start = if p.own_setup { shift(&p.at) } else { shift(&p.at) - s };
        out.push(TimedPart { job: p.job, machine: p.machine, start, length: p.length });
    }

    // Small jobs with medium setups after `t_windows`, in a region of width (ε+δ)T per machine.
    // A job whose two parts could not both fit without overlapping gets a machine of its own;
    // the others wrap around, the continuation first on the next machine.
    let base = tr.t_windows;
    let region = (tr.eps + tr.delta) * tr.t;
    let (alone, wrapped): (Vec<usize>, Vec<usize>) =
        tr.removed_medium.iter().partition(|&&j| Rat::from_integer(2) * inst.jobs[j].s + inst.jobs[j].p > region);
    let mut m = 0u64;
    for &j in &alone {
        assert!(m < machines, "medium-setup jobs fit");
        out.push(TimedPart { job: j, machine: m, start: base, length: inst.jobs[j].p });
        m += 1;
    }
    let top = base + region;
    let mut pos = base;
    for &j in &wrapped {
        let job = &inst.jobs[j];
        if pos + job.s >= top {
            m += 1;
            pos = base;
        }
        assert!(m < machines, "medium-setup jobs fit");
        let take = job.p.min(top - pos - job.s);
        out.push(TimedPart { job: j, machine: m, start: pos, length: take });
        pos += job.s + take;
        let rest = job.p - take;
        if rest.is_positive() {
            // The continuation opens the next machine and ends before this part begins.
            m += 1;
            assert!(m < machines, "medium-setup jobs fit");
            out.push(TimedPart { job: j, machine: m, start: base, length: rest });
            pos = base + job.s + rest;
        }
    }
    out.sort_by(|a, b| (a.machine, a.start, a.job).cmp(&(b.machine, b.start, b.job)));
    out
}

/// Configuration counts above which the per-layer capacity program is used instead.
pub const CONFIGURATION_LIMIT: usize = 1_000;

/// Which program finds the layered schedule of the rounded instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LayeredForm {
    /// Configurations while they number at most [`CONFIGURATION_LIMIT`], capacities beyond.
    #[default]
    Auto,
    Configurations,
    Capacities,
}

/// Solves the block program for a layered schedule of total block size at most `threshold`
/// units.
pub fn solve_layered(reduced: &JobInstance, tr: &PreemptiveTranscript, threshold: i64, opts: &PipelineOptions) -> Result<(Option<Layered>, IpStats), PipelineError> {
    if reduced.jobs.is_empty() {
        let layered = Layered { parts: Vec::new(), used: vec![vec![false; tr.layers]; tr.machines as usize] };
        return Ok((Some(layered), IpStats { threshold, objective: Some(0), ..Default::default() }));
    }
    let configurations = match opts.layered_form {
        LayeredForm::Capacities => None,
        LayeredForm::Configurations => Some(build_mcip(reduced, tr, opts.config_cap)?),
        LayeredForm::Auto => match build_mcip(reduced, tr, CONFIGURATION_LIMIT.min(opts.config_cap)) {
            Ok(lm) => Some(lm),
            Err(PipelineError::Mcip(McipError::ConfigCap(_))) => None,
            Err(e) => return Err(e),
        },
    };
    if let Some(lm) = configurations {
        opts.dump_mcip(&lm.spec);
        let (decoded, solve_stats, program) = mcip::solve(&lm.spec, Some(threshold), &opts.solver)?;
        let stats = IpStats::new(&program, &solve_stats, lm.spec.configs.len(), lm.spec.modules.len(), decoded.as_ref(), threshold);
        return Ok((decoded.map(|d| extract(reduced, tr, &lm, &d)), stats));
    }
    let blocks = capacity_blocks(reduced, tr);
    let program = capacity_program(reduced, tr, &blocks);
    let solver = nfold::SolveOptions { cutoff: Some(threshold), ..opts.solver };
    opts.dump(&program);
    let (sol, solve_stats) = nfold::solve(&program, &solver).map_err(McipError::from)?;
    let sol = sol.filter(|s| s.objective <= threshold);
    let mut stats = IpStats::new(&program, &solve_stats, 0, blocks.len(), None, threshold);
    stats.objective = sol.as_ref().map(|s| s.objective);
    let layered = sol.map(|sol| {
        let mut chosen = Vec::new();
        for q in 0..reduced.jobs.len() {
            for (k, &v) in sol.brick(program.t, q)[..blocks.len()].iter().enumerate() {
                if v > 0 {
                    chosen.push((q, blocks[k].1));
                }
            }
        }
        place_blocks(reduced, tr, &chosen)
    });
    Ok((layered, stats))
}

pub fn solve(inst: &JobInstance, t: &Rat, eps: &Rat, opts: &PipelineOptions) -> Result<Probe, PipelineError> {
    solve_traced(inst, t, eps, opts).map(|(probe, _)| probe)
}

/// Like [`solve`], also returning the transcript and the layered schedule of the rounded
/// instance when the guess is accepted.
pub fn solve_traced(inst: &JobInstance, t: &Rat, eps: &Rat, opts: &PipelineOptions) -> Result<(Probe, Option<(JobInstance, PreemptiveTranscript, Layered)>), PipelineError> {
    epsilon_reciprocal(eps)?;
    if !t.is_positive() {
        return Err(PipelineError::BadGuess);
    }
    if inst.jobs.iter().any(|j| j.s + j.p > *t) {
        return Ok((Probe::Rejected { reason: Reject::TooLong, stats: None }, None));
    }
    let machines = inst.machines.min(inst.jobs.len().max(1) as u64);
    let Some(delta) = choose_delta(inst, t, eps, machines)? else {
        return Ok((Probe::Rejected { reason: Reject::NoDelta, stats: None }, None));
    };
    let (reduced, tr) = simplify(inst, t, eps, &delta)?;
    let space = Rat::from_integer(tr.machines as i128) * tr.t_bar - tr.free_demand;
    if space.is_negative() {
        return Ok((Probe::Rejected { reason: Reject::NoRoom, stats: None }, None));
    }
    let threshold = floor_units(&space, &tr.unit);
    let (layered, stats) = solve_layered(&reduced, &tr, threshold, opts)?;
    let Some(layered) = layered else {
        return Ok((Probe::Rejected { reason: Reject::NoSolution, stats: Some(stats) }, None));
    };
    let rounded = Instance::Preemptive(reduced.clone());
    if let Err(v) = model::validate(&rounded, &Schedule::Preemptive(layered.parts.clone())) {
        panic!("extracted layered schedule is invalid: {v}");
    }
    assert!(is_layered(&reduced, &layered.parts, &tr.layer), "extracted schedule is layered");
    assert!(Rat::from_integer(layered.free_slots() as i128) * tr.layer >= tr.free_demand, "free slots hold the removed jobs");
    let schedule = Schedule::Preemptive(desimplify(inst, &tr, &layered));
    let full = Instance::Preemptive(inst.clone());
    if let Err(v) = model::validate(&full, &schedule) {
        panic!("preemptive pipeline produced an invalid schedule: {v}");
    }
    let makespan = model::makespan(&full, &schedule).expect("model matches");
    assert!(makespan <= tr.t_breve, "makespan exceeds the guaranteed bound");
    assert!(tr.t_breve <= (Rat::one() + Rat::from_integer(9) * eps) * t);
    Ok((Probe::Accepted(Accepted { schedule, makespan, bound: tr.t_breve, stats: Some(stats) }), Some((reduced, tr, layered))))
}
