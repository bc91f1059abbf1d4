//! Ground truth for small instances: exact optima with witnesses, and lower bounds.

use crate::model::{self, ClassInstance, Instance, JobInstance, Part, Schedule, SplitSchedule};
use crate::Rat;
use num_traits::{Signed, Zero};
use serde::Serialize;
use std::collections::VecDeque;

pub const DEFAULT_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Exact,
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub kind: OracleKind,
    pub value: Rat,
    pub witness: Option<Schedule>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("search space {size} exceeds the cap {cap}")]
    Cap { size: u128, cap: u128 },
    #[error("no oracle for this model")]
    Unsupported,
}

/// Dispatches to the model's oracle.
pub fn oracle(instance: &Instance, cap: u128) -> Result<OracleResult, OracleError> {
    match instance {
        Instance::SetupClass(c) => exact_setup_class(c, cap),
        Instance::Splittable(s) => exact_splittable(s, cap),
        Instance::Preemptive(p) => Ok(bounds_preemptive(p)),
    }
}

fn checked_pow(base: u128, exp: usize) -> u128 {
    (0..exp).try_fold(1u128, |acc, _| acc.checked_mul(base)).unwrap_or(u128::MAX)
}

/// Exhaustive search over assignments, trying only one representative per machine relabeling.
pub fn exact_setup_class(inst: &ClassInstance, cap: u128) -> Result<OracleResult, OracleError> {
    let n = inst.jobs.len();
    let m = (inst.machines as usize).min(n.max(1));
    let size = checked_pow(m as u128, n);
    if size > cap {
        return Err(OracleError::Cap { size, cap });
    }
    struct Search<'a> {
        inst: &'a ClassInstance,
        m: usize,
        load: Vec<Rat>,
        count: Vec<Vec<usize>>,
        sigma: Vec<u64>,
        best: Option<(Rat, Vec<u64>)>,
    }
    impl Search<'_> {
        fn go(&mut self, j: usize, used: usize) {
            let current = self.load.iter().copied().max().unwrap_or_else(Rat::zero);
            if let Some((b, _)) = &self.best {
                if current >= *b {
                    return;
                }
            }
            if j == self.inst.jobs.len() {
                self.best = Some((current, self.sigma.clone()));
                return;
            }
            let job = &self.inst.jobs[j];
            for i in 0..(used + 1).min(self.m) {
                let add = if self.count[i][job.class] == 0 { job.p + self.inst.setups[job.class] } else { job.p };
                self.load[i] += add;
                self.count[i][job.class] += 1;
                self.sigma[j] = i as u64;
                self.go(j + 1, used.max(i + 1));
                self.count[i][job.class] -= 1;
                self.load[i] -= add;
            }
        }
    }
    let mut s = Search {
        inst,
        m,
        load: vec![Rat::zero(); m],
        count: vec![vec![0; inst.setups.len()]; m],
        sigma: vec![0; n],
        best: None,
    };
    s.go(0, 0);
    let (value, sigma) = s.best.expect("some assignment exists");
    let witness = Schedule::SetupClass(sigma);
    let full = Instance::SetupClass(inst.clone());
    debug_assert!(model::validate(&full, &witness).is_ok());
    debug_assert_eq!(model::makespan(&full, &witness).unwrap(), value);
    Ok(OracleResult { kind: OracleKind::Exact, value, witness: Some(witness) })
}

/// Smallest makespan when job `j` may use exactly the machines whose job sets contain it:
/// by the supply-demand theorem it is the maximum over job sets `J'` of
/// `(Σ_{J'} p + Σ_{i∈N(J')} S_i) / |N(J')|`, where `S_i` is the setup total of machine `i`.
pub fn split_makespan(inst: &JobInstance, machine_sets: &[u32]) -> Option<Rat> {
    let n = inst.jobs.len();
    let setup_total: Vec<Rat> = machine_sets.iter().map(|&mask| (0..n).filter(|&j| mask >> j & 1 == 1).map(|j| inst.jobs[j].s).sum()).collect();
    let mut best = Rat::zero();
    for jobs in 1u32..(1 << n) {
        let machines: Vec<usize> = (0..machine_sets.len()).filter(|&i| machine_sets[i] & jobs != 0).collect();
        if machines.is_empty() {
            return None;
        }
        let p: Rat = (0..n).filter(|&j| jobs >> j & 1 == 1).map(|j| inst.jobs[j].p).sum();
        let s: Rat = machines.iter().map(|&i| setup_total[i]).sum();
        best = best.max((p + s) / Rat::from_integer(machines.len() as i128));
    }
    Some(best)
}

/// Exhaustive search over the job set of every machine, machines taken as a multiset.
pub fn exact_splittable(inst: &JobInstance, cap: u128) -> Result<OracleResult, OracleError> {
    let n = inst.jobs.len();
    if n == 0 {
        let w = Schedule::Splittable(SplitSchedule::default());
        return Ok(OracleResult { kind: OracleKind::Exact, value: Rat::zero(), witness: Some(w) });
    }
    // More machines than job subsets never helps beyond one machine per nonempty subset pattern,
    // but the count of multisets grows quickly; cap on it directly.
    let m = inst.machines as usize;
    let masks = 1u128 << n;
    let size = multisets(masks, m as u128);
    if n > 20 || size > cap {
        return Err(OracleError::Cap { size, cap });
    }
    let full = (1u32 << n) - 1;
    let mut best: Option<(Rat, Vec<u32>)> = None;
    let mut cur = Vec::with_capacity(m);
    fn rec(inst: &JobInstance, m: usize, start: u32, full: u32, cur: &mut Vec<u32>, best: &mut Option<(Rat, Vec<u32>)>) {
        if cur.len() == m {
            if cur.iter().fold(0, |a, &b| a | b) != full {
                return;
            }
            if let Some(t) = split_makespan(inst, cur) {
                if best.as_ref().is_none_or(|(b, _)| t < *b) {
                    *best = Some((t, cur.clone()));
                }
            }
            return;
        }
        for mask in start..=full {
            cur.push(mask);
            rec(inst, m, mask, full, cur, best);
            cur.pop();
        }
    }
    rec(inst, m, 0, full, &mut cur, &mut best);
    let (value, sets) = best.expect("one machine per job pattern exists");
    let parts = split_witness(inst, &sets, &value);
    let witness = Schedule::Splittable(SplitSchedule { parts, trivial_runs: vec![] });
    let whole = Instance::Splittable(inst.clone());
    assert!(model::validate(&whole, &witness).is_ok(), "oracle witness is valid");
    assert!(model::makespan(&whole, &witness).unwrap() <= value, "oracle witness meets its value");
    Ok(OracleResult { kind: OracleKind::Exact, value, witness: Some(witness) })
}

fn multisets(kinds: u128, k: u128) -> u128 {
    // C(kinds + k - 1, k), saturating.
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(kinds + i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Part lengths from a maximum flow: job `j` sends `p_j`, machine `i` accepts `T − S_i`.
fn split_witness(inst: &JobInstance, sets: &[u32], t: &Rat) -> Vec<Part> {
    let n = inst.jobs.len();
    let m = sets.len();
    // Nodes: source 0, jobs 1..=n, machines n+1..=n+m, sink n+m+1.
    let size = n + m + 2;
    let sink = size - 1;
    let mut cap = vec![vec![Rat::zero(); size]; size];
    let infinite: Rat = inst.jobs.iter().map(|j| j.p).sum::<Rat>() + Rat::from_integer(1);
    for (j, job) in inst.jobs.iter().enumerate() {
        cap[0][1 + j] = job.p;
    }
    for (i, &mask) in sets.iter().enumerate() {
        let setups: Rat = (0..n).filter(|&j| mask >> j & 1 == 1).map(|j| inst.jobs[j].s).sum();
        cap[n + 1 + i][sink] = (t - setups).max(Rat::zero());
        for j in 0..n {
            if mask >> j & 1 == 1 {
                cap[1 + j][n + 1 + i] = infinite;
            }
        }
    }
    let original = cap.clone();
    loop {
        let mut prev = vec![usize::MAX; size];
        prev[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for v in 0..size {
                if prev[v] == usize::MAX && cap[u][v].is_positive() {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[sink] == usize::MAX {
            break;
        }
        let mut push = infinite;
        let mut v = sink;
        while v != 0 {
            push = push.min(cap[prev[v]][v]);
            v = prev[v];
        }
        let mut v = sink;
        while v != 0 {
            let u = prev[v];
            cap[u][v] -= push;
            cap[v][u] += push;
            v = u;
        }
    }
    let mut parts = Vec::new();
    for j in 0..n {
        for i in 0..m {
            let flow = original[1 + j][n + 1 + i] - cap[1 + j][n + 1 + i];
            if flow.is_positive() {
                parts.push(Part { job: j, machine: i as u64, length: flow });
            }
        }
    }
    parts
}

/// `max(max_j (s_j + p_j), Σ_j (s_j + p_j) / m)`.
pub fn bounds_preemptive(inst: &JobInstance) -> OracleResult {
    let longest = inst.jobs.iter().map(|j| j.s + j.p).max().unwrap_or_else(Rat::zero);
    let total: Rat = inst.jobs.iter().map(|j| j.s + j.p).sum();
    let value = longest.max(total / Rat::from_integer(inst.machines as i128));
    OracleResult { kind: OracleKind::LowerBound, value, witness: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::times;
    use crate::model::ClassJob;
    use crate::rat::{int, rat};

    fn classes(m: u64, jobs: &[(i128, usize)], setups: &[i128]) -> ClassInstance {
        ClassInstance { machines: m, jobs: jobs.iter().map(|&(p, class)| ClassJob { p: int(p), class }).collect(), setups: setups.iter().map(|&s| int(s)).collect() }
    }

    #[test]
    fn setup_class_examples() {
        assert_eq!(exact_setup_class(&classes(2, &[(3, 0)], &[2]), DEFAULT_CAP).unwrap().value, int(5));
        assert_eq!(exact_setup_class(&classes(2, &[(1, 0), (1, 0)], &[2]), DEFAULT_CAP).unwrap().value, int(3));
        assert_eq!(exact_setup_class(&classes(2, &[(1, 0), (1, 1)], &[2, 2]), DEFAULT_CAP).unwrap().value, int(3));
    }

    #[test]
    fn setup_class_cap() {
        let inst = classes(3, &[(1, 0); 5], &[1]);
        assert!(matches!(exact_setup_class(&inst, 100), Err(OracleError::Cap { .. })));
    }

    #[test]
    fn splittable_examples() {
        let one = JobInstance { machines: 2, jobs: times(&[(4, 2)]) };
        assert_eq!(exact_splittable(&one, DEFAULT_CAP).unwrap().value, int(4));
        // Parts of one job may run in parallel: halves give 2 + 1 on each machine.
        let halves = JobInstance { machines: 2, jobs: times(&[(2, 2)]) };
        assert_eq!(exact_splittable(&halves, DEFAULT_CAP).unwrap().value, int(3));
        let single = JobInstance { machines: 1, jobs: times(&[(2, 1), (3, 2)]) };
        assert_eq!(exact_splittable(&single, DEFAULT_CAP).unwrap().value, int(8));
        let three = JobInstance { machines: 2, jobs: times(&[(3, 1), (3, 1), (3, 1)]) };
        // Two whole jobs on one machine, the third split: (4+4) vs (4 + 2 + x) balancing gives 13/2.
        assert_eq!(exact_splittable(&three, DEFAULT_CAP).unwrap().value, rat(13, 2));
    }

    #[test]
    fn preemptive_bounds() {
        assert_eq!(bounds_preemptive(&JobInstance { machines: 8, jobs: times(&[(3, 2)]) }).value, int(5));
        assert_eq!(bounds_preemptive(&JobInstance { machines: 1, jobs: times(&[(2, 1); 3]) }).value, int(9));
        assert_eq!(bounds_preemptive(&JobInstance { machines: 2, jobs: times(&[(4, 1), (1, 1)]) }).value, int(5));
    }
}
