use proptest::prelude::*;
use setupsched::model::*;
use setupsched::rat::{int, rat};
use setupsched::Rat;

fn class_inst(m: u64, jobs: &[(i128, usize)], setups: &[i128]) -> Instance {
    Instance::SetupClass(ClassInstance {
        machines: m,
        jobs: jobs.iter().map(|&(p, class)| ClassJob { p: int(p), class }).collect(),
        setups: setups.iter().map(|&s| int(s)).collect(),
    })
}

fn job_inst(m: u64, jobs: &[(i128, i128)]) -> JobInstance {
    JobInstance { machines: m, jobs: jobs.iter().map(|&(p, s)| SetupJob { p: int(p), s: int(s) }).collect() }
}

fn part(job: usize, machine: u64, length: i128) -> Part {
    Part { job, machine, length: int(length) }
}

fn timed(job: usize, machine: u64, length: i128, start: i128) -> TimedPart {
    TimedPart { job, machine, length: int(length), start: int(start) }
}

#[test]
fn setup_class_batch_makespan() {
    let inst = class_inst(1, &[(3, 0), (4, 0)], &[2]);
    let s = Schedule::SetupClass(vec![0, 0]);
    assert_eq!(makespan(&inst, &s).unwrap(), int(9));
}

#[test]
fn splittable_symmetric_split() {
    let inst = Instance::Splittable(job_inst(2, &[(4, 2)]));
    let s = Schedule::Splittable(SplitSchedule { parts: vec![part(0, 0, 2), part(0, 1, 2)], trivial_runs: vec![] });
    assert_eq!(makespan(&inst, &s).unwrap(), int(4));
    assert!(validate(&inst, &s).is_ok());
}

#[test]
fn preemptive_makespan_from_starts() {
    let inst = Instance::Preemptive(job_inst(2, &[(3, 1)]));
    let s = Schedule::Preemptive(vec![timed(0, 0, 2, 0), timed(0, 1, 1, 4)]);
    assert_eq!(makespan(&inst, &s).unwrap(), int(6));
    assert!(validate(&inst, &s).is_ok());
}

#[test]
fn preemptive_same_job_overlap_is_reported() {
    let inst = Instance::Preemptive(job_inst(2, &[(4, 1)]));
    let s = Schedule::Preemptive(vec![timed(0, 0, 2, 0), timed(0, 1, 2, 2)]);
    assert_eq!(validate(&inst, &s).unwrap_err().kind(), "job-overlap");
}

#[test]
fn preemptive_machine_overlap_is_reported() {
    let inst = Instance::Preemptive(job_inst(1, &[(2, 1), (2, 1)]));
    let s = Schedule::Preemptive(vec![timed(0, 0, 2, 0), timed(1, 0, 2, 2)]);
    assert_eq!(validate(&inst, &s).unwrap_err().kind(), "machine-overlap");
}

#[test]
fn splittable_mass_shortfall_is_reported() {
    let inst = Instance::Splittable(job_inst(2, &[(4, 2)]));
    let s = Schedule::Splittable(SplitSchedule { parts: vec![part(0, 0, 3)], trivial_runs: vec![] });
    assert_eq!(validate(&inst, &s).unwrap_err().kind(), "mass");
}

#[test]
fn single_machine_schedules_validate() {
    let c = class_inst(1, &[(1, 0), (2, 1)], &[1, 1]);
    assert!(validate(&c, &Schedule::SetupClass(vec![0, 0])).is_ok());
    let sp = Instance::Splittable(job_inst(1, &[(3, 1)]));
    assert!(validate(&sp, &Schedule::Splittable(SplitSchedule { parts: vec![part(0, 0, 3)], trivial_runs: vec![] })).is_ok());
    let pr = Instance::Preemptive(job_inst(1, &[(3, 1), (1, 1)]));
    assert!(validate(&pr, &Schedule::Preemptive(vec![timed(0, 0, 3, 0), timed(1, 0, 1, 4)])).is_ok());
}

#[test]
fn structural_violations() {
    let c = class_inst(2, &[(1, 0)], &[1]);
    assert_eq!(validate(&c, &Schedule::SetupClass(vec![2])).unwrap_err().kind(), "machine-range");
    assert_eq!(validate(&c, &Schedule::SetupClass(vec![])).unwrap_err().kind(), "assignment-length");
    let sp = Instance::Splittable(job_inst(1, &[(3, 1)]));
    let runs = SplitSchedule { parts: vec![part(0, 0, 1)], trivial_runs: vec![TrivialRun { job: 0, count: 1, length: int(2) }] };
    assert_eq!(validate(&sp, &Schedule::Splittable(runs)).unwrap_err().kind(), "machine-count");
    assert_eq!(validate(&sp, &Schedule::SetupClass(vec![0])).unwrap_err().kind(), "model-mismatch");
}

#[test]
fn trivial_runs_count_towards_mass_and_load() {
    let sp = Instance::Splittable(job_inst(5, &[(7, 1)]));
    let s = SplitSchedule { parts: vec![part(0, 0, 1)], trivial_runs: vec![TrivialRun { job: 0, count: 3, length: int(2) }] };
    let s = Schedule::Splittable(s);
    assert!(validate(&sp, &s).is_ok());
    assert_eq!(makespan(&sp, &s).unwrap(), int(3));
    assert_eq!(free_space(&sp, &s, &int(3), None).unwrap(), int(15 - 2 - 9));
}

#[test]
fn free_space_examples() {
    let sp = Instance::Splittable(job_inst(2, &[(5, 2), (8, 2)]));
    let s = Schedule::Splittable(SplitSchedule { parts: vec![part(0, 0, 5), part(1, 1, 8)], trivial_runs: vec![] });
    assert_eq!(free_space(&sp, &s, &int(10), None).unwrap(), int(3));

    let pr = Instance::Preemptive(job_inst(1, &[(2, 1)]));
    let s = Schedule::Preemptive(vec![timed(0, 0, 2, 0)]);
    assert_eq!(free_space(&pr, &s, &int(4), Some(&int(2))).unwrap(), int(0));
    assert_eq!(free_space(&pr, &s, &int(4), None).unwrap(), int(1));

    let empty = Instance::Preemptive(job_inst(3, &[]));
    assert_eq!(free_space(&empty, &Schedule::Preemptive(vec![]), &int(5), None).unwrap(), int(15));
}

#[test]
fn free_space_rejects_bound_below_makespan() {
    let c = class_inst(1, &[(3, 0)], &[2]);
    assert!(matches!(free_space(&c, &Schedule::SetupClass(vec![0]), &int(4), None), Err(ModelError::BoundExceeded { .. })));
}

#[test]
fn json_round_trips() {
    let c = class_inst(2, &[(3, 0), (1, 1)], &[2, 1]);
    assert_eq!(instance_from_json(&instance_to_json(&c)).unwrap(), c);
    let pr = Instance::Preemptive(JobInstance { machines: 2, jobs: vec![SetupJob { p: rat(7, 2), s: int(1) }] });
    assert_eq!(instance_from_json(&instance_to_json(&pr)).unwrap(), pr);
    let s = Schedule::Splittable(SplitSchedule {
        parts: vec![Part { job: 0, machine: 1, length: rat(1, 3) }],
        trivial_runs: vec![TrivialRun { job: 0, count: 4, length: int(2) }],
    });
    assert_eq!(schedule_from_json(&schedule_to_json(&s)).unwrap(), s);
    let t = Schedule::Preemptive(vec![TimedPart { job: 0, machine: 1, length: rat(1, 2), start: rat(3, 2) }]);
    assert_eq!(schedule_from_json(&schedule_to_json(&t)).unwrap(), t);
}

#[test]
fn instance_json_accepts_integers_and_one_based_classes() {
    let text = r#"{"model":"setup-class","machines":2,"jobs":[{"p":3,"class":1},{"p":"1/2","class":2}],"classes":[{"s":2},{"s":"3/4"}]}"#;
    let inst = instance_from_json(text).unwrap();
    let Instance::SetupClass(c) = inst else { panic!() };
    assert_eq!(c.jobs[1].class, 1);
    assert_eq!(c.setups[1], rat(3, 4));
    assert!(instance_from_json(r#"{"model":"setup-class","machines":1,"jobs":[{"p":1,"class":3}],"classes":[{"s":1}]}"#).is_err());
}

fn lay_out_batches(inst: &ClassInstance, sigma: &[u64]) -> Rat {
    // Contiguous batch simulation: per machine, per class in index order, setup then jobs.
    let mut best = Rat::from_integer(0);
    for i in 0..inst.machines {
        let mut t = Rat::from_integer(0);
        for k in 0..inst.setups.len() {
            let jobs: Vec<_> = inst.jobs.iter().zip(sigma).filter(|(j, &m)| m == i && j.class == k).collect();
            if jobs.is_empty() {
                continue;
            }
            t += inst.setups[k];
            for (j, _) in jobs {
                t += j.p;
            }
        }
        best = best.max(t);
    }
    best
}

fn class_case() -> impl Strategy<Value = (ClassInstance, Vec<u64>, Vec<u64>)> {
    (1u64..4, 1usize..4, 1usize..8).prop_flat_map(|(m, k, n)| {
        (
            proptest::collection::vec((1i128..10, 0..k), n),
            proptest::collection::vec(1i128..6, k),
            proptest::collection::vec(0..m, n),
            Just(m),
            Just((0..m).collect::<Vec<u64>>()).prop_shuffle(),
        )
            .prop_map(|(jobs, setups, sigma, m, perm)| {
                let inst = ClassInstance {
                    machines: m,
                    jobs: jobs.into_iter().map(|(p, class)| ClassJob { p: int(p), class }).collect(),
                    setups: setups.into_iter().map(int).collect(),
                };
                (inst, sigma, perm)
            })
    })
}

proptest! {
    #[test]
    fn makespan_is_invariant_under_machine_relabeling((inst, sigma, perm) in class_case()) {
        let relabeled: Vec<u64> = sigma.iter().map(|&i| perm[i as usize]).collect();
        let a = Instance::SetupClass(inst);
        prop_assert_eq!(makespan(&a, &Schedule::SetupClass(sigma)).unwrap(), makespan(&a, &Schedule::SetupClass(relabeled)).unwrap());
    }

    #[test]
    fn batch_formula_matches_contiguous_layout((inst, sigma, _perm) in class_case()) {
        let laid = lay_out_batches(&inst, &sigma);
        let a = Instance::SetupClass(inst);
        prop_assert!(validate(&a, &Schedule::SetupClass(sigma.clone())).is_ok());
        prop_assert_eq!(makespan(&a, &Schedule::SetupClass(sigma)).unwrap(), laid);
    }

    #[test]
    fn gap_free_free_space_identity(
        jobs in proptest::collection::vec((1i128..6, 1i128..4), 0..6),
        m in 1u64..4,
        extra in 0i128..5,
    ) {
        // Each job runs whole on machine j mod m, back to back from time 0.
        let inst = job_inst(m, &jobs);
        let mut clock = vec![0i128; m as usize];
        let mut parts = Vec::new();
        for (j, &(p, s)) in jobs.iter().enumerate() {
            let i = j % m as usize;
            parts.push(timed(j, i as u64, p, clock[i]));
            clock[i] += p + s;
        }
        let pr = Instance::Preemptive(inst.clone());
        let sched = Schedule::Preemptive(parts);
        prop_assert!(validate(&pr, &sched).is_ok());
        let bound = int(clock.iter().copied().max().unwrap_or(0) + extra);
        let busy: i128 = jobs.iter().map(|(p, s)| p + s).sum();
        prop_assert_eq!(free_space(&pr, &sched, &bound, None).unwrap() + int(busy), bound * int(m as i128));
    }
}
