use setupsched::gen::{self, GenParams};
use setupsched::mcip;
use setupsched::model::{self, Instance, JobInstance, Model, Schedule, SetupJob};
use setupsched::oracle;
use setupsched::pipeline::{PipelineOptions, Probe};
use setupsched::rat::{int, rat};
use setupsched::setup_class::container_units;
use setupsched::splittable;
use setupsched::Rat;
use std::time::Instant;

fn jobs(m: u64, ps: &[(i128, i128)]) -> JobInstance {
    JobInstance { machines: m, jobs: ps.iter().map(|&(p, s)| SetupJob { p: int(p), s: int(s) }).collect() }
}

#[test]
fn rounding_to_the_grid() {
    // eps = 1/2, T = 8: grid 2, so (p, s) = (5, 5) becomes (6, 6).
    let inst = jobs(1, &[(5, 5)]);
    let (reduced, tr) = splittable::simplify(&inst, &int(8), &rat(1, 2), &PipelineOptions::default()).unwrap();
    assert_eq!(reduced.jobs[0], SetupJob { p: int(6), s: int(6) });
    assert_eq!(tr.unit, int(2));
    assert_eq!(tr.t_bar, int(16));
    assert_eq!(tr.t_breve, int(20));
}

#[test]
fn small_setups_are_removed() {
    let inst = jobs(2, &[(3, 1), (2, 5), (1, 1)]);
    let (reduced, tr) = splittable::simplify(&inst, &int(8), &rat(1, 2), &PipelineOptions::default()).unwrap();
    assert_eq!(tr.kept, vec![1]);
    assert_eq!(tr.removed, vec![2, 0]);
    assert_eq!(tr.free_demand, int(6));
    assert_eq!(reduced.jobs.len(), 1);
}

#[test]
fn module_pieces_for_one_setup() {
    // Scaled: p = 4, s = 2, bound 6: pieces q = 1..=4, the last one full.
    let reduced = jobs(2, &[(4, 2)]);
    let sm = splittable::build_mcip(&reduced, &int(1), &int(6), None, None, mcip::DEFAULT_CONFIG_CAP).unwrap();
    let qs: Vec<i64> = sm.spec.modules.iter().map(|m| m.tag.q).collect();
    assert_eq!(qs, vec![1, 2, 3, 4]);
    let full: Vec<bool> = sm.spec.modules.iter().map(|m| m.tag.full).collect();
    assert_eq!(full, vec![false, false, false, true]);
    assert!(sm.spec.global_rows.is_empty());
}

#[test]
fn simple_schedule_bound() {
    assert_eq!(splittable::simple_bound(3), 3);
    assert_eq!(splittable::simple_bound(4), 6);
    assert_eq!(splittable::simple_bound(1), 1);
    assert_eq!(splittable::simple_bound(2), 2);
    assert_eq!(splittable::simple_bound(0), 0);
}

#[test]
fn simple_schedule_row_counts_only_nontrivial_configurations() {
    let reduced = jobs(3, &[(4, 2)]);
    let sm = splittable::build_mcip(&reduced, &int(1), &int(6), None, Some((1, 0)), mcip::DEFAULT_CONFIG_CAP).unwrap();
    let (row, composite) = (&sm.spec.global_rows[0], &sm.spec.global_rows[1]);
    assert_eq!((row.rhs, composite.rhs), (1, 0));
    for (c, config) in sm.spec.configs.iter().enumerate() {
        assert_eq!(row.coeff[c] == 0, sm.is_trivial(config));
        assert_eq!(composite.coeff[c] == 1, config.iter().sum::<u32>() >= 2);
    }
    assert_eq!(sm.spec.configs.iter().filter(|c| sm.is_trivial(c)).count(), 2);
}

#[test]
fn container_rounding_of_a_piece() {
    // eps = 1/2, T = 16: grid 4, h = 12 is 3 units and rounds to 4 units = 16.
    assert_eq!(container_units(3, &rat(1, 2)), 4);
}

#[test]
fn trivial_machines_are_reported_as_runs() {
    // One job needing three and a half machines' worth of pieces.
    let inst = jobs(8, &[(22, 4)]);
    let probe = splittable::solve(&inst, &int(8), &rat(1, 2), &PipelineOptions::default()).unwrap();
    let Probe::Accepted(acc) = probe else { panic!("rejected") };
    let Schedule::Splittable(s) = &acc.schedule else { unreachable!() };
    assert!(!s.trivial_runs.is_empty());
    assert!(splittable::composite_machines(s) == 0);
}

fn generated(seed: u64) -> JobInstance {
    let n = 1 + (seed % 4) as usize;
    let m = 1 + (seed / 4) % 3;
    let params = GenParams { model: Model::Splittable, jobs: n, machines: m, classes: None, seed, grid: 10, denominator: 1 };
    match gen::instance(&params).unwrap() {
        Instance::Splittable(j) => j,
        _ => unreachable!(),
    }
}

fn accept_at_optimum(opts: &PipelineOptions, seeds: std::ops::Range<u64>) {
    let eps = rat(1, 2);
    for seed in seeds {
        let inst = generated(seed);
        let opt = oracle::exact_splittable(&inst, oracle::DEFAULT_CAP).unwrap().value;
        let probe = splittable::solve(&inst, &opt, &eps, opts).unwrap();
        let Probe::Accepted(acc) = probe else { panic!("seed {seed}: optimum {opt} rejected") };
        let full = Instance::Splittable(inst.clone());
        assert!(model::validate(&full, &acc.schedule).is_ok());
        assert!(acc.makespan <= acc.bound);
        assert!(acc.makespan >= opt, "seed {seed}: below the optimum");
    }
}

#[test]
fn accepts_at_the_optimum_and_stays_within_bound() {
    accept_at_optimum(&PipelineOptions::default(), 0..40);
}

#[test]
fn accepts_at_the_optimum_with_container_rounding() {
    accept_at_optimum(&PipelineOptions { container_rounding: true, ..Default::default() }, 0..24);
}

#[test]
fn accepts_at_the_optimum_without_the_simple_row() {
    accept_at_optimum(&PipelineOptions { simple_schedule: false, ..Default::default() }, 0..24);
}

fn probe_time(m: u64) -> (std::time::Duration, usize) {
    let mut inst = jobs(m, &[(40, 30), (25, 35), (9, 31), (13, 1), (7, 2)]);
    // Processing grows with m so that the machines stay busy.
    for j in &mut inst.jobs {
        j.p *= Rat::new(m as i128, 4);
    }
    let t = int(60);
    let start = Instant::now();
    let probe = splittable::solve(&inst, &t, &rat(1, 2), &PipelineOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let Probe::Accepted(acc) = probe else { panic!("rejected at m = {m}") };
    let text = model::schedule_to_json(&acc.schedule);
    assert!(model::validate(&Instance::Splittable(inst), &acc.schedule).is_ok());
    (elapsed, text.len())
}

#[test]
fn output_size_does_not_grow_with_machines() {
    let (_, small) = probe_time(4);
    let (_, large) = probe_time(1_000_000);
    assert!(large <= 4 * small, "output grew from {small} to {large} bytes");
    assert!(large < 100_000);
}
