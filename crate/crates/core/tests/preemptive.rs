use setupsched::gen::{self, GenParams};
use setupsched::mcip;
use setupsched::model::{self, Instance, JobInstance, Model, Schedule};
use setupsched::nfold;
use setupsched::oracle;
use setupsched::pipeline::{PipelineOptions, Probe, Reject};
use setupsched::preemptive::{self, Band, Layered};
use setupsched::rat::{int, rat};
use setupsched::Rat;

fn jobs(m: u64, ps: &[(i128, i128)]) -> JobInstance {
    JobInstance { machines: m, jobs: gen::times(ps) }
}

fn half() -> Rat {
    rat(1, 2)
}

#[test]
fn rounding_of_a_big_setup_job() {
    // eps = delta = 1/2, T = 32: layer 8, unit 2.
    let inst = jobs(1, &[(9, 17)]);
    let (reduced, tr) = preemptive::simplify(&inst, &int(32), &half(), &half()).unwrap();
    assert_eq!((tr.layer, tr.unit, tr.layers), (int(8), int(2), 10));
    assert_eq!((reduced.jobs[0].p, reduced.jobs[0].s), (int(16), int(24)));
    assert_eq!(tr.band, vec![Band::Big]);
}

#[test]
fn small_setup_on_a_big_job_is_zeroed() {
    // mu T = 4 and s = 3 is a small setup; p = 20 is at least eps T = 16.
    let inst = jobs(1, &[(20, 3)]);
    let (reduced, tr) = preemptive::simplify(&inst, &int(32), &half(), &half()).unwrap();
    assert_eq!(tr.band, vec![Band::Small]);
    assert_eq!(tr.zeroed, vec![0]);
    assert_eq!(reduced.jobs[0].s, int(0));
    assert_eq!(reduced.jobs[0].p, int(24));
}

#[test]
fn small_job_with_small_setup_is_removed() {
    let inst = jobs(1, &[(2, 1), (20, 20)]);
    let (reduced, tr) = preemptive::simplify(&inst, &int(32), &half(), &half()).unwrap();
    assert_eq!(tr.removed_small, vec![0]);
    assert_eq!(tr.free_demand, int(3));
    assert_eq!(tr.kept, vec![1]);
    assert_eq!(reduced.jobs.len(), 1);
}

#[test]
fn small_job_with_medium_setup_is_removed() {
    let inst = jobs(1, &[(5, 6)]);
    let (_, tr) = preemptive::simplify(&inst, &int(32), &half(), &half()).unwrap();
    assert_eq!(tr.band, vec![Band::Medium]);
    assert_eq!(tr.removed_medium, vec![0]);
    assert!(tr.kept.is_empty());
}

#[test]
fn bounds_of_the_transcript() {
    let (_, tr) = preemptive::simplify(&jobs(1, &[(1, 1)]), &int(32), &half(), &half()).unwrap();
    // T̄ = 80; windows add a half of T̄ and (1/8 + 1/2)T; the medium region adds T.
    assert_eq!(tr.t_bar, int(80));
    assert_eq!(tr.t_windows, int(140));
    assert_eq!(tr.t_breve, int(172));
    assert!(tr.t_breve <= int(32) * rat(11, 2));
    assert_eq!(preemptive::layer_count(&half(), &rat(1, 4)), 20);
}

#[test]
fn delta_is_epsilon_without_medium_setups() {
    let inst = jobs(2, &[(3, 20), (4, 17), (1, 1)]);
    assert_eq!(preemptive::choose_delta(&inst, &int(32), &half(), 2).unwrap(), Some(half()));
}

#[test]
fn medium_mass_on_the_limit_is_admissible() {
    // Band [4, 16) at delta = 1/2; mass 16 = m eps T for m = 1, T = 32.
    let inst = jobs(1, &[(10, 6)]);
    assert_eq!(preemptive::band_mass(&inst, &int(32), &half(), &half()), int(16));
    assert_eq!(preemptive::choose_delta(&inst, &int(32), &half(), 1).unwrap(), Some(half()));
    // One more unit tips delta = 1/2 and 1/4; at 1/8 the setup 6 is above the band [1, 4).
    let heavier = jobs(1, &[(11, 6)]);
    assert_eq!(preemptive::choose_delta(&heavier, &int(32), &half(), 1).unwrap(), Some(rat(1, 8)));
}

#[test]
fn delta_is_rejected_when_every_band_is_heavy() {
    // eps = 1/2 has eight bands [T/2^(i+2), T/2^i); put mass 17 > eps T into each.
    let t = int(32);
    let ps: Vec<(Rat, Rat)> = (1..=8).map(|i| (int(17) - int(32) / int(1 << (i + 1)), int(32) / int(1 << (i + 1)))).collect();
    let inst = JobInstance { machines: 1, jobs: ps.iter().map(|&(p, s)| model::SetupJob { p, s }).collect() };
    for i in 1..=8u32 {
        let delta = Rat::new(1, 1 << i);
        assert!(preemptive::band_mass(&inst, &t, &half(), &delta) > int(16));
    }
    assert_eq!(preemptive::choose_delta(&inst, &t, &half(), 1).unwrap(), None);
    let probe = preemptive::solve(&inst, &int(200), &half(), &PipelineOptions::default()).unwrap();
    assert!(matches!(probe, Probe::Accepted(_)));
}

#[test]
fn module_count_for_one_big_setup_job() {
    // Layer 8, p̄ = 8 and s̄ = 16: one piece size, a block of three layers, starts 0..=7.
    let inst = jobs(1, &[(8, 16)]);
    let (reduced, tr) = preemptive::simplify(&inst, &int(32), &half(), &half()).unwrap();
    let lm = preemptive::build_mcip(&reduced, &tr, mcip::DEFAULT_CONFIG_CAP).unwrap();
    assert_eq!(lm.spec.modules.len(), 8);
    assert!(lm.spec.modules.iter().all(|m| m.tag.span == 3 && m.tag.q == 4 && m.tag.s == 8 && m.tag.b == 0));
    let starts: Vec<usize> = lm.spec.modules.iter().map(|m| m.tag.start).collect();
    assert_eq!(starts, (0..8).collect::<Vec<_>>());
}

#[test]
fn medium_blocks_fill_whole_layers() {
    let inst = jobs(2, &[(20, 5), (16, 30)]);
    let (reduced, tr) = preemptive::simplify(&inst, &int(32), &half(), &half()).unwrap();
    let lm = preemptive::build_mcip(&reduced, &tr, mcip::DEFAULT_CONFIG_CAP).unwrap();
    assert!(lm.spec.modules.iter().any(|m| m.tag.b > 0));
    for m in &lm.spec.modules {
        assert_eq!((m.tag.s + m.tag.q + m.tag.b) % lm.width, 0);
        assert!(m.tag.b < lm.width);
        assert!(m.tag.start + m.tag.span <= tr.layers);
    }
}

#[test]
fn configurations_never_share_a_layer() {
    let inst = jobs(2, &[(20, 5), (16, 30)]);
    let (reduced, tr) = preemptive::simplify(&inst, &int(32), &half(), &half()).unwrap();
    let lm = preemptive::build_mcip(&reduced, &tr, mcip::DEFAULT_CONFIG_CAP).unwrap();
    for c in &lm.spec.configs {
        let mut seen = vec![false; tr.layers];
        for (g, &k) in c.iter().enumerate() {
            assert!(k <= 1);
            if k == 1 {
                let (start, span) = lm.spec.groups[g].layers.unwrap();
                for l in start..start + span {
                    assert!(!seen[l], "layer {l} used twice");
                    seen[l] = true;
                }
            }
        }
    }
}

#[test]
fn exclusivity_separates_the_pieces_of_one_job() {
    // One job needing two blocks on two machines: its blocks may not share a layer.
    let inst = jobs(2, &[(64, 16)]);
    let t = int(32);
    let (reduced, tr) = preemptive::simplify(&inst, &t, &half(), &half()).unwrap();
    let (layered, _) = preemptive::solve_layered(&reduced, &tr, 1_000, &PipelineOptions::default()).unwrap();
    let layered = layered.unwrap();
    assert!(preemptive::is_layered(&reduced, &layered.parts, &tr.layer));
    assert!(model::validate(&Instance::Preemptive(reduced.clone()), &Schedule::Preemptive(layered.parts.clone())).is_ok());
}

fn optimum_of_both_forms(reduced: &JobInstance, tr: &preemptive::PreemptiveTranscript) -> Option<(Option<i64>, Option<i64>)> {
    let lm = preemptive::build_mcip(reduced, tr, 400).ok()?;
    let (conf, _, _) = mcip::solve(&lm.spec, None, &Default::default()).unwrap();
    let blocks = preemptive::capacity_blocks(reduced, tr);
    let program = preemptive::capacity_program(reduced, tr, &blocks);
    let (cap, _) = nfold::solve(&program, &Default::default()).unwrap();
    Some((conf.map(|d| d.objective), cap.map(|s| s.objective)))
}

fn generated(seed: u64, max_jobs: u64) -> JobInstance {
    let n = 1 + (seed % max_jobs) as usize;
    let m = 1 + (seed / max_jobs) % 3;
    let params = GenParams { model: Model::Preemptive, jobs: n, machines: m, classes: None, seed, grid: 10, denominator: 1 };
    match gen::instance(&params).unwrap() {
        Instance::Preemptive(j) => j,
        _ => unreachable!(),
    }
}

#[test]
fn configuration_and_capacity_forms_agree() {
    let mut compared = 0;
    for seed in 0..40 {
        let inst = generated(seed, 3);
        let lb = oracle::bounds_preemptive(&inst).value;
        for t in [lb, lb * rat(3, 2)] {
            let m = inst.machines.min(inst.jobs.len() as u64);
            let Some(delta) = preemptive::choose_delta(&inst, &t, &half(), m).unwrap() else { continue };
            let (reduced, tr) = preemptive::simplify(&inst, &t, &half(), &delta).unwrap();
            if reduced.jobs.is_empty() {
                continue;
            }
            if let Some((conf, cap)) = optimum_of_both_forms(&reduced, &tr) {
                assert_eq!(conf, cap, "seed {seed}, T = {t}");
                compared += 1;
            }
        }
    }
    assert!(compared >= 15, "only {compared} cases compared");
}

#[test]
fn no_removed_jobs_keeps_the_block_starts() {
    let inst = jobs(1, &[(9, 17)]);
    let (reduced, tr) = preemptive::simplify(&inst, &int(32), &half(), &half()).unwrap();
    let (layered, _) = preemptive::solve_layered(&reduced, &tr, 1_000, &PipelineOptions::default()).unwrap();
    let layered = layered.unwrap();
    let out = preemptive::desimplify(&inst, &tr, &layered);
    assert_eq!(out.len(), 1);
    let rounded_end = layered.parts[0].start + reduced.jobs[0].s + layered.parts[0].length;
    // One window of mu T opens at every layer boundary up to the block's start.
    let windows = (layered.parts[0].start / tr.layer).to_integer() + 1;
    let shift = tr.mu * tr.t * Rat::from_integer(windows);
    assert_eq!(out[0].start, layered.parts[0].start + shift);
    assert!(out[0].end(&int(17)) <= rounded_end + shift);
}

#[test]
fn small_job_filling_one_slot_stays_whole() {
    // Layer 8, mu T = 4: (p, s) = (6, 2) fills exactly one free slot.
    let inst = jobs(1, &[(6, 2)]);
    let (_, tr) = preemptive::simplify(&inst, &int(32), &half(), &half()).unwrap();
    assert_eq!(tr.free_demand, int(8));
    let layered = Layered { parts: vec![], used: vec![vec![false; tr.layers]] };
    let out = preemptive::desimplify(&inst, &tr, &layered);
    assert_eq!(out.len(), 1);
    assert_eq!((out[0].start, out[0].length), (int(4), int(6)));
    let schedule = Schedule::Preemptive(out);
    let full = Instance::Preemptive(inst);
    assert!(model::validate(&full, &schedule).is_ok());
    assert!(model::makespan(&full, &schedule).unwrap() <= tr.t_windows);
}

#[test]
fn medium_job_across_two_machines_gets_a_setup_on_each() {
    let inst = jobs(2, &[(12, 6), (12, 6)]);
    let (_, tr) = preemptive::simplify(&inst, &int(32), &half(), &half()).unwrap();
    assert_eq!(tr.removed_medium, vec![0, 1]);
    let layered = Layered { parts: vec![], used: vec![vec![false; tr.layers]; 2] };
    let out = preemptive::desimplify(&inst, &tr, &layered);
    let second: Vec<_> = out.iter().filter(|p| p.job == 1).collect();
    assert_eq!(second.len(), 2);
    assert_ne!(second[0].machine, second[1].machine);
    let full = Instance::Preemptive(inst);
    let schedule = Schedule::Preemptive(out);
    assert!(model::validate(&full, &schedule).is_ok());
    assert!(model::makespan(&full, &schedule).unwrap() <= tr.t_breve);
}

#[test]
fn one_job_per_machine_is_accepted() {
    let inst = jobs(3, &[(5, 2), (4, 3), (6, 1)]);
    let probe = preemptive::solve(&inst, &int(10), &half(), &PipelineOptions::default()).unwrap();
    let Probe::Accepted(acc) = probe else { panic!("rejected") };
    assert!(acc.makespan <= int(10) * rat(11, 2));
}

#[test]
fn guess_below_a_job_is_rejected() {
    let inst = jobs(3, &[(5, 2), (4, 3)]);
    let probe = preemptive::solve(&inst, &int(6), &half(), &PipelineOptions::default()).unwrap();
    assert!(matches!(probe, Probe::Rejected { reason: Reject::TooLong, .. }));
}

#[test]
fn random_guesses_give_valid_layered_schedules() {
    let eps = half();
    let bound_factor = Rat::from_integer(1) + Rat::from_integer(9) * eps;
    for seed in 0..18 {
        let inst = generated(seed, 6);
        let lb = oracle::bounds_preemptive(&inst).value;
        for t in [lb, lb * int(2)] {
            let (probe, trace) = preemptive::solve_traced(&inst, &t, &eps, &PipelineOptions::default()).unwrap();
            let Probe::Accepted(acc) = probe else { continue };
            let (reduced, tr, layered) = trace.unwrap();
            assert!(preemptive::is_layered(&reduced, &layered.parts, &tr.layer), "seed {seed}");
            let full = Instance::Preemptive(inst.clone());
            assert!(model::validate(&full, &acc.schedule).is_ok(), "seed {seed}");
            assert!(acc.makespan <= bound_factor * t, "seed {seed}");
            assert!(acc.makespan >= lb, "seed {seed}: below the lower bound");
        }
    }
}
