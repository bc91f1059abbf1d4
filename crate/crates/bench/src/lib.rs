//! Shared fixtures for the benchmarks.

use setupsched::gen::{self, GenParams};
use setupsched::model::{Instance, Model};
use setupsched::nfold::NFoldProgram;

/// Seeded instance with times on the grid `1..=10`.
pub fn instance(model: Model, jobs: usize, machines: u64, seed: u64) -> Instance {
    let classes = (model == Model::SetupClass).then_some(jobs.min(2));
    let params = GenParams { model, jobs, machines, classes, seed, grid: 10, denominator: 1 };
    gen::instance(&params).expect("fixture parameters are valid")
}

/// The random n-fold programs of the solver correctness suite.
pub fn programs(count: usize, seed: u64) -> Vec<NFoldProgram> {
    let mut r = gen::rng(seed);
    (0..count).map(|_| gen::program(&mut r, 2, 3, 3, 3, 4)).collect()
}
