//! Seeded generators for instances and random n-fold programs.
//!
//! All randomness comes from SplitMix64 (state += 0x9E3779B97F4A7C15, then the
//! xor-shift-multiply finalizer with constants 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB), so a
//! seed reproduces the same output everywhere.

use crate::model::{ClassInstance, ClassJob, Instance, JobInstance, Model, SetupJob};
use crate::nfold::NFoldProgram;
use crate::rat::{int, Rat};
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenParams {
    pub model: Model,
    pub jobs: usize,
    pub machines: u64,
    /// Number of setup classes (setup-class model only).
    pub classes: Option<usize>,
    pub seed: u64,
    /// Times are drawn from `1..=grid` and divided by `denominator`.
    pub grid: u32,
    pub denominator: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("machine count must be positive")]
    NoMachines,
    #[error("class count {classes} exceeds job count {jobs}")]
    TooManyClasses { classes: usize, jobs: usize },
    #[error("setup-class instances need a positive class count")]
    NoClasses,
    #[error("time grid and denominator must be positive")]
    BadGrid,
}

/// Random instance with times uniform on the grid `{1, …, grid}/denominator`.
pub fn instance(params: &GenParams) -> Result<Instance, GenError> {
    if params.machines == 0 {
        return Err(GenError::NoMachines);
    }
    if params.grid == 0 || params.denominator == 0 {
        return Err(GenError::BadGrid);
    }
    let mut r = rng(params.seed);
    let den = params.denominator as i128;
    let draw = |r: &mut SplitMix64| Rat::new(r.gen_range(1..=params.grid) as i128, den);
    match params.model {
        Model::SetupClass => {
            let k = params.classes.unwrap_or(0);
            if k == 0 && params.jobs > 0 {
                return Err(GenError::NoClasses);
            }
            if k > params.jobs {
                return Err(GenError::TooManyClasses { classes: k, jobs: params.jobs });
            }
            let setups: Vec<Rat> = (0..k).map(|_| draw(&mut r)).collect();
            // Every class receives at least one job.
            let jobs = (0..params.jobs)
                .map(|j| {
                    let class = if j < k { j } else { r.gen_range(0..k) };
                    ClassJob { p: draw(&mut r), class }
                })
                .collect();
            Ok(Instance::SetupClass(ClassInstance { machines: params.machines, jobs, setups }))
        }
        model => {
            let jobs = (0..params.jobs).map(|_| SetupJob { p: draw(&mut r), s: draw(&mut r) }).collect();
            let inst = JobInstance { machines: params.machines, jobs };
            Ok(if model == Model::Splittable { Instance::Splittable(inst) } else { Instance::Preemptive(inst) })
        }
    }
}

/// Random program with `r, s ≤ max_rows`, `t ≤ max_t`, `n ≤ max_n`, entries in
/// `[-entry, entry]`, box `[0, box_max]` and objective entries in `[-entry, entry]`. The
/// right-hand side is the image of a random box point with probability 3/4, otherwise random.
pub fn program(r: &mut SplitMix64, max_rows: usize, max_t: usize, max_n: usize, entry: i64, box_max: i64) -> NFoldProgram {
    let rr = r.gen_range(0..=max_rows);
    let ss = r.gen_range(0..=max_rows);
    let t = r.gen_range(1..=max_t);
    let n = r.gen_range(1..=max_n);
    let mat = |rows: usize, r: &mut SplitMix64| -> Vec<Vec<i64>> {
        (0..rows).map(|_| (0..t).map(|_| r.gen_range(-entry..=entry)).collect()).collect()
    };
    let a1 = mat(rr, r);
    let a2 = mat(ss, r);
    let dim = n * t;
    let w = (0..dim).map(|_| r.gen_range(-entry..=entry)).collect();
    let lower = vec![0; dim];
    let upper: Vec<i64> = (0..dim).map(|_| r.gen_range(0..=box_max)).collect();
    let mut p = NFoldProgram { n, t, a1, a2, w, lower, upper, b: vec![0; rr + n * ss] };
    if r.gen_range(0..4) < 3 {
        let x: Vec<i64> = p.upper.iter().map(|&u| r.gen_range(0..=u)).collect();
        p.b = p.activity(&x);
    } else {
        p.b = (0..p.rows()).map(|_| r.gen_range(-4..=8)).collect();
    }
    p
}

/// Integer time helper for tests and fixtures.
pub fn times(pairs: &[(i128, i128)]) -> Vec<SetupJob> {
    pairs.iter().map(|&(p, s)| SetupJob { p: int(p), s: int(s) }).collect()
}
