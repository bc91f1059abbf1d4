//! Exact branch and bound over the LP relaxation.

use super::lp::{solve_lp, Field, LinearProgram, LpOutcome, Small};
use super::{NFoldError, NFoldProgram, NFoldSolution, SolveOptions, SolveStats};
use num_rational::BigRational;

enum Relaxation {
    Infeasible,
    /// Ceiling of the LP optimum and either an integral point or a branching choice
    /// `(variable, floor, up_first)`.
    Bound(i64, Result<Vec<i64>, (usize, i64, bool)>),
}

/// Depth-first branch and bound. `incumbent` seeds the upper bound. With a cutoff, returns the
/// first solution whose objective is at most the cutoff.
pub fn solve(
    p: &NFoldProgram,
    opts: &SolveOptions,
    incumbent: Option<NFoldSolution>,
    stats: &mut SolveStats,
) -> Result<Option<NFoldSolution>, NFoldError> {
    let columns: Vec<Vec<(usize, i64)>> = (0..p.dim()).map(|j| p.column(j)).collect();
    let mut best = incumbent;
    let mut stack: Vec<(Vec<i64>, Vec<i64>)> = vec![(p.lower.clone(), p.upper.clone())];
    while let Some((lower, upper)) = stack.pop() {
        if let (Some(b), Some(c)) = (&best, opts.cutoff) {
            if b.objective <= c {
                break;
            }
        }
        stats.bnb_nodes += 1;
        if stats.bnb_nodes > opts.node_cap {
            return Err(NFoldError::CapExceeded(format!("more than {} branch-and-bound nodes", opts.node_cap)));
        }
        stats.lp_solves += 1;
        let relax = match relax::<Small>(p, &columns, &lower, &upper) {
            Some(r) => r,
            None => relax::<BigRational>(p, &columns, &lower, &upper).expect("big rationals do not overflow"),
        };
        let Relaxation::Bound(bound, outcome) = relax else { continue };
        if best.as_ref().is_some_and(|b| bound >= b.objective) {
            continue;
        }
        if opts.cutoff.is_some_and(|c| bound > c) {
            continue;
        }
        match outcome {
            Ok(x) => {
                assert!(p.is_feasible(&x), "integral LP vertex must be feasible");
                best = Some(p.solution(x));
            }
            Err((j, fl, up_first)) => {
                let mut down_upper = upper.clone();
                down_upper[j] = fl;
                let mut up_lower = lower.clone();
                up_lower[j] = fl + 1;
                let down = (lower, down_upper);
                let up = (up_lower, upper);
                // The child explored first is pushed last.
                if up_first {
                    stack.push(down);
                    stack.push(up);
                } else {
                    stack.push(up);
                    stack.push(down);
                }
            }
        }
    }
    Ok(best)
}

fn relax<F: Field>(p: &NFoldProgram, columns: &[Vec<(usize, i64)>], lower: &[i64], upper: &[i64]) -> Option<Relaxation> {
    // Fixed variables are folded into the right-hand side.
    let mut b = p.b.clone();
    let mut free = Vec::new();
    let mut fixed_cost = 0i64;
    for j in 0..p.dim() {
        if lower[j] == upper[j] {
            for &(i, a) in &columns[j] {
                b[i] -= a * lower[j];
            }
            fixed_cost += p.w[j] * lower[j];
        } else {
            free.push(j);
        }
    }
    let cols: Vec<Vec<(usize, i64)>> = free.iter().map(|&j| columns[j].clone()).collect();
    let cost: Vec<i64> = free.iter().map(|&j| p.w[j]).collect();
    let lo: Vec<i64> = free.iter().map(|&j| lower[j]).collect();
    let hi: Vec<i64> = free.iter().map(|&j| upper[j]).collect();
    if free.is_empty() {
        if b.iter().any(|&v| v != 0) {
            return Some(Relaxation::Infeasible);
        }
        return Some(Relaxation::Bound(fixed_cost, Ok(lower.to_vec())));
    }
    let lp = LinearProgram { rows: p.rows(), columns: &cols, cost: &cost, b: &b };
    let (outcome, _) = solve_lp::<F>(&lp, &lo, &hi).ok()?;
    let LpOutcome::Optimal { x, objective } = outcome else {
        return Some(Relaxation::Infeasible);
    };
    let bound = objective.ceil_i64()? + fixed_cost;
    // Most fractional variable; ties go to the lowest index.
    let half = F::half();
    let mut choice: Option<(usize, F, i64, bool)> = None;
    for (k, v) in x.iter().enumerate() {
        if v.is_integer() {
            continue;
        }
        let fr = v.fract()?;
        let dist = if fr > half { F::from_i64(1).sub(&fr)? } else { fr.clone() };
        if choice.as_ref().is_none_or(|(_, d, _, _)| dist > *d) {
            choice = Some((free[k], dist, v.floor_i64()?, fr >= half));
        }
    }
    match choice {
        Some((j, _, fl, up)) => Some(Relaxation::Bound(bound, Err((j, fl, up)))),
        None => {
            let mut point = lower.to_vec();
            for (k, v) in x.iter().enumerate() {
                point[free[k]] = v.floor_i64()?;
            }
            Some(Relaxation::Bound(bound, Ok(point)))
        }
    }
}
