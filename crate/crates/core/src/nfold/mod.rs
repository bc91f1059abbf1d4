//! n-fold integer programs: `min w·x` subject to
//! `[A1 A1 … A1; A2 0 … 0; 0 A2 … 0; …] x = b` and `lower ≤ x ≤ upper`.
//!
//! Three engines are provided: Graver-style augmentation (`augment`), exhaustive box search
//! (`exact`, a test oracle) and LP-based branch and bound (`bnb`). [`solve`] runs the
//! augmentation engine and falls back to branch and bound when the step search exceeds its
//! state budget.

pub mod augment;
pub mod bnb;
pub mod exact;
pub mod lp;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NFoldProgram {
    /// Number of bricks.
    pub n: usize,
    /// Brick width.
    pub t: usize,
    /// Globally uniform rows, `r × t`.
    pub a1: Vec<Vec<i64>>,
    /// Locally uniform rows, `s × t`.
    pub a2: Vec<Vec<i64>>,
    pub w: Vec<i64>,
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
    /// First `r` entries for the global rows, then `s` entries per brick.
    pub b: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NFoldSolution {
    pub x: Vec<i64>,
    pub objective: i64,
}

impl NFoldSolution {
    pub fn brick(&self, t: usize, q: usize) -> &[i64] {
        &self.x[q * t..(q + 1) * t]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NFoldError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("search cap exceeded: {0}")]
    CapExceeded(String),
    #[error("step search state space overflow")]
    StepOverflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Backend {
    /// Augmentation, falling back to branch and bound on step-search overflow.
    #[default]
    Augment,
    /// LP-based branch and bound only.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    pub backend: Backend,
    /// Stop as soon as a solution with objective at most this value is found.
    pub cutoff: Option<i64>,
    /// Maximum number of candidate vectors per brick in a step search.
    pub candidate_budget: usize,
    /// Maximum number of partial-sum states per brick in a step search.
    pub state_budget: usize,
    /// Maximum number of branch-and-bound nodes.
    pub node_cap: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            backend: Backend::Augment,
            cutoff: None,
            candidate_budget: 20_000,
            state_budget: 200_000,
            node_cap: 200_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SolveStats {
    pub augmentation_steps: usize,
    pub fallback: bool,
    pub lp_solves: usize,
    pub bnb_nodes: usize,
}

impl NFoldProgram {
    pub fn r(&self) -> usize {
        self.a1.len()
    }

    pub fn s(&self) -> usize {
        self.a2.len()
    }

    pub fn dim(&self) -> usize {
        self.n * self.t
    }

    pub fn rows(&self) -> usize {
        self.r() + self.n * self.s()
    }

    /// Largest absolute matrix entry.
    pub fn delta(&self) -> i64 {
        self.a1.iter().chain(&self.a2).flatten().map(|v| v.abs()).max().unwrap_or(0)
    }

    /// Largest box width.
    pub fn phi(&self) -> i64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).max().unwrap_or(0)
    }

    pub fn check(&self) -> Result<(), NFoldError> {
        let bad = |m: &str| Err(NFoldError::Malformed(m.to_string()));
        let dim = self.dim();
        if self.a1.iter().chain(&self.a2).any(|row| row.len() != self.t) {
            return bad("matrix row width differs from t");
        }
        if self.w.len() != dim || self.lower.len() != dim || self.upper.len() != dim {
            return bad("vector length differs from n·t");
        }
        if self.b.len() != self.rows() {
            return bad("right-hand side length differs from r + n·s");
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| l > u) {
            return bad("lower bound above upper bound");
        }
        Ok(())
    }

    /// Row activities `A·x`.
    pub fn activity(&self, x: &[i64]) -> Vec<i64> {
        let (r, s, t) = (self.r(), self.s(), self.t);
        let mut out = vec![0i64; self.rows()];
        for q in 0..self.n {
            let brick = &x[q * t..(q + 1) * t];
            for i in 0..r {
                out[i] += dot(&self.a1[i], brick);
            }
            for i in 0..s {
                out[r + q * s + i] = dot(&self.a2[i], brick);
            }
        }
        out
    }

    pub fn objective(&self, x: &[i64]) -> i64 {
        dot(&self.w, x)
    }

    pub fn is_feasible(&self, x: &[i64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(&self.lower).all(|(v, l)| v >= l)
            && x.iter().zip(&self.upper).all(|(v, u)| v <= u)
            && self.activity(x) == self.b
    }

    /// Sparse column `(row, coefficient)` of variable `j` in the full constraint matrix.
    pub fn column(&self, j: usize) -> Vec<(usize, i64)> {
        let (r, s, t) = (self.r(), self.s(), self.t);
        let (q, k) = (j / t, j % t);
        let mut col = Vec::new();
        for i in 0..r {
            if self.a1[i][k] != 0 {
                col.push((i, self.a1[i][k]));
            }
        }
        for i in 0..s {
            if self.a2[i][k] != 0 {
                col.push((r + q * s + i, self.a2[i][k]));
            }
        }
        col
    }

    /// JSON dump for reproducing solver issues.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("program serializes")
    }

    pub(crate) fn solution(&self, x: Vec<i64>) -> NFoldSolution {
        debug_assert!(self.is_feasible(&x));
        let objective = self.objective(&x);
        NFoldSolution { x, objective }
    }
}

pub(crate) fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the program to optimality (or to the cutoff). `Ok(None)` means infeasible.
pub fn solve(program: &NFoldProgram, options: &SolveOptions) -> Result<(Option<NFoldSolution>, SolveStats), NFoldError> {
    program.check()?;
    let mut stats = SolveStats::default();
    let result = match options.backend {
        Backend::Exact => bnb::solve(program, options, None, &mut stats)?,
        Backend::Augment => match augment::solve(program, options, &mut stats) {
            Ok(sol) => sol,
            Err(augment::Halted { best }) => {
                stats.fallback = true;
                match (&best, options.cutoff) {
                    (Some(sol), Some(c)) if sol.objective <= c => best,
                    _ => bnb::solve(program, options, best, &mut stats)?,
                }
            }
        },
    };
    if let Some(sol) = &result {
        assert!(program.is_feasible(&sol.x), "solver returned an infeasible point");
    }
    Ok((result, stats))
}

/// Exhaustive box search; see [`exact::solve_exact`].
pub use exact::solve_exact;

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example() -> NFoldProgram {
        NFoldProgram {
            n: 2,
            t: 2,
            a1: vec![vec![1, 1]],
            a2: vec![vec![1, 2]],
            w: vec![0, 1, 0, 1],
            lower: vec![0; 4],
            upper: vec![3; 4],
            b: vec![3, 2, 2],
        }
    }

    #[test]
    fn example_program_optimum_is_one() {
        let p = example();
        for backend in [Backend::Augment, Backend::Exact] {
            let opts = SolveOptions { backend, ..Default::default() };
            let (sol, _) = solve(&p, &opts).unwrap();
            assert_eq!(sol.unwrap().objective, 1);
        }
        assert_eq!(solve_exact(&p, 10_000_000).unwrap().unwrap().objective, 1);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let p = NFoldProgram {
            n: 2,
            t: 2,
            a1: vec![vec![1, -1]],
            a2: vec![vec![2, 1]],
            w: vec![1, 2, 3, 4],
            lower: vec![0; 4],
            upper: vec![2; 4],
            b: vec![0, 0, 0],
        };
        let (sol, _) = solve(&p, &SolveOptions::default()).unwrap();
        let sol = sol.unwrap();
        assert_eq!(sol.objective, 0);
        assert_eq!(sol.x, vec![0; 4]);
    }

    #[test]
    fn forced_value_beyond_bound_is_infeasible() {
        let p = NFoldProgram {
            n: 1,
            t: 1,
            a1: vec![],
            a2: vec![vec![1]],
            w: vec![0],
            lower: vec![0],
            upper: vec![3],
            b: vec![5],
        };
        assert!(solve(&p, &SolveOptions::default()).unwrap().0.is_none());
        assert!(solve(&p, &SolveOptions { backend: Backend::Exact, ..Default::default() }).unwrap().0.is_none());
        assert!(solve_exact(&p, 100).unwrap().is_none());
    }

    #[test]
    fn delta_and_phi_recorded() {
        let p = example();
        assert_eq!(p.delta(), 2);
        assert_eq!(p.phi(), 3);
    }
}
