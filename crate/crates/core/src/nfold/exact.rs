//! Exhaustive search over the box, used as a test oracle.

use super::{NFoldError, NFoldProgram, NFoldSolution};

/// Exact optimum by depth-first enumeration of the box with row-range and objective pruning.
/// Errors when the box holds more than `cap` points. Ties go to the lexicographically smallest
/// point.
pub fn solve_exact(p: &NFoldProgram, cap: u128) -> Result<Option<NFoldSolution>, NFoldError> {
    p.check()?;
    let mut size: u128 = 1;
    for (l, u) in p.lower.iter().zip(&p.upper) {
        size = size.saturating_mul((u - l + 1) as u128);
        if size > cap {
            return Err(NFoldError::CapExceeded(format!("box has more than {cap} points")));
        }
    }
    let dim = p.dim();
    let rows = p.rows();
    let cols: Vec<Vec<(usize, i64)>> = (0..dim).map(|j| p.column(j)).collect();
    let mut rem_min = vec![vec![0i64; rows]; dim + 1];
    let mut rem_max = vec![vec![0i64; rows]; dim + 1];
    let mut cost_min = vec![0i64; dim + 1];
    for j in (0..dim).rev() {
        rem_min[j] = rem_min[j + 1].clone();
        rem_max[j] = rem_max[j + 1].clone();
        for &(i, a) in &cols[j] {
            let (x, y) = (a * p.lower[j], a * p.upper[j]);
            rem_min[j][i] += x.min(y);
            rem_max[j][i] += x.max(y);
        }
        cost_min[j] = cost_min[j + 1] + (p.w[j] * p.lower[j]).min(p.w[j] * p.upper[j]);
    }
    struct Search<'a> {
        p: &'a NFoldProgram,
        cols: Vec<Vec<(usize, i64)>>,
        rem_min: Vec<Vec<i64>>,
        rem_max: Vec<Vec<i64>>,
        cost_min: Vec<i64>,
        x: Vec<i64>,
        act: Vec<i64>,
        best: Option<(i64, Vec<i64>)>,
    }
    impl Search<'_> {
        fn rec(&mut self, j: usize, cost: i64) {
            if let Some((b, _)) = &self.best {
                if cost + self.cost_min[j] >= *b {
                    return;
                }
            }
            let b = &self.p.b;
            if (0..b.len()).any(|i| self.act[i] + self.rem_min[j][i] > b[i] || self.act[i] + self.rem_max[j][i] < b[i]) {
                return;
            }
            if j == self.x.len() {
                self.best = Some((cost, self.x.clone()));
                return;
            }
            for v in self.p.lower[j]..=self.p.upper[j] {
                self.x[j] = v;
                for k in 0..self.cols[j].len() {
                    let (i, a) = self.cols[j][k];
                    self.act[i] += a * v;
                }
                self.rec(j + 1, cost + self.p.w[j] * v);
                for k in 0..self.cols[j].len() {
                    let (i, a) = self.cols[j][k];
                    self.act[i] -= a * v;
                }
            }
        }
    }
    let mut search = Search { p, cols, rem_min, rem_max, cost_min, x: vec![0; dim], act: vec![0; rows], best: None };
    search.rec(0, 0);
    Ok(search.best.map(|(objective, x)| NFoldSolution { x, objective }))
}
