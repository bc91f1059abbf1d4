//! Augmentation engine: phase-1 feasibility and repeated best steps of bounded ∞-norm.

use super::{dot, NFoldError, NFoldProgram, NFoldSolution, SolveOptions, SolveStats};
use std::collections::{HashMap, HashSet};

/// Step search ran out of budget; `best` is the last feasible point reached, if any.
#[derive(Debug, Clone)]
pub struct Halted {
    pub best: Option<NFoldSolution>,
}

/// Finds a feasible point or proves infeasibility, then augments to an optimum.
pub fn solve(p: &NFoldProgram, opts: &SolveOptions, stats: &mut SolveStats) -> Result<Option<NFoldSolution>, Halted> {
    let x = match phase1(p, opts) {
        Ok(Some(x)) => x,
        Ok(None) => return Ok(None),
        Err(_) => return Err(Halted { best: None }),
    };
    match augment_from(p, x, opts, stats) {
        Ok(x) => Ok(Some(p.solution(x))),
        Err(x) => Err(Halted { best: Some(p.solution(x)) }),
    }
}

/// Step bounds tried in order: powers of two below the box width, then the box width itself.
pub fn step_bounds(phi: i64) -> Vec<i64> {
    let mut out = Vec::new();
    let mut g = 1;
    while g < phi {
        out.push(g);
        g *= 2;
    }
    if phi >= 1 {
        out.push(phi);
    }
    out
}

/// Improves `x` until no step of norm up to the box width improves it, or the cutoff is met.
/// On budget overflow returns the current point as `Err`.
pub fn augment_from(p: &NFoldProgram, mut x: Vec<i64>, opts: &SolveOptions, stats: &mut SolveStats) -> Result<Vec<i64>, Vec<i64>> {
    let bounds = step_bounds(p.phi());
    'outer: loop {
        if let Some(c) = opts.cutoff {
            if p.objective(&x) <= c {
                return Ok(x);
            }
        }
        for &gamma in &bounds {
            match best_step(p, &x, gamma, opts) {
                Ok(Some(g)) => {
                    let before = p.objective(&x);
                    let lambda = step_length(p, &x, &g);
                    for (xi, gi) in x.iter_mut().zip(&g) {
                        *xi += lambda * gi;
                    }
                    assert!(p.objective(&x) < before, "augmentation step must improve");
                    debug_assert!(p.is_feasible(&x));
                    stats.augmentation_steps += 1;
                    continue 'outer;
                }
                Ok(None) => {}
                Err(_) => return Err(x),
            }
        }
        return Ok(x);
    }
}

/// Largest multiple of the kernel step `g` that stays in the box (at least 1).
fn step_length(p: &NFoldProgram, x: &[i64], g: &[i64]) -> i64 {
    let mut lambda = i64::MAX;
    for (j, &gj) in g.iter().enumerate() {
        if gj > 0 {
            lambda = lambda.min((p.upper[j] - x[j]) / gj);
        } else if gj < 0 {
            lambda = lambda.min((x[j] - p.lower[j]) / -gj);
        }
    }
    lambda.max(1)
}

/// Builds the slack-extended program and runs augmentation from the all-slack point. Returns a
/// feasible point of the original program, or `None` when the minimal total slack is positive.
pub fn phase1(p: &NFoldProgram, opts: &SolveOptions) -> Result<Option<Vec<i64>>, NFoldError> {
    let (r, s, t, n) = (p.r(), p.s(), p.t, p.n);
    let t2 = t + 2 * r + 2 * s;
    let mut a1 = vec![vec![0i64; t2]; r];
    let mut a2 = vec![vec![0i64; t2]; s];
    for i in 0..r {
        a1[i][..t].copy_from_slice(&p.a1[i]);
        a1[i][t + i] = 1;
        a1[i][t + r + i] = -1;
    }
    for i in 0..s {
        a2[i][..t].copy_from_slice(&p.a2[i]);
        a2[i][t + 2 * r + i] = 1;
        a2[i][t + 2 * r + s + i] = -1;
    }
    let mut w = vec![0i64; n * t2];
    let mut lower = vec![0i64; n * t2];
    let mut upper = vec![0i64; n * t2];
    let mut x = vec![0i64; n * t2];
    let start: Vec<i64> = p.lower.iter().zip(&p.upper).map(|(&l, &u)| 0i64.clamp(l, u)).collect();
    let act = p.activity(&start);
    for q in 0..n {
        for k in 0..t {
            let (j, j2) = (q * t + k, q * t2 + k);
            lower[j2] = p.lower[j];
            upper[j2] = p.upper[j];
            x[j2] = start[j];
        }
        for k in t..t2 {
            w[q * t2 + k] = 1;
        }
        for i in 0..s {
            let res = p.b[r + q * s + i] - act[r + q * s + i];
            set_slack(&mut x, &mut upper, q * t2 + t + 2 * r + i, q * t2 + t + 2 * r + s + i, res);
        }
    }
    for i in 0..r {
        let res = p.b[i] - act[i];
        set_slack(&mut x, &mut upper, t + i, t + r + i, res);
    }
    let ext = NFoldProgram { n, t: t2, a1, a2, w, lower, upper, b: p.b.clone() };
    debug_assert!(ext.is_feasible(&x));
    let opts = SolveOptions { cutoff: Some(0), ..*opts };
    let mut stats = SolveStats::default();
    let x = augment_from(&ext, x, &opts, &mut stats).map_err(|_| NFoldError::StepOverflow)?;
    if ext.objective(&x) > 0 {
        return Ok(None);
    }
    let mut out = Vec::with_capacity(n * t);
    for q in 0..n {
        out.extend_from_slice(&x[q * t2..q * t2 + t]);
    }
    Ok(Some(out))
}

fn set_slack(x: &mut [i64], upper: &mut [i64], pos: usize, neg: usize, residual: i64) {
    if residual >= 0 {
        x[pos] = residual;
        upper[pos] = residual;
    } else {
        x[neg] = -residual;
        upper[neg] = -residual;
    }
}

/// Brick candidates after reduction: per A1-image the cheapest vector (lexicographically
/// smallest among equally cheap ones).
struct Candidates {
    list: Vec<(Vec<i64>, i64, Vec<i64>)>,
}

/// Returns the cheapest `g` with `A·g = 0`, `lower ≤ x+g ≤ upper`, `‖g‖∞ ≤ gamma` if it has
/// negative cost, breaking ties lexicographically.
pub fn best_step(p: &NFoldProgram, x: &[i64], gamma: i64, opts: &SolveOptions) -> Result<Option<Vec<i64>>, NFoldError> {
    let (r, t, n) = (p.r(), p.t, p.n);
    let mut cache: HashMap<(Vec<i64>, Vec<i64>, Vec<i64>), std::rc::Rc<Candidates>> = HashMap::new();
    let mut bricks = Vec::with_capacity(n);
    for q in 0..n {
        let range = q * t..(q + 1) * t;
        let lo: Vec<i64> = range.clone().map(|j| (p.lower[j] - x[j]).max(-gamma)).collect();
        let hi: Vec<i64> = range.clone().map(|j| (p.upper[j] - x[j]).min(gamma)).collect();
        let key = (lo, hi, p.w[range].to_vec());
        let c = match cache.get(&key) {
            Some(c) => c.clone(),
            None => {
                let c = std::rc::Rc::new(brick_candidates(p, &key.0, &key.1, &key.2, opts.candidate_budget)?);
                cache.insert(key, c.clone());
                c
            }
        };
        bricks.push(c);
    }
    // Remaining-range bounds per row for clamping partial sums.
    let mut suffix_min = vec![vec![0i64; r]; n + 1];
    let mut suffix_max = vec![vec![0i64; r]; n + 1];
    for q in (0..n).rev() {
        for i in 0..r {
            let lo = bricks[q].list.iter().map(|c| c.0[i]).min().unwrap_or(0);
            let hi = bricks[q].list.iter().map(|c| c.0[i]).max().unwrap_or(0);
            suffix_min[q][i] = suffix_min[q + 1][i] + lo;
            suffix_max[q][i] = suffix_max[q + 1][i] + hi;
        }
    }
    let can_close = |state: &[i64], q: usize| (0..r).all(|i| -state[i] >= suffix_min[q][i] && -state[i] <= suffix_max[q][i]);
    let mut layers: Vec<Vec<Vec<i64>>> = Vec::with_capacity(n + 1);
    layers.push(vec![vec![0i64; r]]);
    for q in 0..n {
        let mut next: HashSet<Vec<i64>> = HashSet::new();
        for state in &layers[q] {
            for (img, _, _) in &bricks[q].list {
                let s2: Vec<i64> = state.iter().zip(img).map(|(a, b)| a + b).collect();
                if can_close(&s2, q + 1) {
                    next.insert(s2);
                    if next.len() > opts.state_budget {
                        return Err(NFoldError::StepOverflow);
                    }
                }
            }
        }
        let mut next: Vec<Vec<i64>> = next.into_iter().collect();
        next.sort();
        layers.push(next);
    }
    // Backward values: cheapest completion from each state.
    let mut value: Vec<HashMap<Vec<i64>, i64>> = vec![HashMap::new(); n + 1];
    if layers[n].iter().any(|s| s.iter().all(|&v| v == 0)) {
        value[n].insert(vec![0i64; r], 0);
    }
    for q in (0..n).rev() {
        let mut vq = HashMap::new();
        for state in &layers[q] {
            let mut best: Option<i64> = None;
            for (img, cost, _) in &bricks[q].list {
                let s2: Vec<i64> = state.iter().zip(img).map(|(a, b)| a + b).collect();
                if let Some(v) = value[q + 1].get(&s2) {
                    let total = cost + v;
                    if best.is_none_or(|b| total < b) {
                        best = Some(total);
                    }
                }
            }
            if let Some(b) = best {
                vq.insert(state.clone(), b);
            }
        }
        value[q] = vq;
    }
    let origin = vec![0i64; r];
    let Some(&best) = value[0].get(&origin) else {
        return Ok(None);
    };
    if best >= 0 {
        return Ok(None);
    }
    let mut g = Vec::with_capacity(n * t);
    let mut state = origin;
    for q in 0..n {
        let target = value[q][&state];
        let mut choice: Option<(&Vec<i64>, Vec<i64>)> = None;
        for (img, cost, vec) in &bricks[q].list {
            let s2: Vec<i64> = state.iter().zip(img).map(|(a, b)| a + b).collect();
            if value[q + 1].get(&s2).is_some_and(|v| cost + v == target) && choice.as_ref().is_none_or(|(c, _)| vec < *c) {
                choice = Some((vec, s2));
            }
        }
        let (vec, s2) = choice.expect("optimal completion exists");
        g.extend_from_slice(vec);
        state = s2;
    }
    debug_assert_eq!(dot(&p.w, &g), best);
    Ok(Some(g))
}

const NODES_PER_CANDIDATE: usize = 50;

fn brick_candidates(p: &NFoldProgram, lo: &[i64], hi: &[i64], w: &[i64], budget: usize) -> Result<Candidates, NFoldError> {
    let (s, t) = (p.s(), p.t);
    // Remaining contribution range of coordinates k.. for every local row.
    let mut rem_min = vec![vec![0i64; s]; t + 1];
    let mut rem_max = vec![vec![0i64; s]; t + 1];
    for k in (0..t).rev() {
        for i in 0..s {
            let a = p.a2[i][k];
            let (u, v) = (a * lo[k], a * hi[k]);
            rem_min[k][i] = rem_min[k + 1][i] + u.min(v);
            rem_max[k][i] = rem_max[k + 1][i] + u.max(v);
        }
    }
    if lo.iter().zip(hi).any(|(l, h)| l > h) {
        return Ok(Candidates { list: Vec::new() });
    }
    let mut best: HashMap<Vec<i64>, (i64, Vec<i64>)> = HashMap::new();
    let mut g = vec![0i64; t];
    let mut partial = vec![0i64; s];
    let mut count = 0usize;
    // Search nodes are bounded too, so wide bricks whose rows prune little give up early.
    let mut visited = 0usize;
    let node_budget = budget.saturating_mul(NODES_PER_CANDIDATE);
    // Depth-first over coordinates with an explicit cursor; `g[..k]` is fixed.
    let mut k = 0usize;
    let mut descending = true;
    loop {
        if descending {
            visited += 1;
            if visited > node_budget {
                return Err(NFoldError::StepOverflow);
            }
            let pruned = (0..s).any(|i| partial[i] + rem_min[k][i] > 0 || partial[i] + rem_max[k][i] < 0);
            if !pruned && k == t {
                count += 1;
                if count > budget {
                    return Err(NFoldError::StepOverflow);
                }
                let img: Vec<i64> = p.a1.iter().map(|row| dot(row, &g)).collect();
                let cost = dot(w, &g);
                match best.get_mut(&img) {
                    Some(entry) => {
                        if cost < entry.0 || (cost == entry.0 && g < entry.1) {
                            *entry = (cost, g.clone());
                        }
                    }
                    None => {
                        best.insert(img, (cost, g.clone()));
                    }
                }
            }
            if pruned || k == t {
                descending = false;
                continue;
            }
            g[k] = lo[k];
            for i in 0..s {
                partial[i] += p.a2[i][k] * g[k];
            }
            k += 1;
        } else {
            if k == 0 {
                break;
            }
            k -= 1;
            for i in 0..s {
                partial[i] -= p.a2[i][k] * g[k];
            }
            if g[k] < hi[k] {
                g[k] += 1;
                for i in 0..s {
                    partial[i] += p.a2[i][k] * g[k];
                }
                k += 1;
                descending = true;
            } else {
                g[k] = 0;
            }
        }
    }
    let mut list: Vec<(Vec<i64>, i64, Vec<i64>)> = best.into_iter().map(|(img, (c, g))| (img, c, g)).collect();
    list.sort();
    Ok(Candidates { list })
}
