//! Exact bounded-variable revised simplex over an ordered field with checked arithmetic.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, ToPrimitive, Zero};
use std::fmt::Debug;

/// Arithmetic needed by the simplex; `None` signals overflow.
pub trait Field: Clone + Ord + Debug {
    fn zero() -> Self;
    fn from_i64(v: i64) -> Self;
    fn add(&self, o: &Self) -> Option<Self>;
    fn sub(&self, o: &Self) -> Option<Self>;
    fn mul(&self, o: &Self) -> Option<Self>;
    fn div(&self, o: &Self) -> Option<Self>;
    fn is_zero(&self) -> bool;
    fn is_integer(&self) -> bool;
    fn floor_i64(&self) -> Option<i64>;
    fn ceil_i64(&self) -> Option<i64>;
    /// `x - floor(x)`.
    fn fract(&self) -> Option<Self>;
    fn half() -> Self;
}

pub type Small = Ratio<i128>;

impl Field for Small {
    fn zero() -> Self {
        Zero::zero()
    }
    fn from_i64(v: i64) -> Self {
        Ratio::from_integer(v as i128)
    }
    fn add(&self, o: &Self) -> Option<Self> {
        self.checked_add(o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        self.checked_sub(o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        self.checked_mul(o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        self.checked_div(o)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_integer(&self) -> bool {
        Ratio::is_integer(self)
    }
    fn floor_i64(&self) -> Option<i64> {
        self.floor().to_integer().to_i64()
    }
    fn ceil_i64(&self) -> Option<i64> {
        self.ceil().to_integer().to_i64()
    }
    fn fract(&self) -> Option<Self> {
        Some(self - self.floor())
    }
    fn half() -> Self {
        Ratio::new(1, 2)
    }
}

impl Field for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn from_i64(v: i64) -> Self {
        Ratio::from_integer(BigInt::from(v))
    }
    fn add(&self, o: &Self) -> Option<Self> {
        Some(self + o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        Some(self - o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        Some(self * o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        Some(self / o)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_integer(&self) -> bool {
        Ratio::is_integer(self)
    }
    fn floor_i64(&self) -> Option<i64> {
        self.floor().to_integer().to_i64()
    }
    fn ceil_i64(&self) -> Option<i64> {
        self.ceil().to_integer().to_i64()
    }
    fn fract(&self) -> Option<Self> {
        Some(self - self.floor())
    }
    fn half() -> Self {
        Ratio::new(BigInt::one(), BigInt::from(2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overflow;

/// `min c·x` subject to `A x = b`, `lower ≤ x ≤ upper` with sparse integer columns.
pub struct LinearProgram<'a> {
    pub rows: usize,
    pub columns: &'a [Vec<(usize, i64)>],
    pub cost: &'a [i64],
    pub b: &'a [i64],
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<F> {
    Infeasible,
    Optimal { x: Vec<F>, objective: F },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Status {
    Basic,
    Lower,
    Upper,
}

struct Tableau<'a, F: Field> {
    lp: &'a LinearProgram<'a>,
    n: usize,
    lower: Vec<F>,
    /// `None` means unbounded above (artificials during phase 1).
    upper: Vec<Option<F>>,
    art_sign: Vec<i64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    xb: Vec<F>,
    binv: Vec<Vec<F>>,
    cost: Vec<F>,
    pivots: usize,
}

macro_rules! ck {
    ($e:expr) => {
        $e.ok_or(Overflow)?
    };
}

impl<'a, F: Field> Tableau<'a, F> {
    fn column(&self, j: usize) -> Vec<(usize, i64)> {
        if j < self.n {
            self.lp.columns[j].clone()
        } else {
            vec![(j - self.n, self.art_sign[j - self.n])]
        }
    }

    fn value(&self, j: usize) -> F {
        match self.status[j] {
            Status::Lower => self.lower[j].clone(),
            Status::Upper => self.upper[j].clone().expect("finite upper bound"),
            Status::Basic => {
                let row = self.basis.iter().position(|&b| b == j).expect("basic variable in basis");
                self.xb[row].clone()
            }
        }
    }

    fn run(&mut self) -> Result<(), Overflow> {
        let m = self.lp.rows;
        let total = self.status.len();
        let mut degenerate_streak = 0usize;
        loop {
            // Simplex multipliers.
            let mut pi = vec![F::zero(); m];
            for (i, &bv) in self.basis.iter().enumerate() {
                let cb = &self.cost[bv];
                if cb.is_zero() {
                    continue;
                }
                for (k, pk) in pi.iter_mut().enumerate() {
                    if !self.binv[i][k].is_zero() {
                        *pk = ck!(pk.add(&ck!(cb.mul(&self.binv[i][k]))));
                    }
                }
            }
            let bland = degenerate_streak > 30;
            let mut entering: Option<(usize, F, bool)> = None;
            for j in 0..total {
                let st = self.status[j];
                if st == Status::Basic {
                    continue;
                }
                let can_up = st == Status::Lower && self.upper[j].as_ref().is_none_or(|u| *u > self.lower[j]);
                let can_down = st == Status::Upper && self.upper[j].as_ref().is_some_and(|u| *u > self.lower[j]);
                if !can_up && !can_down {
                    continue;
                }
                let mut d = self.cost[j].clone();
                for (i, a) in self.column(j) {
                    if !pi[i].is_zero() {
                        d = ck!(d.sub(&ck!(pi[i].mul(&F::from_i64(a)))));
                    }
                }
                let zero = F::zero();
                let improving = (can_up && d < zero) || (can_down && d > zero);
                if !improving {
                    continue;
                }
                let mag = if d < zero { ck!(zero.sub(&d)) } else { d };
                if bland {
                    entering = Some((j, mag, can_up));
                    break;
                }
                if entering.as_ref().is_none_or(|(_, best, _)| mag > *best) {
                    entering = Some((j, mag, can_up));
                }
            }
            let Some((j, _, up)) = entering else {
                return Ok(());
            };
            // Direction of basic variables per unit move of the entering variable.
            let col = self.column(j);
            let mut alpha = vec![F::zero(); m];
            for (i, row) in self.binv.iter().enumerate() {
                let mut acc = F::zero();
                for &(k, a) in &col {
                    if !row[k].is_zero() {
                        acc = ck!(acc.add(&ck!(row[k].mul(&F::from_i64(a)))));
                    }
                }
                alpha[i] = acc;
            }
            // x_B changes by delta_i * theta where delta = -dir * alpha.
            let zero = F::zero();
            let delta: Vec<F> = alpha
                .iter()
                .map(|a| if up { zero.sub(a) } else { Some(a.clone()) })
                .collect::<Option<Vec<F>>>()
                .ok_or(Overflow)?;
            let mut theta: Option<F> = match &self.upper[j] {
                Some(u) => Some(ck!(u.sub(&self.lower[j]))),
                None => None,
            };
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..m {
                let bv = self.basis[i];
                let (limit, to_upper) = if delta[i] < zero {
                    (ck!(ck!(self.xb[i].sub(&self.lower[bv])).div(&ck!(zero.sub(&delta[i])))), false)
                } else if delta[i] > zero {
                    match &self.upper[bv] {
                        Some(u) => (ck!(ck!(u.sub(&self.xb[i])).div(&delta[i])), true),
                        None => continue,
                    }
                } else {
                    continue;
                };
                let better = match (&theta, &leave) {
                    (None, _) => true,
                    (Some(t), None) => limit < *t,
                    (Some(t), Some((li, _))) => limit < *t || (limit == *t && self.basis[i] < self.basis[*li]),
                };
                if better {
                    theta = Some(limit);
                    leave = Some((i, to_upper));
                }
            }
            let theta = theta.expect("bounded program has a finite step");
            if theta.is_zero() {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            for i in 0..m {
                if !delta[i].is_zero() {
                    self.xb[i] = ck!(self.xb[i].add(&ck!(delta[i].mul(&theta))));
                }
            }
            self.pivots += 1;
            match leave {
                None => {
                    self.status[j] = if up { Status::Upper } else { Status::Lower };
                }
                Some((r, to_upper)) => {
                    let entering_value = if up {
                        ck!(self.lower[j].add(&theta))
                    } else {
                        ck!(self.upper[j].clone().expect("finite").sub(&theta))
                    };
                    let leaving = self.basis[r];
                    self.status[leaving] = if to_upper { Status::Upper } else { Status::Lower };
                    self.status[j] = Status::Basic;
                    self.basis[r] = j;
                    self.xb[r] = entering_value;
                    let pivot = alpha[r].clone();
                    let row_r: Vec<F> = self.binv[r].iter().map(|v| v.div(&pivot)).collect::<Option<Vec<F>>>().ok_or(Overflow)?;
                    for i in 0..m {
                        if i == r || alpha[i].is_zero() {
                            continue;
                        }
                        let f = alpha[i].clone();
                        for k in 0..m {
                            if !row_r[k].is_zero() {
                                self.binv[i][k] = ck!(self.binv[i][k].sub(&ck!(f.mul(&row_r[k]))));
                            }
                        }
                    }
                    self.binv[r] = row_r;
                }
            }
        }
    }
}

/// Solves the LP exactly. All bounds must be finite.
pub fn solve_lp<F: Field>(lp: &LinearProgram, lower: &[i64], upper: &[i64]) -> Result<(LpOutcome<F>, usize), Overflow> {
    let n = lp.columns.len();
    let m = lp.rows;
    let mut residual: Vec<F> = lp.b.iter().map(|&v| F::from_i64(v)).collect();
    for j in 0..n {
        if lower[j] != 0 {
            for &(i, a) in &lp.columns[j] {
                residual[i] = ck!(residual[i].sub(&F::from_i64(a.checked_mul(lower[j]).ok_or(Overflow)?)));
            }
        }
    }
    let zero = F::zero();
    let art_sign: Vec<i64> = residual.iter().map(|r| if *r < zero { -1 } else { 1 }).collect();
    let mut lo: Vec<F> = lower.iter().map(|&v| F::from_i64(v)).collect();
    let mut up: Vec<Option<F>> = upper.iter().map(|&v| Some(F::from_i64(v))).collect();
    lo.extend((0..m).map(|_| F::zero()));
    up.extend((0..m).map(|_| None));
    let mut status = vec![Status::Lower; n];
    status.extend((0..m).map(|_| Status::Basic));
    let xb: Vec<F> = residual.iter().map(|r| if *r < zero { zero.sub(r) } else { Some(r.clone()) }).collect::<Option<Vec<F>>>().ok_or(Overflow)?;
    let binv: Vec<Vec<F>> = (0..m)
        .map(|i| (0..m).map(|k| if i == k { F::from_i64(art_sign[i]) } else { F::zero() }).collect())
        .collect();
    let mut cost = vec![F::zero(); n];
    cost.extend((0..m).map(|_| F::from_i64(1)));
    let mut tab = Tableau { lp, n, lower: lo, upper: up, art_sign, status, basis: (n..n + m).collect(), xb, binv, cost, pivots: 0 };
    tab.run()?;
    let mut infeasibility = F::zero();
    for a in n..n + m {
        infeasibility = ck!(infeasibility.add(&tab.value(a)));
    }
    if !infeasibility.is_zero() {
        return Ok((LpOutcome::Infeasible, tab.pivots));
    }
    for a in n..n + m {
        tab.upper[a] = Some(F::zero());
        tab.cost[a] = F::zero();
    }
    for j in 0..n {
        tab.cost[j] = F::from_i64(lp.cost[j]);
    }
    tab.run()?;
    let x: Vec<F> = (0..n).map(|j| tab.value(j)).collect();
    let mut objective = F::zero();
    for j in 0..n {
        if lp.cost[j] != 0 {
            objective = ck!(objective.add(&ck!(x[j].mul(&F::from_i64(lp.cost[j])))));
        }
    }
    Ok((LpOutcome::Optimal { x, objective }, tab.pivots))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols(dense: &[Vec<i64>]) -> Vec<Vec<(usize, i64)>> {
        let n = dense[0].len();
        (0..n)
            .map(|j| dense.iter().enumerate().filter(|(_, r)| r[j] != 0).map(|(i, r)| (i, r[j])).collect())
            .collect()
    }

    #[test]
    fn small_lp_optimum() {
        // min -x - y s.t. x + 2y + s1 = 4, 3x + y + s2 = 6, bounds [0, 10]
        let a = vec![vec![1, 2, 1, 0], vec![3, 1, 0, 1]];
        let c = cols(&a);
        let lp = LinearProgram { rows: 2, columns: &c, cost: &[-1, -1, 0, 0], b: &[4, 6] };
        let (out, _) = solve_lp::<Small>(&lp, &[0; 4], &[10; 4]).unwrap();
        match out {
            LpOutcome::Optimal { objective, x } => {
                assert_eq!(objective, Ratio::new(-14, 5));
                assert_eq!(x[0], Ratio::new(8, 5));
                assert_eq!(x[1], Ratio::new(6, 5));
            }
            _ => panic!("expected optimum"),
        }
    }

    #[test]
    fn infeasible_lp_detected() {
        let a = vec![vec![1, 1]];
        let c = cols(&a);
        let lp = LinearProgram { rows: 1, columns: &c, cost: &[0, 0], b: &[5] };
        let (out, _) = solve_lp::<Small>(&lp, &[0, 0], &[2, 2]).unwrap();
        assert_eq!(out, LpOutcome::Infeasible);
    }

    #[test]
    fn upper_bounds_respected() {
        // min -x s.t. x - y = 0, x,y in [1,3]
        let a = vec![vec![1, -1]];
        let c = cols(&a);
        let lp = LinearProgram { rows: 1, columns: &c, cost: &[-1, 0], b: &[0] };
        let (out, _) = solve_lp::<BigRational>(&lp, &[1, 1], &[3, 3]).unwrap();
        match out {
            LpOutcome::Optimal { objective, .. } => assert_eq!(objective, BigRational::from_i64(-3)),
            _ => panic!(),
        }
    }
}
