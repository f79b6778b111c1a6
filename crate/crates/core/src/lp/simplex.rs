//! Bounded general simplex over ℚ(δ) with Bland's rule.
//!
//! Every variable carries optional lower and upper bounds. Rows define
//! auxiliary variables as linear combinations of the structural ones; the
//! tableau keeps each basic variable expressed over the nonbasic ones.

use super::delta::DeltaRational as Dq;
use crate::rational::Rational;
use crate::spec::LinearTerm;

pub(crate) enum Optimum {
    Bounded(Dq),
    Unbounded,
}

pub(crate) struct Simplex {
    /// `rows[r][j]`: coefficient of variable `j` in the definition of the
    /// basic variable `basic[r]`. Entries of basic columns are zero.
    rows: Vec<Vec<Rational>>,
    basic: Vec<usize>,
    row_of: Vec<Option<usize>>,
    lo: Vec<Option<Dq>>,
    hi: Vec<Option<Dq>>,
    beta: Vec<Dq>,
    pub pivots: usize,
}

impl Simplex {
    /// `structural` plain variables, one auxiliary variable per entry of
    /// `defs`. Bounds cover all `structural + defs.len()` variables.
    pub fn new(structural: usize, defs: &[LinearTerm], lo: Vec<Option<Dq>>, hi: Vec<Option<Dq>>) -> Self {
        let total = structural + defs.len();
        debug_assert_eq!(lo.len(), total);
        let mut beta = vec![Dq::zero(); total];
        for j in 0..structural {
            beta[j] = match (&lo[j], &hi[j]) {
                (Some(l), _) if *l > Dq::zero() => l.clone(),
                (_, Some(h)) if *h < Dq::zero() => h.clone(),
                _ => Dq::zero(),
            };
        }
        let mut rows = Vec::with_capacity(defs.len());
        let mut basic = Vec::with_capacity(defs.len());
        let mut row_of = vec![None; total];
        for (r, def) in defs.iter().enumerate() {
            let mut row = vec![Rational::zero(); total];
            let mut value = Dq::zero();
            for (j, c) in def.iter() {
                row[j] = c.clone();
                value = &value + &beta[j].scale(c);
            }
            let var = structural + r;
            beta[var] = value;
            rows.push(row);
            basic.push(var);
            row_of[var] = Some(r);
        }
        Self {
            rows,
            basic,
            row_of,
            lo,
            hi,
            beta,
            pivots: 0,
        }
    }

    pub fn value(&self, j: usize) -> &Dq {
        &self.beta[j]
    }

    pub fn bounds(&self, j: usize) -> (Option<&Dq>, Option<&Dq>) {
        (self.lo[j].as_ref(), self.hi[j].as_ref())
    }

    pub fn num_vars(&self) -> usize {
        self.beta.len()
    }

    fn below(&self, j: usize) -> bool {
        self.lo[j].as_ref().is_some_and(|l| self.beta[j] < *l)
    }

    fn above(&self, j: usize) -> bool {
        self.hi[j].as_ref().is_some_and(|h| self.beta[j] > *h)
    }

    fn can_increase(&self, j: usize) -> bool {
        self.hi[j].as_ref().is_none_or(|h| self.beta[j] < *h)
    }

    fn can_decrease(&self, j: usize) -> bool {
        self.lo[j].as_ref().is_none_or(|l| self.beta[j] > *l)
    }

    /// Drives every variable within its bounds. Returns false when the bounds
    /// are jointly unsatisfiable.
    pub fn check(&mut self) -> bool {
        if (0..self.num_vars()).any(|j| matches!((&self.lo[j], &self.hi[j]), (Some(l), Some(h)) if l > h)) {
            return false;
        }
        loop {
            let violated = self
                .basic
                .iter()
                .copied()
                .filter(|&b| self.below(b) || self.above(b))
                .min();
            let Some(b) = violated else { return true };
            let r = self.row_of[b].expect("basic");
            let raise = self.below(b);
            let entering = (0..self.num_vars())
                .filter(|&j| self.row_of[j].is_none())
                .find(|&j| {
                    let a = &self.rows[r][j];
                    if a.is_zero() {
                        return false;
                    }
                    // moving b up needs x_j up when a > 0, down when a < 0
                    (a.is_positive() == raise && self.can_increase(j))
                        || (a.is_positive() != raise && self.can_decrease(j))
                });
            let Some(j) = entering else { return false };
            let target = if raise {
                self.lo[b].clone().expect("lower bound")
            } else {
                self.hi[b].clone().expect("upper bound")
            };
            self.pivot_and_update(b, j, target);
        }
    }

    /// Minimizes `obj` over structural variables, starting from a feasible
    /// assignment.
    pub fn minimize(&mut self, obj: &LinearTerm) -> Optimum {
        loop {
            let reduced = self.reduced_costs(obj);
            let entering = (0..self.num_vars())
                .filter(|&j| self.row_of[j].is_none())
                .find_map(|j| {
                    let d = &reduced[j];
                    if d.is_negative() && self.can_increase(j) {
                        Some((j, true))
                    } else if d.is_positive() && self.can_decrease(j) {
                        Some((j, false))
                    } else {
                        None
                    }
                });
            let Some((j, up)) = entering else {
                let value = obj
                    .iter()
                    .fold(Dq::zero(), |acc, (i, c)| &acc + &self.beta[i].scale(c));
                return Optimum::Bounded(value);
            };
            // ratio test: the first variable (by step, then index) to hit a bound
            let mut best: Option<(Dq, usize)> = None;
            let own = if up { &self.hi[j] } else { &self.lo[j] };
            if let Some(bound) = own {
                let step = if up { bound - &self.beta[j] } else { &self.beta[j] - bound };
                best = Some((step, j));
            }
            for (r, &k) in self.basic.iter().enumerate() {
                let a = &self.rows[r][j];
                if a.is_zero() {
                    continue;
                }
                let rises = a.is_positive() == up;
                let limit = if rises { &self.hi[k] } else { &self.lo[k] };
                let Some(bound) = limit else { continue };
                let step = (bound - &self.beta[k]).div_scalar(&a.abs());
                let step = if rises { step } else { -&step };
                let better = match &best {
                    None => true,
                    Some((s, idx)) => step < *s || (step == *s && k < *idx),
                };
                if better {
                    best = Some((step, k));
                }
            }
            let Some((step, leaving)) = best else { return Optimum::Unbounded };
            if leaving == j {
                let delta = if up { step } else { -&step };
                self.shift_nonbasic(j, &delta);
            } else {
                let r = self.row_of[leaving].expect("basic");
                let a = self.rows[r][j].clone();
                let rises = a.is_positive() == up;
                let target = if rises { self.hi[leaving].clone() } else { self.lo[leaving].clone() };
                self.pivot_and_update(leaving, j, target.expect("bound"));
            }
        }
    }

    fn reduced_costs(&self, obj: &LinearTerm) -> Vec<Rational> {
        let mut d = vec![Rational::zero(); self.num_vars()];
        for (i, c) in obj.iter() {
            match self.row_of[i] {
                Some(r) => {
                    for (j, a) in self.rows[r].iter().enumerate() {
                        if !a.is_zero() {
                            d[j] += &(c * a);
                        }
                    }
                }
                None => d[i] += c,
            }
        }
        d
    }

    fn shift_nonbasic(&mut self, j: usize, delta: &Dq) {
        self.beta[j] = &self.beta[j] + delta;
        for (r, &k) in self.basic.iter().enumerate() {
            let a = &self.rows[r][j];
            if !a.is_zero() {
                self.beta[k] = &self.beta[k] + &delta.scale(a);
            }
        }
    }

    /// Sets basic `b` to `target` by moving nonbasic `j`, then swaps them.
    fn pivot_and_update(&mut self, b: usize, j: usize, target: Dq) {
        let r = self.row_of[b].expect("basic");
        let a = self.rows[r][j].clone();
        let theta = (&target - &self.beta[b]).div_scalar(&a);
        self.shift_nonbasic(j, &theta);
        self.beta[b] = target;
        self.pivot(r, j);
    }

    fn pivot(&mut self, r: usize, j: usize) {
        self.pivots += 1;
        let b = self.basic[r];
        let a = self.rows[r][j].clone();
        let inv = a.recip();
        let mut new_row = std::mem::take(&mut self.rows[r]);
        for v in new_row.iter_mut() {
            if !v.is_zero() {
                *v = -&(&*v * &inv);
            }
        }
        new_row[j] = Rational::zero();
        new_row[b] = inv;
        let nz: Vec<usize> = (0..new_row.len()).filter(|&k| !new_row[k].is_zero()).collect();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let c = std::mem::take(&mut row[j]);
            if c.is_zero() {
                continue;
            }
            for &k in &nz {
                row[k] += &(&c * &new_row[k]);
            }
        }
        self.rows[r] = new_row;
        self.basic[r] = j;
        self.row_of[j] = Some(r);
        self.row_of[b] = None;
    }
}
