//! Exact linear programming with strict inequalities.
//!
//! Strict constraints `t < b` are solved as `t <= b - δ` over ℚ(δ); the
//! symbolic δ is then replaced by a small enough positive rational and the
//! resulting assignment is re-checked against the original constraints.

pub mod delta;
pub mod format;
mod simplex;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;
use crate::spec::LinearTerm;
use delta::DeltaRational as Dq;
use simplex::{Optimum, Simplex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Lt,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub term: LinearTerm,
    pub rel: Relation,
    pub bound: Rational,
}

impl Constraint {
    pub fn new(term: LinearTerm, rel: Relation, bound: Rational) -> Self {
        Self { term, rel, bound }
    }

    pub fn holds(&self, x: &[Rational]) -> bool {
        let v = self.term.eval(x);
        match self.rel {
            Relation::Le => v <= self.bound,
            Relation::Lt => v < self.bound,
            Relation::Eq => v == self.bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("constraint {constraint} references undeclared variable {var}")]
    UndeclaredVariable { constraint: usize, var: usize },
    #[error("objective references undeclared variable {0}")]
    UndeclaredObjectiveVariable(usize),
}

/// Variables `0..num_vars`, each free unless constrained.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub names: Vec<String>,
    pub constraints: Vec<Constraint>,
    pub objective: Option<(Direction, LinearTerm)>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vars(n: usize) -> Self {
        Self {
            names: (0..n).map(|i| format!("v{i}")).collect(),
            ..Self::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    pub fn push(&mut self, term: LinearTerm, rel: Relation, bound: Rational) {
        self.constraints.push(Constraint::new(term, rel, bound));
    }

    pub fn add_le(&mut self, term: LinearTerm, bound: Rational) {
        self.push(term, Relation::Le, bound);
    }

    pub fn add_lt(&mut self, term: LinearTerm, bound: Rational) {
        self.push(term, Relation::Lt, bound);
    }

    pub fn add_ge(&mut self, term: LinearTerm, bound: Rational) {
        self.push(term.negate(), Relation::Le, -bound);
    }

    pub fn add_gt(&mut self, term: LinearTerm, bound: Rational) {
        self.push(term.negate(), Relation::Lt, -bound);
    }

    pub fn add_eq(&mut self, term: LinearTerm, bound: Rational) {
        self.push(term, Relation::Eq, bound);
    }

    pub fn set_objective(&mut self, dir: Direction, term: LinearTerm) {
        self.objective = Some((dir, term));
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        for (k, c) in self.constraints.iter().enumerate() {
            if let Some(var) = c.term.max_var().filter(|&v| v >= n) {
                return Err(LpError::UndeclaredVariable { constraint: k, var });
            }
        }
        if let Some((_, t)) = &self.objective {
            if let Some(v) = t.max_var().filter(|&v| v >= n) {
                return Err(LpError::UndeclaredObjectiveVariable(v));
            }
        }
        Ok(())
    }

    /// Exact check of every constraint.
    pub fn satisfied_by(&self, x: &[Rational]) -> bool {
        self.constraints.iter().all(|c| c.holds(x))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpResult {
    /// A satisfying assignment. Also returned for optimization calls whose
    /// infimum is approached but not attained because of strict constraints.
    Feasible(Vec<Rational>),
    Infeasible,
    Unbounded,
    Optimal { assignment: Vec<Rational>, value: Rational },
}

impl LpResult {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpResult::Infeasible)
    }

    pub fn assignment(&self) -> Option<&[Rational]> {
        match self {
            LpResult::Feasible(x) | LpResult::Optimal { assignment: x, .. } => Some(x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub pivots: usize,
}

pub fn solve(lp: &LinearProgram) -> Result<LpResult, LpError> {
    solve_with_stats(lp).map(|(r, _)| r)
}

/// Bounds and auxiliary rows of `lp`, or `None` when a constraint without
/// variables already fails.
fn setup(lp: &LinearProgram) -> Result<Option<Simplex>, LpError> {
    lp.validate()?;
    let n = lp.num_vars();
    let mut lo: Vec<Option<Dq>> = vec![None; n];
    let mut hi: Vec<Option<Dq>> = vec![None; n];
    let mut defs: Vec<LinearTerm> = Vec::new();

    for c in &lp.constraints {
        let b = Dq::real(c.bound.clone());
        let strict = Dq::new(c.bound.clone(), -Rational::one());
        if c.term.is_empty() {
            let zero = Rational::zero();
            let ok = match c.rel {
                Relation::Le => zero <= c.bound,
                Relation::Lt => zero < c.bound,
                Relation::Eq => zero == c.bound,
            };
            if !ok {
                return Ok(None);
            }
            continue;
        }
        let (var, upper, lower) = if let Some((i, a)) = c.term.single() {
            // a·x rel b  ⇒  bounds on x directly
            let scale = |v: &Dq| v.div_scalar(a);
            let (up, low) = match c.rel {
                Relation::Le => (Some(scale(&b)), None),
                Relation::Lt => (Some(scale(&strict)), None),
                Relation::Eq => (Some(scale(&b)), Some(scale(&b))),
            };
            if a.is_negative() && c.rel != Relation::Eq {
                (i, None, up)
            } else {
                (i, up, low)
            }
        } else {
            defs.push(c.term.clone());
            lo.push(None);
            hi.push(None);
            let var = n + defs.len() - 1;
            match c.rel {
                Relation::Le => (var, Some(b), None),
                Relation::Lt => (var, Some(strict), None),
                Relation::Eq => (var, Some(b.clone()), Some(b)),
            }
        };
        if let Some(u) = upper {
            if hi[var].as_ref().is_none_or(|h| u < *h) {
                hi[var] = Some(u);
            }
        }
        if let Some(l) = lower {
            if lo[var].as_ref().is_none_or(|h| l > *h) {
                lo[var] = Some(l);
            }
        }
    }

    Ok(Some(Simplex::new(n, &defs, lo, hi)))
}

pub fn solve_with_stats(lp: &LinearProgram) -> Result<(LpResult, SolveStats), LpError> {
    let n = lp.num_vars();
    let mut stats = SolveStats::default();
    let Some(mut simplex) = setup(lp)? else {
        return Ok((LpResult::Infeasible, stats));
    };
    let feasible = simplex.check();
    stats.pivots = simplex.pivots;
    if !feasible {
        return Ok((LpResult::Infeasible, stats));
    }
    let result = match &lp.objective {
        None => LpResult::Feasible(concretize(&simplex, n)),
        Some((dir, term)) => {
            let obj = match dir {
                Direction::Minimize => term.clone(),
                Direction::Maximize => term.negate(),
            };
            let outcome = simplex.minimize(&obj);
            stats.pivots = simplex.pivots;
            match outcome {
                Optimum::Unbounded => LpResult::Unbounded,
                Optimum::Bounded(v) if v.is_real() => {
                    let assignment = concretize(&simplex, n);
                    let value = term.eval(&assignment);
                    LpResult::Optimal { assignment, value }
                }
                Optimum::Bounded(_) => LpResult::Feasible(concretize(&simplex, n)),
            }
        }
    };
    if let Some(x) = result.assignment() {
        assert!(lp.satisfied_by(x), "simplex returned an assignment violating the program");
    }
    Ok((result, stats))
}

/// Picks a positive δ small enough that every bound still holds, then
/// evaluates the structural variables there.
fn concretize(simplex: &Simplex, structural: usize) -> Vec<Rational> {
    let mut delta = Rational::one();
    let mut tighten = |small: &Dq, large: &Dq| {
        // need small.r + small.d·δ <= large.r + large.d·δ
        if small.r < large.r && small.d > large.d {
            let limit = (&large.r - &small.r) / (&small.d - &large.d);
            if limit < delta {
                delta = limit;
            }
        }
    };
    for j in 0..simplex.num_vars() {
        let v = simplex.value(j);
        let (l, h) = simplex.bounds(j);
        if let Some(l) = l {
            tighten(l, v);
        }
        if let Some(h) = h {
            tighten(v, h);
        }
    }
    (0..structural).map(|j| simplex.value(j).at(&delta)).collect()
}

/// Infimum and supremum of each term in `terms` over the feasible set of
/// `lp` (its objective is ignored), `None` for an unbounded side. Returns
/// `None` when `lp` is infeasible. Bounds that are not attained because of
/// strict rows are reported as the limit value. One tableau serves every
/// term, each optimisation starting from the previous basis.
pub fn ranges(lp: &LinearProgram, terms: &[LinearTerm]) -> Result<(Option<RangeList>, SolveStats), LpError> {
    let mut stats = SolveStats::default();
    let Some(mut simplex) = setup(lp)? else {
        return Ok((None, stats));
    };
    let feasible = simplex.check();
    stats.pivots = simplex.pivots;
    if !feasible {
        return Ok((None, stats));
    }
    let mut out = Vec::with_capacity(terms.len());
    for t in terms {
        let lo = match simplex.minimize(t) {
            Optimum::Bounded(v) => Some(v.r),
            Optimum::Unbounded => None,
        };
        let hi = match simplex.minimize(&t.negate()) {
            Optimum::Bounded(v) => Some(-v.r),
            Optimum::Unbounded => None,
        };
        out.push((lo, hi));
    }
    stats.pivots = simplex.pivots;
    Ok((Some(out), stats))
}

pub type RangeList = Vec<(Option<Rational>, Option<Rational>)>;

/// Decides whether the program admits an assignment with every listed slack
/// strictly negative.
pub fn minimize_slacks(lp: &LinearProgram, slacks: &[usize]) -> Result<LpResult, LpError> {
    let mut strict = lp.clone();
    strict.objective = None;
    for &z in slacks {
        strict.add_lt(LinearTerm::var(z), Rational::zero());
    }
    solve(&strict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    fn x() -> LinearTerm {
        LinearTerm::var(0)
    }

    #[test]
    fn contradictory_bounds() {
        let mut lp = LinearProgram::with_vars(1);
        lp.add_le(x(), qi(1));
        lp.add_ge(x(), qi(2));
        assert_eq!(solve(&lp).unwrap(), LpResult::Infeasible);
    }

    #[test]
    fn minimize_single_bound() {
        let mut lp = LinearProgram::with_vars(1);
        lp.add_ge(x(), q(3, 2));
        lp.set_objective(Direction::Minimize, x());
        assert_eq!(
            solve(&lp).unwrap(),
            LpResult::Optimal {
                assignment: vec![q(3, 2)],
                value: q(3, 2)
            }
        );
    }

    #[test]
    fn open_interval() {
        let mut lp = LinearProgram::with_vars(1);
        lp.add_lt(x(), qi(0));
        lp.add_gt(x(), qi(-1));
        let LpResult::Feasible(a) = solve(&lp).unwrap() else { panic!() };
        assert!(a[0] < qi(0) && a[0] > qi(-1));
    }

    #[test]
    fn slack_examples() {
        // x >= 1, x - z <= 0
        let mut lp = LinearProgram::with_vars(2);
        lp.add_ge(x(), qi(1));
        lp.add_le(LinearTerm::from_pairs([(0, qi(1)), (1, qi(-1))]), qi(0));
        assert_eq!(minimize_slacks(&lp, &[1]).unwrap(), LpResult::Infeasible);

        let mut lp = LinearProgram::with_vars(2);
        lp.add_ge(x(), qi(0));
        lp.add_le(LinearTerm::from_pairs([(0, qi(1)), (1, qi(-1))]), qi(5));
        let LpResult::Feasible(a) = minimize_slacks(&lp, &[1]).unwrap() else { panic!() };
        assert!(a[1] < qi(0) && a[0] >= qi(0) && &a[0] - &a[1] <= qi(5));

        let mut lp = LinearProgram::with_vars(1);
        lp.add_le(x(), qi(2));
        assert_eq!(minimize_slacks(&lp, &[]).unwrap().is_feasible(), solve(&lp).unwrap().is_feasible());
    }

    #[test]
    fn strict_infimum_not_attained() {
        let mut lp = LinearProgram::with_vars(1);
        lp.add_gt(x(), qi(0));
        lp.set_objective(Direction::Minimize, x());
        let LpResult::Feasible(a) = solve(&lp).unwrap() else { panic!() };
        assert!(a[0] > qi(0));
    }

    #[test]
    fn unbounded_and_maximize() {
        let mut lp = LinearProgram::with_vars(2);
        lp.add_le(LinearTerm::from_pairs([(0, qi(1)), (1, qi(1))]), qi(4));
        lp.add_ge(x(), qi(0));
        lp.add_ge(LinearTerm::var(1), qi(0));
        lp.set_objective(Direction::Maximize, LinearTerm::from_pairs([(0, qi(3)), (1, qi(2))]));
        assert_eq!(
            solve(&lp).unwrap(),
            LpResult::Optimal {
                assignment: vec![qi(4), qi(0)],
                value: qi(12)
            }
        );
        lp.set_objective(Direction::Minimize, LinearTerm::var(1).negate().scale(&qi(1)));
        lp.constraints.pop();
        lp.constraints.pop();
        assert_eq!(solve(&lp).unwrap(), LpResult::Unbounded);
    }

    #[test]
    fn undeclared_variable() {
        let mut lp = LinearProgram::with_vars(1);
        lp.add_le(LinearTerm::var(3), qi(0));
        assert_eq!(
            solve(&lp),
            Err(LpError::UndeclaredVariable { constraint: 0, var: 3 })
        );
    }

    #[test]
    fn empty_term_constraints() {
        let mut lp = LinearProgram::with_vars(1);
        lp.add_le(LinearTerm::new(), qi(0));
        assert!(solve(&lp).unwrap().is_feasible());
        lp.add_lt(LinearTerm::new(), qi(0));
        assert_eq!(solve(&lp).unwrap(), LpResult::Infeasible);
    }

    #[test]
    fn equality_system() {
        // x + y = 3, x - y = 1
        let mut lp = LinearProgram::with_vars(2);
        lp.add_eq(LinearTerm::from_pairs([(0, qi(1)), (1, qi(1))]), qi(3));
        lp.add_eq(LinearTerm::from_pairs([(0, qi(1)), (1, qi(-1))]), qi(1));
        assert_eq!(solve(&lp).unwrap(), LpResult::Feasible(vec![qi(2), qi(1)]));
    }
}
