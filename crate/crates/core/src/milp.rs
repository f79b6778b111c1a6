//! Big-M mixed-integer encoding of reachability instances.
//!
//! Every node gets pre-activation bounds from interval arithmetic over the
//! input box. A ReLU node `v = ReLU(a)` becomes
//!
//! ```text
//! a = y − s,  y ≥ 0,  s ≥ 0,  y ≤ M⁺(1 − z),  s ≤ M⁻·z
//! ```
//!
//! with `M⁺ = max(0, hi)` and `M⁻ = max(0, −lo)`, so `z = 0` selects the
//! active piece. Single-piece nodes become one equality. Any other node
//! with `k` pieces gets indicators `δ_0 … δ_{k−1}` summing to one (a single
//! binary `z` with `δ_0 = z`, `δ_1 = 1 − z` when `k = 2`, otherwise `k`
//! binaries `d`), and each indicator switches on the interval and the value
//! equation of its piece through big-M rows. Upper piece ends are strict
//! for discontinuous functions, matching the rule that a breakpoint belongs
//! to the piece above it.
//!
//! Variable names: `x{i}` for inputs, `y_{l}_{i}` for node values,
//! `s_{l}_{i}` and `z_{l}_{i}` for the ReLU split and switch, and
//! `d_{l}_{i}_{k}` for piece indicators, with layers counted from 1.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::interval::{self, Interval};
use crate::lp::{self, format, LinearProgram, LpError, LpResult};
use crate::network::Network;
use crate::rational::Rational;
use crate::spec::{LinearTerm, Specification};
use crate::verifier::ReachInstance;

pub const DEFAULT_ASSIGNMENT_CAP: u128 = 1 << 16;

#[derive(Debug, thiserror::Error)]
pub enum MilpError {
    #[error("input dimension {0} is not bounded by the input specification")]
    UnboundedInput(usize),
    #[error("{count} binary assignments exceed the enumeration cap of {cap}")]
    Cap { count: u128, cap: u128 },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A closed interval with finite ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bound {
    pub lo: Rational,
    pub hi: Rational,
}

impl Bound {
    pub fn contains(&self, v: &Rational) -> bool {
        self.lo <= *v && *v <= self.hi
    }

    fn of(iv: &Interval) -> Self {
        Self {
            lo: iv.lo.clone().expect("bounded inputs give bounded nodes"),
            hi: iv.hi.clone().expect("bounded inputs give bounded nodes"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalBounds {
    pub inputs: Vec<Bound>,
    /// Pre-activation range per node, by layer.
    pub pre: Vec<Vec<Bound>>,
    /// Range of the node's value.
    pub post: Vec<Vec<Bound>>,
}

/// Interval arithmetic layer by layer from the box that `φ_in`'s
/// one-variable conjuncts describe.
pub fn compute_bounds(net: &Network, input_spec: &Specification) -> Result<IntervalBounds, MilpError> {
    let mut inputs = Vec::with_capacity(net.input_dim());
    for (i, (lo, hi)) in input_spec.box_bounds(net.input_dim()).into_iter().enumerate() {
        match (lo, hi) {
            (Some(lo), Some(hi)) => inputs.push(Bound { lo, hi }),
            _ => return Err(MilpError::UnboundedInput(i)),
        }
    }
    let ivs: Vec<Interval> = inputs
        .iter()
        .map(|b| Interval::new(Some(b.lo.clone()), Some(b.hi.clone())))
        .collect();
    let layers = interval::plain_bounds(net, &ivs);
    Ok(IntervalBounds {
        inputs,
        pre: layers.iter().map(|l| l.iter().map(|b| Bound::of(&b.pre)).collect()).collect(),
        post: layers.iter().map(|l| l.iter().map(|b| Bound::of(&b.post)).collect()).collect(),
    })
}

/// Variable indices and constants of one ReLU encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReluRows {
    pub layer: usize,
    pub index: usize,
    pub y: usize,
    pub s: usize,
    pub z: usize,
    pub m_plus: Rational,
    pub m_minus: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Milp {
    /// Constraints over all variables, binaries included; no objective.
    pub lp: LinearProgram,
    pub binaries: BTreeSet<usize>,
    /// Binaries that take exactly one value 1 together. Every binary is in
    /// exactly one group; a group of one is a free binary.
    pub groups: Vec<Vec<usize>>,
    pub relus: Vec<ReluRows>,
    pub input_dim: usize,
}

impl Milp {
    /// Number of binary assignments consistent with the groups.
    pub fn assignment_count(&self) -> u128 {
        self.groups
            .iter()
            .map(|g| if g.len() == 1 { 2 } else { g.len() as u128 })
            .try_fold(1u128, |acc, k| acc.checked_mul(k))
            .unwrap_or(u128::MAX)
    }
}

/// An affine expression `term + constant` over MILP variables.
#[derive(Clone)]
struct Expr {
    term: LinearTerm,
    constant: Rational,
}

impl Expr {
    fn var(v: usize) -> Self {
        Self {
            term: LinearTerm::var(v),
            constant: Rational::zero(),
        }
    }
}

/// `term + constant rel 0` as a row.
fn row_le(lp: &mut LinearProgram, e: &Expr) {
    lp.add_le(e.term.clone(), -&e.constant);
}

fn row_lt(lp: &mut LinearProgram, e: &Expr) {
    lp.add_lt(e.term.clone(), -&e.constant);
}

fn combine(parts: &[(&Expr, Rational)], constant: Rational) -> Expr {
    let mut term = LinearTerm::new();
    let mut c = constant;
    for (e, k) in parts {
        term.add_scaled(&e.term, k);
        c += &(&e.constant * k);
    }
    Expr { term, constant: c }
}

pub fn encode(inst: &ReachInstance) -> Result<Milp, MilpError> {
    let net = &inst.network;
    let bounds = compute_bounds(net, &inst.input_spec)?;
    let n = net.input_dim();
    let mut lp = LinearProgram::new();
    for i in 0..n {
        lp.add_var(format!("x{i}"));
    }
    let mut binaries = BTreeSet::new();
    let mut groups = Vec::new();
    let mut relus = Vec::new();
    let one = Rational::one();
    let zero = Rational::zero();

    let mut prev: Vec<Expr> = (0..n).map(Expr::var).collect();
    for (l, layer) in net.layers().iter().enumerate() {
        let name = |kind: &str, i: usize| format!("{kind}_{}_{i}", l + 1);
        let mut values = Vec::with_capacity(layer.len());
        for (i, node) in layer.iter().enumerate() {
            let mut a = Expr {
                term: LinearTerm::new(),
                constant: node.bias.clone(),
            };
            for (w, v) in node.weights.iter().zip(&prev) {
                if !w.is_zero() {
                    a.term.add_scaled(&v.term, w);
                    a.constant += &(&v.constant * w);
                }
            }
            let f = &node.activation;
            let y = lp.add_var(name("y", i));
            let yv = Expr::var(y);
            let pre = &bounds.pre[l][i];
            let post = &bounds.post[l][i];
            if f.num_pieces() == 1 {
                // y = slope·a + offset
                let p = &f.pieces()[0];
                let e = combine(&[(&yv, one.clone()), (&a, -&p.slope)], -&p.offset);
                lp.add_eq(e.term, -&e.constant);
            } else if f.is_relu() {
                let s = lp.add_var(name("s", i));
                let z = lp.add_var(name("z", i));
                binaries.insert(z);
                groups.push(vec![z]);
                let (sv, zv) = (Expr::var(s), Expr::var(z));
                let m_plus = pre.hi.clone().max(zero.clone());
                let m_minus = (-&pre.lo).max(zero.clone());
                // a = y − s
                let e = combine(&[(&a, one.clone()), (&yv, -&one), (&sv, one.clone())], zero.clone());
                lp.add_eq(e.term, -&e.constant);
                lp.add_ge(LinearTerm::var(y), zero.clone());
                lp.add_ge(LinearTerm::var(s), zero.clone());
                // y ≤ M⁺(1 − z)
                row_le(&mut lp, &combine(&[(&yv, one.clone()), (&zv, m_plus.clone())], -&m_plus));
                // s ≤ M⁻·z
                row_le(&mut lp, &combine(&[(&sv, one.clone()), (&zv, -&m_minus)], zero.clone()));
                relus.push(ReluRows {
                    layer: l + 1,
                    index: i,
                    y,
                    s,
                    z,
                    m_plus,
                    m_minus,
                });
            } else {
                let k = f.num_pieces();
                let deltas: Vec<Expr> = if k == 2 {
                    let z = lp.add_var(name("z", i));
                    binaries.insert(z);
                    groups.push(vec![z]);
                    let zv = Expr::var(z);
                    vec![zv.clone(), combine(&[(&zv, -&one)], one.clone())]
                } else {
                    let ds: Vec<usize> = (0..k).map(|p| lp.add_var(format!("d_{}_{i}_{p}", l + 1))).collect();
                    binaries.extend(ds.iter().copied());
                    let sum = LinearTerm::from_pairs(ds.iter().map(|&d| (d, one.clone())));
                    lp.add_eq(sum, one.clone());
                    groups.push(ds.clone());
                    ds.into_iter().map(Expr::var).collect()
                };
                let strict = !f.is_continuous();
                for (p, delta) in deltas.iter().enumerate() {
                    // off-switch: expression ≤ M·(1 − δ), i.e. expr + M·δ − M ≤ 0
                    let off = |lp: &mut LinearProgram, e: &Expr, m: Rational, strict: bool| {
                        let r = combine(&[(e, one.clone()), (delta, m.clone())], -&m);
                        if strict {
                            row_lt(lp, &r);
                        } else {
                            row_le(lp, &r);
                        }
                    };
                    if let Some(t) = f.lower_breakpoint(p) {
                        // t − a ≤ (t − lo)(1 − δ)
                        if *t > pre.lo {
                            let e = combine(&[(&a, -&one)], t.clone());
                            off(&mut lp, &e, t - &pre.lo, false);
                        }
                    }
                    if let Some(t) = f.upper_breakpoint(p) {
                        // a − t < (hi − t + 1)(1 − δ), or ≤ (hi − t)(1 − δ)
                        if pre.hi >= *t {
                            let e = combine(&[(&a, one.clone())], -t);
                            let m = if strict { &(&pre.hi - t) + &one } else { &pre.hi - t };
                            off(&mut lp, &e, m, strict);
                        }
                    }
                    // |y − (slope·a + offset)| ≤ M(1 − δ)
                    let piece = &f.pieces()[p];
                    let (plo, phi) = {
                        let u = piece.eval(&pre.lo);
                        let v = piece.eval(&pre.hi);
                        if u <= v { (u, v) } else { (v, u) }
                    };
                    let gap = combine(&[(&yv, one.clone()), (&a, -&piece.slope)], -&piece.offset);
                    let m_up = (&post.hi - &plo).max(zero.clone());
                    let m_down = (&phi - &post.lo).max(zero.clone());
                    off(&mut lp, &gap, m_up, false);
                    off(&mut lp, &combine(&[(&gap, -&one)], zero.clone()), m_down, false);
                }
            }
            values.push(yv);
        }
        prev = values;
    }
    for c in &inst.input_spec.conjuncts {
        lp.add_le(c.term.clone(), c.bound.clone());
    }
    for c in &inst.output_spec.conjuncts {
        let parts: Vec<(&Expr, Rational)> = c.term.iter().map(|(j, k)| (&prev[j], k.clone())).collect();
        let e = combine(&parts, -&c.bound);
        row_le(&mut lp, &e);
    }
    Ok(Milp {
        lp,
        binaries,
        groups,
        relus,
        input_dim: n,
    })
}

/// The MILP in LP text format.
pub fn to_lp_text(milp: &Milp) -> String {
    let comments = vec![format!(
        "reachability encoding: {} variables, {} binaries, {} rows",
        milp.lp.num_vars(),
        milp.binaries.len(),
        milp.lp.constraints.len()
    )];
    format::write_lp(&milp.lp, &milp.binaries, &comments)
}

pub fn export_lp(milp: &Milp, path: impl AsRef<Path>) -> Result<(), MilpError> {
    std::fs::write(path, to_lp_text(milp))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MilpVerdict {
    /// A feasible point: the input part of the first feasible assignment.
    Feasible(Vec<Rational>),
    Infeasible,
}

impl MilpVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, MilpVerdict::Feasible(_))
    }
}

pub fn check_milp(milp: &Milp) -> Result<MilpVerdict, MilpError> {
    check_milp_with_cap(milp, DEFAULT_ASSIGNMENT_CAP)
}

/// Tries every binary assignment allowed by the groups, fixing the binaries
/// and solving the remaining LP each time.
pub fn check_milp_with_cap(milp: &Milp, cap: u128) -> Result<MilpVerdict, MilpError> {
    let count = milp.assignment_count();
    if count > cap {
        return Err(MilpError::Cap { count, cap });
    }
    let radices: Vec<usize> = milp.groups.iter().map(|g| if g.len() == 1 { 2 } else { g.len() }).collect();
    let mut digits = vec![0usize; radices.len()];
    for _ in 0..count {
        let mut fixed = milp.lp.clone();
        for (g, &d) in milp.groups.iter().zip(&digits) {
            if g.len() == 1 {
                fixed.add_eq(LinearTerm::var(g[0]), Rational::from(d as i64));
            } else {
                for (k, &b) in g.iter().enumerate() {
                    fixed.add_eq(LinearTerm::var(b), Rational::from((k == d) as i64));
                }
            }
        }
        if let LpResult::Feasible(x) | LpResult::Optimal { assignment: x, .. } = lp::solve(&fixed)? {
            return Ok(MilpVerdict::Feasible(x[..milp.input_dim].to_vec()));
        }
        // next assignment in mixed radix
        for (d, &r) in digits.iter_mut().zip(&radices) {
            *d += 1;
            if *d < r {
                break;
            }
            *d = 0;
        }
    }
    Ok(MilpVerdict::Infeasible)
}
