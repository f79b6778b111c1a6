//! Seeded test corpora: random small networks with box specifications,
//! random 3-CNF formulas, and exhaustive enumeration of tiny formulas.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{Network, Node};
use crate::pwl::{Piece, PwlFunction};
use crate::rational::{q, qi, Rational};
use crate::reductions::{Clause, CnfFormula, Literal};
use crate::spec::{LinearTerm, Namespace, Specification};
use crate::verifier::ReachInstance;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape limits for [`random_instance`].
#[derive(Debug, Clone)]
pub struct NetworkShape {
    pub max_inputs: usize,
    pub max_layers: usize,
    pub max_width: usize,
    /// Bound on nodes with more than one piece.
    pub max_pwl_nodes: usize,
    /// Allow activations other than ReLU and identity, including
    /// discontinuous ones.
    pub general_activations: bool,
}

impl Default for NetworkShape {
    fn default() -> Self {
        Self {
            max_inputs: 4,
            max_layers: 3,
            max_width: 4,
            max_pwl_nodes: 8,
            general_activations: true,
        }
    }
}

const WEIGHTS: [(i64, i64); 11] = [(-2, 1), (-3, 2), (-1, 1), (-1, 2), (-1, 3), (0, 1), (1, 3), (1, 2), (1, 1), (3, 2), (2, 1)];

fn small_rational(r: &mut impl Rng) -> Rational {
    let (n, d) = *WEIGHTS.choose(r).expect("non-empty");
    q(n, d)
}

fn random_pwl(r: &mut impl Rng) -> PwlFunction {
    let k = r.gen_range(2..=3);
    let mut bps: Vec<Rational> = Vec::with_capacity(k - 1);
    while bps.len() < k - 1 {
        let t = q(r.gen_range(-4..=4), 2);
        if !bps.contains(&t) {
            bps.push(t);
        }
    }
    bps.sort();
    let continuous = r.gen_bool(0.5);
    let mut pieces = vec![Piece::new(small_rational(r), small_rational(r))];
    for t in &bps {
        let slope = small_rational(r);
        let offset = if continuous {
            // Match the previous piece at the breakpoint.
            let prev = pieces.last().expect("one piece").eval(t);
            &prev - &(&slope * t)
        } else {
            small_rational(r)
        };
        pieces.push(Piece::new(slope, offset));
    }
    PwlFunction::new(pieces, bps).expect("sorted distinct breakpoints")
}

/// A random network with a random input box (some sides open) and an
/// output box that is placed around the image of a random input half of
/// the time and shifted at random otherwise.
pub fn random_instance(r: &mut impl Rng, shape: &NetworkShape) -> ReachInstance {
    let input_dim = r.gen_range(1..=shape.max_inputs);
    let num_layers = r.gen_range(1..=shape.max_layers);
    let mut pwl_left = shape.max_pwl_nodes;
    let mut layers = Vec::with_capacity(num_layers);
    let mut width = input_dim;
    for l in 0..num_layers {
        let w = if l + 1 == num_layers { r.gen_range(1..=2) } else { r.gen_range(1..=shape.max_width) };
        let mut layer = Vec::with_capacity(w);
        for _ in 0..w {
            let mut weights: Vec<Rational> = (0..width).map(|_| small_rational(r)).collect();
            if weights.iter().all(Rational::is_zero) {
                weights[0] = Rational::one();
            }
            let bias = small_rational(r);
            let activation = if pwl_left == 0 || r.gen_bool(0.2) {
                PwlFunction::identity()
            } else if shape.general_activations && r.gen_bool(0.25) {
                random_pwl(r)
            } else {
                PwlFunction::relu()
            };
            if activation.num_pieces() > 1 {
                pwl_left -= 1;
            }
            layer.push(Node::new(weights, bias, activation));
        }
        width = w;
        layers.push(layer);
    }
    let net = Network::new(input_dim, layers).expect("consistent widths");

    let mut input_spec = Specification::new(Namespace::Input);
    let mut point = Vec::with_capacity(input_dim);
    for i in 0..input_dim {
        let lo = qi(r.gen_range(-3..=1));
        let hi = &lo + &qi(r.gen_range(1..=4));
        point.push(q(r.gen_range(0..=4), 4) * (&hi - &lo) + &lo);
        match r.gen_range(0..6) {
            0 => input_spec.push_ge(LinearTerm::var(i), lo),
            1 => input_spec.push_le(LinearTerm::var(i), hi),
            _ => input_spec.push_bounds(i, lo, hi),
        }
    }
    let y = net.eval(&point).expect("input length");
    let mut output_spec = Specification::new(Namespace::Output);
    let centred = r.gen_bool(0.5);
    for (j, v) in y.iter().enumerate() {
        let centre = if centred { v.clone() } else { v + &qi(r.gen_range(-6..=6)) };
        let radius = q(r.gen_range(0..=2), 2);
        match r.gen_range(0..4) {
            0 => output_spec.push_ge(LinearTerm::var(j), &centre - &radius),
            1 => output_spec.push_le(LinearTerm::var(j), &centre + &radius),
            _ => output_spec.push_bounds(j, &centre - &radius, &centre + &radius),
        }
    }
    ReachInstance::new(net, input_spec, output_spec).expect("specs fit")
}

pub fn random_instances(seed: u64, count: usize, shape: &NetworkShape) -> Vec<ReachInstance> {
    let mut r = rng(seed);
    (0..count).map(|_| random_instance(&mut r, shape)).collect()
}

fn random_literal(r: &mut impl Rng, n: usize) -> Literal {
    Literal {
        var: r.gen_range(0..n),
        positive: r.gen_bool(0.5),
    }
}

/// A formula with `1..=max_vars` variables and `1..=max_clauses` clauses.
pub fn random_formula(r: &mut impl Rng, max_vars: usize, max_clauses: usize) -> CnfFormula {
    let n = r.gen_range(1..=max_vars);
    let m = r.gen_range(1..=max_clauses);
    let clauses = (0..m).map(|_| [0; 3].map(|_| random_literal(r, n))).collect();
    CnfFormula::new(n, clauses).expect("literals in range")
}

pub fn random_formulas(seed: u64, count: usize, max_vars: usize, max_clauses: usize) -> Vec<CnfFormula> {
    let mut r = rng(seed);
    (0..count).map(|_| random_formula(&mut r, max_vars, max_clauses)).collect()
}

/// Every clause over `n` variables up to literal order: the sorted
/// multisets of three literals.
pub fn all_clauses(n: usize) -> Vec<Clause> {
    let lits: Vec<Literal> = (0..n).flat_map(|v| [Literal::pos(v), Literal::neg(v)]).collect();
    let mut out = Vec::new();
    for a in 0..lits.len() {
        for b in a..lits.len() {
            for c in b..lits.len() {
                out.push([lits[a], lits[b], lits[c]]);
            }
        }
    }
    out
}

/// Formulas with exactly `n` variables, every one of them occurring, and
/// `1..=max_clauses` clauses, listed once per multiset of clauses (clause
/// order and literal order are irrelevant to satisfiability and to every
/// reduction up to a permutation of nodes). With `up_to_renaming`, only the
/// lexicographically least formula of each variable-renaming class is kept.
pub fn exhaustive_formulas(n: usize, max_clauses: usize, up_to_renaming: bool) -> Vec<CnfFormula> {
    let clauses = all_clauses(n);
    let mut out = Vec::new();
    let mut idx: Vec<usize> = Vec::new();
    fn rec(
        clauses: &[Clause],
        start: usize,
        left: usize,
        idx: &mut Vec<usize>,
        n: usize,
        up_to_renaming: bool,
        out: &mut Vec<CnfFormula>,
    ) {
        if !idx.is_empty() {
            let chosen: Vec<Clause> = idx.iter().map(|&i| clauses[i]).collect();
            let used: BTreeSet<usize> = chosen.iter().flatten().map(|l| l.var).collect();
            if used.len() == n && (!up_to_renaming || is_canonical(&chosen, n)) {
                out.push(CnfFormula::new(n, chosen).expect("in range"));
            }
        }
        if left == 0 {
            return;
        }
        for i in start..clauses.len() {
            idx.push(i);
            rec(clauses, i, left - 1, idx, n, up_to_renaming, out);
            idx.pop();
        }
    }
    rec(&clauses, 0, max_clauses, &mut idx, n, up_to_renaming, &mut out);
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut v = p.clone();
            v.insert(k, n - 1);
            out.push(v);
        }
    }
    out
}

fn normal_form(clauses: &[Clause], perm: &[usize]) -> Vec<Clause> {
    let mut v: Vec<Clause> = clauses
        .iter()
        .map(|c| {
            let mut c = c.map(|l| Literal {
                var: perm[l.var],
                positive: l.positive,
            });
            c.sort();
            c
        })
        .collect();
    v.sort();
    v
}

fn is_canonical(clauses: &[Clause], n: usize) -> bool {
    let own = normal_form(clauses, &(0..n).collect::<Vec<_>>());
    permutations(n).iter().all(|p| normal_form(clauses, p) >= own)
}
