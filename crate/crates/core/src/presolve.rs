//! Exact instance simplification ahead of the search.
//!
//! Equalities implied by `φ_in` are solved for some of the inputs, which
//! are then substituted into the first layer. Hidden layers are shrunk
//! without changing the function they compute. A witness of the smaller
//! instance maps back to a witness of the original through [`Presolved::lift`].

use crate::network::{Network, Node};
use crate::pwl::PwlFunction;
use crate::rational::Rational;
use crate::spec::{Conjunct, LinearTerm, Namespace, Specification};
use crate::verifier::ReachInstance;

/// A reduced instance together with the affine map `x = P·t + p` from its
/// inputs `t` back to the original inputs `x`.
#[derive(Debug, Clone)]
pub struct Presolved {
    pub instance: ReachInstance,
    map: Vec<(LinearTerm, Rational)>,
}

impl Presolved {
    pub fn lift(&self, t: &[Rational]) -> Vec<Rational> {
        self.map.iter().map(|(term, c)| &term.eval(t) + c).collect()
    }
}

pub fn presolve_instance(inst: &ReachInstance) -> Presolved {
    let n = inst.network.input_dim();
    let identity = || (0..n).map(|i| (LinearTerm::var(i), Rational::zero())).collect();
    let (network, input_spec, map) = match eliminate_equalities(inst) {
        Some((net, spec, map)) => (net, spec, map),
        None => (inst.network.clone(), inst.input_spec.clone(), identity()),
    };
    Presolved {
        instance: ReachInstance {
            network: presolve(&network),
            input_spec,
            output_spec: inst.output_spec.clone(),
        },
        map,
    }
}

/// Equalities `t = b` stated by `φ_in`, either as a pair of opposite
/// conjuncts or as matching lower and upper box bounds.
fn equalities(spec: &Specification, dim: usize) -> Vec<(LinearTerm, Rational)> {
    let mut out = Vec::new();
    let cs = &spec.conjuncts;
    for (i, a) in cs.iter().enumerate() {
        if a.term.len() < 2 {
            continue;
        }
        let neg = a.term.negate();
        if cs[i + 1..].iter().any(|b| b.term == neg && b.bound == -&a.bound) {
            out.push((a.term.clone(), a.bound.clone()));
        }
    }
    for (i, (lo, hi)) in spec.box_bounds(dim).into_iter().enumerate() {
        if let (Some(lo), Some(hi)) = (lo, hi) {
            if lo == hi {
                out.push((LinearTerm::var(i), lo));
            }
        }
    }
    out
}

type Substitution = Vec<Option<(LinearTerm, Rational)>>;

fn substitute(term: &LinearTerm, constant: &Rational, sub: &Substitution) -> (LinearTerm, Rational) {
    let mut t = LinearTerm::new();
    let mut c = constant.clone();
    for (i, a) in term.iter() {
        match &sub[i] {
            Some((s, k)) => {
                t.add_scaled(s, a);
                c += &(k * a);
            }
            None => t.add(i, a),
        }
    }
    (t, c)
}

/// Reduced network, reduced input specification and the affine map back.
type Eliminated = (Network, Specification, Vec<(LinearTerm, Rational)>);

/// Gaussian elimination on the equalities of `φ_in`. Returns `None` when
/// nothing is eliminated, when every input would go, or when the
/// equalities are contradictory (the search then finds that out itself).
fn eliminate_equalities(inst: &ReachInstance) -> Option<Eliminated> {
    let n = inst.network.input_dim();
    let mut sub: Substitution = vec![None; n];
    for (term, bound) in equalities(&inst.input_spec, n) {
        // term = bound, i.e. term + (−bound) = 0
        let (t, c) = substitute(&term, &-&bound, &sub);
        let Some(p) = t.max_var() else {
            if c.is_zero() {
                continue;
            }
            return None;
        };
        // x_p = −(rest + c) / a_p
        let a = t.get(p).expect("pivot present").clone();
        let mut rest = t.clone();
        rest.add(p, &-&a);
        let k = -&(Rational::one() / &a);
        let expr = (rest.scale(&k), &c * &k);
        for s in sub.iter_mut().flatten() {
            if let Some(coef) = s.0.get(p).cloned() {
                let mut term = s.0.clone();
                term.add(p, &-&coef);
                term.add_scaled(&expr.0, &coef);
                s.1 += &(&expr.1 * &coef);
                s.0 = term;
            }
        }
        sub[p] = Some(expr);
    }
    let free: Vec<usize> = (0..n).filter(|&i| sub[i].is_none()).collect();
    if free.len() == n || free.is_empty() {
        return None;
    }
    let mut renumber = vec![usize::MAX; n];
    for (j, &i) in free.iter().enumerate() {
        renumber[i] = j;
    }
    let map: Vec<(LinearTerm, Rational)> = (0..n)
        .map(|i| match &sub[i] {
            Some((t, c)) => (t.remap(|v| renumber[v]), c.clone()),
            None => (LinearTerm::var(renumber[i]), Rational::zero()),
        })
        .collect();

    let mut layers = inst.network.layers().to_vec();
    for node in &mut layers[0] {
        let mut weights = vec![Rational::zero(); free.len()];
        let mut bias = node.bias.clone();
        for (w, (t, c)) in node.weights.iter().zip(&map) {
            if w.is_zero() {
                continue;
            }
            for (j, a) in t.iter() {
                weights[j] += &(a * w);
            }
            bias += &(c * w);
        }
        node.weights = weights;
        node.bias = bias;
    }
    let network = Network::new(free.len(), layers).expect("first layer rewritten to the reduced inputs");

    let mut spec = Specification::new(Namespace::Input);
    for cj in &inst.input_spec.conjuncts {
        let (t, c) = substitute(&cj.term, &Rational::zero(), &sub);
        let bound = &cj.bound - &c;
        if t.is_empty() && !bound.is_negative() {
            continue;
        }
        spec.conjuncts.push(Conjunct {
            term: t.remap(|v| renumber[v]),
            bound,
        });
    }
    Some((network, spec, map))
}

/// Rewrites hidden layers without changing the function computed:
/// constant nodes are folded into the next layer's biases, duplicate nodes
/// are merged, nodes no later layer reads are dropped, and a pair
/// `ReLU(a)`, `ReLU(−a)` read only through `ReLU(a) − ReLU(−a)` becomes the
/// single node `id(a)`.
pub fn presolve(net: &Network) -> Network {
    let mut layers: Vec<Vec<Node>> = net.layers().to_vec();
    let last = layers.len() - 1;
    loop {
        let mut changed = false;
        for l in 0..last {
            let mut j = 0;
            while j < layers[l].len() {
                let Some(kind) = reducible(&layers[l], &layers[l + 1], j) else {
                    j += 1;
                    continue;
                };
                let (cur, next) = layers.split_at_mut(l + 1);
                let (cur, next) = (&mut cur[l], &mut next[0]);
                let value = cur[j].activation.eval(&cur[j].bias);
                for node in next.iter_mut() {
                    let wj = node.weights.remove(j);
                    match kind {
                        Reduce::Constant => node.bias += &(&wj * &value),
                        Reduce::Twin(i) => {
                            // index of the partner once column j is gone
                            let i = if i > j { i - 1 } else { i };
                            node.weights[i] += &wj;
                        }
                        Reduce::Dead | Reduce::Mirror(_) => {}
                    }
                }
                if let Reduce::Mirror(i) = kind {
                    cur[i].activation = PwlFunction::identity();
                }
                cur.remove(j);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Network::new(net.input_dim(), layers).expect("presolve keeps widths consistent")
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Reduce {
    Constant,
    Dead,
    Twin(usize),
    Mirror(usize),
}

/// Whether node `j` of `layer` can be removed, and how.
fn reducible(layer: &[Node], next: &[Node], j: usize) -> Option<Reduce> {
    if layer.len() == 1 {
        return None;
    }
    let nj = &layer[j];
    if nj.weights.iter().all(Rational::is_zero) {
        return Some(Reduce::Constant);
    }
    if next.iter().all(|n| n.weights[j].is_zero()) {
        return Some(Reduce::Dead);
    }
    for (i, ni) in layer.iter().enumerate() {
        if i == j {
            continue;
        }
        if ni == nj {
            return Some(Reduce::Twin(i));
        }
        let mirrored = ni.activation.is_relu()
            && nj.activation.is_relu()
            && ni.bias == -&nj.bias
            && ni.weights.iter().zip(&nj.weights).all(|(a, b)| *a == -b)
            && next.iter().all(|n| n.weights[i] == -&n.weights[j]);
        if mirrored {
            return Some(Reduce::Mirror(i));
        }
    }
    None
}
