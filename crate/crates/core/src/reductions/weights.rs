//! Reductions whose weights and biases come from `{−c, 0, d}` and `{−c, c}`.

use std::collections::{BTreeMap, BTreeSet};

use super::builder::{Builder, Src};
use super::gadgets::{restricted_or, OrVariant};
use super::{require_positive, CnfFormula, GeneratedInstance, InputEncoding, NameMap, ReductionError, ReductionParams, ReductionTag};
use crate::network::{Network, Node};
use crate::pwl::PwlFunction;
use crate::rational::{q, qi, Rational};
use crate::spec::{LinearTerm, Namespace, Specification};
use crate::verifier::ReachInstance;

/// Appends `count` identity nodes that each read the previous one with
/// weight `−c`.
fn neg_c_chain(b: &mut Builder, mut s: Src, count: usize, c: &Rational) -> Src {
    for _ in 0..count {
        let l = b.layer_of(s) + 1;
        s = b.id(l, Rational::zero(), vec![(s, -c)]);
    }
    s
}

/// The network `N_{ψ,c,d}`: outputs `z_i` (discrete gadgets), optionally
/// `e_i` (inverse-equality gadgets), then `y`. Inputs are `x_i` at `i` and
/// `x̄_i` at `n + i`. Every output sits on stored layer 7, so the depth
/// including the input layer is eight.
fn restricted_network(phi: &CnfFormula, c: &Rational, d: &Rational, with_e: bool) -> Network {
    let n = phi.num_vars();
    let mut b = Builder::new(2 * n);
    let x = Src::Input;
    let mut outputs = Vec::new();
    for i in 0..n {
        let a = b.relu(1, Rational::zero(), vec![(x(i), -c)]);
        let e = b.relu(1, Rational::zero(), vec![(x(i), d.clone())]);
        let disc = b.id(2, d.clone(), vec![(a, -c), (e, -c)]);
        outputs.push(neg_c_chain(&mut b, disc, 5, c));
    }
    if with_e {
        for i in 0..n {
            let inv = b.id(1, Rational::zero(), vec![(x(i), -c), (x(n + i), -c)]);
            outputs.push(neg_c_chain(&mut b, inv, 6, c));
        }
    }
    let variant = if *c >= Rational::one() { OrVariant::GeqOne } else { OrVariant::LeOne };
    let mut ors = Vec::with_capacity(phi.num_clauses());
    for clause in phi.clauses() {
        let fs = clause.map(|lit| {
            let f = if lit.positive {
                let r = b.relu(1, Rational::zero(), vec![(x(lit.var), -c)]);
                let u = b.id(2, d.clone(), vec![(r, -c)]);
                b.id(3, Rational::zero(), vec![(u, -c)])
            } else {
                let u = b.id(1, Rational::zero(), vec![(x(n + lit.var), -c)]);
                let r = b.relu(2, Rational::zero(), vec![(u, -c)]);
                b.id(3, Rational::zero(), vec![(r, -c)])
            };
            // id(f) carries the or-gadget input weight −c, so a satisfied
            // literal arrives as d·c² rather than −d·c.
            b.id(4, Rational::zero(), vec![(f, -c)])
        });
        ors.push(restricted_or(&mut b, fs, 5, variant, c, d));
    }
    outputs.push(b.id(7, Rational::zero(), ors.iter().map(|&o| (o, d.clone())).collect()));
    b.finish(&outputs)
}

fn literal_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).chain((0..n).map(|i| format!("xbar{i}"))).collect()
}

/// Weights and biases in `{−c, 0, d}`, simple specifications:
/// `φ_in = ⊤` and `φ_out = ⋀ z_i = 0 ∧ e_i = 0 ∧ y = m·d²·c⁴`.
pub fn reduce_restricted_weights(phi: &CnfFormula, c: &Rational, d: &Rational) -> Result<GeneratedInstance, ReductionError> {
    require_positive("c", c)?;
    require_positive("d", d)?;
    let n = phi.num_vars();
    let net = restricted_network(phi, c, d, true);
    let allowed: BTreeSet<Rational> = [-c, Rational::zero(), d.clone()].into_iter().collect();
    assert!(net.weight_alphabet().is_subset(&allowed), "alphabet {:?}", net.weight_alphabet());
    assert_eq!(net.depth(), 8);

    let target = qi(phi.num_clauses() as i64) * d * d * c.pow(4);
    let mut out_spec = Specification::new(Namespace::Output);
    for v in 0..2 * n {
        out_spec.push_eq(LinearTerm::var(v), Rational::zero());
    }
    out_spec.push_eq(LinearTerm::var(2 * n), target);
    let outputs = (0..n)
        .map(|i| format!("z{i}"))
        .chain((0..n).map(|i| format!("e{i}")))
        .chain(["y".to_string()])
        .collect();
    Ok(GeneratedInstance {
        instance: ReachInstance::new(net, Specification::top(Namespace::Input), out_spec).expect("spec fits"),
        names: NameMap {
            inputs: literal_names(n),
            outputs,
        },
        tag: ReductionTag::Weights,
        params: ReductionParams {
            c: Some(c.clone()),
            d: Some(d.clone()),
        },
        encoding: InputEncoding {
            true_value: c.recip(),
            false_value: -(d / &(c * c)),
            mirrored: true,
            fixed: Vec::new(),
        },
    })
}

/// Value of the bias input whose chain makes a node on layer `layer`
/// (1-based) behave as if its bias were `2^layer · bias`.
///
/// The node keeps bias `c` and reads the chain end and its copy with weight
/// `c`, so the chain must end at `e = (2^layer·bias − c)/(2c)`. A chain
/// node computes `2c·v + c` from its predecessor `v` (its first node from
/// the input pair `x, −x`), so each step back solves `v = (e − c)/(2c)`.
/// For `layer = 1` there is no chain and the node reads the pair directly.
pub fn bias_chain_input(layer: usize, bias: &Rational, c: &Rational) -> Rational {
    if layer == 1 {
        // c + 2c·x = 0 for a zero bias; the sign flips for bias c.
        return q(-1, 2);
    }
    let two_c = qi(2) * c;
    let mut v = (qi(2).pow(layer as u32) * bias - c) / &two_c;
    for _ in 0..layer - 1 {
        v = (v - c) / &two_c;
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Base {
    Orig(usize),
    /// Node `step` (1-based, also its layer) of the chain for pair `pair`.
    Chain { pair: usize, step: usize },
}

/// Weights and biases in `{−c, c}` with the non-simple input specification
/// `⋀ x_i + x̄_i = 0` plus fixed values for the bias inputs.
///
/// Starting from `N_{ψ,c,c}` without the `e_i` outputs:
/// * every hidden node gets a copy with the same inputs;
/// * a zero weight from `u` becomes `c` on `u` and `−c` on its copy, a
///   weight `w` becomes `w` on both; on the first layer the pair `x, x̄`
///   plays the role of node and copy with signs adjusted;
/// * every bias becomes `c`, and an input pair feeding a chain of identity
///   nodes corrects it to `2^l` times the original bias.
///
/// All pre-activations on layer `l` are `2^l` times the original, so
/// `y = 2⁷·m·c⁶`.
pub fn reduce_no_zero(phi: &CnfFormula, c: &Rational) -> Result<GeneratedInstance, ReductionError> {
    require_positive("c", c)?;
    let n = phi.num_vars();
    let orig = restricted_network(phi, c, c, false);
    let layers = orig.layers();
    let depth = layers.len();
    assert_eq!(depth, 7);

    // Pair 0 serves the first layer directly; later pairs feed chains keyed
    // by (target layer, original bias).
    let mut chain_pairs: BTreeMap<(usize, Rational), usize> = BTreeMap::new();
    for (l0, layer) in layers.iter().enumerate() {
        let l = l0 + 1;
        for node in layer {
            if l == 1 {
                assert!(node.bias.is_zero() || node.bias == *c, "first-layer bias {}", node.bias);
            } else {
                let next = chain_pairs.len() + 1;
                chain_pairs.entry((l, node.bias.clone())).or_insert(next);
            }
        }
    }
    let mut pair_values = vec![Rational::zero(); chain_pairs.len() + 1];
    let mut pair_names = vec![String::new(); chain_pairs.len() + 1];
    pair_values[0] = bias_chain_input(1, &Rational::zero(), c);
    pair_names[0] = "xbias1".into();
    for ((l, bias), &p) in &chain_pairs {
        pair_values[p] = bias_chain_input(*l, bias, c);
        pair_names[p] = if bias.is_zero() { format!("xbias{l}") } else { format!("xbias{l}_{p}") };
    }
    let num_pairs = n + pair_values.len();
    let pair_cols = |p: usize| -> (usize, usize) {
        if p < n {
            (p, n + p)
        } else {
            let k = p - n;
            (2 * n + 2 * k, 2 * n + 2 * k + 1)
        }
    };
    let input_dim = 2 * n + 2 * pair_values.len();

    // Base nodes of every layer: originals, then chain nodes living there.
    let chain_of: BTreeMap<usize, usize> = chain_pairs.iter().map(|((l, _), &p)| (p, *l)).collect();
    let base: Vec<Vec<Base>> = (1..=depth)
        .map(|l| {
            let mut v: Vec<Base> = (0..layers[l - 1].len()).map(Base::Orig).collect();
            for (&pair, &target) in &chain_of {
                if l < target {
                    v.push(Base::Chain { pair, step: l });
                }
            }
            v
        })
        .collect();
    let pos: Vec<BTreeMap<Base, usize>> = base
        .iter()
        .map(|v| v.iter().enumerate().map(|(i, b)| (*b, i)).collect())
        .collect();

    let mut new_layers: Vec<Vec<Node>> = Vec::with_capacity(depth);
    for l in 1..=depth {
        let mut nodes = Vec::with_capacity(2 * base[l - 1].len());
        for b in &base[l - 1] {
            let activation = match b {
                Base::Orig(i) => layers[l - 1][*i].activation.clone(),
                Base::Chain { .. } => PwlFunction::identity(),
            };
            let weights = if l == 1 {
                let mut w = vec![Rational::zero(); input_dim];
                for p in 0..num_pairs {
                    let (a, abar) = pair_cols(p);
                    let (wa, wb) = match b {
                        Base::Orig(i) if p < n => {
                            let node = &layers[0][*i];
                            let (wx, wxbar) = (&node.weights[a], &node.weights[abar]);
                            match (wx.is_zero(), wxbar.is_zero()) {
                                (true, true) => (c.clone(), c.clone()),
                                (false, true) => (wx.clone(), -wx),
                                (true, false) => (-wxbar, wxbar.clone()),
                                (false, false) => panic!("node reads both x{p} and its mirror"),
                            }
                        }
                        Base::Orig(i) if p == n => {
                            if layers[0][*i].bias.is_zero() {
                                (c.clone(), -c)
                            } else {
                                (-c, c.clone())
                            }
                        }
                        Base::Chain { pair, .. } if p == n + pair => (c.clone(), -c),
                        _ => (c.clone(), c.clone()),
                    };
                    w[a] = wa;
                    w[abar] = wb;
                }
                w
            } else {
                // Weights over the base nodes of the previous layer.
                let prev = &base[l - 2];
                let mut virt = vec![Rational::zero(); prev.len()];
                match b {
                    Base::Orig(i) => {
                        let node = &layers[l - 1][*i];
                        for (j, w) in node.weights.iter().enumerate() {
                            virt[pos[l - 2][&Base::Orig(j)]] = w.clone();
                        }
                        let pair = chain_pairs[&(l, node.bias.clone())];
                        virt[pos[l - 2][&Base::Chain { pair, step: l - 1 }]] = c.clone();
                    }
                    Base::Chain { pair, step } => {
                        virt[pos[l - 2][&Base::Chain { pair: *pair, step: step - 1 }]] = c.clone();
                    }
                }
                let mut w = Vec::with_capacity(2 * prev.len());
                let copies: Vec<Rational> = virt.iter().map(|v| if v.is_zero() { -c } else { v.clone() }).collect();
                w.extend(virt.iter().map(|v| if v.is_zero() { c.clone() } else { v.clone() }));
                w.extend(copies);
                w
            };
            nodes.push(Node::new(weights, c.clone(), activation));
        }
        if l < depth {
            let copies = nodes.clone();
            nodes.extend(copies);
        }
        new_layers.push(nodes);
    }
    let net = Network::new(input_dim, new_layers).expect("well-formed");
    let alphabet = net.weight_alphabet();
    assert_eq!(alphabet, [-c, c.clone()].into_iter().collect::<BTreeSet<_>>());

    let mut in_spec = Specification::new(Namespace::Input);
    for p in 0..num_pairs {
        let (a, abar) = pair_cols(p);
        in_spec.push_eq(LinearTerm::from_pairs([(a, qi(1)), (abar, qi(1))]), Rational::zero());
        if p >= n {
            in_spec.push_eq(LinearTerm::var(a), pair_values[p - n].clone());
        }
    }
    assert!(!in_spec.is_simple());
    let target = qi(2).pow(depth as u32) * qi(phi.num_clauses() as i64) * c.pow(6);
    let mut out_spec = Specification::new(Namespace::Output);
    for v in 0..n {
        out_spec.push_eq(LinearTerm::var(v), Rational::zero());
    }
    out_spec.push_eq(LinearTerm::var(n), target);

    let mut inputs = literal_names(n);
    for name in &pair_names {
        inputs.push(name.clone());
        inputs.push(format!("{name}bar"));
    }
    let outputs = (0..n).map(|i| format!("z{i}")).chain(["y".to_string()]).collect();
    let fixed = pair_values.iter().flat_map(|v| [v.clone(), -v]).collect();
    Ok(GeneratedInstance {
        instance: ReachInstance::new(net, in_spec, out_spec).expect("spec fits"),
        names: NameMap { inputs, outputs },
        tag: ReductionTag::Nozero,
        params: ReductionParams {
            c: Some(c.clone()),
            d: None,
        },
        encoding: InputEncoding {
            true_value: c.recip(),
            false_value: -c.recip(),
            mirrored: true,
            fixed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_formula() -> CnfFormula {
        CnfFormula::from_dimacs_clauses(4, &[[1, 2, 3], [-1, 2, -3], [-2, 3, 4]]).unwrap()
    }

    #[test]
    fn zero_bias_inputs_match_closed_form() {
        for c in [qi(1), qi(2), q(1, 2), q(3, 2)] {
            for i in 1..=7usize {
                let mut expected = Rational::zero();
                for j in 0..i {
                    expected -= &(qi(2).pow(j as u32 + 1) * c.pow(j as u32)).recip();
                }
                assert_eq!(bias_chain_input(i, &Rational::zero(), &c), expected, "c = {c}, i = {i}");
            }
        }
    }

    #[test]
    fn restricted_canonical_inputs() {
        let phi = example_formula();
        for (c, d) in [(qi(1), qi(1)), (q(3, 2), qi(2)), (q(1, 2), q(1, 3))] {
            let g = reduce_restricted_weights(&phi, &c, &d).unwrap();
            assert_eq!(g.instance.network.input_dim(), 8);
            assert_eq!(g.instance.network.output_dim(), 9);
            let x = g.encode(&[true, true, true, true]);
            let y = g.instance.network.eval(&x).unwrap();
            assert!(y[..8].iter().all(Rational::is_zero));
            assert_eq!(y[8], qi(3) * &d * &d * c.pow(4));
            assert!(g.instance.check_witness(&x).unwrap());
            // (x0 ∨ x1 ∨ x2) fails when everything is false.
            assert!(!g.instance.check_witness(&g.encode(&[false; 4])).unwrap());
        }
    }

    #[test]
    fn no_zero_canonical_inputs() {
        let phi = example_formula();
        for c in [qi(1), qi(2), q(1, 2)] {
            let g = reduce_no_zero(&phi, &c).unwrap();
            let x = g.encode(&[true; 4]);
            assert!(g.instance.input_spec.check(&x));
            let y = g.instance.network.eval(&x).unwrap();
            assert!(y[..4].iter().all(Rational::is_zero), "{y:?}");
            assert_eq!(y[4], qi(128) * qi(3) * c.pow(6));
            assert!(!g.instance.check_witness(&g.encode(&[false; 4])).unwrap());
        }
    }

    #[test]
    fn bad_parameters() {
        let phi = example_formula();
        assert!(reduce_restricted_weights(&phi, &qi(0), &qi(1)).is_err());
        assert!(reduce_no_zero(&phi, &qi(-1)).is_err());
    }
}
