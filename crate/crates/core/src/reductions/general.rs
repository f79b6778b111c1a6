//! Reductions with weights in `{−1, 0, 1/2, 1}`.

use super::builder::{Builder, Src};
use super::{CnfFormula, GeneratedInstance, InputEncoding, Literal, NameMap, ReductionParams, ReductionTag};
use crate::rational::{q, qi, Rational};
use crate::spec::{LinearTerm, Namespace, Specification};
use crate::verifier::ReachInstance;

fn input_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn zero_one_box(n: usize) -> Specification {
    let mut s = Specification::new(Namespace::Input);
    for i in 0..n {
        s.push_bounds(i, qi(0), qi(1));
    }
    s
}

fn eq_zero(s: &mut Specification, vars: impl IntoIterator<Item = usize>) {
    for v in vars {
        s.push_eq(LinearTerm::var(v), Rational::zero());
    }
}

fn finish(
    b: &Builder,
    outputs: &[Src],
    input_spec: Specification,
    output_spec: Specification,
    names: NameMap,
    tag: ReductionTag,
) -> GeneratedInstance {
    let net = b.finish(outputs);
    assert!(input_spec.is_simple() && output_spec.is_simple(), "{tag} specifications must be simple");
    GeneratedInstance {
        instance: ReachInstance::new(net, input_spec, output_spec).expect("specification fits the network"),
        names,
        tag,
        params: ReductionParams::default(),
        encoding: InputEncoding::zero_one(),
    }
}

/// `ReLU(1/2 − x)` and `ReLU(x − 1/2)` on layer 1.
fn bool_pair(b: &mut Builder, var: usize) -> (Src, Src) {
    let h = q(1, 2);
    let lo = b.relu(1, h.clone(), vec![(Src::Input(var), qi(-1))]);
    let hi = b.relu(1, -h, vec![(Src::Input(var), qi(1))]);
    (lo, hi)
}

/// Literal value on layer 1: a padding identity for a positive literal, a
/// not gadget for a negative one.
fn literal_node(b: &mut Builder, lit: Literal) -> Src {
    let x = Src::Input(lit.var);
    if lit.positive {
        b.pass(x, 1)
    } else {
        b.id(1, qi(1), vec![(x, qi(-1))])
    }
}

/// Bool-repaired gadgets per variable, a not gadget or padding node per
/// literal, an or gadget per clause and an and gadget collecting them.
/// Outputs are `z_0, …, z_{n−1}, y`.
pub fn reduce_general(phi: &CnfFormula) -> GeneratedInstance {
    let n = phi.num_vars();
    let m = phi.num_clauses();
    let mut b = Builder::new(n);
    let pairs: Vec<(Src, Src)> = (0..n).map(|i| bool_pair(&mut b, i)).collect();
    let lits: Vec<[Src; 3]> = phi.clauses().iter().map(|c| c.map(|l| literal_node(&mut b, l))).collect();

    let bools: Vec<Src> = pairs
        .iter()
        .map(|&(lo, hi)| b.id(2, q(-1, 2), vec![(lo, qi(1)), (hi, qi(1))]))
        .collect();
    let relus: Vec<Src> = lits
        .iter()
        .map(|ls| b.relu(2, qi(1), ls.iter().map(|&s| (s, qi(-1))).collect()))
        .collect();

    let bools: Vec<Src> = bools.into_iter().map(|s| b.pass(s, 3)).collect();
    let ors: Vec<Src> = relus.into_iter().map(|r| b.id(3, qi(1), vec![(r, qi(-1))])).collect();

    let mut outputs: Vec<Src> = bools.into_iter().map(|s| b.pass(s, 4)).collect();
    outputs.push(b.id(4, qi(0), ors.iter().map(|&o| (o, qi(1))).collect()));

    let mut out_spec = Specification::new(Namespace::Output);
    eq_zero(&mut out_spec, 0..n);
    out_spec.push_eq(LinearTerm::var(n), qi(m as i64));
    let mut out_names: Vec<String> = (0..n).map(|i| format!("z{i}")).collect();
    out_names.push("y".into());
    let names = NameMap {
        inputs: input_names(n),
        outputs: out_names,
    };
    finish(&b, &outputs, Specification::top(Namespace::Input), out_spec, names, ReductionTag::General)
}

/// One hidden layer of `2n + m` ReLUs: the two halves of every bool-repaired
/// gadget and one merged not/or ReLU per clause, summed into a single
/// identity output.
pub fn reduce_single_layer(phi: &CnfFormula) -> GeneratedInstance {
    let n = phi.num_vars();
    let mut b = Builder::new(n);
    let mut sum: Vec<(Src, Rational)> = Vec::with_capacity(2 * n + phi.num_clauses());
    for i in 0..n {
        let (lo, hi) = bool_pair(&mut b, i);
        sum.push((lo, qi(1)));
        sum.push((hi, qi(1)));
    }
    for clause in phi.clauses() {
        // 1 − Σ f(x) with f(x) = x for positive and 1 − x for negative literals.
        let negatives = clause.iter().filter(|l| !l.positive).count() as i64;
        let inputs = clause
            .iter()
            .map(|l| (Src::Input(l.var), if l.positive { qi(-1) } else { qi(1) }))
            .collect();
        let r = b.relu(1, qi(1 - negatives), inputs);
        sum.push((r, qi(-1)));
    }
    let y = b.id(2, qi(0), sum);

    let out_spec = Specification::new(Namespace::Output).with_eq(LinearTerm::var(0), q(n as i64, 2));
    let names = NameMap {
        inputs: input_names(n),
        outputs: vec!["y".into()],
    };
    let g = finish(&b, &[y], zero_one_box(n), out_spec, names, ReductionTag::SingleLayer);
    assert_eq!(g.instance.network.widths(), vec![2 * n + phi.num_clauses(), 1]);
    g
}

/// Clause sums instead of or gadgets and no and gadget. Outputs are
/// `y_0, …, y_{m−1}, z` with `φ_out = ⋀ y_j ≥ 1 ∧ z = 0`.
///
/// The input specification is the box `0 ≤ x_i ≤ 1`. Without it a negative
/// input makes a bool-repaired gadget positive, which can cancel a negative
/// one elsewhere in the sum `z`.
pub fn reduce_fanin1(phi: &CnfFormula) -> GeneratedInstance {
    let n = phi.num_vars();
    let m = phi.num_clauses();
    let mut b = Builder::new(n);
    let pairs: Vec<(Src, Src)> = (0..n).map(|i| bool_pair(&mut b, i)).collect();
    let lits: Vec<[Src; 3]> = phi.clauses().iter().map(|c| c.map(|l| literal_node(&mut b, l))).collect();

    let bools: Vec<Src> = pairs
        .iter()
        .map(|&(lo, hi)| b.id(2, q(-1, 2), vec![(lo, qi(1)), (hi, qi(1))]))
        .collect();
    let sums: Vec<Src> = lits
        .iter()
        .map(|ls| b.id(2, qi(0), ls.iter().map(|&s| (s, qi(1))).collect()))
        .collect();

    let mut outputs: Vec<Src> = sums.into_iter().map(|s| b.id(3, qi(0), vec![(s, qi(1))])).collect();
    outputs.push(b.id(3, qi(0), bools.iter().map(|&s| (s, qi(1))).collect()));

    let mut out_spec = Specification::new(Namespace::Output);
    for j in 0..m {
        out_spec.push_ge(LinearTerm::var(j), qi(1));
    }
    out_spec.push_eq(LinearTerm::var(m), qi(0));
    let mut out_names: Vec<String> = (0..m).map(|j| format!("y{j}")).collect();
    out_names.push("z".into());
    let names = NameMap {
        inputs: input_names(n),
        outputs: out_names,
    };
    let g = finish(&b, &outputs, zero_one_box(n), out_spec, names, ReductionTag::Fanin1);
    for node in g.instance.network.layers().iter().flatten() {
        if node.activation.is_relu() {
            assert!(node.fan_in() <= 1, "ReLU with fan-in {}", node.fan_in());
        }
    }
    g
}

fn relu_pass(b: &mut Builder, s: Src) -> Src {
    let l = b.layer_of(s) + 1;
    b.relu(l, qi(0), vec![(s, qi(1))])
}

/// Pure ReLU network with at most two non-zero inputs per node.
///
/// Per clause `(l₁ ∨ l₂ ∨ l₃)` the adjusted or gadget
/// `ReLU(1 − ReLU(ReLU(1 − l₁ − l₂) − ReLU(l₃)))` is built with the literal
/// negations folded into weights and biases. Each bool-repaired gadget is
/// split into `ReLU(h₁ + h₂ − 1/2)` and `ReLU(1/2 − h₁ − h₂)`, and the or
/// outputs are summed by a binary tree. Outputs are
/// `zp_0, zn_0, …, zp_{n−1}, zn_{n−1}, y`.
pub fn reduce_fanin2(phi: &CnfFormula) -> GeneratedInstance {
    let n = phi.num_vars();
    let m = phi.num_clauses();
    let mut b = Builder::new(n);
    let pairs: Vec<(Src, Src)> = (0..n).map(|i| bool_pair(&mut b, i)).collect();

    // −l as (weight on x, constant).
    let neg_lit = |l: &Literal| if l.positive { (qi(-1), qi(0)) } else { (qi(1), qi(-1)) };
    let mut clause_nodes = Vec::with_capacity(m);
    for clause in phi.clauses() {
        let (w1, c1) = neg_lit(&clause[0]);
        let (w2, c2) = neg_lit(&clause[1]);
        let a = b.relu(1, qi(1) + c1 + c2, vec![(Src::Input(clause[0].var), w1), (Src::Input(clause[1].var), w2)]);
        let (w3, c3) = neg_lit(&clause[2]);
        let p = b.relu(1, -c3, vec![(Src::Input(clause[2].var), -w3)]);
        clause_nodes.push((a, p));
    }

    let h = q(1, 2);
    let mut zs: Vec<Src> = Vec::with_capacity(2 * n);
    for &(lo, hi) in &pairs {
        zs.push(b.relu(2, -&h, vec![(lo, qi(1)), (hi, qi(1))]));
        zs.push(b.relu(2, h.clone(), vec![(lo, qi(-1)), (hi, qi(-1))]));
    }
    let diffs: Vec<Src> = clause_nodes
        .iter()
        .map(|&(a, p)| b.relu(2, qi(0), vec![(a, qi(1)), (p, qi(-1))]))
        .collect();

    let mut level: Vec<Src> = diffs.into_iter().map(|d| b.relu(3, qi(1), vec![(d, qi(-1))])).collect();
    zs = zs.into_iter().map(|z| relu_pass(&mut b, z)).collect();
    while level.len() > 1 {
        let l = b.layer_of(level[0]) + 1;
        level = level
            .chunks(2)
            .map(|pair| b.relu(l, qi(0), pair.iter().map(|&s| (s, qi(1))).collect()))
            .collect();
        zs = zs.into_iter().map(|z| relu_pass(&mut b, z)).collect();
    }

    let mut outputs = zs;
    outputs.push(level[0]);
    let mut out_spec = Specification::new(Namespace::Output);
    eq_zero(&mut out_spec, 0..2 * n);
    out_spec.push_eq(LinearTerm::var(2 * n), qi(m as i64));
    let mut out_names: Vec<String> = (0..n).flat_map(|i| [format!("zp{i}"), format!("zn{i}")]).collect();
    out_names.push("y".into());
    let names = NameMap {
        inputs: input_names(n),
        outputs: out_names,
    };
    let g = finish(&b, &outputs, Specification::top(Namespace::Input), out_spec, names, ReductionTag::Fanin2);
    for node in g.instance.network.layers().iter().flatten() {
        assert!(node.activation.is_relu(), "identity node in fan-in-two network");
        assert!(node.fan_in() <= 2, "node with fan-in {}", node.fan_in());
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qi;

    fn example_formula() -> CnfFormula {
        CnfFormula::from_dimacs_clauses(4, &[[1, 2, 3], [-1, 2, -3], [-2, 3, 4]]).unwrap()
    }

    fn bools(bits: u32, n: usize) -> Vec<bool> {
        (0..n).map(|i| bits >> i & 1 == 1).collect()
    }

    #[test]
    fn general_example_shape() {
        let g = reduce_general(&example_formula());
        let net = &g.instance.network;
        assert_eq!(net.input_dim(), 4);
        assert_eq!(net.output_dim(), 5);
        assert_eq!(net.depth(), 5);
        assert_eq!(g.instance.output_spec.to_text(Some(&g.names.outputs)).lines().last(), Some("y == 3"));
    }

    #[test]
    fn grid_matches_formula() {
        let phi = example_formula();
        for g in [
            reduce_general(&phi),
            reduce_single_layer(&phi),
            reduce_fanin1(&phi),
            reduce_fanin2(&phi),
        ] {
            for bits in 0..16 {
                let a = bools(bits, 4);
                let x = g.encode(&a);
                assert_eq!(g.instance.check_witness(&x).unwrap(), phi.is_satisfied_by(&a), "{} at {a:?}", g.tag);
            }
        }
    }

    #[test]
    fn single_layer_interior_point_misses() {
        let g = reduce_single_layer(&example_formula());
        let y = g.instance.network.eval(&[qi(1), q(1, 3), qi(1), qi(1)]).unwrap();
        assert!(y[0] < qi(2));
    }

    #[test]
    fn fanin1_needs_the_box() {
        // Unsatisfiable, yet x = (1/2, −1/2) meets the output specification.
        let phi = CnfFormula::from_dimacs_clauses(2, &[[1, 1, 1], [-1, -1, -1], [-2, 1, 1]]).unwrap();
        let g = reduce_fanin1(&phi);
        let x = [q(1, 2), q(-1, 2)];
        let y = g.instance.network.eval(&x).unwrap();
        assert!(g.instance.output_spec.check(&y));
        assert!(!g.instance.input_spec.check(&x));
    }

    #[test]
    fn fanin2_tree_depths() {
        for m in 1..6i64 {
            let clauses: Vec<[i64; 3]> = (0..m).map(|_| [1, -2, 1]).collect();
            let g = reduce_fanin2(&CnfFormula::from_dimacs_clauses(2, &clauses).unwrap());
            let expected = 4 + (m as f64).log2().ceil() as usize;
            assert_eq!(g.instance.network.depth(), expected, "m = {m}");
        }
    }
}
