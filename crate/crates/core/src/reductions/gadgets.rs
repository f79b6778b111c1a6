//! Small fixed networks computing the Boolean-like building blocks of the
//! reductions.
//!
//! Constants `[d·cⁿ]` are literal chains: the first identity node carries
//! bias `d` and no inputs, each of the following `n − 1` nodes reads its
//! predecessor with weight `−c`, and the consumer reads the last one with
//! weight `−c`. For even `n` that yields `d·cⁿ`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::builder::{Builder, Src};
use crate::network::Network;
use crate::rational::{q, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GadgetKind {
    Not,
    Or3,
    AndN(usize),
    BoolEps(Rational),
    BoolRepaired,
    Discrete(Rational, Rational),
    InverseEq(Rational),
    Norm(Rational, Rational),
    NormNot(Rational, Rational),
    OrLeOne(Rational, Rational),
    OrGeqOne(Rational, Rational),
    OrPrime,
    /// `id(d·x₁ + … + d·xₙ)`, the collector of the weight-restricted
    /// construction.
    AndD(usize, Rational),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GadgetError {
    #[error("gadget parameter {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: Rational },
    #[error("and gadget needs at least one input")]
    NoInputs,
}

/// Default ε of the flawed bool gadget.
pub fn default_eps() -> Rational {
    q(1, 10)
}

impl GadgetKind {
    pub fn arity(&self) -> usize {
        match self {
            GadgetKind::Or3 | GadgetKind::OrLeOne(..) | GadgetKind::OrGeqOne(..) | GadgetKind::OrPrime => 3,
            GadgetKind::InverseEq(_) => 2,
            GadgetKind::AndN(n) | GadgetKind::AndD(n, _) => *n,
            _ => 1,
        }
    }

    /// The `(c, d)` pair of the weight-restricted gadgets.
    pub fn restricted_params(&self) -> Option<(Rational, Rational)> {
        match self {
            GadgetKind::Discrete(c, d)
            | GadgetKind::Norm(c, d)
            | GadgetKind::NormNot(c, d)
            | GadgetKind::OrLeOne(c, d)
            | GadgetKind::OrGeqOne(c, d) => Some((c.clone(), d.clone())),
            // d never occurs in this gadget; c stands in so the alphabet
            // check still reads {−c, 0, d}.
            GadgetKind::InverseEq(c) => Some((c.clone(), c.clone())),
            GadgetKind::AndD(_, d) => Some((d.clone(), d.clone())),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), GadgetError> {
        let pos = |name: &'static str, v: &Rational| {
            if v.is_positive() {
                Ok(())
            } else {
                Err(GadgetError::NonPositive { name, value: v.clone() })
            }
        };
        match self {
            GadgetKind::AndN(0) | GadgetKind::AndD(0, _) => return Err(GadgetError::NoInputs),
            GadgetKind::BoolEps(e) => pos("eps", e)?,
            GadgetKind::InverseEq(c) => pos("c", c)?,
            GadgetKind::AndD(_, d) => pos("d", d)?,
            _ => {}
        }
        if let Some((c, d)) = self.restricted_params() {
            pos("c", &c)?;
            pos("d", &d)?;
        }
        Ok(())
    }
}

/// Chain computing the constant `d·(−c)^(len−1)` on layer `end`; the
/// consumer multiplies by a further `−c`.
pub(crate) fn constant_chain(b: &mut Builder, end: usize, len: usize, c: &Rational, d: &Rational) -> Src {
    assert!(len >= 1 && end >= len, "chain of {len} nodes cannot end on layer {end}");
    let start = end + 1 - len;
    let mut s = b.id(start, d.clone(), vec![]);
    for l in start + 1..=end {
        s = b.id(l, Rational::zero(), vec![(s, -c)]);
    }
    s
}

/// Which variant of the restricted or gadget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum OrVariant {
    LeOne,
    GeqOne,
}

/// Restricted or gadget whose ReLU sits on `relu_layer`; the three inputs
/// must be on the layer below. Output is on `relu_layer + 1`.
pub(crate) fn restricted_or(b: &mut Builder, inputs: [Src; 3], relu_layer: usize, variant: OrVariant, c: &Rational, d: &Rational) -> Src {
    let inner_len = match variant {
        OrVariant::LeOne => 4,
        OrVariant::GeqOne => 2,
    };
    let inner = constant_chain(b, relu_layer - 1, inner_len, c, d);
    let mut args: Vec<(Src, Rational)> = inputs.iter().map(|s| (*s, -c)).collect();
    args.push((inner, -c));
    let r = b.relu(relu_layer, Rational::zero(), args);
    let outer = constant_chain(b, relu_layer, 4, c, d);
    b.id(relu_layer + 1, Rational::zero(), vec![(outer, -c), (r, -c)])
}

/// Builds the canonical network of `kind`. Inputs that a gadget reads
/// deeper than its first layer are carried there by weight-one identity
/// nodes; these padding nodes are the only nodes exempt from the
/// `{−c, 0, d}` alphabet of the restricted gadgets.
pub fn make_gadget(kind: &GadgetKind) -> Result<Network, GadgetError> {
    kind.validate()?;
    let (b, out) = build(kind);
    if let Some((c, d)) = kind.restricted_params() {
        let allowed: BTreeSet<Rational> = [-&c, Rational::zero(), d].into_iter().collect();
        let used = core_alphabet(&b, &out);
        assert!(used.is_subset(&allowed), "gadget {kind:?} uses {used:?}");
    }
    Ok(b.finish(&[out]))
}

fn core_alphabet(b: &Builder, out: &Src) -> BTreeSet<Rational> {
    let (net, pos) = b.finish_with_positions(&[*out]);
    let padding: BTreeSet<(usize, usize)> = (0..pos.len()).filter(|&k| b.is_padding(Src::Node(k))).map(|k| pos[k]).collect();
    let mut used = BTreeSet::new();
    for (l, layer) in net.layers().iter().enumerate() {
        for (i, node) in layer.iter().enumerate() {
            if padding.contains(&(l, i)) {
                continue;
            }
            used.insert(node.bias.clone());
            used.extend(node.weights.iter().cloned());
        }
    }
    used
}

fn build(kind: &GadgetKind) -> (Builder, Src) {
    let one = Rational::one;
    let zero = Rational::zero;
    let x = Src::Input;
    let mut b = Builder::new(kind.arity());
    let out = match kind {
        GadgetKind::Not => b.id(1, one(), vec![(x(0), -one())]),
        GadgetKind::Or3 => {
            let r = b.relu(1, one(), (0..3).map(|i| (x(i), -one())).collect());
            b.id(2, one(), vec![(r, -one())])
        }
        GadgetKind::AndN(n) => b.id(1, zero(), (0..*n).map(|i| (x(i), one())).collect()),
        GadgetKind::AndD(n, d) => b.id(1, zero(), (0..*n).map(|i| (x(i), d.clone())).collect()),
        GadgetKind::BoolEps(eps) => {
            let a = b.relu(1, eps.clone(), vec![(x(0), -one())]);
            let c = b.relu(1, eps - &one(), vec![(x(0), one())]);
            b.id(2, zero(), vec![(a, one()), (c, one())])
        }
        GadgetKind::BoolRepaired => {
            let h = q(1, 2);
            let a = b.relu(1, h.clone(), vec![(x(0), -one())]);
            let c = b.relu(1, -&h, vec![(x(0), one())]);
            b.id(2, -h, vec![(a, one()), (c, one())])
        }
        GadgetKind::Discrete(c, d) => {
            let a = b.relu(1, zero(), vec![(x(0), -c)]);
            let e = b.relu(1, zero(), vec![(x(0), d.clone())]);
            b.id(2, d.clone(), vec![(a, -c), (e, -c)])
        }
        GadgetKind::InverseEq(c) => b.id(1, zero(), vec![(x(0), -c), (x(1), -c)]),
        GadgetKind::Norm(c, d) => {
            let r = b.relu(1, zero(), vec![(x(0), -c)]);
            let u = b.id(2, d.clone(), vec![(r, -c)]);
            b.id(3, zero(), vec![(u, -c)])
        }
        GadgetKind::NormNot(c, _) => {
            let u = b.id(1, zero(), vec![(x(0), -c)]);
            let r = b.relu(2, zero(), vec![(u, -c)]);
            b.id(3, zero(), vec![(r, -c)])
        }
        GadgetKind::OrLeOne(c, d) | GadgetKind::OrGeqOne(c, d) => {
            let variant = match kind {
                GadgetKind::OrLeOne(..) => OrVariant::LeOne,
                _ => OrVariant::GeqOne,
            };
            let ins = [0, 1, 2].map(|i| b.pass(x(i), 4));
            restricted_or(&mut b, ins, 5, variant, c, d)
        }
        GadgetKind::OrPrime => {
            let a = b.relu(1, one(), vec![(x(0), -one()), (x(1), -one())]);
            let p = b.pass(x(2), 1);
            let r = b.relu(2, zero(), vec![(a, one()), (p, -one())]);
            b.relu(3, one(), vec![(r, -one())])
        }
    };
    (b, out)
}

/// Evaluates `kind` on `x` through its network.
pub fn eval_gadget(kind: &GadgetKind, x: &[Rational]) -> Result<Rational, GadgetError> {
    let net = make_gadget(kind)?;
    let y = net.eval(x).expect("input length matches gadget arity");
    Ok(y[0].clone())
}
