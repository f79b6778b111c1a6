//! Layered network assembly from named sources.
//!
//! Nodes are created with an explicit layer and a list of weighted sources
//! that must all sit on the layer directly below. [`Builder::pass`] pads a
//! source up to a later layer with weight-one identity nodes.

use std::collections::BTreeSet;

use crate::network::{Network, Node};
use crate::pwl::PwlFunction;
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Src {
    Input(usize),
    Node(usize),
}

#[derive(Debug, Clone)]
struct Pending {
    layer: usize,
    bias: Rational,
    activation: PwlFunction,
    inputs: Vec<(Src, Rational)>,
}

#[derive(Debug, Clone)]
pub(crate) struct Builder {
    input_dim: usize,
    nodes: Vec<Pending>,
    padding: BTreeSet<usize>,
}

impl Builder {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            nodes: Vec::new(),
            padding: BTreeSet::new(),
        }
    }

    pub fn layer_of(&self, s: Src) -> usize {
        match s {
            Src::Input(_) => 0,
            Src::Node(k) => self.nodes[k].layer,
        }
    }

    /// Adds a node on `layer` (1 is the first hidden layer).
    pub fn node(&mut self, layer: usize, activation: PwlFunction, bias: Rational, inputs: Vec<(Src, Rational)>) -> Src {
        assert!(layer >= 1, "layer 0 is the input layer");
        for (s, _) in &inputs {
            if let Src::Input(i) = s {
                assert!(*i < self.input_dim, "input {i} out of range");
            }
            assert_eq!(self.layer_of(*s), layer - 1, "source {s:?} is not on layer {}", layer - 1);
        }
        self.nodes.push(Pending {
            layer,
            bias,
            activation,
            inputs,
        });
        Src::Node(self.nodes.len() - 1)
    }

    pub fn relu(&mut self, layer: usize, bias: Rational, inputs: Vec<(Src, Rational)>) -> Src {
        self.node(layer, PwlFunction::relu(), bias, inputs)
    }

    pub fn id(&mut self, layer: usize, bias: Rational, inputs: Vec<(Src, Rational)>) -> Src {
        self.node(layer, PwlFunction::identity(), bias, inputs)
    }

    /// Carries `s` up to `layer` through weight-one identity nodes.
    pub fn pass(&mut self, mut s: Src, layer: usize) -> Src {
        let from = self.layer_of(s);
        assert!(from <= layer, "cannot pass layer {from} down to {layer}");
        for l in from + 1..=layer {
            s = self.id(l, Rational::zero(), vec![(s, Rational::one())]);
            if let Src::Node(k) = s {
                self.padding.insert(k);
            }
        }
        s
    }

    /// Was `s` created by [`pass`](Self::pass)?
    pub fn is_padding(&self, s: Src) -> bool {
        matches!(s, Src::Node(k) if self.padding.contains(&k))
    }

    /// Assembles the network. `outputs` must be exactly the nodes of the top
    /// layer, in the order they should appear as outputs. Also returns, per
    /// builder node, its position in the network (`(layer, index)` with
    /// layer 0 the first hidden layer).
    pub fn finish_with_positions(&self, outputs: &[Src]) -> (Network, Vec<(usize, usize)>) {
        let depth = self.nodes.iter().map(|n| n.layer).max().expect("at least one node");
        let top: BTreeSet<usize> = outputs
            .iter()
            .map(|s| match s {
                Src::Node(k) => *k,
                Src::Input(i) => panic!("input {i} cannot be an output"),
            })
            .collect();
        assert_eq!(top.len(), outputs.len(), "duplicate output");
        let mut pos = vec![(0, 0); self.nodes.len()];
        let mut widths = vec![0; depth];
        for (k, n) in self.nodes.iter().enumerate() {
            if n.layer == depth {
                assert!(top.contains(&k), "node {k} on the top layer is not an output");
            } else {
                assert!(!top.contains(&k), "output node {k} is not on the top layer");
                pos[k] = (n.layer - 1, widths[n.layer - 1]);
                widths[n.layer - 1] += 1;
            }
        }
        for (i, s) in outputs.iter().enumerate() {
            if let Src::Node(k) = s {
                pos[*k] = (depth - 1, i);
            }
        }
        widths[depth - 1] = outputs.len();

        let mut layers: Vec<Vec<Option<Node>>> = widths.iter().map(|&w| vec![None; w]).collect();
        for (k, n) in self.nodes.iter().enumerate() {
            let (l, i) = pos[k];
            let width = if l == 0 { self.input_dim } else { widths[l - 1] };
            let mut weights = vec![Rational::zero(); width];
            for (s, w) in &n.inputs {
                let j = match s {
                    Src::Input(j) => *j,
                    Src::Node(m) => pos[*m].1,
                };
                weights[j] += w;
            }
            layers[l][i] = Some(Node::new(weights, n.bias.clone(), n.activation.clone()));
        }
        let layers = layers
            .into_iter()
            .map(|l| l.into_iter().map(|n| n.expect("every slot filled")).collect())
            .collect();
        let net = Network::new(self.input_dim, layers).expect("builder produces a well-formed network");
        (net, pos)
    }

    pub fn finish(&self, outputs: &[Src]) -> Network {
        self.finish_with_positions(outputs).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qi;

    #[test]
    fn padding_and_order() {
        let mut b = Builder::new(2);
        let r = b.relu(1, qi(0), vec![(Src::Input(0), qi(1)), (Src::Input(1), qi(-1))]);
        let p = b.pass(Src::Input(1), 2);
        assert!(b.is_padding(p));
        let out2 = b.id(3, qi(0), vec![(p, qi(2))]);
        let q = b.pass(r, 2);
        let out1 = b.id(3, qi(1), vec![(q, qi(1)), (q, qi(1))]);
        let net = b.finish(&[out1, out2]);
        assert_eq!(net.widths(), vec![2, 2, 2]);
        assert_eq!(net.layers()[2][0].weights, vec![qi(0), qi(2)]);
        assert_eq!(net.eval(&[qi(3), qi(1)]).unwrap(), vec![qi(5), qi(2)]);
    }

    #[test]
    #[should_panic(expected = "is not on layer")]
    fn skipping_a_layer_panics() {
        let mut b = Builder::new(1);
        b.id(2, qi(0), vec![(Src::Input(0), qi(1))]);
    }
}
