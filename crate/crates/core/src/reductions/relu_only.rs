//! Replacing hidden identity nodes by ReLU pairs.

use crate::network::{Network, NetworkError, Node, NodeId};
use crate::rational::Rational;

#[derive(Debug, thiserror::Error)]
pub enum TransformError {
    #[error("node {0:?} has an activation other than ReLU or identity")]
    UnsupportedActivation(NodeId),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Splits every hidden identity node `v = id(a)` into `v′ = ReLU(a)` and
/// `v″ = ReLU(−a)`. Outgoing weights of `v` move to `v′` and their
/// negations to `v″`, so every downstream node sees `ReLU(a) − ReLU(−a) = a`.
/// The output layer is left alone; depth is unchanged and no layer more
/// than doubles.
pub fn to_relu_only(net: &Network) -> Result<Network, TransformError> {
    for id in net.node_ids() {
        let f = &net.node(id).activation;
        if !f.is_relu() && !f.is_identity() {
            return Err(TransformError::UnsupportedActivation(id));
        }
    }
    let last = net.layers().len() - 1;
    // For each column of the previous layer: the new column(s) and whether
    // the node was split.
    let mut split_prev: Option<Vec<bool>> = None;
    let mut layers = Vec::with_capacity(net.layers().len());
    for (l, layer) in net.layers().iter().enumerate() {
        let rewire = |node: &Node| -> Vec<Rational> {
            match &split_prev {
                None => node.weights.clone(),
                Some(split) => {
                    let mut w = Vec::with_capacity(node.weights.len() * 2);
                    for (wj, &s) in node.weights.iter().zip(split) {
                        w.push(wj.clone());
                        if s {
                            w.push(-wj);
                        }
                    }
                    w
                }
            }
        };
        let mut nodes = Vec::with_capacity(layer.len() * 2);
        let mut split = Vec::with_capacity(layer.len());
        for node in layer {
            let weights = rewire(node);
            if l < last && node.activation.is_identity() {
                let neg: Vec<Rational> = weights.iter().map(|w| -w).collect();
                nodes.push(Node::relu(weights, node.bias.clone()));
                nodes.push(Node::relu(neg, -&node.bias));
                split.push(true);
            } else {
                nodes.push(Node::new(weights, node.bias.clone(), node.activation.clone()));
                split.push(false);
            }
        }
        split_prev = Some(split);
        layers.push(nodes);
    }
    Ok(Network::new(net.input_dim(), layers)?)
}
