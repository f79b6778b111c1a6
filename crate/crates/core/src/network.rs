//! Layered feed-forward networks over exact rationals.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::pwl::{ActivationSpec, PwlFunction};
use crate::rational::Rational;

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("input dimension must be positive")]
    ZeroInputDim,
    #[error("network needs at least one layer")]
    NoLayers,
    #[error("layer {0} is empty")]
    EmptyLayer(usize),
    #[error("node {node} of layer {layer} has {got} incoming weights, expected {expected}")]
    WeightCount {
        layer: usize,
        node: usize,
        expected: usize,
        got: usize,
    },
    #[error("expected {expected} inputs, got {got}")]
    InputDim { expected: usize, got: usize },
    #[error("bad activation in layer {layer}, node {node}: {msg}")]
    Activation { layer: usize, node: usize, msg: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One neuron: `activation(Σ weights[j]·prev[j] + bias)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    pub weights: Vec<Rational>,
    pub bias: Rational,
    pub activation: PwlFunction,
}

impl Node {
    pub fn new(weights: Vec<Rational>, bias: Rational, activation: PwlFunction) -> Self {
        Self { weights, bias, activation }
    }

    pub fn relu(weights: Vec<Rational>, bias: Rational) -> Self {
        Self::new(weights, bias, PwlFunction::relu())
    }

    pub fn identity(weights: Vec<Rational>, bias: Rational) -> Self {
        Self::new(weights, bias, PwlFunction::identity())
    }

    pub fn pre_activation(&self, prev: &[Rational]) -> Rational {
        let mut acc = self.bias.clone();
        for (w, v) in self.weights.iter().zip(prev) {
            if !w.is_zero() {
                acc += &(w * v);
            }
        }
        acc
    }

    /// Number of non-zero incoming weights.
    pub fn fan_in(&self) -> usize {
        self.weights.iter().filter(|w| !w.is_zero()).count()
    }
}

/// Address of a node: stored layer index (0 is the first hidden layer) and
/// position within the layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub layer: usize,
    pub index: usize,
}

/// A network `ℝⁿ → ℝᵐ`. The input layer is implicit, so a network with `k`
/// stored layers has depth `k + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Vec<Node>>,
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Vec<Node>>) -> Result<Self, NetworkError> {
        if input_dim == 0 {
            return Err(NetworkError::ZeroInputDim);
        }
        if layers.is_empty() {
            return Err(NetworkError::NoLayers);
        }
        let mut width = input_dim;
        for (l, layer) in layers.iter().enumerate() {
            if layer.is_empty() {
                return Err(NetworkError::EmptyLayer(l));
            }
            for (i, node) in layer.iter().enumerate() {
                if node.weights.len() != width {
                    return Err(NetworkError::WeightCount {
                        layer: l,
                        node: i,
                        expected: width,
                        got: node.weights.len(),
                    });
                }
            }
            width = layer.len();
        }
        Ok(Self { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Vec::len)
    }

    pub fn layers(&self) -> &[Vec<Node>] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Vec<Node>> {
        self.layers
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.layers[id.layer][id.index]
    }

    /// Layer count including the implicit input layer.
    pub fn depth(&self) -> usize {
        self.layers.len() + 1
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    pub fn num_nodes(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// Node ids in layer order, then by index.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(layer, nodes)| (0..nodes.len()).map(move |index| NodeId { layer, index }))
    }

    /// Nodes whose activation has more than one piece.
    pub fn num_pwl_nodes(&self) -> usize {
        self.layers
            .iter()
            .flatten()
            .filter(|n| n.activation.num_pieces() > 1)
            .count()
    }

    pub fn eval(&self, x: &[Rational]) -> Result<Vec<Rational>, NetworkError> {
        Ok(self.eval_layers(x)?.pop().unwrap_or_default())
    }

    /// Outputs of every stored layer.
    pub fn eval_layers(&self, x: &[Rational]) -> Result<Vec<Vec<Rational>>, NetworkError> {
        if x.len() != self.input_dim {
            return Err(NetworkError::InputDim {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut out: Vec<Vec<Rational>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let prev = out.last().map_or(x, Vec::as_slice);
            let values = layer
                .iter()
                .map(|n| n.activation.eval(&n.pre_activation(prev)))
                .collect();
            out.push(values);
        }
        Ok(out)
    }

    /// Distinct values among all weights and biases, zeros included.
    pub fn weight_alphabet(&self) -> BTreeSet<Rational> {
        self.layers
            .iter()
            .flatten()
            .flat_map(|n| n.weights.iter().chain(std::iter::once(&n.bias)))
            .cloned()
            .collect()
    }

    pub fn all_continuous(&self) -> bool {
        self.layers.iter().flatten().all(|n| n.activation.is_continuous())
    }

    /// Sum of the bit sizes of every weight, bias and breakpoint/piece
    /// coefficient.
    pub fn bits(&self) -> u64 {
        let mut total = 0;
        for node in self.layers.iter().flatten() {
            total += node.weights.iter().map(Rational::bits).sum::<u64>() + node.bias.bits();
            let f = &node.activation;
            total += f.breakpoints().iter().map(Rational::bits).sum::<u64>();
            total += f.pieces().iter().map(|p| p.slope.bits() + p.offset.bits()).sum::<u64>();
        }
        total
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&NetworkFile::from(self)).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let file: NetworkFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NetworkError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct NodeFile {
    weights: Vec<Rational>,
    bias: Rational,
    activation: ActivationSpec,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    input_dim: usize,
    layers: Vec<Vec<NodeFile>>,
}

impl From<&Network> for NetworkFile {
    fn from(net: &Network) -> Self {
        NetworkFile {
            input_dim: net.input_dim,
            layers: net
                .layers
                .iter()
                .map(|layer| {
                    layer
                        .iter()
                        .map(|n| NodeFile {
                            weights: n.weights.clone(),
                            bias: n.bias.clone(),
                            activation: ActivationSpec::from(&n.activation),
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

impl TryFrom<NetworkFile> for Network {
    type Error = NetworkError;

    fn try_from(file: NetworkFile) -> Result<Self, NetworkError> {
        let mut layers = Vec::with_capacity(file.layers.len());
        for (l, layer) in file.layers.into_iter().enumerate() {
            let mut nodes = Vec::with_capacity(layer.len());
            for (i, n) in layer.into_iter().enumerate() {
                let activation = PwlFunction::try_from(n.activation)
                    .map_err(|msg| NetworkError::Activation { layer: l, node: i, msg })?;
                nodes.push(Node::new(n.weights, n.bias, activation));
            }
            layers.push(nodes);
        }
        Network::new(file.input_dim, layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwl::hard_clamp;
    use crate::rational::{q, qi};

    fn not_gadget() -> Network {
        Network::new(1, vec![vec![Node::identity(vec![qi(-1)], qi(1))]]).unwrap()
    }

    #[test]
    fn not_gadget_values() {
        let net = not_gadget();
        assert_eq!(net.eval(&[qi(1)]).unwrap(), vec![qi(0)]);
        assert_eq!(net.eval(&[qi(0)]).unwrap(), vec![qi(1)]);
        assert_eq!(net.depth(), 2);
    }

    #[test]
    fn identity_passes_value() {
        let net = Network::new(1, vec![vec![Node::identity(vec![qi(1)], qi(0))]]).unwrap();
        assert_eq!(net.eval(&[q(7, 3)]).unwrap(), vec![q(7, 3)]);
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(
            not_gadget().eval(&[qi(1), qi(2)]),
            Err(NetworkError::InputDim { expected: 1, got: 2 })
        ));
        assert!(matches!(
            Network::new(2, vec![vec![Node::relu(vec![qi(1)], qi(0))]]),
            Err(NetworkError::WeightCount { .. })
        ));
        assert!(matches!(Network::new(1, vec![vec![]]), Err(NetworkError::EmptyLayer(0))));
        assert!(matches!(Network::new(1, vec![]), Err(NetworkError::NoLayers)));
    }

    #[test]
    fn json_round_trip() {
        let net = Network::new(
            2,
            vec![
                vec![
                    Node::relu(vec![q(1, 2), qi(-3)], q(-7, 5)),
                    Node::new(vec![qi(0), qi(1)], qi(0), hard_clamp()),
                ],
                vec![Node::identity(vec![qi(1), qi(1)], qi(0))],
            ],
        )
        .unwrap();
        let text = net.to_json();
        assert!(text.contains("\"1/2\""));
        assert!(text.contains("\"relu\""));
        assert_eq!(Network::from_json(&text).unwrap(), net);
    }

    #[test]
    fn parses_documented_format() {
        let text = r#"{ "input_dim": 1, "layers": [[{ "weights": ["2"], "bias": "-1/2",
            "activation": { "pieces": [["0","0"],["1","0"]], "breakpoints": ["0"] } }]] }"#;
        let net = Network::from_json(text).unwrap();
        assert!(net.layers()[0][0].activation.is_relu());
        assert_eq!(net.eval(&[qi(1)]).unwrap(), vec![q(3, 2)]);
    }

    #[test]
    fn eval_is_deterministic() {
        let net = not_gadget();
        assert_eq!(net.eval(&[q(2, 9)]).unwrap(), net.eval(&[q(2, 9)]).unwrap());
    }
}
