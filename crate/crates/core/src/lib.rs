//! Exact-arithmetic reachability analysis for piecewise-linear neural
//! networks, with 3SAT reduction generators and brute-force oracles.

pub mod corpus;
pub mod interval;
pub mod lp;
pub mod milp;
pub mod network;
pub mod oracle;
pub mod presolve;
pub mod pwl;
pub mod pwlprog;
pub mod rational;
pub mod reductions;
pub mod spec;
pub mod verifier;

pub use network::{Network, Node, NodeId};
pub use pwl::{Piece, PwlFunction};
pub use rational::Rational;
pub use spec::{LinearTerm, Namespace, Specification};
