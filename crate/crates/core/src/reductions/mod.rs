//! 3SAT to REACH instance generators and the gadgets they are built from.
//!
//! Every generator returns a [`GeneratedInstance`] holding the network, both
//! specifications, readable names for the input and output dimensions, and
//! the canonical encoding of a Boolean assignment as a network input.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;
use crate::verifier::ReachInstance;

mod builder;
pub mod gadgets;
mod general;
mod relu_only;
mod weights;

pub use gadgets::{make_gadget, GadgetError, GadgetKind};
pub use general::{reduce_fanin1, reduce_fanin2, reduce_general, reduce_single_layer};
pub use relu_only::{to_relu_only, TransformError};
pub use weights::{bias_chain_input, reduce_no_zero, reduce_restricted_weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Self { var, positive: true }
    }

    pub fn neg(var: usize) -> Self {
        Self { var, positive: false }
    }

    pub fn eval(&self, assignment: &[bool]) -> bool {
        assignment[self.var] == self.positive
    }

    /// DIMACS form: `var + 1`, negated for negative literals.
    pub fn to_dimacs(&self) -> i64 {
        let v = self.var as i64 + 1;
        if self.positive {
            v
        } else {
            -v
        }
    }
}

pub type Clause = [Literal; 3];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CnfError {
    #[error("formula needs at least one variable")]
    NoVariables,
    #[error("formula needs at least one clause")]
    NoClauses,
    #[error("clause {clause} mentions variable {var} but the formula has {num_vars}")]
    VarOutOfRange { clause: usize, var: usize, num_vars: usize },
    #[error("dimacs line {line}: {msg}")]
    Dimacs { line: usize, msg: String },
}

/// A 3-CNF formula with exactly three literals per clause.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Self, CnfError> {
        if num_vars == 0 {
            return Err(CnfError::NoVariables);
        }
        if clauses.is_empty() {
            return Err(CnfError::NoClauses);
        }
        for (j, clause) in clauses.iter().enumerate() {
            if let Some(l) = clause.iter().find(|l| l.var >= num_vars) {
                return Err(CnfError::VarOutOfRange {
                    clause: j,
                    var: l.var,
                    num_vars,
                });
            }
        }
        Ok(Self { num_vars, clauses })
    }

    /// Builds a formula from signed 1-based DIMACS literals.
    pub fn from_dimacs_clauses(num_vars: usize, clauses: &[[i64; 3]]) -> Result<Self, CnfError> {
        let lit = |x: i64| Literal {
            var: x.unsigned_abs() as usize - 1,
            positive: x > 0,
        };
        Self::new(num_vars, clauses.iter().map(|c| c.map(lit)).collect())
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn is_satisfied_by(&self, assignment: &[bool]) -> bool {
        assert_eq!(assignment.len(), self.num_vars, "assignment length");
        self.clauses.iter().all(|c| c.iter().any(|l| l.eval(assignment)))
    }

    /// Parses DIMACS CNF. Clauses shorter than three literals are padded by
    /// repeating their last literal; longer clauses are rejected.
    pub fn parse_dimacs(text: &str) -> Result<Self, CnfError> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        let mut current: Vec<(i64, usize)> = Vec::new();
        let mut last_line = 0;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            last_line = line_no;
            let err = |msg: String| CnfError::Dimacs { line: line_no, msg };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            if line.starts_with('%') {
                break;
            }
            if let Some(rest) = line.strip_prefix('p') {
                if header.is_some() {
                    return Err(err("duplicate header".into()));
                }
                let parts: Vec<&str> = rest.split_whitespace().collect();
                match parts.as_slice() {
                    ["cnf", v, c] => {
                        let v = v.parse().map_err(|_| err(format!("bad variable count `{v}`")))?;
                        let c = c.parse().map_err(|_| err(format!("bad clause count `{c}`")))?;
                        header = Some((v, c));
                    }
                    _ => return Err(err("expected `p cnf <vars> <clauses>`".into())),
                }
                continue;
            }
            let (num_vars, _) = header.ok_or_else(|| err("clause before header".into()))?;
            for tok in line.split_whitespace() {
                let x: i64 = tok.parse().map_err(|_| err(format!("bad literal `{tok}`")))?;
                if x == 0 {
                    clauses.push(close_clause(&current, line_no)?);
                    current.clear();
                } else if x.unsigned_abs() as usize > num_vars {
                    return Err(err(format!("literal {x} exceeds variable count {num_vars}")));
                } else {
                    current.push((x, line_no));
                }
            }
        }
        let (num_vars, declared) = header.ok_or(CnfError::Dimacs {
            line: last_line,
            msg: "missing `p cnf` header".into(),
        })?;
        if !current.is_empty() {
            clauses.push(close_clause(&current, last_line)?);
        }
        if clauses.len() != declared {
            return Err(CnfError::Dimacs {
                line: last_line,
                msg: format!("header declares {declared} clauses, found {}", clauses.len()),
            });
        }
        Self::from_dimacs_clauses(num_vars, &clauses)
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            let [a, b, d] = c.map(|l| l.to_dimacs());
            out.push_str(&format!("{a} {b} {d} 0\n"));
        }
        out
    }
}

fn close_clause(lits: &[(i64, usize)], line: usize) -> Result<[i64; 3], CnfError> {
    match lits {
        [] => Err(CnfError::Dimacs {
            line,
            msg: "empty clause".into(),
        }),
        [a] => Ok([a.0; 3]),
        [a, b] => Ok([a.0, b.0, b.0]),
        [a, b, c] => Ok([a.0, b.0, c.0]),
        _ => Err(CnfError::Dimacs {
            line: lits[3].1,
            msg: format!("clause has {} literals, at most 3 allowed", lits.len()),
        }),
    }
}

impl FromStr for CnfFormula {
    type Err = CnfError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_dimacs(s)
    }
}

impl fmt::Display for CnfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let clause = |c: &Clause| {
            let lits: Vec<String> = c
                .iter()
                .map(|l| if l.positive { format!("x{}", l.var) } else { format!("!x{}", l.var) })
                .collect();
            format!("({})", lits.join(" | "))
        };
        let parts: Vec<String> = self.clauses.iter().map(clause).collect();
        write!(f, "{}", parts.join(" & "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReductionTag {
    General,
    GeneralReluOnly,
    SingleLayer,
    Fanin1,
    Fanin2,
    Weights,
    Nozero,
}

impl ReductionTag {
    pub const ALL: [ReductionTag; 7] = [
        ReductionTag::General,
        ReductionTag::GeneralReluOnly,
        ReductionTag::SingleLayer,
        ReductionTag::Fanin1,
        ReductionTag::Fanin2,
        ReductionTag::Weights,
        ReductionTag::Nozero,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ReductionTag::General => "general",
            ReductionTag::GeneralReluOnly => "general-relu-only",
            ReductionTag::SingleLayer => "single-layer",
            ReductionTag::Fanin1 => "fanin1",
            ReductionTag::Fanin2 => "fanin2",
            ReductionTag::Weights => "weights",
            ReductionTag::Nozero => "nozero",
        }
    }
}

impl fmt::Display for ReductionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReductionTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown reduction `{s}`"))
    }
}

/// Parameters a generator was run with.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<Rational>,
}

/// How a Boolean assignment becomes a network input.
///
/// The first `n` inputs carry `true_value` or `false_value`. With `mirrored`
/// the next `n` inputs carry the negations. `fixed` is appended verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputEncoding {
    pub true_value: Rational,
    pub false_value: Rational,
    pub mirrored: bool,
    pub fixed: Vec<Rational>,
}

impl InputEncoding {
    pub fn zero_one() -> Self {
        Self {
            true_value: Rational::one(),
            false_value: Rational::zero(),
            mirrored: false,
            fixed: Vec::new(),
        }
    }

    pub fn encode(&self, assignment: &[bool]) -> Vec<Rational> {
        let mut x: Vec<Rational> = assignment
            .iter()
            .map(|&b| if b { self.true_value.clone() } else { self.false_value.clone() })
            .collect();
        if self.mirrored {
            let neg: Vec<Rational> = x.iter().map(|v| -v).collect();
            x.extend(neg);
        }
        x.extend(self.fixed.iter().cloned());
        x
    }

    /// Inverse of [`encode`](Self::encode) on the variable block; `None` if
    /// some value is neither the true nor the false value.
    pub fn decode(&self, x: &[Rational], n: usize) -> Option<Vec<bool>> {
        x[..n]
            .iter()
            .map(|v| {
                if *v == self.true_value {
                    Some(true)
                } else if *v == self.false_value {
                    Some(false)
                } else {
                    None
                }
            })
            .collect()
    }
}

/// Names of the dimensions of a generated network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameMap {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedInstance {
    pub instance: ReachInstance,
    pub names: NameMap,
    pub tag: ReductionTag,
    pub params: ReductionParams,
    pub encoding: InputEncoding,
}

impl GeneratedInstance {
    pub fn encode(&self, assignment: &[bool]) -> Vec<Rational> {
        self.encoding.encode(assignment)
    }

    pub fn name_map_json(&self) -> String {
        serde_json::to_string_pretty(&self.names).expect("name map serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReductionError {
    #[error("parameter {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: Rational },
    #[error("reduction `{0}` needs parameter {1}")]
    MissingParameter(ReductionTag, &'static str),
}

pub(crate) fn require_positive(name: &'static str, value: &Rational) -> Result<(), ReductionError> {
    if value.is_positive() {
        Ok(())
    } else {
        Err(ReductionError::NonPositive {
            name,
            value: value.clone(),
        })
    }
}

/// Runs the generator named by `tag`. `c` and `d` are only read by the
/// weight-restricted reductions.
pub fn reduce(tag: ReductionTag, phi: &CnfFormula, params: &ReductionParams) -> Result<GeneratedInstance, ReductionError> {
    let need = |v: &Option<Rational>, name| v.clone().ok_or(ReductionError::MissingParameter(tag, name));
    Ok(match tag {
        ReductionTag::General => reduce_general(phi),
        ReductionTag::GeneralReluOnly => {
            let mut g = reduce_general(phi);
            let net = to_relu_only(&g.instance.network).expect("general reduction uses relu and identity only");
            g.instance.network = net;
            g.tag = ReductionTag::GeneralReluOnly;
            g
        }
        ReductionTag::SingleLayer => reduce_single_layer(phi),
        ReductionTag::Fanin1 => reduce_fanin1(phi),
        ReductionTag::Fanin2 => reduce_fanin2(phi),
        ReductionTag::Weights => reduce_restricted_weights(phi, &need(&params.c, "c")?, &need(&params.d, "d")?)?,
        ReductionTag::Nozero => reduce_no_zero(phi, &need(&params.c, "c")?)?,
    })
}
