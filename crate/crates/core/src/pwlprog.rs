//! PWL-linear programs: linear constraints plus one `f(c + t) = y` equality
//! per network node, and their linearization under a fixed phase vector.

use serde::{Deserialize, Serialize};

use crate::lp::{self, Constraint, LinearProgram, LpError, LpResult, Relation};
use crate::network::{Network, NodeId};
use crate::pwl::PwlFunction;
use crate::rational::Rational;
use crate::spec::{LinearTerm, Specification};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgramError {
    #[error("input specification mentions a variable beyond input dimension {0}")]
    InputSpecDim(usize),
    #[error("output specification mentions a variable beyond output dimension {0}")]
    OutputSpecDim(usize),
    #[error("phase vector has {got} entries, program has {expected} PWL-equalities")]
    PhaseLength { expected: usize, got: usize },
    #[error("piece {piece} out of range for equality {equality} with {pieces} pieces")]
    PieceOutOfRange { equality: usize, piece: usize, pieces: usize },
    #[error("closed phases need continuous activations (equality {0} is discontinuous)")]
    ClosedDiscontinuous(usize),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// `f(constant + term) = result`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PwlEquality {
    pub f: PwlFunction,
    pub term: LinearTerm,
    pub constant: Rational,
    pub result: usize,
    pub node: NodeId,
}

impl PwlEquality {
    pub fn argument(&self, x: &[Rational]) -> Rational {
        &self.constant + &self.term.eval(x)
    }

    pub fn holds(&self, x: &[Rational]) -> bool {
        self.f.eval(&self.argument(x)) == x[self.result]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PwlProgram {
    pub names: Vec<String>,
    pub input_vars: Vec<usize>,
    pub output_vars: Vec<usize>,
    pub linear: Vec<Constraint>,
    pub equalities: Vec<PwlEquality>,
}

/// One chosen piece per PWL-equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PhaseVector(pub Vec<usize>);

impl PhaseVector {
    /// Mixed-radix index, least significant digit first.
    pub fn encode(&self, radices: &[usize]) -> u128 {
        self.0
            .iter()
            .zip(radices)
            .rev()
            .fold(0u128, |acc, (&d, &r)| acc * r as u128 + d as u128)
    }

    pub fn decode(mut code: u128, radices: &[usize]) -> Self {
        let digits = radices
            .iter()
            .map(|&r| {
                let d = (code % r as u128) as usize;
                code /= r as u128;
                d
            })
            .collect();
        PhaseVector(digits)
    }
}

/// How the upper end of a fixed piece is encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    /// `arg <= t`; only valid for continuous activations.
    Closed,
    /// `arg <= t + z` with `z` a strictly negative slack.
    Strict,
}

impl PhaseMode {
    pub fn for_network(net: &Network) -> Self {
        if net.all_continuous() {
            PhaseMode::Closed
        } else {
            PhaseMode::Strict
        }
    }
}

pub fn build_program(net: &Network, phi_in: &Specification, phi_out: &Specification) -> Result<PwlProgram, ProgramError> {
    if !phi_in.fits(net.input_dim()) {
        return Err(ProgramError::InputSpecDim(net.input_dim()));
    }
    if !phi_out.fits(net.output_dim()) {
        return Err(ProgramError::OutputSpecDim(net.output_dim()));
    }
    let n = net.input_dim();
    let mut names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let input_vars: Vec<usize> = (0..n).collect();
    let mut prev: Vec<usize> = input_vars.clone();
    let mut equalities = Vec::with_capacity(net.num_nodes());
    for (l, layer) in net.layers().iter().enumerate() {
        let mut current = Vec::with_capacity(layer.len());
        for (i, node) in layer.iter().enumerate() {
            let var = names.len();
            names.push(format!("y_{}_{}", l + 1, i));
            let term = LinearTerm::from_pairs(prev.iter().zip(&node.weights).map(|(&v, w)| (v, w.clone())));
            equalities.push(PwlEquality {
                f: node.activation.clone(),
                term,
                constant: node.bias.clone(),
                result: var,
                node: NodeId { layer: l, index: i },
            });
            current.push(var);
        }
        prev = current;
    }
    let output_vars = prev;
    let mut linear: Vec<Constraint> = phi_in
        .conjuncts
        .iter()
        .map(|c| Constraint::new(c.term.clone(), Relation::Le, c.bound.clone()))
        .collect();
    linear.extend(
        phi_out
            .conjuncts
            .iter()
            .map(|c| Constraint::new(c.term.remap(|j| output_vars[j]), Relation::Le, c.bound.clone())),
    );
    let prog = PwlProgram {
        names,
        input_vars,
        output_vars,
        linear,
        equalities,
    };
    assert_eq!(
        prog.linear.len() + prog.equalities.len(),
        phi_in.len() + phi_out.len() + net.num_nodes()
    );
    Ok(prog)
}

impl PwlProgram {
    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn radices(&self) -> Vec<usize> {
        self.equalities.iter().map(|e| e.f.num_pieces()).collect()
    }

    /// Number of phase vectors, saturating.
    pub fn phase_space(&self) -> u128 {
        self.radices()
            .iter()
            .fold(1u128, |acc, &r| acc.saturating_mul(r as u128))
    }

    /// Every linear constraint and PWL-equality holds at `x`.
    pub fn satisfied_by(&self, x: &[Rational]) -> bool {
        self.linear.iter().all(|c| c.holds(x)) && self.equalities.iter().all(|e| e.holds(x))
    }

    fn check_phase_shape(&self, w: &PhaseVector) -> Result<(), ProgramError> {
        if w.0.len() != self.equalities.len() {
            return Err(ProgramError::PhaseLength {
                expected: self.equalities.len(),
                got: w.0.len(),
            });
        }
        for (h, (eq, &k)) in self.equalities.iter().zip(&w.0).enumerate() {
            if k >= eq.f.num_pieces() {
                return Err(ProgramError::PieceOutOfRange {
                    equality: h,
                    piece: k,
                    pieces: eq.f.num_pieces(),
                });
            }
        }
        Ok(())
    }
}

/// Linear program `Φ_w` and the strictness slacks it introduced.
pub fn fix_phases(prog: &PwlProgram, w: &PhaseVector, mode: PhaseMode) -> Result<(LinearProgram, Vec<usize>), ProgramError> {
    prog.check_phase_shape(w)?;
    let mut lp = LinearProgram {
        names: prog.names.clone(),
        constraints: prog.linear.clone(),
        objective: None,
    };
    let mut slacks = Vec::new();
    for (h, (eq, &k)) in prog.equalities.iter().zip(&w.0).enumerate() {
        let before = lp.constraints.len();
        if let Some(t) = eq.f.lower_breakpoint(k) {
            lp.add_ge(eq.term.clone(), t - &eq.constant);
        }
        if let Some(t) = eq.f.upper_breakpoint(k) {
            let bound = t - &eq.constant;
            match mode {
                PhaseMode::Closed => {
                    if !eq.f.is_continuous() {
                        return Err(ProgramError::ClosedDiscontinuous(h));
                    }
                    lp.add_le(eq.term.clone(), bound);
                }
                PhaseMode::Strict => {
                    let z = lp.add_var(format!("z{h}"));
                    let mut t = eq.term.clone();
                    t.add(z, &-Rational::one());
                    lp.add_le(t, bound);
                    slacks.push(z);
                }
            }
        }
        // a·(c + t) + b = y
        let piece = &eq.f.pieces()[k];
        let mut value = eq.term.scale(&piece.slope);
        value.add(eq.result, &-Rational::one());
        lp.add_eq(value, -&(&(&piece.slope * &eq.constant) + &piece.offset));
        assert!(lp.constraints.len() - before <= 3);
    }
    Ok((lp, slacks))
}

/// Solves `Φ_w`; a feasible answer is projected onto the program variables.
pub fn check_phase(prog: &PwlProgram, w: &PhaseVector, mode: PhaseMode) -> Result<LpResult, ProgramError> {
    let (lp, slacks) = fix_phases(prog, w, mode)?;
    let result = lp::minimize_slacks(&lp, &slacks)?;
    Ok(match result {
        LpResult::Feasible(mut x) | LpResult::Optimal { assignment: mut x, .. } => {
            x.truncate(prog.num_vars());
            assert!(prog.satisfied_by(&x), "phase-fixed solution violates a PWL-equality");
            LpResult::Feasible(x)
        }
        other => other,
    })
}
