//! Brute-force reference procedures for small instances.
//!
//! Nothing here prunes or samples: a cap that would be exceeded is an error.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::network::NetworkError;
use crate::pwlprog::{self, PhaseMode, PhaseVector, ProgramError};
use crate::rational::Rational;
use crate::reductions::{CnfFormula, GeneratedInstance};
use crate::verifier::ReachInstance;

pub const DEFAULT_SAT_CAP: usize = 20;
pub const DEFAULT_PHASE_CAP: u128 = 1 << 16;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("{n} variables exceed the enumeration cap of {cap}")]
    VarCap { n: usize, cap: usize },
    #[error("phase space of size {size} exceeds the cap of {cap}")]
    PhaseCap { size: u128, cap: u128 },
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatResult {
    pub satisfiable: bool,
    pub assignment: Option<Vec<bool>>,
}

/// Assignment number `bits`, variable `i` taken from bit `i`.
pub fn assignment_from_bits(bits: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| bits >> i & 1 == 1).collect()
}

pub fn sat_bruteforce(phi: &CnfFormula) -> Result<SatResult, OracleError> {
    sat_bruteforce_with_cap(phi, DEFAULT_SAT_CAP)
}

/// Tries all `2ⁿ` assignments in counting order and returns the first model.
pub fn sat_bruteforce_with_cap(phi: &CnfFormula, cap: usize) -> Result<SatResult, OracleError> {
    let n = phi.num_vars();
    if n > cap || n >= 64 {
        return Err(OracleError::VarCap { n, cap });
    }
    for bits in 0..1u64 << n {
        let a = assignment_from_bits(bits, n);
        if phi.is_satisfied_by(&a) {
            assert!(phi.clauses().iter().all(|c| c.iter().any(|l| l.eval(&a))));
            return Ok(SatResult {
                satisfiable: true,
                assignment: Some(a),
            });
        }
    }
    Ok(SatResult {
        satisfiable: false,
        assignment: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BruteVerdict {
    Reachable { witness: Vec<Rational>, phase: PhaseVector },
    Unreachable,
}

impl BruteVerdict {
    pub fn is_reachable(&self) -> bool {
        matches!(self, BruteVerdict::Reachable { .. })
    }
}

#[derive(Debug, Clone)]
pub struct BruteConfig {
    pub cap: u128,
    pub workers: usize,
    pub mode: Option<PhaseMode>,
}

impl Default for BruteConfig {
    fn default() -> Self {
        Self {
            cap: DEFAULT_PHASE_CAP,
            workers: 1,
            mode: None,
        }
    }
}

pub fn reach_bruteforce(inst: &ReachInstance) -> Result<BruteVerdict, OracleError> {
    reach_bruteforce_with(inst, &BruteConfig::default())
}

/// Solves `Φ_w` for every phase vector `w` in mixed-radix order. With
/// several workers the codes are dealt round-robin and the smallest
/// feasible code wins, so the answer does not depend on the worker count.
pub fn reach_bruteforce_with(inst: &ReachInstance, cfg: &BruteConfig) -> Result<BruteVerdict, OracleError> {
    let prog = pwlprog::build_program(&inst.network, &inst.input_spec, &inst.output_spec)?;
    let size = prog.phase_space();
    if size > cfg.cap {
        return Err(OracleError::PhaseCap { size, cap: cfg.cap });
    }
    let mode = cfg.mode.unwrap_or_else(|| PhaseMode::for_network(&inst.network));
    let radices = prog.radices();
    let n = inst.network.input_dim();
    let workers = cfg.workers.max(1) as u128;

    let found: Mutex<Option<(u128, Vec<Rational>)>> = Mutex::new(None);
    let failed: Mutex<Option<ProgramError>> = Mutex::new(None);
    let stop = AtomicBool::new(false);
    std::thread::scope(|scope| {
        for k in 0..workers {
            let (prog, radices, found, failed, stop) = (&prog, &radices, &found, &failed, &stop);
            scope.spawn(move || {
                let mut code = k;
                while code < size && !stop.load(Ordering::Relaxed) {
                    if found.lock().unwrap().as_ref().is_some_and(|(c, _)| *c < code) {
                        return;
                    }
                    let w = PhaseVector::decode(code, radices);
                    match pwlprog::check_phase(prog, &w, mode) {
                        Ok(r) if r.is_feasible() => {
                            let x = r.assignment().expect("feasible")[..n].to_vec();
                            let mut slot = found.lock().unwrap();
                            if slot.as_ref().is_none_or(|(c, _)| code < *c) {
                                *slot = Some((code, x));
                            }
                            return;
                        }
                        Ok(_) => {}
                        Err(e) => {
                            *failed.lock().unwrap() = Some(e);
                            stop.store(true, Ordering::Relaxed);
                            return;
                        }
                    }
                    code += workers;
                }
            });
        }
    });
    if let Some(e) = failed.into_inner().unwrap() {
        return Err(e.into());
    }
    Ok(match found.into_inner().unwrap() {
        Some((code, witness)) => {
            assert!(inst.check_witness(&witness)?, "phase-feasible point fails the instance");
            BruteVerdict::Reachable {
                witness,
                phase: PhaseVector::decode(code, &radices),
            }
        }
        None => BruteVerdict::Unreachable,
    })
}

/// Outcome of evaluating a generated network on every encoded assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridReport {
    pub checked: u64,
    pub satisfying: u64,
    /// Assignments where `φ_in ∧ φ_out` at the encoded input disagrees
    /// with satisfaction of the formula.
    pub mismatches: Vec<Vec<bool>>,
}

impl GridReport {
    pub fn consistent(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Checks that the canonical encoding of an assignment meets both
/// specifications exactly when the assignment satisfies `phi`.
pub fn boolean_grid_check(g: &GeneratedInstance, phi: &CnfFormula) -> Result<GridReport, OracleError> {
    let n = phi.num_vars();
    if n > DEFAULT_SAT_CAP {
        return Err(OracleError::VarCap { n, cap: DEFAULT_SAT_CAP });
    }
    let mut report = GridReport {
        checked: 0,
        satisfying: 0,
        mismatches: Vec::new(),
    };
    for bits in 0..1u64 << n {
        let a = assignment_from_bits(bits, n);
        let sat = phi.is_satisfied_by(&a);
        let holds = g.instance.check_witness(&g.encode(&a))?;
        report.checked += 1;
        report.satisfying += sat as u64;
        if sat != holds {
            report.mismatches.push(a);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Network, Node};
    use crate::rational::qi;
    use crate::reductions::{reduce_general, reduce_restricted_weights};
    use crate::spec::Specification;

    fn cnf(n: usize, clauses: &[[i64; 3]]) -> CnfFormula {
        CnfFormula::from_dimacs_clauses(n, clauses).unwrap()
    }

    #[test]
    fn sat_examples() {
        let r = sat_bruteforce(&cnf(1, &[[1, 1, 1]])).unwrap();
        assert_eq!(r.assignment, Some(vec![true]));
        assert!(!sat_bruteforce(&cnf(1, &[[1, 1, 1], [-1, -1, -1]])).unwrap().satisfiable);
        let psi = cnf(4, &[[1, 2, 3], [-1, 2, -3], [-2, 3, 4]]);
        assert!(sat_bruteforce(&psi).unwrap().satisfiable);
        assert!(psi.is_satisfied_by(&[true; 4]));
        assert!(matches!(
            sat_bruteforce_with_cap(&psi, 3),
            Err(OracleError::VarCap { n: 4, cap: 3 })
        ));
    }

    fn relu_instance(input: &str, output: &str) -> ReachInstance {
        let net = Network::new(1, vec![vec![Node::relu(vec![qi(1)], qi(0))]]).unwrap();
        ReachInstance::new(
            net,
            Specification::parse_input(input).unwrap(),
            Specification::parse_output(output, None).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn reach_examples() {
        match reach_bruteforce(&relu_instance("x0 >= 2", "y0 >= 1")).unwrap() {
            BruteVerdict::Reachable { phase, witness } => {
                assert_eq!(phase, PhaseVector(vec![1]));
                assert!(witness[0] >= qi(2));
            }
            BruteVerdict::Unreachable => panic!("reachable"),
        }
        assert_eq!(reach_bruteforce(&relu_instance("true", "false")).unwrap(), BruteVerdict::Unreachable);
        let inst = relu_instance("true", "false");
        let cfg = BruteConfig {
            cap: 1,
            ..BruteConfig::default()
        };
        assert!(matches!(reach_bruteforce_with(&inst, &cfg), Err(OracleError::PhaseCap { size: 2, cap: 1 })));
    }

    #[test]
    fn workers_agree() {
        let inst = relu_instance("x0 <= -1", "y0 == 0");
        let one = reach_bruteforce(&inst).unwrap();
        let many = reach_bruteforce_with(
            &inst,
            &BruteConfig {
                workers: 3,
                ..BruteConfig::default()
            },
        )
        .unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn grid_checks() {
        let psi = cnf(4, &[[1, 2, 3], [-1, 2, -3], [-2, 3, 4]]);
        let r = boolean_grid_check(&reduce_general(&psi), &psi).unwrap();
        assert!(r.consistent());
        assert_eq!(r.checked, 16);
        let w = reduce_restricted_weights(&psi, &qi(2), &qi(3)).unwrap();
        assert!(boolean_grid_check(&w, &psi).unwrap().consistent());
    }
}
