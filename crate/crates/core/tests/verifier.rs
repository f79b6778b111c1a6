use std::time::Duration;

use proptest::prelude::*;

use reachkit::corpus::{self, NetworkShape};
use reachkit::oracle::reach_bruteforce;
use reachkit::pwlprog::PhaseMode;
use reachkit::rational::{q, qi};
use reachkit::reductions::{reduce_general, CnfFormula};
use reachkit::verifier::{decide, witness_bits, witness_size_report, ReachInstance, Verdict, VerifierConfig, VerifyError};
use reachkit::{LinearTerm, Namespace, Network, Node, Piece, PwlFunction, Specification};

fn relu_instance(input: &str, output: &str) -> ReachInstance {
    let net = Network::new(1, vec![vec![Node::relu(vec![qi(1)], qi(0))]]).unwrap();
    ReachInstance::new(
        net,
        Specification::parse_input(input).unwrap(),
        Specification::parse_output(output, None).unwrap(),
    )
    .unwrap()
}

fn reachable(inst: &ReachInstance) -> bool {
    decide(inst, &VerifierConfig::default()).unwrap().verdict.is_reachable()
}

#[test]
fn relu_cannot_reach_one_from_negative_inputs() {
    assert!(!reachable(&relu_instance("x0 <= -1", "y0 >= 1")));
    assert!(reachable(&relu_instance("x0 <= 1", "y0 >= 1")));
}

#[test]
fn bottom_output_is_unreachable() {
    let mut inst = relu_instance("", "");
    inst.output_spec = Specification::bottom(Namespace::Output);
    assert!(!reachable(&inst));
    inst.output_spec = Specification::top(Namespace::Output);
    assert!(reachable(&inst));
}

#[test]
fn single_literal_formula() {
    let phi = CnfFormula::parse_dimacs("p cnf 1 1\n1 1 1 0\n").unwrap();
    let g = reduce_general(&phi);
    let result = decide(&g.instance, &VerifierConfig::default()).unwrap();
    let x = result.verdict.witness().expect("satisfiable");
    assert!(x[0] == qi(0) || x[0] == qi(1));
    assert!(g.instance.check_witness(x).unwrap());
}

#[test]
fn check_witness_on_the_general_reduction() {
    let phi = CnfFormula::parse_dimacs("p cnf 4 3\n1 2 3 0\n-1 2 -3 0\n-2 3 4 0\n").unwrap();
    let g = reduce_general(&phi);
    assert!(g.instance.check_witness(&g.encode(&[true, true, true, false])).unwrap());
    assert!(!g.instance.check_witness(&vec![q(1, 2); 4]).unwrap());
    let top = ReachInstance::new(g.instance.network.clone(), Specification::top(Namespace::Input), Specification::top(Namespace::Output)).unwrap();
    assert!(top.check_witness(&vec![q(1, 2); 4]).unwrap());
}

#[test]
fn witness_bit_counts() {
    assert_eq!(witness_bits(&[qi(0), qi(1), qi(0)]), 6);
    // numerator 3 takes two bits, denominator 2 takes two
    assert_eq!(witness_bits(&[q(3, 2)]), 4);
}

#[test]
fn reachable_results_report_their_size() {
    let inst = relu_instance("x0 <= 1", "y0 >= 1");
    let result = decide(&inst, &VerifierConfig::default()).unwrap();
    let report = witness_size_report(&result, &inst).unwrap();
    assert_eq!(report.instance_bits, inst.bits());
    assert_eq!(report.input_dim, 1);
    let Verdict::Reachable { witness, witness_bits: wb, .. } = &result.verdict else { panic!() };
    assert_eq!(*wb, witness_bits(witness));

    let none = decide(&relu_instance("x0 <= -1", "y0 >= 1"), &VerifierConfig::default()).unwrap();
    assert!(matches!(witness_size_report(&none, &inst), Err(VerifyError::NotReachable)));
}

#[test]
fn discontinuous_step_uses_the_upper_piece_at_the_breakpoint() {
    // f(a) = 0 for a < 1, 2 for a >= 1
    let step = PwlFunction::new(vec![Piece::new(qi(0), qi(0)), Piece::new(qi(0), qi(2))], vec![qi(1)]).unwrap();
    let net = Network::new(1, vec![vec![Node::new(vec![qi(1)], qi(0), step)]]).unwrap();
    let spec = |input: &str, output: &str| {
        ReachInstance::new(net.clone(), Specification::parse_input(input).unwrap(), Specification::parse_output(output, None).unwrap()).unwrap()
    };
    assert!(reachable(&spec("x0 <= 1", "y0 >= 2")));
    assert!(!reachable(&spec("x0 <= 1\nx0 >= 1", "y0 <= 0")));
    assert!(reachable(&spec("x0 <= 1", "y0 <= 0")));
    assert!(!reachable(&spec("x0 >= 1", "y0 <= 1")));
    let closed = VerifierConfig {
        phase_mode: Some(PhaseMode::Closed),
        ..VerifierConfig::default()
    };
    assert!(matches!(decide(&spec("", ""), &closed), Err(VerifyError::ClosedDiscontinuous)));
}

#[test]
fn exhausted_budgets_are_errors() {
    let phi = CnfFormula::parse_dimacs("p cnf 3 4\n1 2 3 0\n-1 -2 -3 0\n1 -2 3 0\n-1 2 -3 0\n").unwrap();
    let g = reduce_general(&phi);
    let cfg = VerifierConfig {
        max_nodes: Some(1),
        pruning: false,
        ..VerifierConfig::default()
    };
    assert!(matches!(decide(&g.instance, &cfg), Err(VerifyError::NodeBudget(1))));
    let cfg = VerifierConfig {
        time_limit: Some(Duration::ZERO),
        ..VerifierConfig::default()
    };
    assert!(matches!(decide(&g.instance, &cfg), Err(VerifyError::TimeBudget(_))));
}

#[test]
fn mismatched_specifications_are_rejected() {
    let net = Network::new(1, vec![vec![Node::relu(vec![qi(1)], qi(0))]]).unwrap();
    let input = Specification::new(Namespace::Input).with_le(LinearTerm::var(3), qi(1));
    let r = ReachInstance::new(net, input, Specification::top(Namespace::Output));
    assert!(matches!(r, Err(VerifyError::InputSpecDim(1))));
}

fn agreement_shape() -> NetworkShape {
    NetworkShape {
        max_inputs: 3,
        max_layers: 3,
        max_width: 3,
        max_pwl_nodes: 6,
        general_activations: true,
    }
}

#[test]
fn search_variants_agree_with_the_oracle() {
    let configs = [
        VerifierConfig::default(),
        VerifierConfig {
            pruning: false,
            ..VerifierConfig::default()
        },
        VerifierConfig {
            envelope: false,
            early_witness: false,
            ..VerifierConfig::default()
        },
        VerifierConfig {
            workers: 3,
            ..VerifierConfig::default()
        },
        VerifierConfig {
            phase_mode: Some(PhaseMode::Strict),
            ..VerifierConfig::default()
        },
    ];
    for (k, inst) in corpus::random_instances(2024, 60, &agreement_shape()).iter().enumerate() {
        let expected = reach_bruteforce(inst).unwrap().is_reachable();
        for cfg in &configs {
            let r = decide(inst, cfg).unwrap();
            assert_eq!(r.verdict.is_reachable(), expected, "instance {k}, config {cfg:?}");
            if let Some(x) = r.verdict.witness() {
                assert!(inst.check_witness(x).unwrap());
            }
        }
    }
}

#[test]
fn decisions_are_deterministic() {
    for inst in corpus::random_instances(77, 20, &NetworkShape::default()) {
        let a = decide(&inst, &VerifierConfig::default()).unwrap();
        let b = decide(&inst, &VerifierConfig::default()).unwrap();
        assert_eq!(a.verdict, b.verdict);
        let parallel = VerifierConfig {
            workers: 4,
            ..VerifierConfig::default()
        };
        assert_eq!(decide(&inst, &parallel).unwrap().verdict.is_reachable(), a.verdict.is_reachable());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn verdict_matches_phase_enumeration(seed in any::<u64>()) {
        let inst = &corpus::random_instances(seed, 1, &NetworkShape::default())[0];
        let expected = reach_bruteforce(inst).unwrap().is_reachable();
        let r = decide(inst, &VerifierConfig::default()).unwrap();
        prop_assert_eq!(r.verdict.is_reachable(), expected);
        if let Verdict::Reachable { witness, phase, .. } = &r.verdict {
            prop_assert!(inst.check_witness(witness).unwrap());
            prop_assert_eq!(phase, &inst.phases_at(witness).unwrap());
        }
    }
}
