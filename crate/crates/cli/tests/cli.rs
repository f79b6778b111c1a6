use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use reachkit::reductions::{reduce, CnfFormula, NameMap, ReductionParams, ReductionTag};
use reachkit::{Network, Specification};
use tempfile::TempDir;

const PSI: &str = "p cnf 4 3\n1 2 3 0\n-1 2 -3 0\n-2 3 4 0\n";
const UNSAT: &str = "p cnf 1 2\n1 1 1 0\n-1 -1 -1 0\n";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reachkit"))
        .current_dir(dir)
        .env_remove("REACHKIT_BUDGET_MS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn workspace(cnf: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.cnf");
    fs::write(&path, cnf).unwrap();
    (dir, path)
}

fn gen(dir: &Path, reduction: &str, extra: &[&str]) -> Output {
    let mut args = vec!["gen", "f.cnf", "--reduction", reduction, "--out", "g"];
    args.extend_from_slice(extra);
    run(dir, &args)
}

fn solve_args() -> Vec<&'static str> {
    vec!["solve", "g.net.json", "g.in.spec", "g.out.spec", "--names", "g.names.json"]
}

#[test]
fn general_example_summary_and_verdict() {
    let (dir, _) = workspace(PSI);
    let o = gen(dir.path(), "general", &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("y == 3"), "{text}");

    let mut args = solve_args();
    args.extend(["--json", "r.json", "--seed", "7"]);
    let o = run(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("REACHABLE\n"));
    assert!(text.contains("witness_bits: "));

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["reachable"], true);
    assert_eq!(report["witness"].as_array().unwrap().len(), 4);
    assert!(report["witness_bits"].is_u64());
    assert!(report["stats"]["nodes_explored"].is_u64());
}

#[test]
fn unsatisfiable_formula_is_unreachable() {
    let (dir, _) = workspace(UNSAT);
    assert_eq!(gen(dir.path(), "fanin2", &[]).status.code(), Some(0));
    let o = run(dir.path(), &solve_args());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("UNREACHABLE"));

    let o = run(dir.path(), &["oracle", "sat", "f.cnf"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o).trim(), "UNSAT");
}

#[test]
fn malformed_spec_is_a_usage_error() {
    let (dir, _) = workspace(PSI);
    gen(dir.path(), "general", &[]);
    fs::write(dir.path().join("bad.spec"), "x0 <= 1 +\n").unwrap();
    let o = run(dir.path(), &["solve", "g.net.json", "bad.spec", "g.out.spec", "--names", "g.names.json"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 1, column"), "{err}");
}

#[test]
fn trivial_identity_network() {
    let dir = tempfile::tempdir().unwrap();
    let net = Network::new(2, vec![vec![reachkit::Node::identity(vec![1.into(), 1.into()], 0.into())]]).unwrap();
    net.save(dir.path().join("n.json")).unwrap();
    fs::write(dir.path().join("in.spec"), "").unwrap();
    fs::write(dir.path().join("out.spec"), "").unwrap();
    let o = run(dir.path(), &["solve", "n.json", "in.spec", "out.spec"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("REACHABLE"));
}

#[test]
fn budget_from_environment() {
    let (dir, _) = workspace(PSI);
    gen(dir.path(), "general", &[]);
    let o = Command::new(env!("CARGO_BIN_EXE_reachkit"))
        .current_dir(dir.path())
        .env("REACHKIT_BUDGET_MS", "zero")
        .args(solve_args())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_layer_width_and_weights_alphabet() {
    let (dir, _) = workspace(PSI);
    let text = stdout(&gen(dir.path(), "single-layer", &[]));
    assert!(text.contains("widths: [11, 1]"), "{text}");

    let o = gen(dir.path(), "weights", &["-c", "3/2", "-d", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("weight alphabet: {-3/2, 0, 2}"), "{text}");
    assert!(text.contains("layers: 8"), "{text}");

    let o = gen(dir.path(), "weights", &["-c", "3/2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_files_round_trip() {
    let (dir, cnf) = workspace(PSI);
    let phi = CnfFormula::parse_dimacs(&fs::read_to_string(cnf).unwrap()).unwrap();
    for (tag, extra) in [
        (ReductionTag::General, vec![]),
        (ReductionTag::Fanin1, vec![]),
        (ReductionTag::Weights, vec!["-c", "3/2", "-d", "2"]),
        (ReductionTag::Nozero, vec!["-c", "1"]),
    ] {
        assert_eq!(gen(dir.path(), tag.name(), &extra).status.code(), Some(0));
        let params = ReductionParams {
            c: extra.get(1).map(|s| s.parse().unwrap()),
            d: extra.get(3).map(|s| s.parse().unwrap()),
        };
        let g = reduce(tag, &phi, &params).unwrap();
        let read = |s: &str| fs::read_to_string(dir.path().join(s)).unwrap();
        let names: NameMap = serde_json::from_str(&read("g.names.json")).unwrap();
        assert_eq!(names, g.names);
        assert_eq!(Network::from_json(&read("g.net.json")).unwrap(), g.instance.network);
        let input = Specification::parse_input(&read("g.in.spec")).unwrap();
        let output = Specification::parse_output(&read("g.out.spec"), Some(&names.outputs)).unwrap();
        assert_eq!(input.to_text(None), g.instance.input_spec.to_text(None), "{tag}");
        for x in [g.encode(&[true, true, true, true]), g.encode(&[false, false, false, false])] {
            let y = g.instance.network.eval(&x).unwrap();
            assert_eq!(input.check(&x), g.instance.input_spec.check(&x));
            assert_eq!(output.check(&y), g.instance.output_spec.check(&y));
        }
        assert_eq!(output.conjuncts, g.instance.output_spec.conjuncts, "{tag}");
    }
}

#[test]
fn eval_transform_and_milp_export() {
    let (dir, _) = workspace(PSI);
    gen(dir.path(), "general", &[]);
    let o = run(dir.path(), &["eval", "g.net.json", "--input", "1,0,1/2,1"]);
    assert_eq!(o.status.code(), Some(0));
    let original = stdout(&o);
    assert_eq!(original.trim().split(", ").count(), 5);

    assert_eq!(run(dir.path(), &["transform", "g.net.json", "-o", "t.json"]).status.code(), Some(0));
    let t = Network::load(dir.path().join("t.json")).unwrap();
    let hidden = &t.layers()[..t.layers().len() - 1];
    assert!(hidden.iter().flatten().all(|n| n.activation.is_relu()));
    let o = run(dir.path(), &["eval", "t.json", "--input", "1,0,1/2,1"]);
    assert_eq!(stdout(&o), original);

    // the general reduction leaves the inputs unbounded
    let o = run(dir.path(), &["encode-milp", "g.net.json", "g.in.spec", "g.out.spec", "--names", "g.names.json", "-o", "g.lp"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("input dimension 0"));

    gen(dir.path(), "fanin1", &[]);
    let o = run(dir.path(), &["encode-milp", "g.net.json", "g.in.spec", "g.out.spec", "--names", "g.names.json", "-o", "g.lp"]);
    assert_eq!(o.status.code(), Some(0));
    let lp = fs::read_to_string(dir.path().join("g.lp")).unwrap();
    assert!(lp.contains("Binary") && lp.trim_end().ends_with("End"));
}

#[test]
fn oracles_agree_with_solve() {
    let (dir, _) = workspace(PSI);
    gen(dir.path(), "fanin1", &[]);
    let o = run(dir.path(), &["oracle", "reach", "g.net.json", "g.in.spec", "g.out.spec", "--names", "g.names.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(run(dir.path(), &solve_args()).status.code(), Some(0));

    let o = run(dir.path(), &["oracle", "grid", "f.cnf", "--reduction", "nozero", "-c", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["checked"], 16);
    assert_eq!(report["mismatches"].as_array().unwrap().len(), 0);
}

#[test]
fn worker_count_does_not_change_the_verdict() {
    let (dir, _) = workspace(PSI);
    gen(dir.path(), "single-layer", &[]);
    let mut one = solve_args();
    one.extend(["--workers", "1"]);
    let mut four = solve_args();
    four.extend(["--workers", "4"]);
    let a = run(dir.path(), &one);
    let b = run(dir.path(), &four);
    assert_eq!(a.status.code(), b.status.code());
    let first_two = |o: &Output| stdout(o).lines().take(2).map(String::from).collect::<Vec<_>>();
    assert_eq!(first_two(&a), first_two(&b));
}
