//! `reachkit` command-line front end.
//!
//! Exit codes: 0 for a positive answer (reachable, satisfiable, command
//! succeeded), 1 for a negative answer (unreachable, unsatisfiable), 2 for
//! any error including an exhausted budget.

use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use reachkit::milp;
use reachkit::oracle::{self, BruteConfig, BruteVerdict};
use reachkit::pwlprog::PhaseMode;
use reachkit::reductions::{self, CnfFormula, NameMap, ReductionParams, ReductionTag};
use reachkit::verifier::{self, ReachInstance, Verdict, VerifierConfig};
use reachkit::{Network, Rational, Specification};

type CliResult = Result<ExitCode, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "reachkit", version, about = "Exact reachability for piecewise-linear networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether some input meeting the input spec reaches the output spec.
    Solve(SolveArgs),
    /// Build a reachability instance from a 3-CNF formula.
    Gen(GenArgs),
    /// Write the mixed-integer encoding of an instance in LP format.
    EncodeMilp(EncodeArgs),
    /// Evaluate a network on one input vector.
    Eval(EvalArgs),
    /// Rewrite a ReLU/identity network to use ReLU nodes only.
    Transform(TransformArgs),
    /// Brute-force reference answers.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Args)]
struct InstanceArgs {
    /// Network JSON file.
    net: PathBuf,
    /// Input specification over x0, x1, ...
    input_spec: PathBuf,
    /// Output specification over y0, y1, ... or the names in --names.
    output_spec: PathBuf,
    /// Name map JSON written by `gen`, used to resolve output names.
    #[arg(long)]
    names: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Search node budget.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_nodes: Option<u64>,
    /// Wall-clock budget in milliseconds; REACHKIT_BUDGET_MS overrides it.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    time_ms: Option<u64>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
    /// Use strict piece boundaries even for continuous networks.
    #[arg(long)]
    strict: bool,
    /// Also write the MILP encoding to this path.
    #[arg(long)]
    milp_out: Option<PathBuf>,
    /// Write the JSON report here instead of only printing text.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Recorded in the report; the search itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReductionArg {
    General,
    GeneralReluOnly,
    SingleLayer,
    Fanin1,
    Fanin2,
    Weights,
    Nozero,
}

impl From<ReductionArg> for ReductionTag {
    fn from(r: ReductionArg) -> Self {
        match r {
            ReductionArg::General => ReductionTag::General,
            ReductionArg::GeneralReluOnly => ReductionTag::GeneralReluOnly,
            ReductionArg::SingleLayer => ReductionTag::SingleLayer,
            ReductionArg::Fanin1 => ReductionTag::Fanin1,
            ReductionArg::Fanin2 => ReductionTag::Fanin2,
            ReductionArg::Weights => ReductionTag::Weights,
            ReductionArg::Nozero => ReductionTag::Nozero,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// DIMACS CNF file with clauses of at most three literals.
    cnf: PathBuf,
    #[arg(long, value_enum)]
    reduction: ReductionArg,
    #[arg(short, allow_hyphen_values = true)]
    c: Option<Rational>,
    #[arg(short, allow_hyphen_values = true)]
    d: Option<Rational>,
    /// Files are written as PREFIX.net.json, PREFIX.in.spec,
    /// PREFIX.out.spec and PREFIX.names.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Destination LP file.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    net: PathBuf,
    /// Comma-separated rationals, e.g. "1,0,1/2".
    #[arg(long, allow_hyphen_values = true)]
    input: String,
}

#[derive(Args)]
struct TransformArgs {
    net: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Try every assignment of a DIMACS formula.
    Sat { cnf: PathBuf },
    /// Solve the phase-fixed program of every phase vector.
    Reach {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Largest phase space to enumerate.
        #[arg(long, default_value_t = oracle::DEFAULT_PHASE_CAP)]
        cap: u128,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        workers: u64,
    },
    /// Compare a generated instance with the formula on every 0/1 assignment.
    Grid {
        cnf: PathBuf,
        #[arg(long, value_enum)]
        reduction: ReductionArg,
        #[arg(short, allow_hyphen_values = true)]
        c: Option<Rational>,
        #[arg(short, allow_hyphen_values = true)]
        d: Option<Rational>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Gen(a) => gen(a),
        Command::EncodeMilp(a) => encode_milp(a),
        Command::Eval(a) => eval(a),
        Command::Transform(a) => transform(a),
        Command::Oracle(o) => run_oracle(o),
    };
    match run {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, Box<dyn Error>> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn load_instance(a: &InstanceArgs) -> Result<ReachInstance, Box<dyn Error>> {
    let net = Network::from_json(&read(&a.net)?).map_err(|e| format!("{}: {e}", a.net.display()))?;
    let names: Option<NameMap> = match &a.names {
        Some(p) => Some(serde_json::from_str(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?),
        None => None,
    };
    let input = Specification::parse_input(&read(&a.input_spec)?).map_err(|e| format!("{}: {e}", a.input_spec.display()))?;
    let output = Specification::parse_output(&read(&a.output_spec)?, names.as_ref().map(|n| n.outputs.as_slice()))
        .map_err(|e| format!("{}: {e}", a.output_spec.display()))?;
    Ok(ReachInstance::new(net, input, output)?)
}

fn join(v: &[Rational]) -> String {
    v.iter().map(Rational::to_string).collect::<Vec<_>>().join(", ")
}

fn budget_ms(flag: Option<u64>) -> Result<Option<u64>, Box<dyn Error>> {
    match std::env::var("REACHKIT_BUDGET_MS") {
        Ok(s) => match s.trim().parse::<u64>() {
            Ok(ms) if ms > 0 => Ok(Some(ms)),
            _ => Err(format!("REACHKIT_BUDGET_MS must be a positive integer, got `{s}`").into()),
        },
        Err(_) => Ok(flag),
    }
}

fn solve(a: SolveArgs) -> CliResult {
    let inst = load_instance(&a.instance)?;
    let mut cfg = VerifierConfig {
        workers: a.workers as usize,
        ..VerifierConfig::default()
    };
    if a.max_nodes.is_some() {
        cfg.max_nodes = a.max_nodes;
    }
    cfg.time_limit = budget_ms(a.time_ms)?.map(Duration::from_millis);
    if a.strict {
        cfg.phase_mode = Some(PhaseMode::Strict);
    }
    if let Some(path) = &a.milp_out {
        milp::export_lp(&milp::encode(&inst)?, path)?;
    }
    let result = verifier::decide(&inst, &cfg)?;
    let s = &result.stats;
    let stats = format!(
        "nodes {}, lp calls {}, pivots {}, time {:.3}s",
        s.nodes_explored,
        s.lp_calls,
        s.pivots,
        s.wall_time.as_secs_f64()
    );
    let code = match &result.verdict {
        Verdict::Reachable { witness, witness_bits, .. } => {
            println!("REACHABLE");
            println!("witness: {}", join(witness));
            println!("witness_bits: {witness_bits}");
            println!("stats: {stats}");
            ExitCode::SUCCESS
        }
        Verdict::Unreachable => {
            println!("UNREACHABLE");
            println!("stats: {stats}");
            ExitCode::from(1)
        }
    };
    if let Some(path) = &a.json {
        let report = json!({
            "seed": a.seed,
            "reachable": result.verdict.is_reachable(),
            "witness": result.verdict.witness().map(|w| w.iter().map(Rational::to_string).collect::<Vec<_>>()),
            "witness_bits": match &result.verdict {
                Verdict::Reachable { witness_bits, .. } => Some(*witness_bits),
                Verdict::Unreachable => None,
            },
            "instance_bits": inst.bits(),
            "layers": inst.network.depth(),
            "weight_alphabet": alphabet(&inst.network),
            "stats": {
                "nodes_explored": s.nodes_explored,
                "lp_calls": s.lp_calls,
                "pivots": s.pivots,
                "wall_time_ms": s.wall_time.as_millis() as u64,
            },
        });
        fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(code)
}

fn alphabet(net: &Network) -> Vec<String> {
    net.weight_alphabet().iter().map(Rational::to_string).collect()
}

fn formula(path: &Path) -> Result<CnfFormula, Box<dyn Error>> {
    CnfFormula::parse_dimacs(&read(path)?).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn generate(cnf: &Path, r: ReductionArg, c: Option<Rational>, d: Option<Rational>) -> Result<(CnfFormula, reductions::GeneratedInstance), Box<dyn Error>> {
    let phi = formula(cnf)?;
    let g = reductions::reduce(r.into(), &phi, &ReductionParams { c, d })?;
    Ok((phi, g))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn gen(a: GenArgs) -> CliResult {
    let (_, g) = generate(&a.cnf, a.reduction, a.c, a.d)?;
    let inst = &g.instance;
    let net_path = with_suffix(&a.out, ".net.json");
    inst.network.save(&net_path)?;
    fs::write(with_suffix(&a.out, ".in.spec"), inst.input_spec.to_text(None))?;
    fs::write(with_suffix(&a.out, ".out.spec"), inst.output_spec.to_text(Some(&g.names.outputs)))?;
    fs::write(with_suffix(&a.out, ".names.json"), g.name_map_json() + "\n")?;

    let net = &inst.network;
    let summary = json!({
        "reduction": g.tag.name(),
        "seed": a.seed,
        "params": g.params,
        "layers": net.depth(),
        "widths": net.widths(),
        "input_dim": net.input_dim(),
        "output_dim": net.output_dim(),
        "weight_alphabet": alphabet(net),
        "input_spec_simple": inst.input_spec.is_simple(),
        "output_spec": inst.output_spec.to_text(Some(&g.names.outputs)).trim_end(),
        "instance_bits": inst.bits(),
    });
    println!("reduction: {}", g.tag);
    println!("layers: {}", net.depth());
    println!("widths: {:?}", net.widths());
    println!("weight alphabet: {{{}}}", alphabet(net).join(", "));
    println!("input spec simple: {}", inst.input_spec.is_simple());
    println!("output spec: {}", inst.output_spec.to_text(Some(&g.names.outputs)).trim_end().replace('\n', "; "));
    fs::write(with_suffix(&a.out, ".summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(ExitCode::SUCCESS)
}

fn encode_milp(a: EncodeArgs) -> CliResult {
    let inst = load_instance(&a.instance)?;
    let m = milp::encode(&inst)?;
    milp::export_lp(&m, &a.output)?;
    println!(
        "wrote {} ({} relu nodes, {} binaries)",
        a.output.display(),
        m.relus.len(),
        m.binaries.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_vector(s: &str) -> Result<Vec<Rational>, Box<dyn Error>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.trim().parse::<Rational>().map_err(|e| format!("`{}`: {e}", t.trim()).into()))
        .collect()
}

fn eval(a: EvalArgs) -> CliResult {
    let net = Network::load(&a.net)?;
    let x = parse_vector(&a.input)?;
    println!("{}", join(&net.eval(&x)?));
    Ok(ExitCode::SUCCESS)
}

fn transform(a: TransformArgs) -> CliResult {
    let net = Network::load(&a.net)?;
    let t = reductions::to_relu_only(&net)?;
    t.save(&a.output)?;
    println!("layers: {}", t.depth());
    println!("widths: {:?}", t.widths());
    Ok(ExitCode::SUCCESS)
}

fn run_oracle(o: OracleCommand) -> CliResult {
    match o {
        OracleCommand::Sat { cnf } => {
            let r = oracle::sat_bruteforce(&formula(&cnf)?)?;
            match r.assignment {
                Some(a) => {
                    let bits: Vec<&str> = a.iter().map(|&b| if b { "1" } else { "0" }).collect();
                    println!("SAT");
                    println!("assignment: {}", bits.join(" "));
                    Ok(ExitCode::SUCCESS)
                }
                None => {
                    println!("UNSAT");
                    Ok(ExitCode::from(1))
                }
            }
        }
        OracleCommand::Reach { instance, cap, workers } => {
            let inst = load_instance(&instance)?;
            let cfg = BruteConfig {
                cap,
                workers: workers as usize,
                mode: None,
            };
            match oracle::reach_bruteforce_with(&inst, &cfg)? {
                BruteVerdict::Reachable { witness, .. } => {
                    println!("REACHABLE");
                    println!("witness: {}", join(&witness));
                    println!("witness_bits: {}", verifier::witness_bits(&witness));
                    Ok(ExitCode::SUCCESS)
                }
                BruteVerdict::Unreachable => {
                    println!("UNREACHABLE");
                    Ok(ExitCode::from(1))
                }
            }
        }
        OracleCommand::Grid { cnf, reduction, c, d } => {
            let (phi, g) = generate(&cnf, reduction, c, d)?;
            let report = oracle::boolean_grid_check(&g, &phi)?;
            let out: Value = serde_json::to_value(&report)?;
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(if report.consistent() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}
