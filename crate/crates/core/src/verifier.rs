//! Branch-and-bound decision procedure for REACH.
//!
//! The search fixes activation phases node by node in layer order. Each
//! search node runs interval propagation under the current phases (which may
//! fix further phases or refute the branch outright) and then solves an LP
//! relaxation in which fixed nodes are substituted by their linear piece and
//! unfixed nodes are free variables, optionally tied to their input by a
//! convex envelope. A leaf with every phase fixed is exact: its LP is the
//! phase-fixed program restricted to the nodes that matter.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::interval::{self, Interval, LayerBounds};
use crate::lp::{self, LinearProgram, LpError, LpResult};
use crate::network::{Network, NetworkError};
use crate::presolve::presolve_instance;
use crate::pwl::PwlFunction;
use crate::pwlprog::{PhaseMode, PhaseVector};
use crate::rational::Rational;
use crate::spec::{LinearTerm, Specification};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachInstance {
    pub network: Network,
    pub input_spec: Specification,
    pub output_spec: Specification,
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("input specification mentions a variable beyond input dimension {0}")]
    InputSpecDim(usize),
    #[error("output specification mentions a variable beyond output dimension {0}")]
    OutputSpecDim(usize),
    #[error("node budget of {0} search nodes exhausted")]
    NodeBudget(u64),
    #[error("time budget of {0:?} exhausted")]
    TimeBudget(Duration),
    #[error("closed phase mode requested for a network with discontinuous activations")]
    ClosedDiscontinuous,
    #[error("no witness: the instance is unreachable")]
    NotReachable,
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

impl ReachInstance {
    pub fn new(network: Network, input_spec: Specification, output_spec: Specification) -> Result<Self, VerifyError> {
        if !input_spec.fits(network.input_dim()) {
            return Err(VerifyError::InputSpecDim(network.input_dim()));
        }
        if !output_spec.fits(network.output_dim()) {
            return Err(VerifyError::OutputSpecDim(network.output_dim()));
        }
        Ok(Self {
            network,
            input_spec,
            output_spec,
        })
    }

    /// `φ_in(x) ∧ φ_out(N(x))` in exact arithmetic.
    pub fn check_witness(&self, x: &[Rational]) -> Result<bool, NetworkError> {
        let y = self.network.eval(x)?;
        Ok(self.input_spec.check(x) && self.output_spec.check(&y))
    }

    /// Bit size of every rational in the network and both specifications.
    pub fn bits(&self) -> u64 {
        let spec_bits = |s: &Specification| -> u64 {
            s.conjuncts
                .iter()
                .map(|c| c.bound.bits() + c.term.iter().map(|(_, a)| a.bits()).sum::<u64>())
                .sum()
        };
        self.network.bits() + spec_bits(&self.input_spec) + spec_bits(&self.output_spec)
    }

    /// Actual piece of every node when evaluating at `x`, in node order.
    pub fn phases_at(&self, x: &[Rational]) -> Result<PhaseVector, NetworkError> {
        Ok(self.trace(x)?.1)
    }

    /// Network output and phase vector at `x` in one pass.
    fn trace(&self, x: &[Rational]) -> Result<(Vec<Rational>, PhaseVector), NetworkError> {
        if x.len() != self.network.input_dim() {
            return Err(NetworkError::InputDim {
                expected: self.network.input_dim(),
                got: x.len(),
            });
        }
        let mut phases = Vec::with_capacity(self.network.num_nodes());
        let mut prev = x.to_vec();
        for layer in self.network.layers() {
            let mut values = Vec::with_capacity(layer.len());
            for node in layer {
                let a = node.pre_activation(&prev);
                let k = node.activation.piece_index(&a);
                values.push(node.activation.pieces()[k].eval(&a));
                phases.push(k);
            }
            prev = values;
        }
        Ok((prev, PhaseVector(phases)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifierConfig {
    /// Search nodes before giving up.
    pub max_nodes: Option<u64>,
    pub time_limit: Option<Duration>,
    pub workers: usize,
    /// Solve relaxations and propagate intervals at inner search nodes.
    /// When off, only complete phase assignments are checked.
    pub pruning: bool,
    /// Tie unfixed convex or concave nodes to their input with linear
    /// envelope constraints.
    pub envelope: bool,
    /// `None` picks closed phases for continuous networks, strict otherwise.
    pub phase_mode: Option<PhaseMode>,
    /// Evaluate the network at every relaxation point and stop as soon as it
    /// satisfies both specifications.
    pub early_witness: bool,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self {
            max_nodes: Some(5_000_000),
            time_limit: None,
            workers: 1,
            pruning: true,
            envelope: true,
            phase_mode: None,
            early_witness: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Reachable {
        witness: Vec<Rational>,
        phase: PhaseVector,
        witness_bits: u64,
    },
    Unreachable,
}

impl Verdict {
    pub fn is_reachable(&self) -> bool {
        matches!(self, Verdict::Reachable { .. })
    }

    pub fn witness(&self) -> Option<&[Rational]> {
        match self {
            Verdict::Reachable { witness, .. } => Some(witness),
            Verdict::Unreachable => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub nodes_explored: u64,
    pub lp_calls: u64,
    pub pivots: u64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachResult {
    pub verdict: Verdict,
    pub stats: SearchStats,
}

/// Sizes behind the polynomial witness bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub witness_bits: u64,
    pub instance_bits: u64,
    pub input_dim: usize,
    pub nodes: usize,
}

pub fn witness_size_report(result: &ReachResult, inst: &ReachInstance) -> Result<WitnessReport, VerifyError> {
    match &result.verdict {
        Verdict::Reachable { witness_bits, .. } => Ok(WitnessReport {
            witness_bits: *witness_bits,
            instance_bits: inst.bits(),
            input_dim: inst.network.input_dim(),
            nodes: inst.network.num_nodes(),
        }),
        Verdict::Unreachable => Err(VerifyError::NotReachable),
    }
}

pub fn witness_bits(x: &[Rational]) -> u64 {
    x.iter().map(Rational::bits).sum()
}

type Phases = Vec<Vec<Option<usize>>>;
type Outcome = Result<Option<Vec<Rational>>, VerifyError>;

#[derive(Clone)]
struct Affine {
    term: LinearTerm,
    constant: Rational,
}

impl Affine {
    fn constant(c: Rational) -> Self {
        Self {
            term: LinearTerm::new(),
            constant: c,
        }
    }

    fn var(v: usize) -> Self {
        Self {
            term: LinearTerm::var(v),
            constant: Rational::zero(),
        }
    }

    fn add_scaled(&mut self, other: &Affine, k: &Rational) {
        self.term.add_scaled(&other.term, k);
        self.constant += &(&other.constant * k);
    }

    fn linear(&self, a: &Rational, b: &Rational) -> Affine {
        Affine {
            term: self.term.scale(a),
            constant: &(&self.constant * a) + b,
        }
    }

    fn eval(&self, x: &[Rational]) -> Rational {
        &self.constant + &self.term.eval(x)
    }
}

struct Counters {
    nodes: AtomicU64,
    lps: AtomicU64,
    pivots: AtomicU64,
    /// Lowest subtree index that produced a witness.
    best: AtomicUsize,
    failed: AtomicBool,
}

enum Step {
    Found(Vec<Rational>),
    Pruned,
    Branch(Vec<Phases>),
}

struct Search<'a> {
    inst: &'a ReachInstance,
    cfg: &'a VerifierConfig,
    closed: bool,
    inputs: Vec<Interval>,
    /// Multi-piece nodes in branching order.
    order: Vec<(usize, usize)>,
    /// Per node, the other nodes of its layer with identical parameters.
    twins: Vec<Vec<Vec<usize>>>,
    counters: Counters,
    start: Instant,
}

/// Decides whether some input satisfying `φ_in` maps to an output
/// satisfying `φ_out`.
pub fn decide(inst: &ReachInstance, cfg: &VerifierConfig) -> Result<ReachResult, VerifyError> {
    let start = Instant::now();
    let original = inst;
    let reduced = presolve_instance(inst);
    let inst = &reduced.instance;
    let net = &inst.network;
    let mode = cfg.phase_mode.unwrap_or_else(|| PhaseMode::for_network(net));
    if mode == PhaseMode::Closed && !net.all_continuous() {
        return Err(VerifyError::ClosedDiscontinuous);
    }
    let inputs = inst
        .input_spec
        .box_bounds(net.input_dim())
        .into_iter()
        .map(|(lo, hi)| Interval::new(lo, hi))
        .collect();
    let order = net
        .node_ids()
        .filter(|id| net.node(*id).activation.num_pieces() > 1)
        .map(|id| (id.layer, id.index))
        .collect();
    let mut search = Search {
        inst,
        cfg,
        closed: mode == PhaseMode::Closed,
        inputs,
        order,
        twins: twin_groups(net),
        counters: Counters {
            nodes: AtomicU64::new(0),
            lps: AtomicU64::new(0),
            pivots: AtomicU64::new(0),
            best: AtomicUsize::new(usize::MAX),
            failed: AtomicBool::new(false),
        },
        start,
    };
    let root: Phases = net.layers().iter().map(|l| vec![None; l.len()]).collect();
    if cfg.pruning {
        search.tighten_inputs(&root)?;
    }
    let found = if cfg.workers <= 1 {
        search.dfs(root, usize::MAX)?
    } else {
        search.parallel(root)?
    };
    let verdict = match found {
        Some(t) => {
            let x = reduced.lift(&t);
            let (y, phase) = original.trace(&x)?;
            assert!(
                original.input_spec.check(&x) && original.output_spec.check(&y),
                "verifier produced an invalid witness"
            );
            Verdict::Reachable {
                phase,
                witness_bits: witness_bits(&x),
                witness: x,
            }
        }
        None => Verdict::Unreachable,
    };
    let c = &search.counters;
    Ok(ReachResult {
        verdict,
        stats: SearchStats {
            nodes_explored: c.nodes.load(Ordering::Relaxed),
            lp_calls: c.lps.load(Ordering::Relaxed),
            pivots: c.pivots.load(Ordering::Relaxed),
            wall_time: start.elapsed(),
        },
    })
}

fn twin_groups(net: &Network) -> Vec<Vec<Vec<usize>>> {
    net.layers()
        .iter()
        .map(|layer| {
            (0..layer.len())
                .map(|i| {
                    if layer[i].activation.num_pieces() == 1 {
                        return Vec::new();
                    }
                    (0..layer.len()).filter(|&j| j != i && layer[j] == layer[i]).collect()
                })
                .collect()
        })
        .collect()
}

impl Search<'_> {
    fn net(&self) -> &Network {
        &self.inst.network
    }

    fn charge_node(&self) -> Result<(), VerifyError> {
        let n = self.counters.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        if let Some(max) = self.cfg.max_nodes {
            if n > max {
                return Err(VerifyError::NodeBudget(max));
            }
        }
        if let Some(limit) = self.cfg.time_limit {
            if self.start.elapsed() > limit {
                return Err(VerifyError::TimeBudget(limit));
            }
        }
        Ok(())
    }

    fn solve(&self, lp: &LinearProgram) -> Result<LpResult, VerifyError> {
        let (r, stats) = lp::solve_with_stats(lp)?;
        self.counters.lps.fetch_add(1, Ordering::Relaxed);
        self.counters.pivots.fetch_add(stats.pivots as u64, Ordering::Relaxed);
        Ok(r)
    }

    /// Depth-first search below `phases`. `slot` is the subtree index used
    /// to cancel work once a lower-index subtree has a witness.
    fn dfs(&self, phases: Phases, slot: usize) -> Result<Option<Vec<Rational>>, VerifyError> {
        let mut stack = vec![phases];
        while let Some(p) = stack.pop() {
            if self.counters.best.load(Ordering::Relaxed) < slot || self.counters.failed.load(Ordering::Relaxed) {
                return Ok(None);
            }
            match self.step(p)? {
                Step::Found(x) => return Ok(Some(x)),
                Step::Pruned => {}
                Step::Branch(children) => stack.extend(children.into_iter().rev()),
            }
        }
        Ok(None)
    }

    fn parallel(&self, root: Phases) -> Result<Option<Vec<Rational>>, VerifyError> {
        let target = 4 * self.cfg.workers;
        let mut frontier = vec![root];
        while frontier.len() < target {
            let mut next = Vec::new();
            let mut grew = false;
            for p in frontier {
                match self.step(p)? {
                    Step::Found(x) => return Ok(Some(x)),
                    Step::Pruned => {}
                    Step::Branch(children) => {
                        grew = true;
                        next.extend(children);
                    }
                }
            }
            frontier = next;
            if !grew {
                return Ok(None);
            }
        }
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<(usize, Outcome)>> = Mutex::new(Vec::new());
        let frontier = &frontier;
        std::thread::scope(|s| {
            for _ in 0..self.cfg.workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= frontier.len() || self.counters.failed.load(Ordering::Relaxed) {
                        break;
                    }
                    if self.counters.best.load(Ordering::Relaxed) < i {
                        continue;
                    }
                    let r = self.dfs(frontier[i].clone(), i);
                    match &r {
                        Ok(Some(_)) => {
                            self.counters.best.fetch_min(i, Ordering::Relaxed);
                        }
                        Err(_) => self.counters.failed.store(true, Ordering::Relaxed),
                        Ok(None) => {}
                    }
                    results.lock().expect("results lock").push((i, r));
                });
            }
        });
        let mut results = results.into_inner().expect("results lock");
        results.sort_by_key(|(i, _)| *i);
        let mut error = None;
        for (_, r) in results {
            match r {
                Ok(Some(x)) => return Ok(Some(x)),
                Ok(None) => {}
                Err(e) => {
                    error.get_or_insert(e);
                }
            }
        }
        match error {
            Some(e) => Err(e),
            None => Ok(None),
        }
    }

    /// Replaces each input interval by the range of that input over the
    /// root relaxation, two rounds deep.
    fn tighten_inputs(&mut self, root: &Phases) -> Result<(), VerifyError> {
        let n = self.net().input_dim();
        for _ in 0..2 {
            let mut phases = root.clone();
            let Some(bounds) = interval::propagate(self.net(), &self.inputs, &mut phases, self.closed, true) else {
                return Ok(());
            };
            let (lp, _) = self.relaxation(&phases, Some(&bounds));
            let terms: Vec<LinearTerm> = (0..n).map(LinearTerm::var).collect();
            let (ranges, stats) = lp::ranges(&lp, &terms)?;
            self.counters.lps.fetch_add(1, Ordering::Relaxed);
            self.counters.pivots.fetch_add(stats.pivots as u64, Ordering::Relaxed);
            let Some(ranges) = ranges else {
                return Ok(());
            };
            let mut changed = false;
            for (b, (lo, hi)) in self.inputs.iter_mut().zip(ranges) {
                if let Some(v) = lo.filter(|v| b.lo.as_ref().is_none_or(|old| v > old)) {
                    b.lo = Some(v);
                    changed = true;
                }
                if let Some(v) = hi.filter(|v| b.hi.as_ref().is_none_or(|old| v < old)) {
                    b.hi = Some(v);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        Ok(())
    }

    fn fix_with_twins(&self, phases: &mut Phases, l: usize, i: usize, k: usize) {
        phases[l][i] = Some(k);
        for &j in &self.twins[l][i] {
            phases[l][j] = Some(k);
        }
    }

    fn step(&self, mut phases: Phases) -> Result<Step, VerifyError> {
        self.charge_node()?;
        let bounds = if self.cfg.pruning {
            match interval::propagate(self.net(), &self.inputs, &mut phases, self.closed, true) {
                Some(b) => Some(b),
                None => return Ok(Step::Pruned),
            }
        } else {
            None
        };
        let next = self.order.iter().copied().find(|&(l, i)| phases[l][i].is_none());
        if let (Some((l, i)), false) = (next, self.cfg.pruning) {
            let pieces = self.net().layers()[l][i].activation.num_pieces();
            let children = (0..pieces)
                .rev()
                .map(|k| {
                    let mut child = phases.clone();
                    self.fix_with_twins(&mut child, l, i, k);
                    child
                })
                .collect();
            return Ok(Step::Branch(children));
        }
        let (lp, args) = self.relaxation(&phases, bounds.as_ref());
        let x = match self.solve(&lp)? {
            LpResult::Infeasible => return Ok(Step::Pruned),
            LpResult::Feasible(x) | LpResult::Optimal { assignment: x, .. } => x,
            LpResult::Unbounded => unreachable!("relaxations carry no objective"),
        };
        let n = self.net().input_dim();
        let point = &x[..n];
        let Some((l, i)) = next else {
            return Ok(Step::Found(point.to_vec()));
        };
        if self.cfg.early_witness && self.inst.check_witness(point)? {
            return Ok(Step::Found(point.to_vec()));
        }
        let f = &self.net().layers()[l][i].activation;
        let preferred = f.piece_index(&args[l][i].eval(&x));
        let mut pieces: Vec<usize> = vec![preferred];
        pieces.extend((0..f.num_pieces()).rev().filter(|&k| k != preferred));
        let children = pieces
            .into_iter()
            .map(|k| {
                let mut child = phases.clone();
                self.fix_with_twins(&mut child, l, i, k);
                child
            })
            .collect();
        Ok(Step::Branch(children))
    }

    /// LP over the inputs plus one variable per unfixed multi-piece node.
    /// Also returns every node's argument as an affine form over those
    /// variables.
    fn relaxation(&self, phases: &Phases, bounds: Option<&LayerBounds>) -> (LinearProgram, Vec<Vec<Affine>>) {
        let net = self.net();
        let n = net.input_dim();
        let mut lp = LinearProgram::with_vars(n);
        let mut prev: Vec<Affine> = (0..n).map(Affine::var).collect();
        let mut args_all = Vec::with_capacity(net.layers().len());
        for (l, layer) in net.layers().iter().enumerate() {
            let mut values = Vec::with_capacity(layer.len());
            let mut args = Vec::with_capacity(layer.len());
            for (i, node) in layer.iter().enumerate() {
                let mut arg = Affine::constant(node.bias.clone());
                for (w, v) in node.weights.iter().zip(&prev) {
                    if !w.is_zero() {
                        arg.add_scaled(v, w);
                    }
                }
                let f = &node.activation;
                let value = if f.num_pieces() == 1 {
                    let p = &f.pieces()[0];
                    arg.linear(&p.slope, &p.offset)
                } else if let Some(k) = phases[l][i] {
                    if let Some(t) = f.lower_breakpoint(k) {
                        lp.add_ge(arg.term.clone(), t - &arg.constant);
                    }
                    if let Some(t) = f.upper_breakpoint(k) {
                        let b = t - &arg.constant;
                        if self.closed {
                            lp.add_le(arg.term.clone(), b);
                        } else {
                            lp.add_lt(arg.term.clone(), b);
                        }
                    }
                    let p = &f.pieces()[k];
                    arg.linear(&p.slope, &p.offset)
                } else {
                    let y = lp.add_var(format!("y_{}_{}", l + 1, i));
                    if self.cfg.envelope {
                        if let Some(b) = bounds {
                            add_envelope(&mut lp, y, &arg, f, &b[l][i].pre, &b[l][i].post);
                        }
                    }
                    Affine::var(y)
                };
                values.push(value);
                args.push(arg);
            }
            args_all.push(args);
            prev = values;
        }
        for c in &self.inst.input_spec.conjuncts {
            lp.add_le(c.term.clone(), c.bound.clone());
        }
        for c in &self.inst.output_spec.conjuncts {
            let mut e = Affine::constant(Rational::zero());
            for (j, a) in c.term.iter() {
                e.add_scaled(&prev[j], a);
            }
            lp.add_le(e.term, &c.bound - &e.constant);
        }
        (lp, args_all)
    }
}

/// Sound linear constraints linking `y = f(arg)` for an unfixed node.
fn add_envelope(
    lp: &mut LinearProgram,
    y: usize,
    arg: &Affine,
    f: &PwlFunction,
    pre: &Interval,
    post: &Interval,
) {
    if let Some(lo) = &post.lo {
        lp.add_ge(LinearTerm::var(y), lo.clone());
    }
    if let Some(hi) = &post.hi {
        lp.add_le(LinearTerm::var(y), hi.clone());
    }
    let convex = f.is_convex();
    let concave = f.is_concave();
    if !convex && !concave {
        return;
    }
    // y ≥ piece (convex) or y ≤ piece (concave), written as
    // sign·(a·arg + b − y) ≤ 0
    let sign = if convex { Rational::one() } else { -Rational::one() };
    for p in f.pieces() {
        let mut t = arg.term.scale(&(&p.slope * &sign));
        t.add(y, &-&sign);
        let rhs = -&(&(&(&p.slope * &arg.constant) + &p.offset) * &sign);
        lp.add_le(t, rhs);
    }
    // chord on the opposite side when the argument range is finite
    if let (Some(l), Some(u)) = (&pre.lo, &pre.hi) {
        if l < u {
            let fl = f.eval(l);
            let s = &(&f.eval(u) - &fl) / &(u - l);
            // sign·(y − fl − s·(arg − l)) ≤ 0
            let mut t = arg.term.scale(&-&(&s * &sign));
            t.add(y, &sign);
            let rhs = &(&fl + &(&s * &(&arg.constant - l))) * &sign;
            lp.add_le(t, rhs);
        }
    }
}
