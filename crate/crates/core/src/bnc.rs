//! Branch-and-cut: LP relaxation with lazily separated cuts, branching on
//! fractional variables, and incumbents from certified integral points and the
//! rounding heuristic.
//!
//! One simplex instance lives for the whole search. Nodes only differ in
//! variable bounds, so each node restores the root box, applies its branching
//! decisions and warm starts from its parent's basis. Cuts are globally valid
//! and shared by all nodes.

use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::decompose::decompose;
use crate::extended::{ExtendedError, ExtendedGraph};
use crate::heuristics::{flow_deco_round, prune_steiner_nodes};
use crate::instance::Instance;
use crate::lp::{Basis, LpProblem, LpStatus, Row, Simplex, Tolerances};
use crate::scf::{build_scf, is_ip_feasible, FractionalPoint, IpSolution, ScfFlags, ScfModel};
use crate::separation::{separate, SeparationConfig};
use crate::va::{check_va, cost_cvsap, VirtualArborescence};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeOrder {
    BestBound,
    DepthFirst,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub time_limit: Option<Duration>,
    pub node_limit: Option<u64>,
    pub separation: SeparationConfig,
    pub node_order: NodeOrder,
    /// Run the rounding heuristic at the root and every `k`-th node; 0 disables it.
    pub heuristic_frequency: u64,
    pub integrality_tolerance: f64,
    pub root_cut_rounds: usize,
    pub node_cut_rounds: usize,
    pub seed: u64,
    /// Interval of trace rows written while nothing changes.
    pub heartbeat: Duration,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_limit: None,
            node_limit: None,
            separation: SeparationConfig::default(),
            node_order: NodeOrder::BestBound,
            heuristic_frequency: 1,
            integrality_tolerance: 1e-6,
            root_cut_rounds: 50,
            node_cut_rounds: 5,
            seed: 0,
            heartbeat: Duration::from_secs(1),
        }
    }
}

impl SolverConfig {
    /// Default configuration with a named separation setting (`ts`, `t`, `s`, `none`).
    pub fn with_setting(name: &str) -> Option<Self> {
        Some(SolverConfig {
            separation: SeparationConfig::setting(name)?,
            ..Default::default()
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// A limit was hit with an incumbent.
    Feasible,
    Infeasible,
    /// A limit was hit without an incumbent.
    Limit,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Limit => "limit",
        })
    }
}

/// Where an incumbent came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Heuristic,
    IntegralRelaxation,
}

impl Origin {
    pub fn label(self) -> &'static str {
        match self {
            Origin::Heuristic => "heuristic",
            Origin::IntegralRelaxation => "relaxation",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutKind {
    Site,
    Terminal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cut {
    pub kind: CutKind,
    pub row: Row,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CutCounts {
    pub site: u64,
    pub terminal: u64,
}

impl CutCounts {
    pub fn total(&self) -> u64 {
        self.site + self.terminal
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub time_s: f64,
    pub primal: Option<f64>,
    pub dual: f64,
    pub gap: f64,
    pub cuts: CutCounts,
    pub nodes: u64,
    pub origin: Option<Origin>,
}

pub const TRACE_HEADER: &str = "time_s,primal,dual,gap,cuts_steiner,cuts_terminal,nodes,origin";

impl TraceRow {
    /// Floats use the shortest representation that parses back to the same value.
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.time_s,
            self.primal.map(|p| p.to_string()).unwrap_or_default(),
            self.dual,
            self.gap,
            self.cuts.site,
            self.cuts.terminal,
            self.nodes,
            self.origin.map(Origin::label).unwrap_or_default()
        )
    }

    pub fn from_csv(line: &str) -> Option<TraceRow> {
        let cols: Vec<&str> = line.trim_end().split(',').collect();
        if cols.len() != 8 {
            return None;
        }
        Some(TraceRow {
            time_s: cols[0].parse().ok()?,
            primal: if cols[1].is_empty() { None } else { Some(cols[1].parse().ok()?) },
            dual: cols[2].parse().ok()?,
            gap: cols[3].parse().ok()?,
            cuts: CutCounts {
                site: cols[4].parse().ok()?,
                terminal: cols[5].parse().ok()?,
            },
            nodes: cols[6].parse().ok()?,
            origin: match cols[7] {
                "" => None,
                "heuristic" => Some(Origin::Heuristic),
                "relaxation" => Some(Origin::IntegralRelaxation),
                _ => return None,
            },
        })
    }
}

pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in trace {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

/// `|P - D| / |D|`; infinite without a primal value or when only `D` is zero.
pub fn objective_gap(primal: Option<f64>, dual: f64) -> f64 {
    match primal {
        None => f64::INFINITY,
        Some(p) if p == dual => 0.0,
        Some(_) if dual == 0.0 => f64::INFINITY,
        Some(p) => (p - dual).abs() / dual.abs(),
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub incumbent: Option<VirtualArborescence>,
    pub primal: Option<f64>,
    pub dual: f64,
    pub gap: f64,
    pub origin: Option<Origin>,
    /// Root LP before any cut was added.
    pub root_initial_bound: Option<f64>,
    /// Root LP after the root cut loop.
    pub root_bound: Option<f64>,
    pub trace: Vec<TraceRow>,
    pub cuts: CutCounts,
    pub nodes: u64,
    pub lp_iterations: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Instance(#[from] ExtendedError),
}

/// What the engine needs from a model.
pub trait Formulation {
    fn lp(&self) -> LpProblem;
    fn is_integer(&self, j: usize) -> bool;
    /// Variables grouped by branching priority, highest first.
    fn branch_classes(&self) -> Vec<Vec<usize>>;
    fn separate(&self, v: &[f64], cfg: &SeparationConfig) -> Vec<Cut>;
    /// Arborescence for an integral point, or the reason it is not yet feasible.
    fn certify(&self, v: &[f64], tol: f64) -> Result<VirtualArborescence, String>;
    /// Flow on the single-commodity extended graph, input to the rounding heuristic.
    fn relaxed_flow(&self, v: &[f64]) -> FractionalPoint;
}

/// The single-commodity model with max-flow separation.
pub struct ScfFormulation {
    pub model: ScfModel,
}

impl ScfFormulation {
    pub fn new(ext: &ExtendedGraph) -> Self {
        ScfFormulation {
            model: build_scf(ext, ScfFlags::default()),
        }
    }
}

impl Formulation for ScfFormulation {
    fn lp(&self) -> LpProblem {
        self.model.to_lp()
    }

    fn is_integer(&self, _j: usize) -> bool {
        true
    }

    fn branch_classes(&self) -> Vec<Vec<usize>> {
        let m = self.model.ext.num_edges();
        vec![(m..self.model.num_vars()).collect(), (0..m).collect()]
    }

    fn separate(&self, v: &[f64], cfg: &SeparationConfig) -> Vec<Cut> {
        let ext = &self.model.ext;
        separate(ext, &FractionalPoint::from_vector(ext, v), cfg)
            .iter()
            .map(|c| Cut {
                kind: if c.is_terminal() { CutKind::Terminal } else { CutKind::Site },
                row: c.to_row(ext),
            })
            .collect()
    }

    fn certify(&self, v: &[f64], tol: f64) -> Result<VirtualArborescence, String> {
        let ext = &self.model.ext;
        let sol = IpSolution::from_vector(ext, v, tol).ok_or("point is not integral")?;
        let rep = is_ip_feasible(ext, &sol);
        if !rep.is_feasible() {
            return Err(format!("{:?}", rep.violations));
        }
        Ok(decompose(ext, &sol).expect("feasible integral points decompose"))
    }

    fn relaxed_flow(&self, v: &[f64]) -> FractionalPoint {
        FractionalPoint::from_vector(&self.model.ext, v)
    }
}

/// Slack on bound comparisons against the incumbent.
const PRUNE_TOL: f64 = 1e-6;
/// Non-binding cuts are purged once the pool exceeds this many rows per static row.
const POOL_FACTOR: usize = 2;
const POOL_MIN: usize = 200;

struct Node {
    changes: Vec<(usize, f64, f64)>,
    bound: f64,
    depth: u32,
    seq: u64,
    basis: Option<(u64, Basis)>,
}

enum NodeResult {
    Pruned,
    Branch(Vec<Node>),
    /// The LP could not be solved reliably; the subtree stays unexplored.
    Failed,
}

struct Engine<'a, F: Formulation> {
    form: &'a F,
    ext: &'a ExtendedGraph,
    cfg: &'a SolverConfig,
    lp: LpProblem,
    simplex: Simplex,
    /// `None` for static rows.
    row_kind: Vec<Option<CutKind>>,
    epoch: u64,
    applied: Vec<usize>,
    integral_objective: bool,
    incumbent: Option<(f64, VirtualArborescence, Origin)>,
    dual: f64,
    cuts: CutCounts,
    nodes: u64,
    seq: u64,
    trace: Vec<TraceRow>,
    start: Instant,
    last_row: Instant,
    root_initial: Option<f64>,
    root_final: Option<f64>,
    failures: u64,
    lp_iterations: usize,
}

impl<'a, F: Formulation> Engine<'a, F> {
    fn new(form: &'a F, ext: &'a ExtendedGraph, cfg: &'a SolverConfig) -> Self {
        let lp = form.lp();
        let now = Instant::now();
        let mut simplex = Simplex::new(&lp, Tolerances::default());
        simplex.deadline = cfg.time_limit.map(|t| now + t);
        let integral_objective = (0..lp.num_vars())
            .all(|j| lp.cost[j] == 0.0 || (form.is_integer(j) && lp.cost[j].fract() == 0.0));
        Engine {
            form,
            ext,
            cfg,
            row_kind: vec![None; lp.num_rows()],
            lp,
            simplex,
            epoch: 0,
            applied: Vec::new(),
            integral_objective,
            incumbent: None,
            dual: f64::NEG_INFINITY,
            cuts: CutCounts::default(),
            nodes: 0,
            seq: 0,
            trace: Vec::new(),
            start: now,
            last_row: now,
            root_initial: None,
            root_final: None,
            failures: 0,
            lp_iterations: 0,
        }
    }

    fn primal(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|i| i.0)
    }

    fn out_of_time(&self) -> bool {
        self.cfg.time_limit.is_some_and(|t| self.start.elapsed() >= t)
    }

    fn cutoff(&self, bound: f64) -> bool {
        let Some(p) = self.primal() else { return false };
        if bound >= p - PRUNE_TOL * p.abs().max(1.0) {
            return true;
        }
        // with integral costs a node must improve by a whole unit
        self.integral_objective && (bound - PRUNE_TOL).ceil() >= p - PRUNE_TOL
    }

    fn record(&mut self, force: bool) {
        let now = Instant::now();
        if !force && now.duration_since(self.last_row) < self.cfg.heartbeat {
            return;
        }
        self.last_row = now;
        let primal = self.primal();
        self.trace.push(TraceRow {
            time_s: self.start.elapsed().as_secs_f64(),
            primal,
            dual: self.dual,
            gap: objective_gap(primal, self.dual),
            cuts: self.cuts,
            nodes: self.nodes,
            origin: self.incumbent.as_ref().map(|i| i.2),
        });
    }

    /// Raises the global bound to `d`, never above the incumbent.
    fn raise_dual(&mut self, d: f64) {
        let d = match self.primal() {
            Some(p) => d.min(p),
            None => d,
        };
        if d > self.dual + 1e-9 {
            self.dual = d;
            self.record(true);
        } else {
            self.record(false);
        }
    }

    fn offer(&mut self, va: VirtualArborescence, origin: Origin) {
        let inst = self.ext.instance();
        if !check_va(inst, &va).is_feasible() {
            debug_assert!(origin == Origin::Heuristic, "certified arborescence is infeasible");
            return;
        }
        let c = cost_cvsap(inst, &va);
        if self.primal().is_none_or(|p| c < p - 1e-9) {
            self.incumbent = Some((c, va, origin));
            if self.dual > c {
                self.dual = c;
            }
            self.record(true);
        }
    }

    fn apply_bounds(&mut self, node: &Node) {
        for &j in &self.applied {
            self.simplex.set_bounds(j, self.lp.lower[j], self.lp.upper[j]);
        }
        self.applied.clear();
        for &(j, lo, up) in &node.changes {
            self.simplex.set_bounds(j, lo, up);
            self.applied.push(j);
        }
    }

    /// Rebuilds the simplex from the static model, the current cuts and the node's bounds.
    fn rebuild(&mut self, node: &Node) {
        let mut p = self.lp.clone();
        p.rows = self.simplex.rows().to_vec();
        self.simplex = Simplex::new(&p, Tolerances::default());
        self.simplex.deadline = self.cfg.time_limit.map(|t| self.start + t);
        self.epoch += 1;
        self.applied.clear();
        self.apply_bounds(node);
    }

    fn solve_lp(&mut self, node: &Node) -> LpStatus {
        let before = self.simplex.iterations();
        let mut st = self.simplex.solve();
        self.lp_iterations += self.simplex.iterations() - before;
        if st == LpStatus::IterationLimit && !self.out_of_time() {
            self.rebuild(node);
            st = self.simplex.solve();
            self.lp_iterations += self.simplex.iterations();
        }
        st
    }

    fn add_cuts(&mut self, cuts: Vec<Cut>) {
        let rows: Vec<Row> = cuts.iter().map(|c| c.row.clone()).collect();
        for c in &cuts {
            match c.kind {
                CutKind::Site => self.cuts.site += 1,
                CutKind::Terminal => self.cuts.terminal += 1,
            }
            self.row_kind.push(Some(c.kind));
        }
        self.simplex.add_rows(&rows);
    }

    fn purge_cuts(&mut self) {
        let pool = self.row_kind.iter().filter(|k| k.is_some()).count();
        if pool <= (POOL_FACTOR * self.lp.num_rows()).max(POOL_MIN) {
            return;
        }
        let candidates: Vec<usize> = (0..self.row_kind.len())
            .filter(|&k| self.row_kind[k].is_some() && self.simplex.slack(k).abs() > 1e-6)
            .collect();
        let removed = self.simplex.remove_rows(&candidates);
        if !removed.is_empty() {
            for &k in removed.iter().rev() {
                self.row_kind.remove(k);
            }
            self.epoch += 1;
        }
    }

    fn is_integral(&self, v: &[f64]) -> bool {
        let tol = self.cfg.integrality_tolerance;
        (0..v.len()).all(|j| !self.form.is_integer(j) || (v[j] - v[j].round()).abs() <= tol)
    }

    fn branch_var(&self, v: &[f64]) -> Option<usize> {
        let tol = self.cfg.integrality_tolerance;
        for class in self.form.branch_classes() {
            let mut best: Option<(f64, usize)> = None;
            for j in class {
                let frac = v[j] - v[j].floor();
                let dist = frac.min(1.0 - frac);
                if dist > tol && best.is_none_or(|(d, _)| dist > d) {
                    best = Some((dist, j));
                }
            }
            if let Some((_, j)) = best {
                return Some(j);
            }
        }
        None
    }

    fn process(&mut self, node: Node) -> NodeResult {
        self.nodes += 1;
        let is_root = self.nodes == 1;
        self.apply_bounds(&node);
        if let Some((epoch, basis)) = &node.basis {
            if *epoch == self.epoch {
                self.simplex.load_basis(basis);
            }
        }
        let cap = if is_root {
            self.cfg.root_cut_rounds
        } else {
            self.cfg.node_cut_rounds
        };
        let mut rounds = 0;
        let n = self.lp.num_vars();
        let (obj, v) = loop {
            match self.solve_lp(&node) {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => return NodeResult::Pruned,
                LpStatus::IterationLimit => {
                    self.failures += !self.out_of_time() as u64;
                    return NodeResult::Failed;
                }
            }
            let obj = self.simplex.objective();
            if is_root && self.root_initial.is_none() {
                self.root_initial = Some(obj);
            }
            self.record(false);
            if self.cutoff(obj) {
                return NodeResult::Pruned;
            }
            let v = self.simplex.x()[..n].to_vec();
            let integral = self.is_integral(&v);
            // integral points are separated until clean, regardless of the round cap
            if (integral || rounds < cap) && !self.out_of_time() {
                let cuts = self.form.separate(&v, &self.cfg.separation);
                if !cuts.is_empty() {
                    self.add_cuts(cuts);
                    rounds += 1;
                    continue;
                }
            }
            break (obj, v);
        };
        if is_root {
            self.root_final = Some(obj);
            self.raise_dual(obj);
        }
        self.purge_cuts();

        if self.is_integral(&v) {
            match self.form.certify(&v, self.cfg.integrality_tolerance) {
                Ok(va) => {
                    let va = prune_steiner_nodes(self.ext, &va);
                    self.offer(va, Origin::IntegralRelaxation);
                    return NodeResult::Pruned;
                }
                // only reachable when the time limit stopped separation
                Err(_) if self.out_of_time() => return NodeResult::Failed,
                Err(e) => panic!("integral point passed separation but is infeasible: {}", e),
            }
        }
        let freq = self.cfg.heuristic_frequency;
        if freq > 0 && (self.nodes - 1).is_multiple_of(freq) {
            let point = self.form.relaxed_flow(&v);
            if let Some(va) = flow_deco_round(self.ext, &point, self.cfg.seed.wrapping_add(self.nodes)) {
                self.offer(va, Origin::Heuristic);
            }
        }
        if self.cutoff(obj) {
            return NodeResult::Pruned;
        }
        let j = self.branch_var(&v).expect("fractional points have a branching variable");
        let (lo, up) = self.simplex.bounds(j);
        let basis = Some((self.epoch, self.simplex.basis()));
        let mut children = Vec::with_capacity(2);
        for (clo, cup) in [(lo, v[j].floor()), (v[j].ceil(), up)] {
            let mut changes = node.changes.clone();
            changes.push((j, clo, cup));
            self.seq += 1;
            children.push(Node {
                changes,
                bound: obj,
                depth: node.depth + 1,
                seq: self.seq,
                basis: basis.clone(),
            });
        }
        NodeResult::Branch(children)
    }

    fn pick(&self, open: &mut Vec<Node>) -> Option<Node> {
        if open.is_empty() {
            return None;
        }
        let i = match self.cfg.node_order {
            NodeOrder::DepthFirst => open.len() - 1,
            NodeOrder::BestBound => {
                let mut best = 0;
                for (i, nd) in open.iter().enumerate() {
                    let b = &open[best];
                    if (nd.bound, std::cmp::Reverse(nd.depth), std::cmp::Reverse(nd.seq))
                        < (b.bound, std::cmp::Reverse(b.depth), std::cmp::Reverse(b.seq))
                    {
                        best = i;
                    }
                }
                best
            }
        };
        Some(open.swap_remove(i))
    }

    fn run(mut self) -> SolveReport {
        let mut open = vec![Node {
            changes: Vec::new(),
            bound: f64::NEG_INFINITY,
            depth: 0,
            seq: 0,
            basis: None,
        }];
        let mut limited = false;
        loop {
            open.retain(|nd| !self.cutoff(nd.bound));
            if self.nodes > 0 {
                let frontier = open.iter().map(|nd| nd.bound).fold(f64::INFINITY, f64::min);
                if frontier.is_finite() {
                    self.raise_dual(frontier);
                }
            }
            if open.is_empty() {
                break;
            }
            if self.out_of_time() || self.cfg.node_limit.is_some_and(|l| self.nodes >= l) {
                limited = true;
                break;
            }
            let node = self.pick(&mut open).unwrap();
            // keep the stack order: floor child below, ceil child on top
            if self.cutoff(node.bound) {
                continue;
            }
            let bound = node.bound;
            match self.process(node) {
                NodeResult::Pruned => {}
                NodeResult::Branch(children) => open.extend(children),
                NodeResult::Failed => {
                    limited = true;
                    // keep a valid bound for the unexplored subtree
                    open.push(Node {
                        changes: Vec::new(),
                        bound,
                        depth: u32::MAX,
                        seq: u64::MAX,
                        basis: None,
                    });
                    break;
                }
            }
        }
        let unexplored = open.iter().map(|nd| nd.bound).fold(f64::INFINITY, f64::min);
        let status = match (&self.incumbent, limited && !open.is_empty()) {
            (Some(_), false) => SolveStatus::Optimal,
            (None, false) => SolveStatus::Infeasible,
            (Some(_), true) => SolveStatus::Feasible,
            (None, true) => SolveStatus::Limit,
        };
        match status {
            SolveStatus::Optimal => {
                self.dual = self.primal().unwrap();
            }
            SolveStatus::Infeasible => self.dual = f64::INFINITY,
            _ => {
                if unexplored.is_finite() && unexplored > self.dual {
                    self.dual = unexplored.min(self.primal().unwrap_or(f64::INFINITY));
                }
            }
        }
        self.record(true);
        let primal = self.primal();
        let (incumbent, origin) = match self.incumbent {
            Some((_, va, o)) => (Some(va), Some(o)),
            None => (None, None),
        };
        SolveReport {
            status,
            incumbent,
            primal,
            dual: self.dual,
            gap: objective_gap(primal, self.dual),
            origin,
            root_initial_bound: self.root_initial,
            root_bound: self.root_final,
            trace: self.trace,
            cuts: self.cuts,
            nodes: self.nodes,
            lp_iterations: self.lp_iterations,
            elapsed: self.start.elapsed(),
        }
    }
}

/// Runs branch-and-cut on any formulation over `ext`.
pub fn solve_formulation<F: Formulation>(form: &F, ext: &ExtendedGraph, cfg: &SolverConfig) -> SolveReport {
    Engine::new(form, ext, cfg).run()
}

/// Solves an aggregation instance with the single-commodity model.
pub fn solve(inst: &Instance, cfg: &SolverConfig) -> Result<SolveReport, SolveError> {
    let ext = ExtendedGraph::build(inst)?;
    let form = ScfFormulation::new(&ext);
    Ok(solve_formulation(&form, &ext, cfg))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootBound {
    /// Before any cut.
    pub initial: f64,
    /// After the root cut loop.
    pub after_cuts: f64,
}

/// Bounds of the root relaxation; `None` when the root LP is infeasible.
pub fn root_bound(inst: &Instance, cfg: &SolverConfig) -> Result<Option<RootBound>, SolveError> {
    let cfg = SolverConfig {
        node_limit: Some(1),
        heuristic_frequency: 0,
        ..cfg.clone()
    };
    let r = solve(inst, &cfg)?;
    Ok(r.root_initial_bound.map(|initial| RootBound {
        initial,
        after_cuts: r.root_bound.unwrap_or(initial),
    }))
}
