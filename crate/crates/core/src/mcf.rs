//! Multi-commodity baseline model: one aggregated commodity for all terminals,
//! one unit commodity per site, and priority variables ordering site-to-site
//! connections so they cannot form cycles.
//!
//! The graph has no super source and a single super sink `o-` fed by the root
//! and by every site. Variables are laid out as terminal flow per edge, then
//! site flow per (site, edge), then activations, then priorities.

use std::fmt;

use thiserror::Error;

use crate::bnc::{solve_formulation, Cut, Formulation, SolveReport, SolverConfig};
use crate::extended::{ExtendedError, ExtendedGraph};
use crate::instance::{Instance, NodeId};
use crate::lp::{LpProblem, Row, Sense};
use crate::scf::FractionalPoint;
use crate::separation::SeparationConfig;
use crate::va::{Path, VirtualArborescence};

#[derive(Clone, Debug, PartialEq)]
pub struct McfEdge {
    pub tail: NodeId,
    pub head: NodeId,
    pub cost: f64,
}

/// Network edges in input order, then `(r, o-)`, then one sink edge per site.
#[derive(Clone, Debug)]
pub struct McfGraph {
    inst: Instance,
    edges: Vec<McfEdge>,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
}

impl McfGraph {
    pub fn build(inst: &Instance) -> Result<Self, ExtendedError> {
        // shares validation and the orientation requirement
        ExtendedGraph::build(inst)?;
        let n = inst.num_nodes();
        let sink = n;
        let mut edges: Vec<McfEdge> = inst
            .network
            .edges()
            .iter()
            .map(|e| McfEdge {
                tail: e.tail,
                head: e.head,
                cost: e.cost,
            })
            .collect();
        edges.push(McfEdge {
            tail: inst.request.root,
            head: sink,
            cost: 0.0,
        });
        for s in &inst.request.sites {
            edges.push(McfEdge {
                tail: s.node,
                head: sink,
                cost: 0.0,
            });
        }
        let mut out = vec![Vec::new(); n + 1];
        let mut inc = vec![Vec::new(); n + 1];
        for (i, e) in edges.iter().enumerate() {
            out[e.tail].push(i);
            inc[e.head].push(i);
        }
        Ok(McfGraph {
            inst: inst.clone(),
            edges,
            out,
            inc,
        })
    }

    pub fn instance(&self) -> &Instance {
        &self.inst
    }

    pub fn sink(&self) -> NodeId {
        self.inst.num_nodes()
    }

    pub fn edges(&self) -> &[McfEdge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn root_sink_edge(&self) -> usize {
        self.inst.network.edges().len()
    }

    pub fn site_sink_edge(&self, k: usize) -> usize {
        self.root_sink_edge() + 1 + k
    }

    pub fn out_edges(&self, v: NodeId) -> &[usize] {
        &self.out[v]
    }

    pub fn in_edges(&self, v: NodeId) -> &[usize] {
        &self.inc[v]
    }

    /// Joint capacity of an edge when every site is active.
    fn capacity(&self, e: usize) -> f64 {
        let net = self.inst.network.edges().len();
        if e < net {
            self.inst.network.edge(e).capacity as f64
        } else if e == net {
            self.inst.request.root_capacity as f64
        } else {
            self.inst.request.sites[e - net - 1].capacity as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum McfFamily {
    TerminalConservation,
    SiteConservation,
    Capacity,
    Ordering,
    ReceiverActive,
    NoSelfAbsorption,
    NoTwoCycle,
}

impl McfFamily {
    pub fn label(self) -> &'static str {
        match self {
            McfFamily::TerminalConservation => "MCF-1",
            McfFamily::SiteConservation => "MCF-2",
            McfFamily::Capacity => "MCF-3",
            McfFamily::Ordering => "MCF-4",
            McfFamily::ReceiverActive => "MCF-5",
            McfFamily::NoSelfAbsorption => "MCF-6",
            McfFamily::NoTwoCycle => "MCF-7",
        }
    }
}

impl fmt::Display for McfFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McfFlags {
    /// Include the three strengthening families (receiver active, no self
    /// absorption, no two-cycles).
    pub valid_inequalities: bool,
}

impl Default for McfFlags {
    fn default() -> Self {
        McfFlags {
            valid_inequalities: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McfRow {
    pub family: McfFamily,
    pub name: String,
    pub row: Row,
}

#[derive(Clone, Debug)]
pub struct McfModel {
    pub graph: McfGraph,
    pub flags: McfFlags,
    pub rows: Vec<McfRow>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub names: Vec<String>,
}

impl McfModel {
    pub fn num_sites(&self) -> usize {
        self.graph.inst.request.sites.len()
    }

    pub fn ft_var(&self, e: usize) -> usize {
        e
    }

    pub fn fs_var(&self, k: usize, e: usize) -> usize {
        let m = self.graph.num_edges();
        m + k * m + e
    }

    pub fn x_var(&self, k: usize) -> usize {
        let m = self.graph.num_edges();
        m * (1 + self.num_sites()) + k
    }

    pub fn p_var(&self, k: usize) -> usize {
        self.x_var(0) + self.num_sites() + k
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn count(&self, family: McfFamily) -> usize {
        self.rows.iter().filter(|r| r.family == family).count()
    }

    pub fn to_lp(&self) -> LpProblem {
        let mut p = LpProblem::new();
        for j in 0..self.num_vars() {
            p.add_var(self.names[j].clone(), self.lower[j], self.upper[j], self.cost[j]);
        }
        for r in &self.rows {
            p.add_row_or_bound(r.name.clone(), r.row.clone())
                .expect("model rows reference model variables");
        }
        p
    }

    /// Constraint families violated by `v`, plus domain violations reported as
    /// `None`.
    pub fn violations(&self, v: &[f64], tol: f64) -> Vec<(Option<McfFamily>, String)> {
        let mut out = Vec::new();
        for j in 0..self.num_vars() {
            if v[j] < self.lower[j] - tol || v[j] > self.upper[j] + tol {
                out.push((None, format!("{} = {} outside its domain", self.names[j], v[j])));
            }
        }
        for r in &self.rows {
            if r.row.violation(v) > tol {
                out.push((Some(r.family), r.name.clone()));
            }
        }
        out
    }
}

pub fn build_mcf(graph: &McfGraph, flags: McfFlags) -> McfModel {
    let inst = &graph.inst;
    let m = graph.num_edges();
    let ns = inst.request.sites.len();
    let nv = m * (1 + ns) + 2 * ns;
    let mut model = McfModel {
        graph: graph.clone(),
        flags,
        rows: Vec::new(),
        cost: vec![0.0; nv],
        lower: vec![0.0; nv],
        upper: vec![0.0; nv],
        names: vec![String::new(); nv],
    };
    let label = |e: usize| {
        let ed = &graph.edges[e];
        let h = if ed.head == graph.sink() { "o-".to_string() } else { ed.head.to_string() };
        format!("{}->{}", ed.tail, h)
    };
    for e in 0..m {
        let j = model.ft_var(e);
        model.cost[j] = graph.edges[e].cost;
        model.upper[j] = graph.capacity(e);
        model.names[j] = format!("fT[{}]", label(e));
        for (k, s) in inst.request.sites.iter().enumerate() {
            let j = model.fs_var(k, e);
            model.cost[j] = graph.edges[e].cost;
            model.upper[j] = 1.0;
            model.names[j] = format!("fs[{}][{}]", s.node, label(e));
        }
    }
    for (k, s) in inst.request.sites.iter().enumerate() {
        let j = model.x_var(k);
        model.cost[j] = s.cost;
        model.upper[j] = 1.0;
        model.names[j] = format!("x[{}]", s.node);
        let j = model.p_var(k);
        model.upper[j] = ns.saturating_sub(1) as f64;
        model.names[j] = format!("p[{}]", s.node);
    }

    let mut rows = Vec::new();
    let mut push = |family, name: String, coefs: Vec<(usize, f64)>, sense, rhs| {
        rows.push(McfRow {
            family,
            name,
            row: Row::new(coefs, sense, rhs),
        })
    };
    let conservation = |var: &dyn Fn(usize) -> usize, v: NodeId| {
        let mut coefs: Vec<(usize, f64)> = graph.out_edges(v).iter().map(|&e| (var(e), 1.0)).collect();
        coefs.extend(graph.in_edges(v).iter().map(|&e| (var(e), -1.0)));
        coefs
    };
    for v in 0..inst.num_nodes() {
        let supply = if inst.is_terminal(v) { 1.0 } else { 0.0 };
        push(
            McfFamily::TerminalConservation,
            format!("consT[{}]", v),
            conservation(&|e| model.ft_var(e), v),
            Sense::Eq,
            supply,
        );
    }
    for (k, s) in inst.request.sites.iter().enumerate() {
        for v in 0..inst.num_nodes() {
            let mut coefs = conservation(&|e| model.fs_var(k, e), v);
            if v == s.node {
                coefs.push((model.x_var(k), -1.0));
            }
            push(
                McfFamily::SiteConservation,
                format!("consS[{}][{}]", s.node, v),
                coefs,
                Sense::Eq,
                0.0,
            );
        }
    }
    for e in 0..m {
        let mut coefs = vec![(model.ft_var(e), 1.0)];
        coefs.extend((0..ns).map(|k| (model.fs_var(k, e), 1.0)));
        let (sense, rhs) = match e.checked_sub(graph.root_sink_edge() + 1) {
            Some(k) => {
                coefs.push((model.x_var(k), -graph.capacity(e)));
                (Sense::Le, 0.0)
            }
            None => (Sense::Le, graph.capacity(e)),
        };
        push(McfFamily::Capacity, format!("cap[{}]", label(e)), coefs, sense, rhs);
    }
    let big = ns as f64;
    for (k, s) in inst.request.sites.iter().enumerate() {
        for (kb, sb) in inst.request.sites.iter().enumerate() {
            // p_s - p_sb - big * f^s(sb, o-) >= 1 - big; the diagonal keeps only the flow term
            let mut coefs = vec![(model.fs_var(k, graph.site_sink_edge(kb)), -big)];
            if k != kb {
                coefs.push((model.p_var(k), 1.0));
                coefs.push((model.p_var(kb), -1.0));
            }
            push(
                McfFamily::Ordering,
                format!("order[{}][{}]", s.node, sb.node),
                coefs,
                Sense::Ge,
                1.0 - big,
            );
        }
    }
    if flags.valid_inequalities {
        for (k, s) in inst.request.sites.iter().enumerate() {
            for (kb, sb) in inst.request.sites.iter().enumerate() {
                let into_sb = model.fs_var(k, graph.site_sink_edge(kb));
                if k == kb {
                    push(
                        McfFamily::NoSelfAbsorption,
                        format!("noself[{}]", s.node),
                        vec![(into_sb, 1.0)],
                        Sense::Eq,
                        0.0,
                    );
                    continue;
                }
                push(
                    McfFamily::ReceiverActive,
                    format!("recv[{}][{}]", s.node, sb.node),
                    vec![(into_sb, 1.0), (model.x_var(kb), -1.0)],
                    Sense::Le,
                    0.0,
                );
                if k < kb {
                    push(
                        McfFamily::NoTwoCycle,
                        format!("twocycle[{}][{}]", s.node, sb.node),
                        vec![(into_sb, 1.0), (model.fs_var(kb, graph.site_sink_edge(k)), 1.0)],
                        Sense::Le,
                        1.0,
                    );
                }
            }
        }
    }
    model.rows = rows;
    model
}

/// Integral point of the multi-commodity model.
#[derive(Clone, Debug, PartialEq)]
pub struct McfSolution {
    pub x: Vec<u32>,
    pub ft: Vec<u32>,
    /// Per site, per edge.
    pub fs: Vec<Vec<u32>>,
    pub p: Vec<f64>,
}

impl McfSolution {
    pub fn to_vector(&self, model: &McfModel) -> Vec<f64> {
        let mut v = vec![0.0; model.num_vars()];
        for (e, &f) in self.ft.iter().enumerate() {
            v[model.ft_var(e)] = f as f64;
        }
        for (k, row) in self.fs.iter().enumerate() {
            for (e, &f) in row.iter().enumerate() {
                v[model.fs_var(k, e)] = f as f64;
            }
        }
        for (k, &x) in self.x.iter().enumerate() {
            v[model.x_var(k)] = x as f64;
            v[model.p_var(k)] = self.p[k];
        }
        v
    }

    /// Rounds flows and activations; `None` when any of them is fractional.
    pub fn from_vector(model: &McfModel, v: &[f64], tol: f64) -> Option<Self> {
        let round = |a: f64| ((a - a.round()).abs() <= tol).then(|| a.round().max(0.0) as u32);
        let m = model.graph.num_edges();
        let ns = model.num_sites();
        Some(McfSolution {
            ft: (0..m).map(|e| round(v[model.ft_var(e)])).collect::<Option<_>>()?,
            fs: (0..ns)
                .map(|k| (0..m).map(|e| round(v[model.fs_var(k, e)])).collect::<Option<Vec<u32>>>())
                .collect::<Option<_>>()?,
            x: (0..ns).map(|k| round(v[model.x_var(k)])).collect::<Option<_>>()?,
            p: (0..ns).map(|k| v[model.p_var(k)]).collect(),
        })
    }
}

pub fn cost_mcf(model: &McfModel, sol: &McfSolution) -> f64 {
    let v = sol.to_vector(model);
    model.cost.iter().zip(&v).map(|(c, x)| c * x).sum()
}

#[derive(Debug, Error, PartialEq)]
pub enum McfError {
    #[error("solution violates {0}")]
    Infeasible(String),
}

/// Edges of a path from `start` to the sink over edges with `flow >= 1`,
/// choosing the smallest edge id first.
fn trace(graph: &McfGraph, flow: &[u32], start: NodeId) -> Option<Vec<usize>> {
    let sink = graph.sink();
    let mut seen = vec![false; sink + 1];
    let mut stack: Vec<(NodeId, usize)> = vec![(start, 0)];
    let mut path = Vec::new();
    seen[start] = true;
    while let Some(top) = stack.last_mut() {
        let (v, i) = *top;
        if v == sink {
            return Some(path);
        }
        top.1 += 1;
        match graph.out_edges(v).get(i) {
            Some(&e) => {
                let h = graph.edges[e].head;
                if flow[e] >= 1 && !seen[h] {
                    seen[h] = true;
                    path.push(e);
                    stack.push((h, 0));
                }
            }
            None => {
                stack.pop();
                path.pop();
            }
        }
    }
    None
}

fn virtual_edge(graph: &McfGraph, edges: &[usize], start: NodeId) -> (NodeId, Path) {
    let mut nodes = vec![start];
    nodes.extend(edges[..edges.len() - 1].iter().map(|&e| graph.edges[e].head));
    (*nodes.last().unwrap(), Path::new(nodes))
}

/// Builds the arborescence: each active site follows its own commodity to the
/// sink, and terminal flow is peeled into one path per terminal.
pub fn mcf_to_va(model: &McfModel, sol: &McfSolution) -> Result<VirtualArborescence, McfError> {
    let bad = model.violations(&sol.to_vector(model), 1e-6);
    if let Some((fam, name)) = bad.first() {
        let what = fam.map(|f| f.label().to_string()).unwrap_or_else(|| "domain".into());
        return Err(McfError::Infeasible(format!("{} ({})", what, name)));
    }
    let graph = &model.graph;
    let inst = graph.instance();
    let mut va = VirtualArborescence::new(inst.request.root);
    for (k, s) in inst.request.sites.iter().enumerate() {
        if sol.x[k] == 0 {
            continue;
        }
        let edges = trace(graph, &sol.fs[k], s.node).expect("an active site's commodity reaches the sink");
        let (head, path) = virtual_edge(graph, &edges, s.node);
        va.add_edge(s.node, head, path);
    }
    let mut rest = sol.ft.clone();
    for &t in &inst.request.terminals {
        let edges = trace(graph, &rest, t).expect("terminal flow reaches the sink");
        for &e in &edges {
            rest[e] -= 1;
        }
        let (head, path) = virtual_edge(graph, &edges, t);
        va.add_edge(t, head, path);
    }
    Ok(va)
}

/// The multi-commodity model for the branch-and-cut engine. All rows are static.
pub struct McfFormulation {
    pub model: McfModel,
    ext: ExtendedGraph,
}

impl McfFormulation {
    pub fn new(inst: &Instance, flags: McfFlags) -> Result<Self, ExtendedError> {
        let graph = McfGraph::build(inst)?;
        Ok(McfFormulation {
            model: build_mcf(&graph, flags),
            ext: ExtendedGraph::build(inst)?,
        })
    }
}

impl Formulation for McfFormulation {
    fn lp(&self) -> LpProblem {
        self.model.to_lp()
    }

    fn is_integer(&self, j: usize) -> bool {
        j < self.model.p_var(0)
    }

    fn branch_classes(&self) -> Vec<Vec<usize>> {
        let x0 = self.model.x_var(0);
        let ns = self.model.num_sites();
        vec![(x0..x0 + ns).collect(), (0..x0).collect()]
    }

    fn separate(&self, _v: &[f64], _cfg: &SeparationConfig) -> Vec<Cut> {
        Vec::new()
    }

    fn certify(&self, v: &[f64], tol: f64) -> Result<VirtualArborescence, String> {
        let sol = McfSolution::from_vector(&self.model, v, tol).ok_or("point is not integral")?;
        mcf_to_va(&self.model, &sol).map_err(|e| e.to_string())
    }

    /// Summed commodities on network edges give a single-commodity flow.
    fn relaxed_flow(&self, v: &[f64]) -> FractionalPoint {
        let ext = &self.ext;
        let model = &self.model;
        let graph = &model.graph;
        let ns = model.num_sites();
        let total = |e: usize| v[model.ft_var(e)] + (0..ns).map(|k| v[model.fs_var(k, e)]).sum::<f64>();
        let mut f = vec![0.0; ext.num_edges()];
        for e in 0..graph.inst.network.edges().len() {
            f[e] = total(e);
        }
        f[ext.root_sink_edge()] = total(graph.root_sink_edge());
        let x: Vec<f64> = (0..ns).map(|k| v[model.x_var(k)]).collect();
        for k in 0..ns {
            f[ext.site_sink_edges()[k]] = total(graph.site_sink_edge(k));
            f[ext.site_source_edges()[k]] = x[k];
        }
        for &e in ext.terminal_source_edges() {
            f[e] = 1.0;
        }
        FractionalPoint { x, f }
    }
}

/// Solves with the multi-commodity model. Separation settings are ignored.
pub fn solve_mcf(inst: &Instance, cfg: &SolverConfig) -> Result<SolveReport, ExtendedError> {
    let form = McfFormulation::new(inst, McfFlags::default())?;
    Ok(solve_formulation(&form, &form.ext, cfg))
}
