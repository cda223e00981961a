//! Primal heuristics: randomized rounding of fractional flows into
//! arborescences, and a local search that closes sites whose children can be
//! rerouted for less than the site costs.

use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use thiserror::Error;

use crate::extended::{EdgeClass, ExtendedGraph};
use crate::generate::rng;
use crate::instance::NodeId;
use crate::scf::FractionalPoint;
use crate::va::{Path, VirtualArborescence};

/// Flow below this is ignored when peeling paths.
const FLOW_EPS: f64 = 1e-9;
/// Allowed shortfall between requested and decomposed amount.
const AMOUNT_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPath {
    /// Extended edges from the source to a sink.
    pub edges: Vec<usize>,
    pub amount: f64,
}

impl WeightedPath {
    /// Node sequence including the source and the final sink.
    pub fn nodes(&self, ext: &ExtendedGraph) -> Vec<NodeId> {
        let mut v = vec![ext.edge(self.edges[0]).tail];
        v.extend(self.edges.iter().map(|&e| ext.edge(e).head));
        v
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FlowDecompositionError {
    #[error("only {found} of {requested} units reach the sinks")]
    InsufficientFlow { requested: f64, found: f64 },
}

/// Widest path from `source` to any of `sinks` over edges with flow; ties prefer
/// smaller node ids when choosing the next node to settle.
fn widest_path(ext: &ExtendedGraph, f: &[f64], source: NodeId, sinks: &[NodeId]) -> Option<(Vec<usize>, f64)> {
    let n = ext.num_nodes();
    let mut width = vec![f64::NEG_INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    let mut done = vec![false; n];
    width[source] = f64::INFINITY;
    loop {
        let v = (0..n)
            .filter(|&v| !done[v] && width[v] > 0.0)
            .fold(None, |best: Option<usize>, v| match best {
                Some(b) if width[b] >= width[v] => Some(b),
                _ => Some(v),
            })?;
        done[v] = true;
        if sinks.contains(&v) {
            let mut edges = Vec::new();
            let mut w = v;
            while w != source {
                edges.push(pred[w]);
                w = ext.edge(pred[w]).tail;
            }
            edges.reverse();
            return Some((edges, width[v]));
        }
        for &e in ext.out_edges(v) {
            let h = ext.edge(e).head;
            let cand = width[v].min(f[e]);
            if !done[h] && f[e] > FLOW_EPS && cand > width[h] {
                width[h] = cand;
                pred[h] = e;
            }
        }
    }
}

/// Peels widest paths until `amount` is decomposed or no path remains.
fn peel(ext: &ExtendedGraph, f: &[f64], amount: f64, source: NodeId, sinks: &[NodeId]) -> Vec<WeightedPath> {
    let mut rest = f.to_vec();
    let mut left = amount;
    let mut out = Vec::new();
    while left > AMOUNT_TOL {
        let Some((edges, width)) = widest_path(ext, &rest, source, sinks) else {
            break;
        };
        let take = width.min(left);
        for &e in &edges {
            rest[e] -= take;
        }
        left -= take;
        out.push(WeightedPath { edges, amount: take });
    }
    out
}

/// Splits `amount` units leaving `source` into paths ending in `sinks`. Per-edge
/// usage never exceeds `f`.
pub fn flow_decomposition(
    ext: &ExtendedGraph,
    f: &[f64],
    amount: f64,
    source: NodeId,
    sinks: &[NodeId],
) -> Result<Vec<WeightedPath>, FlowDecompositionError> {
    let paths = peel(ext, f, amount, source, sinks);
    let found: f64 = paths.iter().map(|p| p.amount).sum();
    if found < amount - AMOUNT_TOL {
        return Err(FlowDecompositionError::InsufficientFlow {
            requested: amount,
            found,
        });
    }
    Ok(paths)
}

/// Path found by [`shortest_path_capacitated`].
#[derive(Clone, Debug, PartialEq)]
pub struct RoutedPath {
    /// Base nodes from the source to the last node before the sink.
    pub nodes: Vec<NodeId>,
    /// Extended edges including the final sink edge.
    pub edges: Vec<usize>,
    pub cost: f64,
}

impl RoutedPath {
    pub fn end(&self) -> NodeId {
        *self.nodes.last().expect("routed paths are nonempty")
    }
}

/// Cheapest path from `source` into one of `sinks` over edges with `u >= 1`,
/// ending through a node accepted by `allowed_end`. Equal costs are broken by
/// the lexicographically smallest node sequence.
pub fn shortest_path_capacitated(
    ext: &ExtendedGraph,
    u: &[i64],
    source: NodeId,
    sinks: &[NodeId],
    allowed_end: impl Fn(NodeId) -> bool,
) -> Option<RoutedPath> {
    let n = ext.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    let mut label: Vec<Option<Vec<NodeId>>> = vec![None; n];
    let mut pred_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut done = vec![false; n];
    dist[source] = 0.0;
    label[source] = Some(vec![source]);
    let better = |c1: f64, p1: &[NodeId], c2: f64, p2: &Option<Vec<NodeId>>| match p2 {
        None => true,
        Some(p2) => c1 < c2 || (c1 == c2 && p1 < p2.as_slice()),
    };
    let mut best: Option<RoutedPath> = None;
    loop {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if done[v] || label[v].is_none() {
                continue;
            }
            pick = match pick {
                Some(b) if !better(dist[v], label[v].as_ref().unwrap(), dist[b], &label[b]) => Some(b),
                _ => Some(v),
            };
        }
        let Some(v) = pick else { break };
        done[v] = true;
        let path = label[v].clone().unwrap();
        for &e in ext.out_edges(v) {
            if u[e] < 1 {
                continue;
            }
            let ed = ext.edge(e);
            let c = dist[v] + ed.cost;
            if sinks.contains(&ed.head) {
                if !ext.is_base(v) || !allowed_end(v) {
                    continue;
                }
                let mut edges = pred_edges[v].clone();
                edges.push(e);
                let mut seq = path.clone();
                seq.push(ed.head);
                let take = match &best {
                    None => true,
                    Some(b) => {
                        let mut bseq = b.nodes.clone();
                        bseq.push(ext.edge(*b.edges.last().unwrap()).head);
                        c < b.cost || (c == b.cost && seq < bseq)
                    }
                };
                if take {
                    best = Some(RoutedPath {
                        nodes: path.clone(),
                        edges,
                        cost: c,
                    });
                }
                continue;
            }
            if done[ed.head] || !ext.is_base(ed.head) {
                continue;
            }
            let mut seq = path.clone();
            seq.push(ed.head);
            if better(c, &seq, dist[ed.head], &label[ed.head]) {
                dist[ed.head] = c;
                label[ed.head] = Some(seq);
                let mut pe = pred_edges[v].clone();
                pe.push(e);
                pred_edges[ed.head] = pe;
            }
        }
    }
    best
}

/// Whether adding the virtual edge `(t, w)` to `va` closes a cycle. Walks the
/// unique outgoing edges from `w`; a self-loop counts as a cycle.
pub fn closes_cycle(va: &VirtualArborescence, t: NodeId, w: NodeId) -> bool {
    let mut v = w;
    let mut steps = 0;
    loop {
        if v == t {
            return true;
        }
        match va.parent(v) {
            Some(p) if steps <= va.nodes.len() => {
                v = p;
                steps += 1;
            }
            _ => return false,
        }
    }
}

/// Initial residual capacities: network and sink edges at their bounds, everything else 1.
pub fn initial_capacities(ext: &ExtendedGraph) -> Vec<i64> {
    ext.edges().iter().map(|e| e.bound as i64).collect()
}

/// Randomized rounding of a fractional point. Returns `None` when some node
/// cannot be connected.
pub fn flow_deco_round(ext: &ExtendedGraph, point: &FractionalPoint, seed: u64) -> Option<VirtualArborescence> {
    let inst = ext.instance();
    let root = inst.request.root;
    let sinks = [ext.site_sink(), ext.root_sink()];
    let mut rng = rng(seed);
    let mut f = point.f.clone();
    let mut u = initial_capacities(ext);
    let mut va = VirtualArborescence::new(root);
    let mut open: Vec<NodeId> = inst.request.terminals.clone();

    while !open.is_empty() {
        let t = open.swap_remove(rng.gen_range(0..open.len()));
        let supply = ext.find_edge(ext.source(), t).expect("terminals and sites have supply edges");
        let paths = peel(ext, &f, f[supply].max(0.0), t, &sinks);
        for p in &paths {
            for &e in &p.edges {
                f[e] -= p.amount;
            }
        }
        let survivors: Vec<&WeightedPath> = paths
            .iter()
            .filter(|p| p.edges.iter().all(|&e| u[e] >= 1))
            .filter(|p| {
                let w = ext.edge(*p.edges.last().unwrap()).tail;
                !closes_cycle(&va, t, w)
            })
            .collect();
        if survivors.is_empty() {
            continue;
        }
        let weights = WeightedIndex::new(survivors.iter().map(|p| p.amount)).expect("amounts are positive");
        let chosen = survivors[weights.sample(&mut rng)];
        let w = ext.edge(*chosen.edges.last().unwrap()).tail;
        if !va.nodes.contains(&w) {
            va.nodes.insert(w);
            open.push(w);
        }
        for &e in &chosen.edges {
            u[e] -= 1;
        }
        let nodes = chosen.nodes(ext);
        va.add_edge(t, w, Path::new(nodes[..nodes.len() - 1].to_vec()));
    }

    for (k, s) in inst.request.sites.iter().enumerate() {
        if !va.nodes.contains(&s.node) {
            u[ext.site_sink_edges()[k]] = 0;
        }
    }
    let mut pending: Vec<NodeId> = inst
        .request
        .terminals
        .iter()
        .copied()
        .filter(|t| va.parent(*t).is_none())
        .chain(
            inst.request
                .sites
                .iter()
                .map(|s| s.node)
                .filter(|&s| va.nodes.contains(&s) && va.parent(s).is_none()),
        )
        .collect();
    pending.sort_unstable();
    for t in pending {
        let snapshot = va.clone();
        let p = shortest_path_capacitated(ext, &u, t, &sinks, |w| !closes_cycle(&snapshot, t, w))?;
        for &e in &p.edges {
            u[e] -= 1;
        }
        va.add_edge(t, p.end(), Path::new(p.nodes.clone()));
    }
    Some(prune_steiner_nodes(ext, &va))
}

/// Residual capacities left by `va`. Sinks of sites outside `active` are closed.
fn residual(ext: &ExtendedGraph, va: &VirtualArborescence, active: &BTreeSet<NodeId>) -> Vec<i64> {
    let inst = ext.instance();
    let mut u = initial_capacities(ext);
    for (e, ed) in ext.edges().iter().enumerate() {
        if let EdgeClass::Network(_) = ed.class {
            u[e] -= crate::va::paths_using_edge(va.paths(), ed.tail, ed.head) as i64;
        }
    }
    u[ext.root_sink_edge()] -= va.in_degree(inst.request.root) as i64;
    for (k, s) in inst.request.sites.iter().enumerate() {
        let e = ext.site_sink_edges()[k];
        u[e] = if active.contains(&s.node) {
            u[e] - va.in_degree(s.node) as i64
        } else {
            0
        };
    }
    u
}

fn path_cost(ext: &ExtendedGraph, p: &Path) -> f64 {
    p.cost(ext.instance()).expect("arborescence paths follow network edges")
}

/// Repeatedly closes the site with the largest cost per child when its
/// children can be rerouted for strictly less than it saves.
pub fn prune_steiner_nodes(ext: &ExtendedGraph, va: &VirtualArborescence) -> VirtualArborescence {
    let inst = ext.instance();
    let sinks = [ext.site_sink(), ext.root_sink()];
    let mut cur = va.clone();
    let mut candidates: BTreeSet<NodeId> = cur.active_sites(inst).into_iter().collect();
    while !candidates.is_empty() {
        let ratio = |s: NodeId| {
            let d = cur.in_degree(s);
            let c = inst.site(s).expect("candidates are sites").cost;
            if d == 0 {
                f64::INFINITY
            } else {
                c / d as f64
            }
        };
        // ascending iteration keeps the smaller id on ties
        let s = candidates
            .iter()
            .copied()
            .fold(None, |best: Option<NodeId>, v| match best {
                Some(b) if ratio(b) >= ratio(v) => Some(b),
                _ => Some(v),
            })
            .unwrap();
        candidates.remove(&s);
        let children = cur.children(s);
        let mut budget = inst.site(s).unwrap().cost;
        let mut work = VirtualArborescence::new(cur.root);
        for (&(a, b), p) in &cur.edges {
            if a == s || b == s {
                budget += path_cost(ext, p);
            } else {
                work.add_edge(a, b, p.clone());
            }
        }
        work.nodes.extend(cur.nodes.iter().copied().filter(|&v| v != s && !children.contains(&v)));
        let active: BTreeSet<NodeId> = cur.active_sites(inst).into_iter().filter(|&v| v != s).collect();
        let mut u = residual(ext, &work, &active);
        let mut ok = true;
        for &t in &children {
            let snapshot = work.clone();
            let routed = shortest_path_capacitated(ext, &u, t, &sinks, |w| !closes_cycle(&snapshot, t, w));
            match routed {
                Some(p) if budget - p.cost > 0.0 => {
                    budget -= p.cost;
                    for &e in &p.edges {
                        u[e] -= 1;
                    }
                    work.add_edge(t, p.end(), Path::new(p.nodes.clone()));
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            cur = work;
            candidates = cur.active_sites(inst).into_iter().collect();
        }
    }
    cur
}
