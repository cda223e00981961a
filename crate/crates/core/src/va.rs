//! Virtual arborescences: paths, feasibility checking and cost.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::instance::{Instance, NodeId, Orientation};

/// A directed walk given by its vertex sequence. Simplicity is not enforced here.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path(pub Vec<NodeId>);

impl Path {
    pub fn new(vertices: Vec<NodeId>) -> Self {
        Path(vertices)
    }

    pub fn vertices(&self) -> &[NodeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<NodeId> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<NodeId> {
        self.0.last().copied()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn is_simple(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.0.iter().all(|v| seen.insert(*v))
    }

    pub fn reversed(&self) -> Path {
        Path(self.0.iter().rev().copied().collect())
    }

    /// Sum of edge costs; `None` if some consecutive pair is not an edge.
    pub fn cost(&self, inst: &Instance) -> Option<f64> {
        let mut total = 0.0;
        for (u, v) in self.arcs() {
            let e = inst.network.find_edge(u, v)?;
            total += inst.network.edge(e).cost;
        }
        Some(total)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "<{}>", parts.join(","))
    }
}

/// Number of paths in `paths` that traverse the arc `(tail, head)`, counted with multiplicity.
pub fn paths_using_edge<'a>(paths: impl IntoIterator<Item = &'a Path>, tail: NodeId, head: NodeId) -> usize {
    paths
        .into_iter()
        .map(|p| p.arcs().filter(|&(u, v)| u == tail && v == head).count())
        .sum()
}

/// Arborescence over root, terminals and active sites whose virtual edges
/// map to directed paths in the network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VirtualArborescence {
    pub root: NodeId,
    pub nodes: BTreeSet<NodeId>,
    pub edges: BTreeMap<(NodeId, NodeId), Path>,
}

impl VirtualArborescence {
    pub fn new(root: NodeId) -> Self {
        let mut nodes = BTreeSet::new();
        nodes.insert(root);
        VirtualArborescence {
            root,
            nodes,
            edges: BTreeMap::new(),
        }
    }

    pub fn add_edge(&mut self, tail: NodeId, head: NodeId, path: Path) {
        self.nodes.insert(tail);
        self.nodes.insert(head);
        self.edges.insert((tail, head), path);
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.edges.keys().filter(|(t, _)| *t == v).count()
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.edges.keys().filter(|(_, h)| *h == v).count()
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.out_degree(v) + self.in_degree(v)
    }

    /// Head of the unique outgoing virtual edge of `v` (aggregation view).
    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.edges.keys().find(|(t, _)| *t == v).map(|&(_, h)| h)
    }

    pub fn children(&self, v: NodeId) -> Vec<NodeId> {
        self.edges.keys().filter(|(_, h)| *h == v).map(|&(t, _)| t).collect()
    }

    pub fn active_sites(&self, inst: &Instance) -> Vec<NodeId> {
        self.nodes.iter().copied().filter(|&v| inst.is_site(v)).collect()
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.edges.values()
    }

    /// Usage count of every network edge over all mapped paths.
    pub fn edge_usage(&self, inst: &Instance) -> Vec<u32> {
        let mut usage = vec![0u32; inst.network.edges().len()];
        for p in self.paths() {
            for (u, v) in p.arcs() {
                if let Some(e) = inst.network.find_edge(u, v) {
                    usage[e] += 1;
                }
            }
        }
        usage
    }

    /// Reverses every virtual edge and its path; maps aggregation solutions of a
    /// reversed instance back to the multicast instance and vice versa.
    pub fn reversed(&self) -> VirtualArborescence {
        VirtualArborescence {
            root: self.root,
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .map(|(&(t, h), p)| ((h, t), p.reversed()))
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    Cvsap1,
    Cvsap2,
    Cvsap3,
    Cvsap4,
    Cvsap5,
    Va1,
    Va2,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::Cvsap1 => "CVSAP-1",
            Condition::Cvsap2 => "CVSAP-2",
            Condition::Cvsap3 => "CVSAP-3",
            Condition::Cvsap4 => "CVSAP-4",
            Condition::Cvsap5 => "CVSAP-5",
            Condition::Va1 => "VA-1",
            Condition::Va2 => "VA-2",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VaViolation {
    pub condition: Condition,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<VaViolation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, c: Condition) -> bool {
        self.violations.iter().any(|v| v.condition == c)
    }

    pub fn conditions(&self) -> BTreeSet<Condition> {
        self.violations.iter().map(|v| v.condition).collect()
    }

    fn push(&mut self, condition: Condition, detail: String) {
        self.violations.push(VaViolation { condition, detail });
    }
}

/// Checks all five problem conditions plus the two structural arborescence
/// conditions. Every violated condition is reported, not just the first.
pub fn check_va(inst: &Instance, va: &VirtualArborescence) -> FeasibilityReport {
    use Condition::*;
    let mut rep = FeasibilityReport::default();
    let req = &inst.request;
    let root = req.root;

    // CVSAP-1
    if va.root != root {
        rep.push(Cvsap1, format!("root is {} but instance root is {}", va.root, root));
    }
    if !va.nodes.contains(&root) {
        rep.push(Cvsap1, "root missing".into());
    }
    for &t in &req.terminals {
        if !va.nodes.contains(&t) {
            rep.push(Cvsap1, format!("terminal {} missing", t));
        }
    }
    for &v in &va.nodes {
        if v != root && !inst.is_terminal(v) && !inst.is_site(v) {
            rep.push(Cvsap1, format!("node {} is neither root, site nor terminal", v));
        }
    }

    // CVSAP-2..4
    for &t in &req.terminals {
        let d = va.degree(t);
        if d != 1 {
            rep.push(Cvsap2, format!("terminal {} has degree {}", t, d));
        }
    }
    let rd = va.degree(root);
    if rd > req.root_capacity as usize {
        rep.push(Cvsap3, format!("root degree {} exceeds {}", rd, req.root_capacity));
    }
    for s in &req.sites {
        if va.nodes.contains(&s.node) {
            let d = va.degree(s.node);
            if d > s.capacity as usize + 1 {
                rep.push(
                    Cvsap4,
                    format!("site {} degree {} exceeds {}+1", s.node, d, s.capacity),
                );
            }
        }
    }

    // CVSAP-5
    let mut usage: HashMap<(NodeId, NodeId), u32> = HashMap::new();
    for p in va.paths() {
        for arc in p.arcs() {
            *usage.entry(arc).or_default() += 1;
        }
    }
    let mut arcs: Vec<_> = usage.into_iter().collect();
    arcs.sort();
    for ((u, v), count) in arcs {
        if let Some(e) = inst.network.find_edge(u, v) {
            let cap = inst.network.edge(e).capacity;
            if count > cap {
                rep.push(
                    Cvsap5,
                    format!("edge {}->{} used {} times, capacity {}", u, v, count, cap),
                );
            }
        }
    }

    // VA-1: endpoints in the node set, single parent per non-root node, acyclic.
    let aggregation = req.orientation == Orientation::Aggregation;
    for &(t, h) in va.edges.keys() {
        if !va.nodes.contains(&t) || !va.nodes.contains(&h) {
            rep.push(Va1, format!("edge ({},{}) leaves the node set", t, h));
        }
        if t == h {
            rep.push(Va1, format!("self-loop at {}", t));
        }
    }
    let parent_of = |v: NodeId| -> Vec<NodeId> {
        if aggregation {
            va.edges.keys().filter(|(t, _)| *t == v).map(|&(_, h)| h).collect()
        } else {
            va.edges.keys().filter(|(_, h)| *h == v).map(|&(t, _)| t).collect()
        }
    };
    let mut parent: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for &v in &va.nodes {
        let ps = parent_of(v);
        if v == root {
            if !ps.is_empty() {
                rep.push(Va1, "root has a parent edge".into());
            }
        } else if ps.len() != 1 {
            rep.push(Va1, format!("node {} has {} parent edges", v, ps.len()));
        } else {
            parent.insert(v, ps[0]);
        }
    }
    for &start in &va.nodes {
        let mut v = start;
        let mut steps = 0;
        while let Some(&p) = parent.get(&v) {
            v = p;
            steps += 1;
            if steps > va.nodes.len() {
                rep.push(Va1, format!("cycle through node {}", start));
                break;
            }
        }
        if steps <= va.nodes.len() && v != root && parent.contains_key(&start) {
            // walked off into a node without a parent that is not the root
            if !parent.contains_key(&v) && v != root && va.nodes.contains(&v) {
                rep.push(Va1, format!("node {} does not reach the root", start));
            }
        }
    }

    // VA-2: each mapped path is a simple directed path from tail to head.
    for (&(t, h), p) in &va.edges {
        if p.first() != Some(t) || p.last() != Some(h) {
            rep.push(Va2, format!("path {} does not connect {} to {}", p, t, h));
            continue;
        }
        if !p.is_simple() {
            rep.push(Va2, format!("path {} is not simple", p));
        }
        if p.arcs().any(|(u, v)| inst.network.find_edge(u, v).is_none()) {
            rep.push(Va2, format!("path {} uses a non-edge", p));
        }
    }
    rep
}

/// Edge usage (with multiplicity) times cost plus activation cost of every active site.
pub fn cost_cvsap(inst: &Instance, va: &VirtualArborescence) -> f64 {
    let mut total = 0.0;
    for p in va.paths() {
        for (u, v) in p.arcs() {
            if let Some(e) = inst.network.find_edge(u, v) {
                total += inst.network.edge(e).cost;
            }
        }
    }
    for s in &inst.request.sites {
        if va.nodes.contains(&s.node) {
            total += s.cost;
        }
    }
    total
}
