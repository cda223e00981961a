//! The extended graph: the network plus a super source feeding terminals and
//! sites, a sink absorbing flow at sites and a sink behind the root.

use thiserror::Error;

use crate::instance::{Instance, NodeId, Orientation};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeClass {
    /// Original network edge, carrying its index in the network.
    Network(usize),
    /// `(r, root sink)`.
    RootSink,
    /// `(s, site sink)`, carrying the site index.
    SiteSink(usize),
    /// `(source, s)`, carrying the site index.
    SiteSource(usize),
    /// `(source, t)`, carrying the terminal index.
    TerminalSource(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtEdge {
    pub tail: NodeId,
    pub head: NodeId,
    pub class: EdgeClass,
    pub cost: f64,
    /// Largest flow any feasible point can put on this edge.
    pub bound: u32,
}

#[derive(Debug, Error, PartialEq)]
pub enum ExtendedError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("extended graph requires aggregation orientation")]
    NotAggregation,
}

/// Base nodes keep their ids; the source is `n`, the site sink `n + 1` and the root sink `n + 2`.
#[derive(Clone, Debug)]
pub struct ExtendedGraph {
    inst: Instance,
    edges: Vec<ExtEdge>,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
    root_sink_edge: usize,
    site_sink_edges: Vec<usize>,
    site_source_edges: Vec<usize>,
    terminal_source_edges: Vec<usize>,
    site_index: Vec<Option<usize>>,
}

impl ExtendedGraph {
    pub fn build(inst: &Instance) -> Result<Self, ExtendedError> {
        let rep = inst.validate();
        if !rep.is_ok() {
            let msgs: Vec<String> = rep.violations.iter().map(|v| v.to_string()).collect();
            return Err(ExtendedError::Invalid(msgs.join("; ")));
        }
        if inst.request.orientation != Orientation::Aggregation {
            return Err(ExtendedError::NotAggregation);
        }
        let n = inst.num_nodes();
        let (source, site_sink, root_sink) = (n, n + 1, n + 2);
        let req = &inst.request;
        let mut edges: Vec<ExtEdge> = inst
            .network
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| ExtEdge {
                tail: e.tail,
                head: e.head,
                class: EdgeClass::Network(i),
                cost: e.cost,
                bound: e.capacity,
            })
            .collect();
        let root_sink_edge = edges.len();
        edges.push(ExtEdge {
            tail: req.root,
            head: root_sink,
            class: EdgeClass::RootSink,
            cost: 0.0,
            bound: req.root_capacity,
        });
        let mut site_sink_edges = Vec::new();
        for (k, s) in req.sites.iter().enumerate() {
            site_sink_edges.push(edges.len());
            edges.push(ExtEdge {
                tail: s.node,
                head: site_sink,
                class: EdgeClass::SiteSink(k),
                cost: 0.0,
                bound: s.capacity,
            });
        }
        let mut site_source_edges = Vec::new();
        for (k, s) in req.sites.iter().enumerate() {
            site_source_edges.push(edges.len());
            edges.push(ExtEdge {
                tail: source,
                head: s.node,
                class: EdgeClass::SiteSource(k),
                cost: 0.0,
                bound: 1,
            });
        }
        let mut terminal_source_edges = Vec::new();
        for (k, &t) in req.terminals.iter().enumerate() {
            terminal_source_edges.push(edges.len());
            edges.push(ExtEdge {
                tail: source,
                head: t,
                class: EdgeClass::TerminalSource(k),
                cost: 0.0,
                bound: 1,
            });
        }
        let mut out = vec![Vec::new(); n + 3];
        let mut inc = vec![Vec::new(); n + 3];
        for (i, e) in edges.iter().enumerate() {
            out[e.tail].push(i);
            inc[e.head].push(i);
        }
        let mut site_index = vec![None; n];
        for (k, s) in req.sites.iter().enumerate() {
            site_index[s.node] = Some(k);
        }
        Ok(ExtendedGraph {
            inst: inst.clone(),
            edges,
            out,
            inc,
            root_sink_edge,
            site_sink_edges,
            site_source_edges,
            terminal_source_edges,
            site_index,
        })
    }

    pub fn instance(&self) -> &Instance {
        &self.inst
    }

    /// Number of base nodes.
    pub fn base_nodes(&self) -> usize {
        self.inst.num_nodes()
    }

    pub fn num_nodes(&self) -> usize {
        self.inst.num_nodes() + 3
    }

    pub fn source(&self) -> NodeId {
        self.inst.num_nodes()
    }

    pub fn site_sink(&self) -> NodeId {
        self.inst.num_nodes() + 1
    }

    pub fn root_sink(&self) -> NodeId {
        self.inst.num_nodes() + 2
    }

    pub fn is_base(&self, v: NodeId) -> bool {
        v < self.inst.num_nodes()
    }

    pub fn edges(&self) -> &[ExtEdge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &ExtEdge {
        &self.edges[e]
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn out_edges(&self, v: NodeId) -> &[usize] {
        &self.out[v]
    }

    pub fn in_edges(&self, v: NodeId) -> &[usize] {
        &self.inc[v]
    }

    pub fn root_sink_edge(&self) -> usize {
        self.root_sink_edge
    }

    pub fn site_sink_edges(&self) -> &[usize] {
        &self.site_sink_edges
    }

    pub fn site_source_edges(&self) -> &[usize] {
        &self.site_source_edges
    }

    pub fn terminal_source_edges(&self) -> &[usize] {
        &self.terminal_source_edges
    }

    pub fn num_sites(&self) -> usize {
        self.site_sink_edges.len()
    }

    /// Site index of a base node, if it is a site.
    pub fn site_index(&self, v: NodeId) -> Option<usize> {
        self.site_index.get(v).copied().flatten()
    }

    /// Edges of the connectivity rows: everything except the site-sink edges.
    pub fn is_restricted(&self, e: usize) -> bool {
        !matches!(self.edges[e].class, EdgeClass::SiteSink(_))
    }

    pub fn node_label(&self, v: NodeId) -> String {
        let n = self.inst.num_nodes();
        match v {
            _ if v < n => v.to_string(),
            _ if v == n => "o+".into(),
            _ if v == n + 1 => "o-S".into(),
            _ => "o-r".into(),
        }
    }

    pub fn edge_label(&self, e: usize) -> String {
        let ed = &self.edges[e];
        format!("{}->{}", self.node_label(ed.tail), self.node_label(ed.head))
    }

    pub fn parse_node_label(&self, s: &str) -> Option<NodeId> {
        match s {
            "o+" => Some(self.source()),
            "o-S" => Some(self.site_sink()),
            "o-r" => Some(self.root_sink()),
            _ => s.parse::<usize>().ok().filter(|&v| v < self.inst.num_nodes()),
        }
    }

    pub fn find_edge(&self, tail: NodeId, head: NodeId) -> Option<usize> {
        self.out
            .get(tail)?
            .iter()
            .copied()
            .find(|&e| self.edges[e].head == head)
    }

    /// Set of nodes in `w` (indexed by node) crossing into the complement over restricted edges.
    pub fn restricted_out_cut(&self, in_w: &[bool]) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| {
                let ed = &self.edges[e];
                self.is_restricted(e) && in_w[ed.tail] && !in_w[ed.head]
            })
            .collect()
    }
}

/// Nodes reachable from `start` over restricted edges accepted by `usable`.
pub fn restricted_reach(ext: &ExtendedGraph, start: NodeId, usable: impl Fn(usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; ext.num_nodes()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for &e in ext.out_edges(v) {
            let h = ext.edge(e).head;
            if !seen[h] && ext.is_restricted(e) && usable(e) {
                seen[h] = true;
                stack.push(h);
            }
        }
    }
    seen
}

/// Edges carrying at least `threshold` flow. Integral callers pass 1.
pub fn flow_subgraph(ext: &ExtendedGraph, f: &[f64], threshold: f64) -> Vec<usize> {
    (0..ext.num_edges()).filter(|&e| f[e] >= threshold).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::line;
    use proptest::prelude::*;

    #[test]
    fn line_extended_graph() {
        let ext = ExtendedGraph::build(&line()).unwrap();
        assert_eq!(ext.num_nodes(), 6);
        let labels: Vec<String> = (0..ext.num_edges()).map(|e| ext.edge_label(e)).collect();
        assert_eq!(labels, ["0->1", "1->2", "2->o-r", "1->o-S", "o+->1", "o+->0"]);
    }

    #[test]
    fn no_sites_means_no_site_edges() {
        let mut inst = line();
        inst.request.sites.clear();
        let ext = ExtendedGraph::build(&inst).unwrap();
        assert_eq!(ext.num_edges(), 2 + 1 + 1);
        assert!(ext.site_sink_edges().is_empty());
    }

    #[test]
    fn multicast_is_rejected() {
        let inst = line().reversed();
        assert_eq!(ExtendedGraph::build(&inst).unwrap_err(), ExtendedError::NotAggregation);
        assert!(ExtendedGraph::build(&inst.to_aggregation()).is_ok());
    }

    #[test]
    fn flow_subgraph_of_integral_line_point() {
        let ext = ExtendedGraph::build(&line()).unwrap();
        // f(t,s)=f(s,r)=f(r,o-r)=f(o+,t)=1
        let f = [1.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        let labels: Vec<String> = flow_subgraph(&ext, &f, 1.0)
            .into_iter()
            .map(|e| ext.edge_label(e))
            .collect();
        assert_eq!(labels, ["0->1", "1->2", "2->o-r", "o+->0"]);
        assert!(flow_subgraph(&ext, &[0.0; 6], 1.0).is_empty());
    }

    proptest! {
        #[test]
        fn flow_subgraph_is_elementwise_filter(f in prop::collection::vec(0u32..3, 6)) {
            let ext = ExtendedGraph::build(&line()).unwrap();
            let ff: Vec<f64> = f.iter().map(|&v| v as f64).collect();
            let got = flow_subgraph(&ext, &ff, 1.0);
            let want: Vec<usize> = (0..6).filter(|&e| f[e] >= 1).collect();
            prop_assert_eq!(got, want);
        }
    }
}
