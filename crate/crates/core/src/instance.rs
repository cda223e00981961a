//! Network, request and instance data model.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

pub type NodeId = usize;

/// Direction in which the virtual arborescence is oriented relative to the root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Terminals send towards the root.
    Aggregation,
    /// The root sends towards the terminals.
    Multicast,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Aggregation => Orientation::Multicast,
            Orientation::Multicast => Orientation::Aggregation,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub tail: NodeId,
    pub head: NodeId,
    pub cost: f64,
    pub capacity: u32,
}

/// Directed capacitated network. Edge order is significant: it fixes the
/// variable layout of every model built on top of it.
#[derive(Clone, Debug)]
pub struct Network {
    num_nodes: usize,
    edges: Vec<Edge>,
    lookup: HashMap<(NodeId, NodeId), usize>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.num_nodes == other.num_nodes && self.edges == other.edges
    }
}

impl Network {
    pub fn new(num_nodes: usize, edges: Vec<Edge>) -> Self {
        let mut lookup = HashMap::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            lookup.entry((e.tail, e.head)).or_insert(i);
        }
        Network {
            num_nodes,
            edges,
            lookup,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> &Edge {
        &self.edges[i]
    }

    pub fn find_edge(&self, tail: NodeId, head: NodeId) -> Option<usize> {
        self.lookup.get(&(tail, head)).copied()
    }

    pub fn out_edges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_nodes];
        for (i, e) in self.edges.iter().enumerate() {
            if e.tail < self.num_nodes {
                out[e.tail].push(i);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Site {
    pub node: NodeId,
    pub cost: f64,
    pub capacity: u32,
}

/// The abstract request: root, candidate processing sites and terminals.
#[derive(Clone, Debug, PartialEq)]
pub struct Request {
    pub root: NodeId,
    pub root_capacity: u32,
    pub sites: Vec<Site>,
    pub terminals: Vec<NodeId>,
    pub orientation: Orientation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub network: Network,
    pub request: Request,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub invariant: String,
    pub element: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.invariant, self.element)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, invariant: &str) -> bool {
        self.violations.iter().any(|v| v.invariant == invariant)
    }

    fn push(&mut self, invariant: &str, element: impl Into<String>) {
        self.violations.push(Violation {
            invariant: invariant.to_string(),
            element: element.into(),
        });
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("set cover reduction needs a nonempty universe")]
    EmptyUniverse,
    #[error("k must be at least 1")]
    ZeroBudget,
}

impl Instance {
    pub fn new(network: Network, request: Request) -> Self {
        Instance { network, request }
    }

    pub fn num_nodes(&self) -> usize {
        self.network.num_nodes()
    }

    pub fn root(&self) -> NodeId {
        self.request.root
    }

    pub fn site(&self, node: NodeId) -> Option<&Site> {
        self.request.sites.iter().find(|s| s.node == node)
    }

    pub fn is_site(&self, node: NodeId) -> bool {
        self.site(node).is_some()
    }

    pub fn is_terminal(&self, node: NodeId) -> bool {
        self.request.terminals.contains(&node)
    }

    /// Checks every structural invariant and lists all violations found.
    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        let n = self.network.num_nodes();
        let mut seen = BTreeSet::new();
        for (i, e) in self.network.edges().iter().enumerate() {
            let label = format!("edge {} ({}->{})", i, e.tail, e.head);
            if e.tail >= n || e.head >= n {
                rep.push("unknown node", label.clone());
            }
            if e.tail == e.head {
                rep.push("self-loop", label.clone());
            }
            if !seen.insert((e.tail, e.head)) {
                rep.push("duplicate edge", label.clone());
            }
            if !(e.cost.is_finite() && e.cost >= 0.0) {
                rep.push("cost < 0", label.clone());
            }
            if e.capacity < 1 {
                rep.push("capacity < 1", label);
            }
        }

        let req = &self.request;
        if req.root >= n {
            rep.push("unknown node", format!("root {}", req.root));
        }
        if req.root_capacity < 1 {
            rep.push("capacity < 1", "root");
        }
        if req.terminals.is_empty() {
            rep.push("no terminals", "terminals");
        }
        let mut term_set = BTreeSet::new();
        for &t in &req.terminals {
            if t >= n {
                rep.push("unknown node", format!("terminal {}", t));
            }
            if !term_set.insert(t) {
                rep.push("duplicate terminal", format!("terminal {}", t));
            }
            if t == req.root {
                rep.push("root in terminals", format!("terminal {}", t));
            }
        }
        let mut site_set = BTreeSet::new();
        for s in &req.sites {
            if s.node >= n {
                rep.push("unknown node", format!("site {}", s.node));
            }
            if !site_set.insert(s.node) {
                rep.push("duplicate site", format!("site {}", s.node));
            }
            if s.node == req.root {
                rep.push("root in sites", format!("site {}", s.node));
            }
            if term_set.contains(&s.node) {
                rep.push("site in terminals", format!("site {}", s.node));
            }
            if !(s.cost.is_finite() && s.cost > 0.0) {
                rep.push("site cost <= 0", format!("site {}", s.node));
            }
            if s.capacity < 1 {
                rep.push("capacity < 1", format!("site {}", s.node));
            }
        }
        rep
    }

    /// Inverts every edge and toggles the orientation. Applying it twice is the identity.
    pub fn reversed(&self) -> Instance {
        let edges = self
            .network
            .edges()
            .iter()
            .map(|e| Edge {
                tail: e.head,
                head: e.tail,
                cost: e.cost,
                capacity: e.capacity,
            })
            .collect();
        let mut request = self.request.clone();
        request.orientation = request.orientation.flipped();
        Instance::new(Network::new(self.network.num_nodes(), edges), request)
    }

    /// Brings the instance into aggregation orientation.
    pub fn to_aggregation(&self) -> Instance {
        match self.request.orientation {
            Orientation::Aggregation => self.clone(),
            Orientation::Multicast => self.reversed(),
        }
    }

    /// Collocation gadget for a node that should act both as site and terminal:
    /// adds a pendant terminal joined to `site` by a zero-cost, capacity-1 edge.
    /// Returns the new instance and the id of the pendant terminal.
    pub fn with_collocated_terminal(&self, site: NodeId) -> (Instance, NodeId) {
        let pendant = self.network.num_nodes();
        let mut edges = self.network.edges().to_vec();
        let (tail, head) = match self.request.orientation {
            Orientation::Aggregation => (pendant, site),
            Orientation::Multicast => (site, pendant),
        };
        edges.push(Edge {
            tail,
            head,
            cost: 0.0,
            capacity: 1,
        });
        let mut request = self.request.clone();
        request.terminals.retain(|&t| t != site);
        request.terminals.push(pendant);
        (
            Instance::new(Network::new(pendant + 1, edges), request),
            pendant,
        )
    }
}

/// Builds the hardness gadget: one terminal per element, one site per set,
/// `t_u -> s_S` iff `u` is in `S`, `s_S -> r` for every set, root capacity `k`.
///
/// Node layout: root is 0, terminals are `1..=|U|` in universe order, sites follow
/// in family order.
pub fn set_cover_reduction(
    universe: &[u32],
    family: &[Vec<u32>],
    k: u32,
) -> Result<Instance, InstanceError> {
    if universe.is_empty() {
        return Err(InstanceError::EmptyUniverse);
    }
    if k == 0 {
        return Err(InstanceError::ZeroBudget);
    }
    let root = 0;
    let term = |i: usize| 1 + i;
    let site = |j: usize| 1 + universe.len() + j;
    let mut edges = Vec::new();
    for (j, set) in family.iter().enumerate() {
        for (i, u) in universe.iter().enumerate() {
            if set.contains(u) {
                edges.push(Edge {
                    tail: term(i),
                    head: site(j),
                    cost: 1.0,
                    capacity: 1,
                });
            }
        }
    }
    for j in 0..family.len() {
        edges.push(Edge {
            tail: site(j),
            head: root,
            cost: 1.0,
            capacity: 1,
        });
    }
    let n = 1 + universe.len() + family.len();
    let request = Request {
        root,
        root_capacity: k,
        sites: (0..family.len())
            .map(|j| Site {
                node: site(j),
                cost: 1.0,
                capacity: universe.len() as u32,
            })
            .collect(),
        terminals: (0..universe.len()).map(term).collect(),
        orientation: Orientation::Aggregation,
    };
    Ok(Instance::new(Network::new(n, edges), request))
}
