//! Seeded instance generators: square grids, clustered ISP-like topologies
//! and tiny random instances for exhaustive cross-checks.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64`, so a seed fixes the
//! instance across platforms and releases.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::instance::{Edge, Instance, Network, NodeId, Orientation, Request, Site};

#[derive(Debug, Error, PartialEq)]
pub enum GenerateError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("{needed} special nodes do not fit into {available} candidates")]
    TooSmall { needed: usize, available: usize },
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `round(frac * total)` with halves rounded up.
pub fn round_half_up(frac: f64, total: usize) -> usize {
    (frac * total as f64 + 0.5).floor() as usize
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridParams {
    pub n: usize,
    pub edge_capacity: u32,
    pub node_capacity: u32,
    pub edge_cost: f64,
    pub site_cost: f64,
    pub site_fraction: f64,
    pub terminal_fraction: f64,
    pub seed: u64,
}

impl GridParams {
    pub fn new(n: usize, seed: u64) -> Self {
        GridParams {
            n,
            edge_capacity: 3,
            node_capacity: 5,
            edge_cost: 1.0,
            site_cost: 20.0,
            site_fraction: 0.20,
            terminal_fraction: 0.25,
            seed,
        }
    }

    pub fn num_sites(&self) -> usize {
        round_half_up(self.site_fraction, self.n * self.n)
    }

    pub fn num_terminals(&self) -> usize {
        round_half_up(self.terminal_fraction, self.n * self.n)
    }
}

/// `n x n` lattice with both directions of every adjacency. Node `(row, col)` has id `row * n + col`.
pub fn gen_grid(p: &GridParams) -> Result<Instance, GenerateError> {
    if p.n < 3 {
        return Err(GenerateError::Params(format!("grid side {} < 3", p.n)));
    }
    for (name, f) in [("site", p.site_fraction), ("terminal", p.terminal_fraction)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(GenerateError::Params(format!("{} fraction {} outside (0,1)", name, f)));
        }
    }
    let n = p.n;
    let total = n * n;
    let (ns, nt) = (p.num_sites(), p.num_terminals());
    if 1 + ns + nt > total {
        return Err(GenerateError::TooSmall {
            needed: 1 + ns + nt,
            available: total,
        });
    }
    let mut edges = Vec::with_capacity(4 * n * (n - 1));
    let mut link = |a: NodeId, b: NodeId| {
        for (tail, head) in [(a, b), (b, a)] {
            edges.push(Edge {
                tail,
                head,
                cost: p.edge_cost,
                capacity: p.edge_capacity,
            });
        }
    };
    for row in 0..n {
        for col in 0..n {
            let v = row * n + col;
            if col + 1 < n {
                link(v, v + 1);
            }
            if row + 1 < n {
                link(v, v + n);
            }
        }
    }
    let mut rng = rng(p.seed);
    let mut cells: Vec<NodeId> = (0..total).collect();
    cells.shuffle(&mut rng);
    let root = cells[0];
    let mut sites: Vec<NodeId> = cells[1..1 + ns].to_vec();
    let mut terminals: Vec<NodeId> = cells[1 + ns..1 + ns + nt].to_vec();
    sites.sort_unstable();
    terminals.sort_unstable();
    Ok(Instance::new(
        Network::new(total, edges),
        Request {
            root,
            root_capacity: p.node_capacity,
            sites: sites
                .into_iter()
                .map(|node| Site {
                    node,
                    cost: p.site_cost,
                    capacity: p.node_capacity,
                })
                .collect(),
            terminals,
            orientation: Orientation::Aggregation,
        },
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterParams {
    pub total_nodes: usize,
    /// Clusters per row and per column of the unit square.
    pub cluster_grid: (usize, usize),
    pub pops_per_cluster: usize,
    /// Nearest in-cluster PoPs every other node links to.
    pub internal_pop_links: usize,
    /// Nearest PoPs of other clusters every PoP links to.
    pub pop_peer_links: usize,
    pub inter_pop_capacity: u32,
    pub intra_as_capacity: u32,
    pub site_count: usize,
    pub terminal_count: usize,
    pub site_cost_factor: (f64, f64),
    pub node_capacity: u32,
    pub seed: u64,
}

impl ClusterParams {
    pub fn igen1600(seed: u64) -> Self {
        ClusterParams {
            total_nodes: 1600,
            cluster_grid: (20, 6),
            pops_per_cluster: 3,
            internal_pop_links: 2,
            pop_peer_links: 2,
            inter_pop_capacity: 10,
            intra_as_capacity: 2,
            site_count: 200,
            terminal_count: 300,
            site_cost_factor: (25.0, 75.0),
            node_capacity: 5,
            seed,
        }
    }

    pub fn igen3200(seed: u64) -> Self {
        ClusterParams {
            total_nodes: 3200,
            pops_per_cluster: 4,
            internal_pop_links: 3,
            site_count: 400,
            terminal_count: 600,
            ..Self::igen1600(seed)
        }
    }

    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        match name {
            "igen1600" => Some(Self::igen1600(seed)),
            "igen3200" => Some(Self::igen3200(seed)),
            _ => None,
        }
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn find(parent: &mut [usize], v: usize) -> usize {
    let mut r = v;
    while parent[r] != r {
        r = parent[r];
    }
    let mut v = v;
    while parent[v] != r {
        let next = parent[v];
        parent[v] = r;
        v = next;
    }
    r
}

/// Clustered topology: PoPs per cluster, access nodes hanging off nearby PoPs,
/// PoPs meshed inside their cluster and linked to nearest foreign PoPs.
/// Sites sit on PoPs, terminals on access nodes, the root on a remaining PoP
/// when one is left.
pub fn gen_cluster(p: &ClusterParams) -> Result<Instance, GenerateError> {
    let (h, v) = p.cluster_grid;
    if p.total_nodes < 2 || h == 0 || v == 0 || p.pops_per_cluster == 0 || p.internal_pop_links == 0 {
        return Err(GenerateError::Params("counts must be positive".into()));
    }
    if p.terminal_count == 0 {
        return Err(GenerateError::Params("no terminals requested".into()));
    }
    let (lo, hi) = p.site_cost_factor;
    if !(lo > 0.0 && lo <= hi) {
        return Err(GenerateError::Params(format!("site cost factor range ({}, {})", lo, hi)));
    }
    let mut rng = rng(p.seed);
    let pos: Vec<(f64, f64)> = (0..p.total_nodes).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
    let cell = |(x, y): (f64, f64)| {
        let cx = ((x * h as f64) as usize).min(h - 1);
        let cy = ((y * v as f64) as usize).min(v - 1);
        cy * h + cx
    };
    let mut members = vec![Vec::new(); h * v];
    for (i, &q) in pos.iter().enumerate() {
        members[cell(q)].push(i);
    }
    let mut is_pop = vec![false; p.total_nodes];
    let mut pops_of = vec![Vec::new(); h * v];
    for (c, m) in members.iter().enumerate() {
        let mut chosen: Vec<usize> = m
            .choose_multiple(&mut rng, p.pops_per_cluster.min(m.len()))
            .copied()
            .collect();
        chosen.sort_unstable();
        for &q in &chosen {
            is_pop[q] = true;
        }
        pops_of[c] = chosen;
    }

    let mut links: std::collections::BTreeSet<(usize, usize)> = Default::default();
    let add = |links: &mut std::collections::BTreeSet<(usize, usize)>, a: usize, b: usize| {
        links.insert((a.min(b), a.max(b)));
    };
    for (c, m) in members.iter().enumerate() {
        for &q in m.iter().filter(|&&q| !is_pop[q]) {
            let mut near = pops_of[c].clone();
            near.sort_by(|&a, &b| dist(pos[q], pos[a]).total_cmp(&dist(pos[q], pos[b])));
            for &pop in near.iter().take(p.internal_pop_links) {
                add(&mut links, q, pop);
            }
        }
        for (i, &a) in pops_of[c].iter().enumerate() {
            for &b in &pops_of[c][i + 1..] {
                add(&mut links, a, b);
            }
        }
    }
    let all_pops: Vec<usize> = (0..p.total_nodes).filter(|&q| is_pop[q]).collect();
    for &a in &all_pops {
        let mut foreign: Vec<usize> = all_pops.iter().copied().filter(|&b| cell(pos[b]) != cell(pos[a])).collect();
        foreign.sort_by(|&x, &y| dist(pos[a], pos[x]).total_cmp(&dist(pos[a], pos[y])));
        for &b in foreign.iter().take(p.pop_peer_links) {
            add(&mut links, a, b);
        }
    }
    // join components by their closest PoP pair
    loop {
        let mut parent: Vec<usize> = (0..p.total_nodes).collect();
        for &(a, b) in &links {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
        let comp: Vec<usize> = (0..p.total_nodes).map(|q| find(&mut parent, q)).collect();
        if comp.iter().all(|&c| c == comp[0]) {
            break;
        }
        let anchor = comp[0];
        let mut best: Option<(f64, usize, usize)> = None;
        for &a in all_pops.iter().filter(|&&a| comp[a] == anchor) {
            for &b in all_pops.iter().filter(|&&b| comp[b] != anchor) {
                let d = dist(pos[a], pos[b]);
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let (_, a, b) = best.expect("every nonempty cluster has a PoP");
        add(&mut links, a, b);
    }

    let mut edges = Vec::with_capacity(2 * links.len());
    for &(a, b) in &links {
        let capacity = if is_pop[a] && is_pop[b] {
            p.inter_pop_capacity
        } else {
            p.intra_as_capacity
        };
        let cost = dist(pos[a], pos[b]);
        edges.push(Edge { tail: a, head: b, cost, capacity });
        edges.push(Edge { tail: b, head: a, cost, capacity });
    }
    let mean_len = edges.iter().map(|e| e.cost).sum::<f64>() / edges.len().max(1) as f64;

    let access: Vec<usize> = (0..p.total_nodes).filter(|&q| !is_pop[q]).collect();
    if p.site_count > all_pops.len() {
        return Err(GenerateError::TooSmall {
            needed: p.site_count,
            available: all_pops.len(),
        });
    }
    if p.terminal_count > access.len() {
        return Err(GenerateError::TooSmall {
            needed: p.terminal_count,
            available: access.len(),
        });
    }
    let mut pops_shuffled = all_pops.clone();
    pops_shuffled.shuffle(&mut rng);
    let mut access_shuffled = access.clone();
    access_shuffled.shuffle(&mut rng);
    let mut site_nodes = pops_shuffled[..p.site_count].to_vec();
    let mut terminals = access_shuffled[..p.terminal_count].to_vec();
    let root = pops_shuffled
        .get(p.site_count)
        .or_else(|| access_shuffled.get(p.terminal_count))
        .copied()
        .ok_or(GenerateError::TooSmall {
            needed: p.site_count + p.terminal_count + 1,
            available: p.total_nodes,
        })?;
    site_nodes.sort_unstable();
    terminals.sort_unstable();
    let sites = site_nodes
        .into_iter()
        .map(|node| Site {
            node,
            cost: mean_len * rng.gen_range(lo..=hi),
            capacity: p.node_capacity,
        })
        .collect();
    Ok(Instance::new(
        Network::new(p.total_nodes, edges),
        Request {
            root,
            root_capacity: p.node_capacity,
            sites,
            terminals,
            orientation: Orientation::Aggregation,
        },
    ))
}

/// Bounds for [`gen_tiny`]; every count is an inclusive maximum.
#[derive(Clone, Debug, PartialEq)]
pub struct TinyParams {
    pub max_nodes: usize,
    pub max_edges: usize,
    pub max_capacity: u32,
    pub max_sites: usize,
    pub max_terminals: usize,
    pub max_cost: u32,
}

impl Default for TinyParams {
    fn default() -> Self {
        TinyParams {
            max_nodes: 6,
            max_edges: 10,
            max_capacity: 2,
            max_sites: 3,
            max_terminals: 3,
            max_cost: 5,
        }
    }
}

/// Small random instance with integral costs. Half of the edges are drawn
/// pointing towards the root's side so that feasible instances are common.
pub fn gen_tiny(p: &TinyParams, seed: u64) -> Instance {
    assert!(p.max_nodes >= 2 && p.max_edges >= 1 && p.max_capacity >= 1 && p.max_cost >= 1);
    let mut rng = rng(seed);
    let n = rng.gen_range(2..=p.max_nodes);
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(&mut rng);
    let root = order[0];
    let nt = rng.gen_range(1..=p.max_terminals.min(n - 1));
    let ns = rng.gen_range(0..=p.max_sites.min(n - 1 - nt));
    let mut terminals = order[1..1 + nt].to_vec();
    let mut site_nodes = order[1 + nt..1 + nt + ns].to_vec();
    terminals.sort_unstable();
    site_nodes.sort_unstable();

    // rank by distance from the root in `order`: lower rank is closer
    let mut rank = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        rank[v] = i;
    }
    let mut pairs: Vec<(NodeId, NodeId)> = (0..n)
        .flat_map(|u| (0..n).filter(move |&w| w != u).map(move |w| (u, w)))
        .collect();
    pairs.shuffle(&mut rng);
    let m = rng.gen_range(1..=p.max_edges.min(pairs.len()));
    let (down, up): (Vec<_>, Vec<_>) = pairs.into_iter().partition(|&(u, w)| rank[w] < rank[u]);
    let mut chosen = Vec::with_capacity(m);
    let (mut di, mut ui) = (down.iter(), up.iter());
    while chosen.len() < m {
        let next = if rng.gen_bool(0.5) {
            di.next().or_else(|| ui.next())
        } else {
            ui.next().or_else(|| di.next())
        };
        chosen.push(*next.expect("m is at most the number of pairs"));
    }
    let edges = chosen
        .into_iter()
        .map(|(tail, head)| Edge {
            tail,
            head,
            cost: rng.gen_range(1..=p.max_cost) as f64,
            capacity: rng.gen_range(1..=p.max_capacity),
        })
        .collect();
    let sites = site_nodes
        .into_iter()
        .map(|node| Site {
            node,
            cost: rng.gen_range(1..=p.max_cost) as f64,
            capacity: rng.gen_range(1..=p.max_capacity),
        })
        .collect();
    Instance::new(
        Network::new(n, edges),
        Request {
            root,
            root_capacity: rng.gen_range(1..=p.max_capacity),
            sites,
            terminals,
            orientation: Orientation::Aggregation,
        },
    )
}
