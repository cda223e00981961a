//! Decomposition of an integral single-commodity point into a virtual arborescence.
//!
//! Terminals are connected one unit path at a time. While a path is consumed,
//! every still-active site must keep reaching the root sink; when a decrement
//! would strand one, the path is bent into the stranded region and ends at the
//! site sink instead. A site whose absorbed flow is used up becomes a terminal.

use std::collections::VecDeque;

use thiserror::Error;

use crate::extended::{restricted_reach, ExtendedGraph};
use crate::instance::NodeId;
use crate::scf::{is_ip_feasible, Family, IpSolution};
use crate::va::{Path, VirtualArborescence};

#[derive(Debug, Error, PartialEq)]
pub enum DecomposeError {
    #[error("point violates {}", .0.iter().map(|f| f.label()).collect::<Vec<_>>().join(", "))]
    Infeasible(Vec<Family>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DecomposeOptions {
    /// Re-check connectivity after every decrement and assert the
    /// per-node imbalance along the partial path.
    pub debug_checks: bool,
}

/// Removes cycles by splicing at the first repeated vertex. Endpoints are kept.
pub fn simplify(p: &Path) -> Path {
    let mut out: Vec<NodeId> = Vec::with_capacity(p.len());
    for &v in p.vertices() {
        if let Some(i) = out.iter().position(|&u| u == v) {
            out.truncate(i + 1);
        } else {
            out.push(v);
        }
    }
    Path::new(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Connectivity {
    Ok,
    /// `node_set` is what `site` still reaches; nothing in it carries flow out over restricted edges.
    Violated { site: usize, node_set: Vec<NodeId> },
}

/// Checks that every active site (by site index) reaches the root sink over
/// restricted edges carrying at least one unit.
pub fn check_connectivity(ext: &ExtendedGraph, f: &[u32], active: &[bool]) -> Connectivity {
    for (k, s) in ext.instance().request.sites.iter().enumerate() {
        if !active[k] {
            continue;
        }
        let reach = restricted_reach(ext, s.node, |e| f[e] >= 1);
        if !reach[ext.root_sink()] {
            return Connectivity::Violated {
                site: k,
                node_set: (0..ext.base_nodes()).filter(|&v| reach[v]).collect(),
            };
        }
    }
    Connectivity::Ok
}

/// Depth-first edge path from `start` over edges with flow, expanding only
/// into nodes accepted by `enter` and stopping at the first edge accepted by `done`.
fn dfs_path(
    ext: &ExtendedGraph,
    f: &[u32],
    start: NodeId,
    enter: impl Fn(NodeId) -> bool,
    done: impl Fn(usize) -> bool,
) -> Option<Vec<usize>> {
    let mut seen = vec![false; ext.num_nodes()];
    seen[start] = true;
    // (node, next out-edge position)
    let mut stack: Vec<(NodeId, usize)> = vec![(start, 0)];
    let mut path: Vec<usize> = Vec::new();
    while let Some(top) = stack.last_mut() {
        let (v, pos) = *top;
        let outs = ext.out_edges(v);
        if pos == outs.len() {
            stack.pop();
            path.pop();
            continue;
        }
        top.1 += 1;
        let e = outs[pos];
        if f[e] == 0 {
            continue;
        }
        if done(e) {
            path.push(e);
            return Some(path);
        }
        let h = ext.edge(e).head;
        if !seen[h] && enter(h) {
            seen[h] = true;
            path.push(e);
            stack.push((h, 0));
        }
    }
    None
}

pub fn decompose(ext: &ExtendedGraph, sol: &IpSolution) -> Result<VirtualArborescence, DecomposeError> {
    decompose_with(ext, sol, DecomposeOptions::default())
}

pub fn decompose_with(
    ext: &ExtendedGraph,
    sol: &IpSolution,
    opts: DecomposeOptions,
) -> Result<VirtualArborescence, DecomposeError> {
    let rep = is_ip_feasible(ext, sol);
    if !rep.is_feasible() {
        return Err(DecomposeError::Infeasible(rep.families()));
    }
    let inst = ext.instance();
    let mut f = sol.f.clone();
    let mut active: Vec<bool> = sol.x.iter().map(|&x| x >= 1).collect();
    let mut queue: VecDeque<NodeId> = inst.request.terminals.iter().copied().collect();
    let mut va = VirtualArborescence::new(inst.request.root);
    for (k, s) in inst.request.sites.iter().enumerate() {
        if active[k] {
            va.nodes.insert(s.node);
        }
    }
    va.nodes.extend(inst.request.terminals.iter().copied());

    while let Some(t) = queue.pop_front() {
        let supply = ext.find_edge(ext.source(), t).expect("every terminal has a supply edge");
        let rest = dfs_path(ext, &f, t, |_| true, |e| ext.edge(e).head == ext.root_sink())
            .unwrap_or_else(|| panic!("no flow path from {} to the root sink", t));
        let mut path = vec![supply];
        path.extend(rest);

        let mut j = 0;
        while j < path.len() {
            let e = path[j];
            assert!(f[e] >= 1, "path edge {} carries no flow", ext.edge_label(e));
            f[e] -= 1;
            let may_strand = ext.is_restricted(e) && f[e] == 0;
            if may_strand || opts.debug_checks {
                if let Connectivity::Violated { node_set, .. } = check_connectivity(ext, &f, &active) {
                    f[e] += 1;
                    let from = ext.edge(e).tail;
                    let mut in_w = vec![false; ext.num_nodes()];
                    node_set.iter().for_each(|&v| in_w[v] = true);
                    let detour = dfs_path(ext, &f, from, |v| in_w[v], |d| ext.edge(d).head == ext.site_sink())
                        .unwrap_or_else(|| panic!("no detour from {} to the site sink", ext.node_label(from)));
                    f[detour[0]] -= 1;
                    path.truncate(j);
                    path.extend(detour);
                    if opts.debug_checks {
                        assert_eq!(
                            check_connectivity(ext, &f, &active),
                            Connectivity::Ok,
                            "detour stranded a site"
                        );
                    }
                }
            }
            if opts.debug_checks {
                assert_partial_path_imbalance(ext, &f, ext.edge(path[j]).head);
            }
            j += 1;
        }

        let last = *path.last().expect("paths are nonempty");
        let end = ext.edge(last).tail;
        if ext.edge(last).head == ext.site_sink() && f[last] == 0 {
            let k = ext.site_index(end).expect("site sink edges leave sites");
            active[k] = false;
            queue.push_back(end);
        }
        let nodes: Vec<NodeId> = path[..path.len() - 1].iter().map(|&e| ext.edge(e).head).collect();
        va.add_edge(t, end, simplify(&Path::new(nodes)));
    }
    Ok(va)
}

/// Base nodes are balanced except `next`, which has one more unit out than in.
fn assert_partial_path_imbalance(ext: &ExtendedGraph, f: &[u32], next: NodeId) {
    for v in 0..ext.base_nodes() {
        let out: i64 = ext.out_edges(v).iter().map(|&e| f[e] as i64).sum();
        let inn: i64 = ext.in_edges(v).iter().map(|&e| f[e] as i64).sum();
        let want = i64::from(v == next);
        assert_eq!(out - inn, want, "imbalance at node {}", v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::{edge, line};
    use crate::instance::{Instance, Network, Orientation, Request, Site};
    use crate::scf::{cost_ip, va_to_ip};
    use crate::va::{check_va, cost_cvsap};
    use proptest::prelude::*;

    fn run(inst: &Instance, sol: &IpSolution) -> VirtualArborescence {
        let ext = ExtendedGraph::build(inst).unwrap();
        let va = decompose_with(&ext, sol, DecomposeOptions { debug_checks: true }).unwrap();
        assert!(check_va(inst, &va).is_feasible(), "{:?}", check_va(inst, &va));
        assert!(cost_cvsap(inst, &va) <= cost_ip(&ext, sol));
        va
    }

    #[test]
    fn simplify_examples() {
        assert_eq!(simplify(&Path::new(vec![1, 2, 3])), Path::new(vec![1, 2, 3]));
        assert_eq!(simplify(&Path::new(vec![1, 2, 3, 2, 4])), Path::new(vec![1, 2, 4]));
        assert_eq!(simplify(&Path::new(vec![1, 2, 1, 3])), Path::new(vec![1, 3]));
        assert_eq!(simplify(&Path::new(vec![5])), Path::new(vec![5]));
    }

    #[test]
    fn line_point_gives_direct_edge() {
        let inst = line();
        let sol = IpSolution {
            x: vec![0],
            f: vec![1, 1, 1, 0, 0, 1],
        };
        let va = run(&inst, &sol);
        assert_eq!(va.edges.len(), 1);
        assert_eq!(va.edges[&(0, 2)], Path::new(vec![0, 1, 2]));
        assert_eq!(cost_cvsap(&inst, &va), 2.0);
        assert!(va.active_sites(&inst).is_empty());
    }

    #[test]
    fn terminal_next_to_root() {
        let inst = Instance::new(
            Network::new(2, vec![edge(1, 0, 3.0, 1)]),
            Request {
                root: 0,
                root_capacity: 1,
                sites: vec![],
                terminals: vec![1],
                orientation: Orientation::Aggregation,
            },
        );
        // (1,0), (0,o-r), (o+,1)
        let va = run(&inst, &IpSolution { x: vec![], f: vec![1, 1, 1] });
        assert_eq!(va.edges[&(1, 0)], Path::new(vec![1, 0]));
    }

    /// t=0, s=1, r=2 with edges t->s, s->r and the site absorbing t.
    fn absorbing_line() -> (Instance, IpSolution) {
        let mut inst = line();
        inst.request.sites[0].cost = 1.0;
        // (t,s), (s,r), (r,o-r), (s,o-S), (o+,s), (o+,t)
        (inst, IpSolution { x: vec![1], f: vec![1, 1, 1, 1, 1, 1] })
    }

    #[test]
    fn stranding_decrement_is_rerouted_into_site() {
        let (inst, sol) = absorbing_line();
        let va = run(&inst, &sol);
        assert_eq!(va.edges[&(0, 1)], Path::new(vec![0, 1]));
        assert_eq!(va.edges[&(1, 2)], Path::new(vec![1, 2]));
        let ext = ExtendedGraph::build(&inst).unwrap();
        assert_eq!(cost_cvsap(&inst, &va), cost_ip(&ext, &sol));
    }

    #[test]
    fn connectivity_reports_stranded_site() {
        let (inst, mut sol) = absorbing_line();
        let ext = ExtendedGraph::build(&inst).unwrap();
        assert_eq!(check_connectivity(&ext, &sol.f, &[true]), Connectivity::Ok);
        sol.f[1] = 0;
        assert_eq!(
            check_connectivity(&ext, &sol.f, &[true]),
            Connectivity::Violated { site: 0, node_set: vec![1] }
        );
        assert_eq!(check_connectivity(&ext, &sol.f, &[false]), Connectivity::Ok);
    }

    #[test]
    fn infeasible_point_is_rejected() {
        let inst = line();
        let ext = ExtendedGraph::build(&inst).unwrap();
        let err = decompose(&ext, &IpSolution { x: vec![0], f: vec![1, 0, 0, 0, 0, 1] }).unwrap_err();
        assert!(matches!(err, DecomposeError::Infeasible(ref v) if v.contains(&Family::Conservation)));
        let sol = IpSolution::zero(&ext);
        assert!(decompose(&ext, &sol).is_err());
    }

    #[test]
    fn fan_in_collects_at_the_site() {
        let inst = crate::samples::fan_in_instance();
        let mut va = VirtualArborescence::new(0);
        for t in 2..=5 {
            va.add_edge(t, 1, Path::new(vec![t, 1]));
        }
        va.add_edge(1, 0, Path::new(vec![1, 0]));
        let ext = ExtendedGraph::build(&inst).unwrap();
        let sol = va_to_ip(&ext, &va).unwrap();
        let got = run(&inst, &sol);
        assert_eq!(got, va);
    }

    #[test]
    fn circulation_is_dropped() {
        // cycle t->a->t carries an extra unit nobody needs
        let inst = Instance::new(
            Network::new(
                3,
                vec![edge(1, 0, 1.0, 1), edge(1, 2, 1.0, 1), edge(2, 1, 1.0, 1)],
            ),
            Request {
                root: 0,
                root_capacity: 1,
                sites: vec![Site { node: 2, cost: 1.0, capacity: 1 }],
                terminals: vec![1],
                orientation: Orientation::Aggregation,
            },
        );
        let ext = ExtendedGraph::build(&inst).unwrap();
        // (1,0), (1,2), (2,1), (0,o-r), (2,o-S), (o+,2), (o+,1)
        let sol = IpSolution { x: vec![0], f: vec![1, 1, 1, 1, 0, 0, 1] };
        let va = run(&inst, &sol);
        assert_eq!(cost_cvsap(&inst, &va), 1.0);
        assert_eq!(cost_ip(&ext, &sol), 3.0);
    }

    proptest! {
        #[test]
        fn simplify_keeps_endpoints_and_edges(walk in prop::collection::vec(0usize..5, 1..20)) {
            let p = Path::new(walk.clone());
            let s = simplify(&p);
            prop_assert!(s.is_simple());
            prop_assert_eq!(s.first(), p.first());
            prop_assert_eq!(s.last(), p.last());
            prop_assert!(s.len() <= p.len());
            let input: Vec<(usize, usize)> = p.arcs().collect();
            for a in s.arcs() {
                prop_assert!(input.contains(&a));
            }
        }
    }
}
