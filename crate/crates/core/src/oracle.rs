//! Exhaustive search over integral model points for tiny instances.
//!
//! Sites are enumerated outermost, then network edge flows in edge order with
//! ascending values. Sink edges follow from conservation. At nodes without a
//! sink edge the last incident network edge is forced by conservation, and
//! every partial assignment is pruned when some node can no longer balance.

use std::ops::ControlFlow;

use thiserror::Error;

use crate::extended::{EdgeClass, ExtendedGraph};
use crate::scf::{cost_ip, is_ip_feasible, IpSolution};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleLimits {
    /// Refuse when the enumerated space exceeds this many points.
    pub max_space: f64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits { max_space: 1e7 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("search space of {space:.3e} points exceeds the limit of {limit:.3e}")]
    SpaceTooLarge { space: f64, limit: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleStatus {
    Optimal,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub status: OracleStatus,
    pub best_cost: Option<f64>,
    /// First optimal point in enumeration order.
    pub best: Option<IpSolution>,
    pub feasible_points: u64,
}

struct Plan {
    /// Network edge ids in enumeration order (same as extended ids).
    edges: Vec<usize>,
    /// Base node whose balance fixes this edge, if any.
    forced_by: Vec<Option<usize>>,
    /// Network edges incident to each base node.
    incident: Vec<Vec<usize>>,
    /// Position in `edges` after which the node has no unassigned incident edge.
    completes_at: Vec<Option<usize>>,
    has_sink: Vec<bool>,
}

fn plan(ext: &ExtendedGraph) -> Plan {
    let inst = ext.instance();
    let n = ext.base_nodes();
    let edges: Vec<usize> = (0..ext.num_edges())
        .filter(|&e| matches!(ext.edge(e).class, EdgeClass::Network(_)))
        .collect();
    let mut incident = vec![Vec::new(); n];
    for &e in &edges {
        incident[ext.edge(e).tail].push(e);
        incident[ext.edge(e).head].push(e);
    }
    let has_sink: Vec<bool> = (0..n)
        .map(|v| v == inst.request.root || ext.site_index(v).is_some())
        .collect();
    let completes_at: Vec<Option<usize>> = incident.iter().map(|inc| inc.iter().copied().max()).collect();
    let mut forced_by = vec![None; edges.len()];
    for (i, &e) in edges.iter().enumerate() {
        let ed = ext.edge(e);
        forced_by[i] = [ed.tail, ed.head]
            .into_iter()
            .find(|&v| !has_sink[v] && completes_at[v] == Some(e));
    }
    Plan {
        edges,
        forced_by,
        incident,
        completes_at,
        has_sink,
    }
}

struct Search<'a, F> {
    ext: &'a ExtendedGraph,
    plan: Plan,
    /// Allowed absorbed amount per base node for the current site assignment.
    target: Vec<(i64, i64)>,
    supply: Vec<i64>,
    sol: IpSolution,
    visit: F,
    prune: bool,
}

impl<'a, F: FnMut(&IpSolution) -> ControlFlow<()>> Search<'a, F> {
    /// Net inflow of `v` so far plus what unassigned incident edges could still change.
    fn can_balance(&self, v: usize, assigned_upto: usize) -> bool {
        let (mut inn, mut out) = (self.supply[v], 0i64);
        let (mut r_in, mut r_out) = (0i64, 0i64);
        for &e in &self.plan.incident[v] {
            let ed = self.ext.edge(e);
            let val = self.sol.f[e] as i64;
            let done = e <= assigned_upto;
            match (ed.head == v, done) {
                (true, true) => inn += val,
                (true, false) => r_in += ed.bound as i64,
                (false, true) => out += val,
                (false, false) => r_out += ed.bound as i64,
            }
        }
        let (lo, hi) = self.target[v];
        let (need_lo, need_hi) = (inn - out - r_out, inn + r_in - out);
        need_hi >= lo && need_lo <= hi
    }

    fn net_inflow(&self, v: usize) -> i64 {
        let mut net = self.supply[v];
        for &e in &self.plan.incident[v] {
            let val = self.sol.f[e] as i64;
            if self.ext.edge(e).head == v {
                net += val;
            } else {
                net -= val;
            }
        }
        net
    }

    fn run(&mut self, i: usize) -> ControlFlow<()> {
        if i == self.plan.edges.len() {
            return self.leaf();
        }
        let e = self.plan.edges[i];
        let ed = self.ext.edge(e).clone();
        let forced = if self.prune { self.plan.forced_by[i] } else { None };
        let values: Vec<u32> = match forced {
            Some(v) => {
                self.sol.f[e] = 0;
                // the edge enters v: raising it raises the inflow
                let net = self.net_inflow(v);
                let want = if ed.head == v { -net } else { net };
                if want < 0 || want > ed.bound as i64 {
                    return ControlFlow::Continue(());
                }
                vec![want as u32]
            }
            None => (0..=ed.bound).collect(),
        };
        for val in values {
            self.sol.f[e] = val;
            let ok = !self.prune || [ed.tail, ed.head].iter().all(|&v| self.can_balance(v, e));
            if ok {
                self.run(i + 1)?;
            }
        }
        self.sol.f[e] = 0;
        ControlFlow::Continue(())
    }

    fn leaf(&mut self) -> ControlFlow<()> {
        for v in 0..self.ext.base_nodes() {
            let net = self.net_inflow(v);
            let (lo, hi) = self.target[v];
            if net < lo || net > hi {
                return ControlFlow::Continue(());
            }
            if self.plan.has_sink[v] {
                let sink = match self.ext.site_index(v) {
                    Some(k) => self.ext.site_sink_edges()[k],
                    None => self.ext.root_sink_edge(),
                };
                self.sol.f[sink] = net as u32;
            }
        }
        if is_ip_feasible(self.ext, &self.sol).is_feasible() {
            (self.visit)(&self.sol)
        } else {
            ControlFlow::Continue(())
        }
    }
}

/// Number of points the pruned search may enumerate: site assignments times
/// the domains of unforced network edges.
pub fn search_space(ext: &ExtendedGraph) -> f64 {
    space(ext, true)
}

fn space(ext: &ExtendedGraph, forcing: bool) -> f64 {
    let p = plan(ext);
    let free: f64 = p
        .edges
        .iter()
        .zip(&p.forced_by)
        .filter(|(_, f)| !forcing || f.is_none())
        .map(|(&e, _)| ext.edge(e).bound as f64 + 1.0)
        .product();
    2f64.powi(ext.num_sites() as i32) * free
}

/// Calls `visit` on every feasible point in enumeration order until it breaks.
pub fn for_each_feasible(
    ext: &ExtendedGraph,
    limits: OracleLimits,
    visit: impl FnMut(&IpSolution) -> ControlFlow<()>,
) -> Result<(), OracleError> {
    enumerate(ext, limits, true, visit)
}

fn enumerate(
    ext: &ExtendedGraph,
    limits: OracleLimits,
    prune: bool,
    visit: impl FnMut(&IpSolution) -> ControlFlow<()>,
) -> Result<(), OracleError> {
    let space = space(ext, prune);
    if space > limits.max_space {
        return Err(OracleError::SpaceTooLarge {
            space,
            limit: limits.max_space,
        });
    }
    let inst = ext.instance();
    let n = ext.base_nodes();
    let ns = ext.num_sites();
    let mut search = Search {
        ext,
        plan: plan(ext),
        target: vec![(0, 0); n],
        supply: vec![0; n],
        sol: IpSolution::zero(ext),
        visit,
        prune,
    };
    for &e in ext.terminal_source_edges() {
        search.sol.f[e] = 1;
        search.supply[ext.edge(e).head] = 1;
    }
    search.target[inst.request.root] = (0, inst.request.root_capacity as i64);
    for mask in 0u64..(1u64 << ns) {
        for (k, s) in inst.request.sites.iter().enumerate() {
            // site 0 is the most significant digit
            let x = (mask >> (ns - 1 - k) & 1) as u32;
            search.sol.x[k] = x;
            search.sol.f[ext.site_source_edges()[k]] = x;
            search.sol.f[ext.site_sink_edges()[k]] = 0;
            search.supply[s.node] = x as i64;
            search.target[s.node] = (x as i64, (s.capacity * x) as i64);
        }
        search.sol.f[ext.root_sink_edge()] = 0;
        // isolated nodes never reach a completing edge
        let stuck = (0..n).any(|v| search.plan.completes_at[v].is_none() && {
            let (lo, hi) = search.target[v];
            search.supply[v] < lo || search.supply[v] > hi
        });
        if stuck {
            continue;
        }
        if search.run(0).is_break() {
            break;
        }
    }
    Ok(())
}

fn collect(ext: &ExtendedGraph, limits: OracleLimits, prune: bool) -> Result<OracleResult, OracleError> {
    let mut best: Option<(f64, IpSolution)> = None;
    let mut count = 0u64;
    enumerate(ext, limits, prune, |sol| {
        count += 1;
        let c = cost_ip(ext, sol);
        if best.as_ref().is_none_or(|(b, _)| c < *b) {
            best = Some((c, sol.clone()));
        }
        ControlFlow::Continue(())
    })?;
    Ok(match best {
        Some((c, sol)) => OracleResult {
            status: OracleStatus::Optimal,
            best_cost: Some(c),
            best: Some(sol),
            feasible_points: count,
        },
        None => OracleResult {
            status: OracleStatus::Infeasible,
            best_cost: None,
            best: None,
            feasible_points: 0,
        },
    })
}

pub fn brute_force(ext: &ExtendedGraph, limits: OracleLimits) -> Result<OracleResult, OracleError> {
    collect(ext, limits, true)
}

/// Same search without forcing or pruning; for cross-checking on very small inputs.
pub fn brute_force_naive(ext: &ExtendedGraph, limits: OracleLimits) -> Result<OracleResult, OracleError> {
    collect(ext, limits, false)
}

/// Whether any feasible point exists; stops at the first one.
pub fn is_feasible(ext: &ExtendedGraph, limits: OracleLimits) -> Result<bool, OracleError> {
    let mut found = false;
    for_each_feasible(ext, limits, |_| {
        found = true;
        ControlFlow::Break(())
    })?;
    Ok(found)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::instance::fixtures::{edge, line};
    use crate::instance::{set_cover_reduction, Instance, Network, Orientation, Request, Site};
    use crate::samples;
    use proptest::prelude::*;

    /// Every assignment of every variable, filtered by the model check alone.
    fn fully_naive(ext: &ExtendedGraph) -> (u64, Option<f64>) {
        let m = ext.num_edges();
        let ns = ext.num_sites();
        let doms: Vec<u32> = (0..m)
            .map(|e| ext.edge(e).bound + 1)
            .chain(std::iter::repeat_n(2, ns))
            .collect();
        let total: u64 = doms.iter().map(|&d| d as u64).product();
        let (mut count, mut best) = (0u64, None::<f64>);
        for mut code in 0..total {
            let mut vals = Vec::with_capacity(doms.len());
            for &d in &doms {
                vals.push((code % d as u64) as u32);
                code /= d as u64;
            }
            let sol = IpSolution {
                f: vals[..m].to_vec(),
                x: vals[m..].to_vec(),
            };
            if is_ip_feasible(ext, &sol).is_feasible() {
                count += 1;
                let c = cost_ip(ext, &sol);
                best = Some(best.map_or(c, |b: f64| b.min(c)));
            }
        }
        (count, best)
    }

    #[test]
    fn line_optimum_is_two() {
        let ext = ExtendedGraph::build(&line()).unwrap();
        let r = brute_force(&ext, OracleLimits::default()).unwrap();
        assert_eq!(r.status, OracleStatus::Optimal);
        assert_eq!(r.best_cost, Some(2.0));
        assert_eq!(r.best.unwrap().x, vec![0]);
        assert!(r.feasible_points >= 1);
        assert_eq!(fully_naive(&ext), (r.feasible_points, Some(2.0)));
    }

    #[test]
    fn small_set_cover_is_infeasible() {
        // U = {1,2,3}, family {{1,2},{3}}, k = 1
        let inst = set_cover_reduction(&[1, 2, 3], &[vec![1, 2], vec![3]], 1).unwrap();
        let ext = ExtendedGraph::build(&inst).unwrap();
        assert_eq!(brute_force(&ext, OracleLimits::default()).unwrap().status, OracleStatus::Infeasible);
        assert!(!is_feasible(&ext, OracleLimits::default()).unwrap());
        let two = set_cover_reduction(&[1, 2, 3], &[vec![1, 2], vec![3]], 2).unwrap();
        assert!(is_feasible(&ExtendedGraph::build(&two).unwrap(), OracleLimits::default()).unwrap());
    }

    #[test]
    fn guard_refuses_large_spaces() {
        let n = 8;
        let edges: Vec<_> = (1..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| edge(u, v, 1.0, 9))).collect();
        let inst = Instance::new(
            Network::new(n, edges),
            Request {
                root: 0,
                root_capacity: 1,
                sites: vec![],
                terminals: vec![1],
                orientation: Orientation::Aggregation,
            },
        );
        let ext = ExtendedGraph::build(&inst).unwrap();
        assert!(matches!(
            brute_force(&ext, OracleLimits::default()),
            Err(OracleError::SpaceTooLarge { .. })
        ));
    }

    #[test]
    fn samples_match_fully_naive_enumeration() {
        for inst in [samples::disconnected_cache_instance(), samples::line_instance()] {
            let ext = ExtendedGraph::build(&inst).unwrap();
            let r = brute_force(&ext, OracleLimits::default()).unwrap();
            assert_eq!(fully_naive(&ext), (r.feasible_points, r.best_cost));
        }
    }

    pub fn tiny_instance() -> impl Strategy<Value = Instance> {
        (3usize..=4)
            .prop_flat_map(|n| {
                let pairs: Vec<(usize, usize)> =
                    (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v))).collect();
                (
                    Just(n),
                    prop::sample::subsequence(pairs, 1..=4),
                    prop::collection::vec((1u32..=3, 1u32..=2), 4),
                    1usize..n,
                    prop::option::of(1usize..n),
                    1u32..=2,
                    (1u32..=3, 1u32..=2),
                )
            })
            .prop_map(|(n, es, cu, t, s, ur, (cs, us))| {
                let edges = es.iter().zip(&cu).map(|(&(u, v), &(c, cap))| edge(u, v, c as f64, cap)).collect();
                let sites = s.filter(|&s| s != t).map(|node| Site { node, cost: cs as f64, capacity: us });
                Instance::new(
                    Network::new(n, edges),
                    Request {
                        root: 0,
                        root_capacity: ur,
                        sites: sites.into_iter().collect(),
                        terminals: vec![t],
                        orientation: Orientation::Aggregation,
                    },
                )
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn pruning_matches_naive(inst in tiny_instance()) {
            let ext = ExtendedGraph::build(&inst).unwrap();
            let pruned = brute_force(&ext, OracleLimits::default()).unwrap();
            let naive = brute_force_naive(&ext, OracleLimits::default()).unwrap();
            prop_assert_eq!(&pruned, &naive);
            let (count, best) = fully_naive(&ext);
            prop_assert_eq!(pruned.feasible_points, count);
            prop_assert_eq!(pruned.best_cost, best);
        }
    }
}
