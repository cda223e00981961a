//! Small hand-built instances used by tests, examples and the CLI.

use crate::instance::{Edge, Instance, Network, Orientation, Request, Site};

fn edge(tail: usize, head: usize, cost: f64, capacity: u32) -> Edge {
    Edge {
        tail,
        head,
        cost,
        capacity,
    }
}

/// Three nodes on a line, `t -> s -> r`, with ids t = 0, s = 1, r = 2.
///
/// Unit edge costs and capacities, site cost 5, site capacity 10, root capacity 1.
/// The LP relaxation without terminal cuts is strictly weaker than with them.
pub fn line_instance() -> Instance {
    let net = Network::new(3, vec![edge(0, 1, 1.0, 1), edge(1, 2, 1.0, 1)]);
    let req = Request {
        root: 2,
        root_capacity: 1,
        sites: vec![Site {
            node: 1,
            cost: 5.0,
            capacity: 10,
        }],
        terminals: vec![0],
        orientation: Orientation::Aggregation,
    };
    Instance::new(net, req)
}

/// One root, one site and two terminals on disjoint routes:
/// `t1 -> r`, `t2 -> s`, `s -> r`. Ids: r = 0, s = 1, t1 = 2, t2 = 3.
///
/// Without connectivity rows, `t2` can route into the site sink while the site
/// never reaches the root.
pub fn disconnected_cache_instance() -> Instance {
    let net = Network::new(
        4,
        vec![edge(2, 0, 1.0, 1), edge(3, 1, 1.0, 1), edge(1, 0, 1.0, 1)],
    );
    let req = Request {
        root: 0,
        root_capacity: 2,
        sites: vec![Site {
            node: 1,
            cost: 1.0,
            capacity: 2,
        }],
        terminals: vec![2, 3],
        orientation: Orientation::Aggregation,
    };
    Instance::new(net, req)
}

/// Four terminals fanning into one site next to a root of capacity 1.
/// Ids: r = 0, s = 1, terminals 2..=5. Each terminal also has a costly direct edge to r.
pub fn fan_in_instance() -> Instance {
    let mut edges = vec![edge(1, 0, 1.0, 1)];
    for t in 2..=5 {
        edges.push(edge(t, 1, 1.0, 1));
        edges.push(edge(t, 0, 4.0, 1));
    }
    let req = Request {
        root: 0,
        root_capacity: 1,
        sites: vec![Site {
            node: 1,
            cost: 2.0,
            capacity: 4,
        }],
        terminals: vec![2, 3, 4, 5],
        orientation: Orientation::Aggregation,
    };
    Instance::new(Network::new(6, edges), req)
}
