//! JSON file formats for instances, solutions and integral model points.
//!
//! Every file carries `"format": "cvsap-1"`. Writers produce a canonical form
//! (fixed key order, sorted collections) so equal values give equal bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extended::ExtendedGraph;
use crate::instance::{Edge, Instance, Network, NodeId, Orientation, Request, Site};
use crate::scf::IpSolution;
use crate::va::{cost_cvsap, Path, VirtualArborescence};

pub const FORMAT: &str = "cvsap-1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot access {path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("malformed file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported format version {0:?}, expected {FORMAT:?}")]
    UnsupportedVersion(String),
    #[error("inconsistent content: {0}")]
    Content(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    format: String,
    nodes: usize,
    edges: Vec<(NodeId, NodeId, f64, u32)>,
    root: NodeId,
    root_capacity: u32,
    steiner_sites: Vec<(NodeId, f64, u32)>,
    terminals: Vec<NodeId>,
    orientation: Orientation,
}

#[derive(Serialize, Deserialize)]
struct VirtualEdgeFile {
    tail: NodeId,
    head: NodeId,
    path: Vec<NodeId>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionFile {
    format: String,
    root: Option<NodeId>,
    active_sites: Vec<NodeId>,
    virtual_edges: Vec<VirtualEdgeFile>,
    cost: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointFile {
    #[serde(default = "default_format")]
    format: String,
    x: BTreeMap<String, u32>,
    f: BTreeMap<String, u32>,
}

fn default_format() -> String {
    FORMAT.to_string()
}

fn check_format(found: &str) -> Result<(), IoError> {
    if found == FORMAT {
        Ok(())
    } else {
        Err(IoError::UnsupportedVersion(found.to_string()))
    }
}

/// Reads `format` first so version errors win over schema errors.
fn peek_format(text: &str) -> Result<(), IoError> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    match v.get("format").and_then(|f| f.as_str()) {
        Some(f) => check_format(f),
        None => Ok(()),
    }
}

pub fn instance_to_json(inst: &Instance) -> String {
    let r = &inst.request;
    let file = InstanceFile {
        format: FORMAT.to_string(),
        nodes: inst.network.num_nodes(),
        edges: inst.network.edges().iter().map(|e| (e.tail, e.head, e.cost, e.capacity)).collect(),
        root: r.root,
        root_capacity: r.root_capacity,
        steiner_sites: r.sites.iter().map(|s| (s.node, s.cost, s.capacity)).collect(),
        terminals: r.terminals.clone(),
        orientation: r.orientation,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("instances serialize");
    s.push('\n');
    s
}

pub fn instance_from_json(text: &str) -> Result<Instance, IoError> {
    peek_format(text)?;
    let file: InstanceFile = serde_json::from_str(text)?;
    check_format(&file.format)?;
    let edges = file
        .edges
        .into_iter()
        .map(|(tail, head, cost, capacity)| Edge {
            tail,
            head,
            cost,
            capacity,
        })
        .collect();
    Ok(Instance::new(
        Network::new(file.nodes, edges),
        Request {
            root: file.root,
            root_capacity: file.root_capacity,
            sites: file
                .steiner_sites
                .into_iter()
                .map(|(node, cost, capacity)| Site { node, cost, capacity })
                .collect(),
            terminals: file.terminals,
            orientation: file.orientation,
        },
    ))
}

fn read_text(path: &FsPath) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

fn write_text(path: &FsPath, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Parses without validating; callers decide how to report invariant violations.
pub fn read_instance(path: impl AsRef<FsPath>) -> Result<Instance, IoError> {
    instance_from_json(&read_text(path.as_ref())?)
}

pub fn write_instance(inst: &Instance, path: impl AsRef<FsPath>) -> Result<(), IoError> {
    write_text(path.as_ref(), &instance_to_json(inst))
}

pub fn solution_to_json(inst: &Instance, va: &VirtualArborescence) -> String {
    let file = SolutionFile {
        format: FORMAT.to_string(),
        root: Some(va.root),
        active_sites: va.active_sites(inst),
        virtual_edges: va
            .edges
            .iter()
            .map(|(&(tail, head), p)| VirtualEdgeFile {
                tail,
                head,
                path: p.vertices().to_vec(),
            })
            .collect(),
        cost: cost_cvsap(inst, va),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("solutions serialize");
    s.push('\n');
    s
}

/// The root defaults to the instance root. Listed active sites that no edge
/// touches are kept as isolated nodes so the checker can flag them.
pub fn solution_from_json(inst: &Instance, text: &str) -> Result<VirtualArborescence, IoError> {
    peek_format(text)?;
    let file: SolutionFile = serde_json::from_str(text)?;
    check_format(&file.format)?;
    let mut va = VirtualArborescence::new(file.root.unwrap_or(inst.request.root));
    for ve in file.virtual_edges {
        va.add_edge(ve.tail, ve.head, Path::new(ve.path));
    }
    va.nodes.extend(file.active_sites);
    Ok(va)
}

pub fn read_solution(inst: &Instance, path: impl AsRef<FsPath>) -> Result<VirtualArborescence, IoError> {
    solution_from_json(inst, &read_text(path.as_ref())?)
}

pub fn write_solution(inst: &Instance, va: &VirtualArborescence, path: impl AsRef<FsPath>) -> Result<(), IoError> {
    write_text(path.as_ref(), &solution_to_json(inst, va))
}

/// Integral model point keyed by site node id (`x`) and extended edge label (`f`),
/// e.g. `"0->1"` or `"o+->3"`. Missing keys are zero.
pub fn point_from_json(ext: &ExtendedGraph, text: &str) -> Result<IpSolution, IoError> {
    peek_format(text)?;
    let file: PointFile = serde_json::from_str(text)?;
    check_format(&file.format)?;
    let mut sol = IpSolution::zero(ext);
    for (key, v) in file.x {
        let k = key
            .parse::<NodeId>()
            .ok()
            .and_then(|node| ext.site_index(node))
            .ok_or_else(|| IoError::Content(format!("x key {:?} is not a site", key)))?;
        sol.x[k] = v;
    }
    for (key, v) in file.f {
        let e = parse_edge_label(ext, &key).ok_or_else(|| IoError::Content(format!("f key {:?} is not an extended edge", key)))?;
        sol.f[e] = v;
    }
    Ok(sol)
}

fn parse_edge_label(ext: &ExtendedGraph, label: &str) -> Option<usize> {
    let (a, b) = label.split_once("->")?;
    ext.find_edge(ext.parse_node_label(a.trim())?, ext.parse_node_label(b.trim())?)
}

/// Writes only the nonzero entries.
pub fn point_to_json(ext: &ExtendedGraph, sol: &IpSolution) -> String {
    let file = PointFile {
        format: FORMAT.to_string(),
        x: ext
            .instance()
            .request
            .sites
            .iter()
            .zip(&sol.x)
            .filter(|(_, &v)| v != 0)
            .map(|(s, &v)| (s.node.to_string(), v))
            .collect(),
        f: sol
            .f
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(e, &v)| (ext.edge_label(e), v))
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("points serialize");
    s.push('\n');
    s
}

pub fn read_point(ext: &ExtendedGraph, path: impl AsRef<FsPath>) -> Result<IpSolution, IoError> {
    point_from_json(ext, &read_text(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{gen_grid, GridParams};
    use crate::instance::fixtures::line;
    use crate::scf::tests::line_integral_point;

    #[test]
    fn grid_round_trips_exactly() {
        let inst = gen_grid(&GridParams::new(5, 9)).unwrap();
        let text = instance_to_json(&inst);
        let back = instance_from_json(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(instance_to_json(&back), text);
    }

    #[test]
    fn fractional_costs_survive() {
        let mut inst = line();
        inst.network = Network::new(3, vec![crate::instance::fixtures::edge(0, 1, 0.1 + 0.2, 1), crate::instance::fixtures::edge(1, 2, 1.0 / 3.0, 1)]);
        assert_eq!(instance_from_json(&instance_to_json(&inst)).unwrap(), inst);
    }

    #[test]
    fn missing_root_is_a_parse_error() {
        let text = instance_to_json(&line()).replace("\"root\": 2,\n", "");
        let err = instance_from_json(&text).unwrap_err();
        assert!(matches!(err, IoError::Parse(_)), "{}", err);
        assert!(err.to_string().contains("root"));
    }

    #[test]
    fn unknown_version_is_rejected() {
        let text = instance_to_json(&line()).replace("cvsap-1", "cvsap-2");
        assert!(matches!(instance_from_json(&text), Err(IoError::UnsupportedVersion(v)) if v == "cvsap-2"));
    }

    #[test]
    fn solution_round_trip_keeps_cost() {
        let inst = line();
        let mut va = VirtualArborescence::new(2);
        va.add_edge(0, 2, Path::new(vec![0, 1, 2]));
        let text = solution_to_json(&inst, &va);
        assert!(text.contains("\"cost\": 2.0"));
        assert_eq!(solution_from_json(&inst, &text).unwrap(), va);
    }

    #[test]
    fn point_keys_use_edge_labels() {
        let ext = ExtendedGraph::build(&line()).unwrap();
        let sol = line_integral_point();
        let text = point_to_json(&ext, &sol);
        assert!(text.contains("\"o+->0\": 1"));
        assert_eq!(point_from_json(&ext, &text).unwrap(), sol);
        let bad = r#"{"x": {"0": 1}, "f": {}}"#;
        assert!(matches!(point_from_json(&ext, bad), Err(IoError::Content(_))));
    }
}
