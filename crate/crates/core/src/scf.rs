//! The single-commodity flow model: variable layout, static rows, objective,
//! integral feasibility and the mapping from arborescences to model points.
//!
//! Variables are laid out as one flow per extended edge (in extended edge order)
//! followed by one activation variable per site (in site order). Connectivity
//! rows for sites and terminals are never materialized here; see
//! [`crate::separation`].

use std::fmt;

use thiserror::Error;

use crate::extended::{restricted_reach, EdgeClass, ExtendedGraph};
use crate::lp::{LpProblem, Row, Sense};
use crate::va::{check_va, VirtualArborescence};

/// Constraint families of the model, numbered as in the model statement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    /// Conservation on every base node.
    Conservation,
    /// Every active site reaches the root sink.
    SiteConnectivity,
    /// Every terminal reaches the root sink.
    TerminalConnectivity,
    /// Active sites absorb at least one unit.
    Absorption,
    /// Site absorption capacity, zero when inactive.
    SiteCapacity,
    RootCapacity,
    EdgeCapacity,
    /// Each terminal emits one unit.
    TerminalSupply,
    /// Each active site emits one unit.
    SiteSupply,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::Conservation => "IP-1",
            Family::SiteConnectivity => "IP-2",
            Family::TerminalConnectivity => "IP-3",
            Family::Absorption => "IP-4",
            Family::SiteCapacity => "IP-5",
            Family::RootCapacity => "IP-6",
            Family::EdgeCapacity => "IP-7",
            Family::TerminalSupply => "IP-8",
            Family::SiteSupply => "IP-9",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScfFlags {
    /// Separate terminal connectivity rows in addition to the site rows.
    pub terminal_cuts: bool,
    /// Include the absorption rows.
    pub absorption: bool,
}

impl Default for ScfFlags {
    fn default() -> Self {
        ScfFlags {
            terminal_cuts: true,
            absorption: true,
        }
    }
}

/// Integral point: `x` per site index, `f` per extended edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IpSolution {
    pub x: Vec<u32>,
    pub f: Vec<u32>,
}

impl IpSolution {
    pub fn zero(ext: &ExtendedGraph) -> Self {
        IpSolution {
            x: vec![0; ext.num_sites()],
            f: vec![0; ext.num_edges()],
        }
    }

    /// Flattened into the model's variable layout.
    pub fn to_vector(&self) -> Vec<f64> {
        self.f.iter().chain(&self.x).map(|&v| v as f64).collect()
    }

    /// Rounds a model vector; `None` if some entry is farther than `tol` from an integer.
    pub fn from_vector(ext: &ExtendedGraph, v: &[f64], tol: f64) -> Option<Self> {
        let round = |a: f64| -> Option<u32> {
            let r = a.round();
            ((a - r).abs() <= tol && r >= 0.0).then_some(r as u32)
        };
        let m = ext.num_edges();
        let f = v[..m].iter().map(|&a| round(a)).collect::<Option<Vec<_>>>()?;
        let x = v[m..m + ext.num_sites()]
            .iter()
            .map(|&a| round(a))
            .collect::<Option<Vec<_>>>()?;
        Some(IpSolution { x, f })
    }
}

/// Fractional point in the same layout as [`IpSolution`].
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalPoint {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
}

impl FractionalPoint {
    pub fn from_vector(ext: &ExtendedGraph, v: &[f64]) -> Self {
        let m = ext.num_edges();
        FractionalPoint {
            f: v[..m].to_vec(),
            x: v[m..m + ext.num_sites()].to_vec(),
        }
    }
}

impl From<&IpSolution> for FractionalPoint {
    fn from(s: &IpSolution) -> Self {
        FractionalPoint {
            x: s.x.iter().map(|&v| v as f64).collect(),
            f: s.f.iter().map(|&v| v as f64).collect(),
        }
    }
}

pub fn f_var(e: usize) -> usize {
    e
}

pub fn x_var(ext: &ExtendedGraph, site: usize) -> usize {
    ext.num_edges() + site
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelRow {
    pub family: Family,
    pub name: String,
    pub row: Row,
}

/// Static part of the model. Rows are kept per family; [`ScfModel::to_lp`]
/// folds single-variable rows into bounds.
#[derive(Clone, Debug)]
pub struct ScfModel {
    pub ext: ExtendedGraph,
    pub flags: ScfFlags,
    pub rows: Vec<ModelRow>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub names: Vec<String>,
}

pub fn build_scf(ext: &ExtendedGraph, flags: ScfFlags) -> ScfModel {
    let inst = ext.instance();
    let m = ext.num_edges();
    let ns = ext.num_sites();
    let mut cost = Vec::with_capacity(m + ns);
    let mut upper = Vec::with_capacity(m + ns);
    let mut names = Vec::with_capacity(m + ns);
    for (e, ed) in ext.edges().iter().enumerate() {
        cost.push(ed.cost);
        upper.push(ed.bound as f64);
        names.push(format!("f[{}]", ext.edge_label(e)));
    }
    for s in &inst.request.sites {
        cost.push(s.cost);
        upper.push(1.0);
        names.push(format!("x[{}]", s.node));
    }
    let lower = vec![0.0; m + ns];

    let mut rows = Vec::new();
    let mut push = |family: Family, name: String, coefs: Vec<(usize, f64)>, sense, rhs| {
        rows.push(ModelRow {
            family,
            name,
            row: Row::new(coefs, sense, rhs),
        })
    };
    for v in 0..ext.base_nodes() {
        let mut coefs: Vec<(usize, f64)> = ext.out_edges(v).iter().map(|&e| (f_var(e), 1.0)).collect();
        coefs.extend(ext.in_edges(v).iter().map(|&e| (f_var(e), -1.0)));
        push(Family::Conservation, format!("cons[{}]", v), coefs, Sense::Eq, 0.0);
    }
    for (k, s) in inst.request.sites.iter().enumerate() {
        let sink = f_var(ext.site_sink_edges()[k]);
        let x = x_var(ext, k);
        if flags.absorption {
            push(
                Family::Absorption,
                format!("absorb[{}]", s.node),
                vec![(sink, 1.0), (x, -1.0)],
                Sense::Ge,
                0.0,
            );
        }
        push(
            Family::SiteCapacity,
            format!("sitecap[{}]", s.node),
            vec![(sink, 1.0), (x, -(s.capacity as f64))],
            Sense::Le,
            0.0,
        );
    }
    push(
        Family::RootCapacity,
        "rootcap".into(),
        vec![(f_var(ext.root_sink_edge()), 1.0)],
        Sense::Le,
        inst.request.root_capacity as f64,
    );
    for (e, ed) in ext.edges().iter().enumerate() {
        if let EdgeClass::Network(_) = ed.class {
            push(
                Family::EdgeCapacity,
                format!("cap[{}]", ext.edge_label(e)),
                vec![(f_var(e), 1.0)],
                Sense::Le,
                ed.bound as f64,
            );
        }
    }
    for (k, &e) in ext.terminal_source_edges().iter().enumerate() {
        push(
            Family::TerminalSupply,
            format!("tsupply[{}]", inst.request.terminals[k]),
            vec![(f_var(e), 1.0)],
            Sense::Eq,
            1.0,
        );
    }
    for (k, &e) in ext.site_source_edges().iter().enumerate() {
        push(
            Family::SiteSupply,
            format!("ssupply[{}]", inst.request.sites[k].node),
            vec![(f_var(e), 1.0), (x_var(ext, k), -1.0)],
            Sense::Eq,
            0.0,
        );
    }
    ScfModel {
        ext: ext.clone(),
        flags,
        rows,
        cost,
        lower,
        upper,
        names,
    }
}

impl ScfModel {
    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn count(&self, family: Family) -> usize {
        self.rows.iter().filter(|r| r.family == family).count()
    }

    /// LP relaxation with single-variable rows turned into bounds.
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

    pub fn objective(&self, v: &[f64]) -> f64 {
        self.cost.iter().zip(v).map(|(c, x)| c * x).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IpReport {
    pub violations: Vec<(Family, String)>,
}

impl IpReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, family: Family) -> bool {
        self.violations.iter().any(|(f, _)| *f == family)
    }

    pub fn families(&self) -> Vec<Family> {
        let mut v: Vec<Family> = self.violations.iter().map(|(f, _)| *f).collect();
        v.sort();
        v.dedup();
        v
    }
}

/// Checks every constraint family on an integral point. Connectivity is
/// checked by reachability over restricted edges carrying flow.
pub fn is_ip_feasible(ext: &ExtendedGraph, sol: &IpSolution) -> IpReport {
    let inst = ext.instance();
    let mut rep = IpReport::default();
    let mut bad = |fam: Family, msg: String| rep.violations.push((fam, msg));
    for v in 0..ext.base_nodes() {
        let out: i64 = ext.out_edges(v).iter().map(|&e| sol.f[e] as i64).sum();
        let inn: i64 = ext.in_edges(v).iter().map(|&e| sol.f[e] as i64).sum();
        if out != inn {
            bad(Family::Conservation, format!("node {}: out {} in {}", v, out, inn));
        }
    }
    for (k, s) in inst.request.sites.iter().enumerate() {
        let x = sol.x[k];
        let sink = sol.f[ext.site_sink_edges()[k]];
        if x > 1 {
            bad(Family::SiteCapacity, format!("site {}: x = {}", s.node, x));
        }
        if sink < x {
            bad(Family::Absorption, format!("site {}: absorbs {} < {}", s.node, sink, x));
        }
        if sink > s.capacity * x {
            bad(Family::SiteCapacity, format!("site {}: absorbs {}", s.node, sink));
        }
        let src = sol.f[ext.site_source_edges()[k]];
        if src != x {
            bad(Family::SiteSupply, format!("site {}: supply {} != {}", s.node, src, x));
        }
    }
    let rf = sol.f[ext.root_sink_edge()];
    if rf > inst.request.root_capacity {
        bad(Family::RootCapacity, format!("root receives {}", rf));
    }
    for (e, ed) in ext.edges().iter().enumerate() {
        if let EdgeClass::Network(_) = ed.class {
            if sol.f[e] > ed.bound {
                bad(Family::EdgeCapacity, format!("edge {}: {}", ext.edge_label(e), sol.f[e]));
            }
        }
    }
    for (k, &e) in ext.terminal_source_edges().iter().enumerate() {
        if sol.f[e] != 1 {
            bad(
                Family::TerminalSupply,
                format!("terminal {}: supply {}", inst.request.terminals[k], sol.f[e]),
            );
        }
    }
    let usable = |e: usize| sol.f[e] >= 1;
    for (k, s) in inst.request.sites.iter().enumerate() {
        if sol.x[k] >= 1 && !restricted_reach(ext, s.node, usable)[ext.root_sink()] {
            bad(Family::SiteConnectivity, format!("site {} cannot reach the root", s.node));
        }
    }
    for &t in &inst.request.terminals {
        if !restricted_reach(ext, t, usable)[ext.root_sink()] {
            bad(Family::TerminalConnectivity, format!("terminal {} cannot reach the root", t));
        }
    }
    rep
}

/// Edge cost of network flow plus activation cost; extended edges are free.
pub fn cost_ip(ext: &ExtendedGraph, sol: &IpSolution) -> f64 {
    cost_point(ext, &FractionalPoint::from(sol))
}

pub fn cost_point(ext: &ExtendedGraph, p: &FractionalPoint) -> f64 {
    let edges: f64 = ext.edges().iter().zip(&p.f).map(|(e, v)| e.cost * v).sum();
    let sites: f64 = ext
        .instance()
        .request
        .sites
        .iter()
        .zip(&p.x)
        .map(|(s, v)| s.cost * v)
        .sum();
    edges + sites
}

#[derive(Debug, Error, PartialEq)]
pub enum MappingError {
    #[error("arborescence is infeasible: {0}")]
    Infeasible(String),
}

/// Maps a feasible arborescence to a model point of equal cost.
pub fn va_to_ip(ext: &ExtendedGraph, va: &VirtualArborescence) -> Result<IpSolution, MappingError> {
    let inst = ext.instance();
    let rep = check_va(inst, va);
    if !rep.is_feasible() {
        let msgs: Vec<String> = rep
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.condition, v.detail))
            .collect();
        return Err(MappingError::Infeasible(msgs.join("; ")));
    }
    let mut sol = IpSolution::zero(ext);
    for p in va.paths() {
        for (u, v) in p.arcs() {
            let e = inst.network.find_edge(u, v).expect("feasible paths use network edges");
            sol.f[e] += 1;
        }
    }
    for (k, s) in inst.request.sites.iter().enumerate() {
        if va.nodes.contains(&s.node) {
            sol.x[k] = 1;
            sol.f[ext.site_source_edges()[k]] = 1;
            sol.f[ext.site_sink_edges()[k]] = va.in_degree(s.node) as u32;
        }
    }
    for &e in ext.terminal_source_edges() {
        sol.f[e] = 1;
    }
    sol.f[ext.root_sink_edge()] = va.in_degree(inst.request.root) as u32;
    Ok(sol)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::instance::fixtures::line;
    use crate::samples::disconnected_cache_instance;
    use crate::va::{cost_cvsap, Path};

    /// Extended edge order on the line: (t,s), (s,r), (r,o-r), (s,o-S), (o+,s), (o+,t).
    pub fn line_integral_point() -> IpSolution {
        IpSolution {
            x: vec![0],
            f: vec![1, 1, 1, 0, 0, 1],
        }
    }

    #[test]
    fn line_row_counts() {
        let ext = ExtendedGraph::build(&line()).unwrap();
        let m = build_scf(&ext, ScfFlags::default());
        assert_eq!(m.count(Family::Conservation), 3);
        assert_eq!(m.count(Family::EdgeCapacity), 2);
        assert_eq!(m.count(Family::RootCapacity), 1);
        assert_eq!(m.count(Family::Absorption) + m.count(Family::SiteCapacity), 2);
        assert_eq!(m.count(Family::TerminalSupply), 1);
        assert_eq!(m.count(Family::SiteSupply), 1);
        assert_eq!(m.rows.len(), 10);
        assert_eq!(m.num_vars(), 7);
        let lp = m.to_lp();
        // conservation, absorption, site capacity, site supply
        assert_eq!(lp.num_rows(), 6);
        assert_eq!((lp.lower[5], lp.upper[5]), (1.0, 1.0));
    }

    #[test]
    fn no_sites_means_no_activation_variables() {
        let mut inst = line();
        inst.request.sites.clear();
        let ext = ExtendedGraph::build(&inst).unwrap();
        let m = build_scf(&ext, ScfFlags::default());
        assert_eq!(m.num_vars(), ext.num_edges());
        assert!(m.rows.iter().all(|r| !matches!(r.family, Family::SiteCapacity | Family::Absorption)));
    }

    #[test]
    fn absorption_flag_controls_rows() {
        let ext = ExtendedGraph::build(&line()).unwrap();
        let flags = ScfFlags {
            absorption: false,
            ..Default::default()
        };
        let m = build_scf(&ext, flags);
        // x = 1 with nothing absorbed satisfies every static row without absorption
        let mut v = vec![0.0; m.num_vars()];
        v[0] = 1.0;
        v[1] = 2.0;
        v[2] = 2.0;
        v[4] = 1.0;
        v[5] = 1.0;
        v[6] = 1.0;
        assert!(m
            .rows
            .iter()
            .filter(|r| !matches!(r.family, Family::RootCapacity | Family::EdgeCapacity))
            .all(|r| r.row.violation(&v) == 0.0));
        let with = build_scf(&ext, ScfFlags::default());
        assert!(with.rows.iter().any(|r| r.family == Family::Absorption && r.row.violation(&v) > 0.0));
    }

    #[test]
    fn line_integral_point_is_feasible_with_cost_two() {
        let ext = ExtendedGraph::build(&line()).unwrap();
        let sol = line_integral_point();
        assert!(is_ip_feasible(&ext, &sol).is_feasible());
        assert_eq!(cost_ip(&ext, &sol), 2.0);
    }

    #[test]
    fn line_fractional_point_costs_one_point_six() {
        let ext = ExtendedGraph::build(&line()).unwrap();
        let p = FractionalPoint {
            x: vec![0.1],
            f: vec![1.0, 0.1, 0.1, 1.0, 0.1, 1.0],
        };
        assert!((cost_point(&ext, &p) - 1.6).abs() < 1e-12);
        assert_eq!(cost_ip(&ext, &IpSolution::zero(&ext)), 0.0);
    }

    #[test]
    fn active_site_without_absorption_violates_absorption() {
        let ext = ExtendedGraph::build(&line()).unwrap();
        let mut sol = line_integral_point();
        sol.x[0] = 1;
        sol.f[4] = 1;
        sol.f[1] = 2;
        sol.f[2] = 2;
        let rep = is_ip_feasible(&ext, &sol);
        assert!(rep.violates(Family::Absorption));
    }

    #[test]
    fn disconnected_cache_point_violates_only_connectivity() {
        let inst = disconnected_cache_instance();
        let ext = ExtendedGraph::build(&inst).unwrap();
        // edges: (t1,r), (t2,s), (s,r), (r,o-r), (s,o-S), (o+,s), (o+,t1), (o+,t2)
        let sol = IpSolution {
            x: vec![1],
            f: vec![1, 1, 0, 1, 2, 1, 1, 1],
        };
        let rep = is_ip_feasible(&ext, &sol);
        assert_eq!(
            rep.families(),
            vec![Family::SiteConnectivity, Family::TerminalConnectivity],
            "{:?}",
            rep
        );
    }

    #[test]
    fn line_va_maps_to_line_point() {
        let inst = line();
        let ext = ExtendedGraph::build(&inst).unwrap();
        let mut va = VirtualArborescence::new(2);
        va.add_edge(0, 2, Path::new(vec![0, 1, 2]));
        let sol = va_to_ip(&ext, &va).unwrap();
        assert_eq!(sol, line_integral_point());
        assert_eq!(cost_ip(&ext, &sol), cost_cvsap(&inst, &va));
    }

    #[test]
    fn site_in_degree_becomes_absorption() {
        let inst = crate::samples::fan_in_instance();
        let ext = ExtendedGraph::build(&inst).unwrap();
        let mut va = VirtualArborescence::new(0);
        va.add_edge(2, 1, Path::new(vec![2, 1]));
        va.add_edge(3, 1, Path::new(vec![3, 1]));
        va.add_edge(4, 1, Path::new(vec![4, 1]));
        va.add_edge(5, 1, Path::new(vec![5, 1]));
        va.add_edge(1, 0, Path::new(vec![1, 0]));
        let sol = va_to_ip(&ext, &va).unwrap();
        assert_eq!(sol.f[ext.site_sink_edges()[0]], 4);
        assert!(is_ip_feasible(&ext, &sol).is_feasible());
        assert_eq!(cost_ip(&ext, &sol), cost_cvsap(&inst, &va));
    }
}
