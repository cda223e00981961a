//! Exact and heuristic solvers for the constrained virtual Steiner arborescence problem.
//!
//! An [`instance::Instance`] is a directed capacitated network plus a request
//! (root, candidate processing sites, terminals). A solution is a
//! [`va::VirtualArborescence`]: an arborescence over root, terminals and the
//! activated sites whose edges are realized as network paths.
//!
//! The exact pipeline builds the single-commodity model ([`scf`]), solves it with
//! the branch-and-cut engine ([`bnc`]) using max-flow cut separation
//! ([`separation`]), and turns the optimal integral flow into an arborescence
//! ([`decompose`]). [`mcf`] is a multi-commodity baseline and [`oracle`] a
//! brute-force reference for tiny instances.

pub mod bench;
pub mod bnc;
pub mod decompose;
pub mod extended;
pub mod generate;
pub mod heuristics;
pub mod instance;
pub mod io;
pub mod lp;
pub mod mcf;
pub mod oracle;
pub mod samples;
pub mod scf;
pub mod separation;
pub mod va;

pub use instance::{Edge, Instance, Network, NodeId, Orientation, Request, Site};
pub use va::{check_va, cost_cvsap, Path, VirtualArborescence};
