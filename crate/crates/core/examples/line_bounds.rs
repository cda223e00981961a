//! The three-node line: terminal cuts close the LP gap at the root.

use cvsap::bnc::{root_bound, solve, SolverConfig};
use cvsap::samples::line_instance;

fn main() {
    let inst = line_instance();
    for setting in ["none", "t"] {
        let cfg = SolverConfig::with_setting(setting).unwrap();
        let b = root_bound(&inst, &cfg).unwrap().expect("root LP is feasible");
        println!("setting {:>4}: root LP {:.4} before cuts, {:.4} after", setting, b.initial, b.after_cuts);
    }
    let r = solve(&inst, &SolverConfig::default()).unwrap();
    let va = r.incumbent.unwrap();
    println!("optimum {} ({}), active sites {:?}", r.primal.unwrap(), r.status, va.active_sites(&inst));
    for ((t, h), p) in &va.edges {
        println!("  {} -> {} via {:?}", t, h, p.vertices());
    }
}
