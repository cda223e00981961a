//! Branch-and-cut on a generated grid, printing the bound trace.

use cvsap::bnc::{solve, SolverConfig, TRACE_HEADER};
use cvsap::generate::{gen_grid, GridParams};
use cvsap::check_va;

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(6);
    let inst = gen_grid(&GridParams::new(n, 1)).unwrap();
    println!(
        "{}x{} grid: {} edges, {} sites, {} terminals",
        n,
        n,
        inst.network.edges().len(),
        inst.request.sites.len(),
        inst.request.terminals.len()
    );
    let r = solve(&inst, &SolverConfig::default()).unwrap();
    println!("{}", TRACE_HEADER);
    for row in &r.trace {
        println!("{}", row.to_csv());
    }
    let va = r.incumbent.unwrap();
    println!(
        "{} with cost {} after {} nodes and {} cuts; feasible: {}",
        r.status,
        r.primal.unwrap(),
        r.nodes,
        r.cuts.total(),
        check_va(&inst, &va).is_feasible()
    );
}
