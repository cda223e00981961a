//! Generates a clustered ISP-like topology and prints its shape.

use cvsap::generate::{gen_cluster, ClusterParams};

fn main() {
    let preset = std::env::args().nth(1).unwrap_or_else(|| "igen1600".into());
    let p = ClusterParams::preset(&preset, 7).expect("presets: igen1600, igen3200");
    let inst = gen_cluster(&p).unwrap();
    let degree_sum: usize = inst.network.edges().len();
    let mean_cost: f64 = inst.network.edges().iter().map(|e| e.cost).sum::<f64>() / degree_sum as f64;
    println!(
        "{}: {} nodes, {} directed edges (mean cost {:.4}), {} sites, {} terminals, root {}",
        preset,
        inst.num_nodes(),
        degree_sum,
        mean_cost,
        inst.request.sites.len(),
        inst.request.terminals.len(),
        inst.request.root
    );
    println!("valid: {}", inst.validate().is_ok());
}
