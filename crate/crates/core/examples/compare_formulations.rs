//! Single-commodity branch-and-cut against the multi-commodity model.

use cvsap::bench::{relative_improvement, FormulationKind};
use cvsap::bnc::SolverConfig;
use cvsap::generate::{gen_grid, GridParams};

fn main() {
    for seed in 0..4 {
        let inst = gen_grid(&GridParams::new(6, seed)).unwrap();
        let cfg = SolverConfig::default();
        let scf = FormulationKind::Scf.solve(&inst, &cfg).unwrap();
        let mcf = FormulationKind::Mcf.solve(&inst, &cfg).unwrap();
        let p = scf.primal.unwrap().min(mcf.primal.unwrap());
        let (a, b) = (scf.root_bound.unwrap(), mcf.root_bound.unwrap());
        let i = relative_improvement(a, b, p).map_or("undefined".into(), |i| format!("{:.3}", i));
        println!(
            "seed {}: optimum {} | root bound scf {:.3} mcf {:.3} | I_rel {} | nodes {} vs {} | {:.2}s vs {:.2}s",
            seed,
            p,
            a,
            b,
            i,
            scf.nodes,
            mcf.nodes,
            scf.elapsed.as_secs_f64(),
            mcf.elapsed.as_secs_f64()
        );
    }
}
