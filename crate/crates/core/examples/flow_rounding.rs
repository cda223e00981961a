//! Rounds a fractional LP point into feasible arborescences with different seeds.

use cvsap::extended::ExtendedGraph;
use cvsap::generate::{gen_grid, GridParams};
use cvsap::heuristics::{flow_deco_round, prune_steiner_nodes};
use cvsap::lp;
use cvsap::scf::{build_scf, FractionalPoint, ScfFlags};
use cvsap::separation::{separate, SeparationConfig};
use cvsap::{check_va, cost_cvsap};

fn main() {
    let inst = gen_grid(&GridParams::new(8, 3)).unwrap();
    let ext = ExtendedGraph::build(&inst).unwrap();
    let mut model = build_scf(&ext, ScfFlags::default()).to_lp();
    // a few separation rounds give a more informative point
    let mut s = lp::solve(&model, None).unwrap();
    for _ in 0..10 {
        let cuts = separate(&ext, &FractionalPoint::from_vector(&ext, &s.x), &SeparationConfig::default());
        if cuts.is_empty() {
            break;
        }
        model.add_rows(cuts.iter().map(|c| c.to_row(&ext))).unwrap();
        s = lp::solve(&model, Some(&s.basis)).unwrap();
    }
    println!("LP bound {:.3}", s.objective);
    let point = FractionalPoint::from_vector(&ext, &s.x);
    for seed in 0..5 {
        match flow_deco_round(&ext, &point, seed) {
            Some(va) => {
                let pruned = prune_steiner_nodes(&ext, &va);
                println!(
                    "seed {}: cost {} ({} sites), feasible {}; pruning again gives {}",
                    seed,
                    cost_cvsap(&inst, &va),
                    va.active_sites(&inst).len(),
                    check_va(&inst, &va).is_feasible(),
                    cost_cvsap(&inst, &pruned)
                );
            }
            None => println!("seed {}: no solution", seed),
        }
    }
}
