//! Set cover as a feasibility question: a cover with k sets exists iff the
//! reduced instance with root capacity k is feasible.

use cvsap::bnc::{solve, SolverConfig};
use cvsap::instance::set_cover_reduction;

fn main() {
    let universe = [1, 2, 3, 4];
    let family = vec![vec![1, 2], vec![3], vec![2, 3, 4], vec![4]];
    for k in 1..=3 {
        let inst = set_cover_reduction(&universe, &family, k).unwrap();
        let r = solve(&inst, &SolverConfig::default()).unwrap();
        // every path into the root leaves through one set node; those sets form the cover
        let mut chosen: Vec<usize> = r
            .incumbent
            .map(|va| {
                va.edges
                    .iter()
                    .filter(|((_, h), _)| *h == inst.request.root)
                    .map(|(_, p)| p.vertices()[p.len() - 2] - 1 - universe.len())
                    .collect()
            })
            .unwrap_or_default();
        chosen.sort();
        println!("k = {}: {} (cover {:?})", k, r.status, chosen);
    }
}
