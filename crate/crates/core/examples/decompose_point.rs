//! Turns an integral flow into a virtual arborescence and maps it back.

use cvsap::decompose::decompose;
use cvsap::extended::ExtendedGraph;
use cvsap::io::{point_from_json, solution_to_json};
use cvsap::samples::line_instance;
use cvsap::scf::{cost_ip, is_ip_feasible, va_to_ip};

fn main() {
    let inst = line_instance();
    let ext = ExtendedGraph::build(&inst).unwrap();
    // one unit from the terminal through the idle site to the root
    let point = r#"{"x": {}, "f": {"o+->0": 1, "0->1": 1, "1->2": 1, "2->o-r": 1}}"#;
    let sol = point_from_json(&ext, point).unwrap();
    assert!(is_ip_feasible(&ext, &sol).is_feasible());
    let va = decompose(&ext, &sol).unwrap();
    print!("{}", solution_to_json(&inst, &va));
    let back = va_to_ip(&ext, &va).unwrap();
    println!("model cost {} -> round trip cost {}", cost_ip(&ext, &sol), cost_ip(&ext, &back));
}
