//! Runs a small settings-by-seeds matrix and writes the CSV files.

use cvsap::bench::{run_matrix, summary_csv, write_outputs, BenchMatrix, Family};

fn main() {
    let m = BenchMatrix::new(Family::Grid(6), vec!["ts".into(), "none".into()], (0..4).collect());
    let records = run_matrix(&m).unwrap();
    print!("{}", summary_csv(&records));
    let dir = std::env::temp_dir().join("cvsap-bench-example");
    write_outputs(&records, &dir).unwrap();
    println!("traces written to {}", dir.display());
}
