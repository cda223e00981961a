//! Fixed-format MPS export.
//!
//! Column `j` is named `C` followed by `j + 1` zero-padded to seven digits and
//! row `k` likewise `R…`, so every name fits the eight-character field. The
//! objective row is `OBJ`, the right-hand side set `RHS` and the bound set `BND`.
//! Every column gets explicit bounds: `FX` when fixed, otherwise `UP` and, for a
//! nonzero lower bound, `LO`.

use std::fmt::Write;

use super::{LpProblem, Sense};

fn col_name(j: usize) -> String {
    format!("C{:07}", j + 1)
}

fn row_name(k: usize) -> String {
    format!("R{:07}", k + 1)
}

/// Number rendered into at most twelve characters.
fn num(v: f64) -> String {
    let plain = format!("{}", v);
    if plain.len() <= 12 {
        plain
    } else {
        format!("{:.5e}", v)
    }
}

fn entry(out: &mut String, f1: &str, n1: &str, n2: &str, v: f64) {
    let _ = writeln!(out, " {:<2} {:<8}  {:<8}  {:>12}", f1, n1, n2, num(v));
}

pub fn to_mps(p: &LpProblem, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {}", name);
    out.push_str("ROWS\n N  OBJ\n");
    for (k, r) in p.rows.iter().enumerate() {
        let s = match r.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        let _ = writeln!(out, " {}  {}", s, row_name(k));
    }
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.num_vars()];
    for (k, r) in p.rows.iter().enumerate() {
        for &(j, a) in &r.coefs {
            by_col[j].push((k, a));
        }
    }
    out.push_str("COLUMNS\n");
    for (j, col) in by_col.iter_mut().enumerate() {
        col.sort_by_key(|&(k, _)| k);
        let c = col_name(j);
        if p.cost[j] != 0.0 {
            entry(&mut out, "", &c, "OBJ", p.cost[j]);
        }
        for &(k, a) in col.iter() {
            entry(&mut out, "", &c, &row_name(k), a);
        }
    }
    out.push_str("RHS\n");
    for (k, r) in p.rows.iter().enumerate() {
        if r.rhs != 0.0 {
            entry(&mut out, "", "RHS", &row_name(k), r.rhs);
        }
    }
    out.push_str("BOUNDS\n");
    for j in 0..p.num_vars() {
        let c = col_name(j);
        if p.lower[j] == p.upper[j] {
            let _ = writeln!(out, " FX BND       {:<8}  {:>12}", c, num(p.lower[j]));
        } else {
            if p.lower[j] != 0.0 {
                let _ = writeln!(out, " LO BND       {:<8}  {:>12}", c, num(p.lower[j]));
            }
            let _ = writeln!(out, " UP BND       {:<8}  {:>12}", c, num(p.upper[j]));
        }
    }
    out.push_str("ENDATA\n");
    out
}
