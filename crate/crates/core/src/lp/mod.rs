//! Bounded-variable linear programming with incremental row addition.
//!
//! Problems are minimizations over box-bounded variables. The engine in
//! [`simplex`] keeps a dense tableau so cut rows can be appended and purged
//! between solves without losing the basis.

pub mod mps;
pub mod simplex;

use thiserror::Error;

pub use simplex::{Basis, Simplex, VarStatus};

/// Every tolerance used by the LP layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Primal feasibility of rows and bounds.
    pub feas: f64,
    /// Sign of reduced costs at optimality.
    pub opt: f64,
    /// Smallest tableau entry accepted as a pivot.
    pub pivot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feas: 1e-7,
            opt: 1e-7,
            pivot: 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn new(coefs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Row { coefs, sense, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row; zero when satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("row {row} references variable {var}, but there are only {num_vars}")]
    BadIndex { row: usize, var: usize, num_vars: usize },
    #[error("variable {0} has an infinite or inverted bound")]
    BadBound(usize),
}

/// `min c·x` subject to rows and `lower <= x <= upper`, all bounds finite.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LpProblem {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cost: Vec<f64>,
    pub rows: Vec<Row>,
    pub var_names: Vec<String>,
    pub row_names: Vec<String>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.push(cost);
        self.var_names.push(name.into());
        self.cost.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, row: Row) -> Result<usize, LpError> {
        self.check_row(self.rows.len(), &row)?;
        self.rows.push(row);
        self.row_names.push(name.into());
        Ok(self.rows.len() - 1)
    }

    /// Like [`LpProblem::add_row`], but a row over a single variable tightens
    /// that variable's bounds instead. Returns the row index when a row was added.
    pub fn add_row_or_bound(&mut self, name: impl Into<String>, row: Row) -> Result<Option<usize>, LpError> {
        self.check_row(self.rows.len(), &row)?;
        if let [(j, a)] = row.coefs[..] {
            let v = row.rhs / a;
            let (mut l, mut u) = (self.lower[j], self.upper[j]);
            match (row.sense, a > 0.0) {
                (Sense::Eq, _) => {
                    l = l.max(v);
                    u = u.min(v);
                }
                (Sense::Le, true) | (Sense::Ge, false) => u = u.min(v),
                _ => l = l.max(v),
            }
            // crossed bounds stay a row so the solver reports infeasibility
            if l <= u {
                self.lower[j] = l;
                self.upper[j] = u;
                return Ok(None);
            }
        }
        self.add_row(name, row).map(Some)
    }

    /// Appends rows; a basis of the old problem stays a valid warm start
    /// once extended with the new slacks as basic.
    pub fn add_rows(&mut self, rows: impl IntoIterator<Item = Row>) -> Result<(), LpError> {
        for row in rows {
            let name = format!("R{}", self.rows.len());
            self.add_row(name, row)?;
        }
        Ok(())
    }

    fn check_row(&self, index: usize, row: &Row) -> Result<(), LpError> {
        for &(j, _) in &row.coefs {
            if j >= self.num_vars() {
                return Err(LpError::BadIndex {
                    row: index,
                    var: j,
                    num_vars: self.num_vars(),
                });
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), LpError> {
        for j in 0..self.num_vars() {
            let (l, u) = (self.lower[j], self.upper[j]);
            if !l.is_finite() || !u.is_finite() || l > u {
                return Err(LpError::BadBound(j));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            self.check_row(i, r)?;
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for r in &self.rows {
            worst = worst.max(r.violation(x));
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row; nonnegative on `>=` rows and nonpositive on `<=` rows at optimality.
    pub duals: Vec<f64>,
    pub basis: Basis,
    pub iterations: usize,
}

/// Solves `p` from scratch or from a previous basis.
pub fn solve(p: &LpProblem, warm: Option<&Basis>) -> Result<LpSolution, LpError> {
    solve_with(p, warm, Tolerances::default())
}

pub fn solve_with(p: &LpProblem, warm: Option<&Basis>, tol: Tolerances) -> Result<LpSolution, LpError> {
    p.validate()?;
    let mut s = Simplex::new(p, tol);
    if let Some(b) = warm {
        s.load_basis(b);
    }
    let status = s.solve();
    Ok(s.solution(status))
}
