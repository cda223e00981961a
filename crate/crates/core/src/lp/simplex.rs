//! Dense bounded-variable simplex on the tableau `B⁻¹[A | I]`.
//!
//! Each row `a·x (<=,>=,=) b` gets a slack with `a·x + s = b`; the slack lives in
//! `[0, ∞)` for `<=`, `(-∞, 0]` for `>=` and `[0, 0]` for `=`. Structural
//! variables are always boxed, so the all-slack basis with every structural at
//! its cost-preferred bound is dual feasible and the dual simplex applies from
//! the start and after every bound change or appended row.

use std::time::Instant;

use super::{LpProblem, LpSolution, LpStatus, Row, Sense, Tolerances};

const NONE: usize = usize::MAX;
const REFACTOR_EVERY: usize = 200;
const DEGENERATE_SWITCH: usize = 50;
const DROP: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
}

/// Status of every structural and slack variable; a warm-start token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    num_vars: usize,
    status: Vec<VarStatus>,
}

impl Basis {
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.status.len() - self.num_vars
    }

    pub fn status(&self) -> &[VarStatus] {
        &self.status
    }
}

#[derive(Clone, Debug)]
pub struct Simplex {
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    shift: Vec<f64>,
    shifted: bool,
    rows: Vec<Row>,
    tab: Vec<Vec<f64>>,
    head: Vec<usize>,
    pos: Vec<usize>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    d: Vec<f64>,
    tol: Tolerances,
    since_refactor: usize,
    iterations: usize,
    pub iteration_limit: usize,
    /// Stop with `IterationLimit` once this instant has passed.
    pub deadline: Option<Instant>,
}

fn slack_bounds(sense: Sense) -> (f64, f64) {
    match sense {
        Sense::Le => (0.0, f64::INFINITY),
        Sense::Ge => (f64::NEG_INFINITY, 0.0),
        Sense::Eq => (0.0, 0.0),
    }
}

impl Simplex {
    pub fn new(p: &LpProblem, tol: Tolerances) -> Self {
        let n = p.num_vars();
        let mut s = Simplex {
            n,
            lower: p.lower.clone(),
            upper: p.upper.clone(),
            cost: p.cost.clone(),
            shift: vec![0.0; n],
            shifted: false,
            rows: Vec::new(),
            tab: Vec::new(),
            head: Vec::new(),
            pos: vec![NONE; n],
            status: (0..n)
                .map(|j| {
                    if p.cost[j] >= 0.0 {
                        VarStatus::AtLower
                    } else {
                        VarStatus::AtUpper
                    }
                })
                .collect(),
            x: (0..n)
                .map(|j| if p.cost[j] >= 0.0 { p.lower[j] } else { p.upper[j] })
                .collect(),
            d: p.cost.clone(),
            tol,
            since_refactor: 0,
            iterations: 0,
            iteration_limit: 0,
            deadline: None,
        };
        s.add_rows(&p.rows);
        s.iteration_limit = 20_000 + 50 * (s.n + s.m());
        s
    }

    fn exhausted(&self) -> bool {
        self.iterations >= self.iteration_limit
            || (self.iterations.is_multiple_of(16) && self.deadline.is_some_and(|d| Instant::now() >= d))
    }

    pub fn m(&self) -> usize {
        self.head.len()
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    fn ncols(&self) -> usize {
        self.n + self.head.len()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn x(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    /// Row multipliers `y` with `c - Aᵀy` the structural reduced costs.
    pub fn duals(&self) -> Vec<f64> {
        (0..self.m()).map(|k| -self.d[self.n + k]).collect()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn slack_is_basic(&self, k: usize) -> bool {
        self.status[self.n + k] == VarStatus::Basic
    }

    /// Slack value of row `k`, `b - a·x`.
    pub fn slack(&self, k: usize) -> f64 {
        self.x[self.n + k]
    }

    pub fn basis(&self) -> Basis {
        Basis {
            num_vars: self.n,
            status: self.status.clone(),
        }
    }

    pub fn solution(&self, status: LpStatus) -> LpSolution {
        LpSolution {
            status,
            x: self.x().to_vec(),
            objective: self.objective(),
            duals: self.duals(),
            basis: self.basis(),
            iterations: self.iterations,
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtUpper => self.upper[j],
            _ => self.lower[j],
        }
    }

    /// Moves nonbasic variable `j` to `v`, keeping the basic values consistent.
    fn move_nonbasic(&mut self, j: usize, v: f64) {
        let delta = v - self.x[j];
        if delta != 0.0 {
            for i in 0..self.head.len() {
                let a = self.tab[i][j];
                if a != 0.0 {
                    let h = self.head[i];
                    self.x[h] -= a * delta;
                }
            }
        }
        self.x[j] = v;
    }

    /// Changes the box of structural `j`. The basis is kept; nonbasic
    /// variables follow their bound, so dual feasibility is preserved.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        assert!(j < self.n && lower <= upper);
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.status[j] != VarStatus::Basic {
            let v = self.nonbasic_value(j);
            self.move_nonbasic(j, v);
        }
    }

    /// Appends rows with their slacks basic.
    pub fn add_rows(&mut self, rows: &[Row]) {
        for row in rows {
            let slack = self.ncols();
            for r in &mut self.tab {
                r.push(0.0);
            }
            let (lo, up) = slack_bounds(row.sense);
            self.lower.push(lo);
            self.upper.push(up);
            self.cost.push(0.0);
            self.shift.push(0.0);
            self.status.push(VarStatus::Basic);
            self.pos.push(self.head.len());
            self.d.push(0.0);
            let mut nr = vec![0.0; slack + 1];
            let mut act = 0.0;
            for &(j, a) in &row.coefs {
                nr[j] += a;
                act += a * self.x[j];
            }
            nr[slack] = 1.0;
            for i in 0..self.head.len() {
                let h = self.head[i];
                let f = nr[h];
                if f != 0.0 {
                    for (dst, &src) in nr.iter_mut().zip(&self.tab[i]) {
                        if src != 0.0 {
                            *dst -= f * src;
                        }
                    }
                    nr[h] = 0.0;
                }
            }
            self.x.push(row.rhs - act);
            self.tab.push(nr);
            self.head.push(slack);
            self.rows.push(row.clone());
        }
    }

    /// Removes rows whose slack is basic. Rows with a nonbasic slack are kept.
    /// Returns the removed row indices in ascending order.
    pub fn remove_rows(&mut self, candidates: &[usize]) -> Vec<usize> {
        let mut ks: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&k| k < self.m() && self.slack_is_basic(k))
            .collect();
        ks.sort_unstable();
        ks.dedup();
        for &k in ks.iter().rev() {
            let s = self.n + k;
            let p = self.pos[s];
            self.tab.remove(p);
            self.head.remove(p);
            for r in &mut self.tab {
                r.remove(s);
            }
            for v in [&mut self.lower, &mut self.upper, &mut self.cost, &mut self.shift, &mut self.x, &mut self.d] {
                v.remove(s);
            }
            self.status.remove(s);
            for h in &mut self.head {
                if *h > s {
                    *h -= 1;
                }
            }
            self.rows.remove(k);
            // tableau rows below `p` moved up by one
            self.pos = vec![NONE; self.ncols()];
            for (i, &h) in self.head.iter().enumerate() {
                self.pos[h] = i;
            }
        }
        ks
    }

    /// Installs a basis from a previous solve; falls back to the slack basis
    /// when sizes disagree or the basis matrix is singular.
    pub fn load_basis(&mut self, b: &Basis) {
        if b.num_vars != self.n || b.status.len() > self.ncols() {
            return;
        }
        let mut status = b.status.clone();
        // rows appended after the basis was taken get basic slacks
        status.resize(self.ncols(), VarStatus::Basic);
        let basic: Vec<usize> = (0..status.len()).filter(|&j| status[j] == VarStatus::Basic).collect();
        if basic.len() != self.m() {
            return;
        }
        self.status = status;
        for j in 0..self.ncols() {
            if self.status[j] == VarStatus::AtUpper && !self.upper[j].is_finite() {
                self.status[j] = VarStatus::AtLower;
            }
            if self.status[j] == VarStatus::AtLower && !self.lower[j].is_finite() {
                self.status[j] = VarStatus::AtUpper;
            }
            if self.status[j] != VarStatus::Basic {
                self.x[j] = self.nonbasic_value(j);
            }
        }
        self.head = basic;
        // a singular basis is repaired with slacks inside refactor
        self.refactor();
    }

    fn recompute_duals(&mut self) {
        let nc = self.ncols();
        let mut d: Vec<f64> = (0..nc).map(|j| self.cost[j] + self.shift[j]).collect();
        for i in 0..self.head.len() {
            let h = self.head[i];
            let c = self.cost[h] + self.shift[h];
            if c != 0.0 {
                for (dj, &a) in d.iter_mut().zip(&self.tab[i]) {
                    if a != 0.0 {
                        *dj -= c * a;
                    }
                }
            }
        }
        for &h in &self.head {
            d[h] = 0.0;
        }
        self.d = d;
    }

    fn recompute_primal(&mut self) {
        let m = self.m();
        for i in 0..m {
            let mut v: f64 = (0..m).map(|k| self.tab[i][self.n + k] * self.rows[k].rhs).sum();
            for j in 0..self.ncols() {
                if self.status[j] != VarStatus::Basic {
                    let a = self.tab[i][j];
                    if a != 0.0 {
                        v -= a * self.x[j];
                    }
                }
            }
            let h = self.head[i];
            self.x[h] = v;
        }
    }

    /// Rebuilds the tableau from the original rows for the current basic set.
    /// Returns false when the basis was singular and had to be repaired with slacks.
    pub fn refactor(&mut self) -> bool {
        let m = self.m();
        let nc = self.ncols();
        let mut mat = vec![vec![0.0; nc]; m];
        for (k, row) in self.rows.iter().enumerate() {
            for &(j, a) in &row.coefs {
                mat[k][j] += a;
            }
            mat[k][self.n + k] = 1.0;
        }
        let mut basics: Vec<usize> = self.head.clone();
        basics.sort_by_key(|&j| (j < self.n, j));
        let mut row_of = vec![NONE; m];
        let mut assigned = vec![false; m];
        let mut ok = true;
        let eliminate = |mat: &mut Vec<Vec<f64>>, p: usize, col: usize| {
            let inv = 1.0 / mat[p][col];
            for v in mat[p].iter_mut() {
                *v *= inv;
            }
            mat[p][col] = 1.0;
            let prow: Vec<(usize, f64)> = mat[p]
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (j, *v))
                .collect();
            for (i, r) in mat.iter_mut().enumerate() {
                if i == p {
                    continue;
                }
                let f = r[col];
                if f != 0.0 {
                    for &(j, v) in &prow {
                        let nv = r[j] - f * v;
                        r[j] = if nv.abs() < DROP { 0.0 } else { nv };
                    }
                    r[col] = 0.0;
                }
            }
        };
        let mut dropped = Vec::new();
        for &var in &basics {
            let mut best = NONE;
            let mut bv = 0.0;
            for (i, r) in mat.iter().enumerate() {
                if !assigned[i] && r[var].abs() > bv {
                    bv = r[var].abs();
                    best = i;
                }
            }
            if best == NONE || bv < 1e-9 {
                ok = false;
                dropped.push(var);
                continue;
            }
            eliminate(&mut mat, best, var);
            assigned[best] = true;
            row_of[best] = var;
        }
        if !ok {
            for &var in &dropped {
                self.status[var] = if self.x[var] >= self.upper[var] {
                    VarStatus::AtUpper
                } else {
                    VarStatus::AtLower
                };
                if !self.lower[var].is_finite() {
                    self.status[var] = VarStatus::AtUpper;
                }
                if !self.upper[var].is_finite() {
                    self.status[var] = VarStatus::AtLower;
                }
                self.x[var] = self.nonbasic_value(var);
            }
            for p in 0..m {
                if assigned[p] {
                    continue;
                }
                let mut best = NONE;
                let mut bv = 0.0;
                for k in 0..m {
                    let j = self.n + k;
                    if self.status[j] != VarStatus::Basic && mat[p][j].abs() > bv {
                        bv = mat[p][j].abs();
                        best = j;
                    }
                }
                assert!(best != NONE, "rank loss in [A | I]");
                eliminate(&mut mat, p, best);
                assigned[p] = true;
                row_of[p] = best;
                self.status[best] = VarStatus::Basic;
            }
        }
        self.tab = mat;
        self.head = row_of;
        self.pos = vec![NONE; nc];
        for (i, &h) in self.head.iter().enumerate() {
            self.pos[h] = i;
            self.status[h] = VarStatus::Basic;
        }
        self.recompute_primal();
        self.recompute_duals();
        self.since_refactor = 0;
        ok
    }

    fn pivot(&mut self, r: usize, q: usize, leave_val: f64) {
        let b = self.head[r];
        let a = self.tab[r][q];
        let t = (self.x[b] - leave_val) / a;
        if t != 0.0 {
            for i in 0..self.head.len() {
                let c = self.tab[i][q];
                if c != 0.0 {
                    let h = self.head[i];
                    self.x[h] -= c * t;
                }
            }
            self.x[q] += t;
        }
        self.x[b] = leave_val;

        let inv = 1.0 / a;
        let prow: Vec<(usize, f64)> = self.tab[r]
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v * inv))
            .collect();
        let theta = self.d[q];
        if theta != 0.0 {
            for &(j, v) in &prow {
                self.d[j] -= theta * v;
            }
        }
        self.d[q] = 0.0;
        {
            let row = &mut self.tab[r];
            for &(j, v) in &prow {
                row[j] = v;
            }
            row[q] = 1.0;
        }
        for i in 0..self.head.len() {
            if i == r {
                continue;
            }
            let f = self.tab[i][q];
            if f != 0.0 {
                let row = &mut self.tab[i];
                for &(j, v) in &prow {
                    let nv = row[j] - f * v;
                    row[j] = if nv.abs() < DROP { 0.0 } else { nv };
                }
                row[q] = 0.0;
            }
        }
        self.head[r] = q;
        self.pos[q] = r;
        self.status[q] = VarStatus::Basic;
        self.pos[b] = NONE;
        self.status[b] = if leave_val == self.lower[b] {
            VarStatus::AtLower
        } else {
            VarStatus::AtUpper
        };
        self.since_refactor += 1;
        self.iterations += 1;
    }

    fn dual_infeasible(&self, j: usize) -> bool {
        if self.lower[j] == self.upper[j] {
            return false;
        }
        match self.status[j] {
            VarStatus::AtLower => self.d[j] < -self.tol.opt,
            VarStatus::AtUpper => self.d[j] > self.tol.opt,
            VarStatus::Basic => false,
        }
    }

    /// Flips boxed variables with wrong-signed reduced costs and shifts the cost
    /// of the others to zero their reduced cost.
    fn make_dual_feasible(&mut self) {
        for j in 0..self.ncols() {
            if !self.dual_infeasible(j) {
                continue;
            }
            if self.lower[j].is_finite() && self.upper[j].is_finite() {
                let (st, v) = match self.status[j] {
                    VarStatus::AtLower => (VarStatus::AtUpper, self.upper[j]),
                    _ => (VarStatus::AtLower, self.lower[j]),
                };
                self.status[j] = st;
                self.move_nonbasic(j, v);
            } else {
                self.shift[j] -= self.d[j];
                self.d[j] = 0.0;
                self.shifted = true;
            }
        }
    }

    fn max_primal_infeasibility(&self) -> f64 {
        self.head
            .iter()
            .map(|&h| (self.lower[h] - self.x[h]).max(self.x[h] - self.upper[h]).max(0.0))
            .fold(0.0, f64::max)
    }

    fn dual_loop(&mut self) -> LpStatus {
        let mut degenerate = 0usize;
        let ftol = self.tol.feas * 0.1;
        loop {
            if self.exhausted() {
                return LpStatus::IterationLimit;
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let bland = degenerate > DEGENERATE_SWITCH;
            let mut r = NONE;
            let mut best = 0.0;
            for i in 0..self.head.len() {
                let b = self.head[i];
                let v = self.x[b];
                let inf = if v < self.lower[b] - ftol {
                    self.lower[b] - v
                } else if v > self.upper[b] + ftol {
                    v - self.upper[b]
                } else {
                    0.0
                };
                if inf > 0.0 {
                    if bland {
                        if r == NONE || b < self.head[r] {
                            r = i;
                        }
                    } else if inf > best {
                        best = inf;
                        r = i;
                    }
                }
            }
            if r == NONE {
                return LpStatus::Optimal;
            }
            let b = self.head[r];
            let below = self.x[b] < self.lower[b];
            let target = if below { self.lower[b] } else { self.upper[b] };

            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            let mut theta_max = f64::INFINITY;
            for j in 0..self.ncols() {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a = self.tab[r][j];
                if a.abs() <= self.tol.pivot {
                    continue;
                }
                let ok = match st {
                    VarStatus::AtLower => (a < 0.0) == below,
                    VarStatus::AtUpper => (a > 0.0) == below,
                    VarStatus::Basic => false,
                };
                if !ok {
                    continue;
                }
                let dj = match st {
                    VarStatus::AtLower => self.d[j].max(0.0),
                    _ => (-self.d[j]).max(0.0),
                };
                theta_max = theta_max.min((dj + self.tol.opt) / a.abs());
                cands.push((j, a.abs(), dj));
            }
            if cands.is_empty() {
                if self.since_refactor > 0 {
                    self.refactor();
                    continue;
                }
                return LpStatus::Infeasible;
            }
            let mut q = NONE;
            let mut qa = 0.0;
            let mut qratio = f64::INFINITY;
            for &(j, a, dj) in &cands {
                let ratio = dj / a;
                if bland {
                    if ratio < qratio {
                        q = j;
                        qratio = ratio;
                        qa = a;
                    }
                } else if ratio <= theta_max && a > qa {
                    q = j;
                    qa = a;
                    qratio = ratio;
                }
            }
            let _ = qa;
            if qratio < 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, q, target);
        }
    }

    fn primal_loop(&mut self) -> LpStatus {
        let mut degenerate = 0usize;
        loop {
            if self.exhausted() {
                return LpStatus::IterationLimit;
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let bland = degenerate > DEGENERATE_SWITCH;
            let mut q = NONE;
            let mut best = 0.0;
            for j in 0..self.ncols() {
                if self.dual_infeasible(j) {
                    if bland {
                        q = j;
                        break;
                    }
                    if self.d[j].abs() > best {
                        best = self.d[j].abs();
                        q = j;
                    }
                }
            }
            if q == NONE {
                return LpStatus::Optimal;
            }
            let dir = if self.status[q] == VarStatus::AtLower { 1.0 } else { -1.0 };
            let mut tmin = self.upper[q] - self.lower[q];
            let mut r = NONE;
            let mut leave = 0.0;
            let mut ra = 0.0;
            for i in 0..self.head.len() {
                let a = self.tab[i][q];
                if a.abs() <= self.tol.pivot {
                    continue;
                }
                let h = self.head[i];
                let delta = -a * dir;
                let (t, bound) = if delta < 0.0 {
                    if !self.lower[h].is_finite() {
                        continue;
                    }
                    (((self.x[h] - self.lower[h]) / -delta).max(0.0), self.lower[h])
                } else {
                    if !self.upper[h].is_finite() {
                        continue;
                    }
                    (((self.upper[h] - self.x[h]) / delta).max(0.0), self.upper[h])
                };
                let better = if bland {
                    t < tmin || (t == tmin && r != NONE && h < self.head[r])
                } else {
                    t < tmin - 1e-12 || (t <= tmin + 1e-12 && a.abs() > ra)
                };
                if better {
                    tmin = t;
                    r = i;
                    leave = bound;
                    ra = a.abs();
                }
            }
            if !tmin.is_finite() {
                // all structurals are boxed; this only happens on numerical breakdown
                return LpStatus::IterationLimit;
            }
            if tmin < 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            if r == NONE {
                let (st, v) = if dir > 0.0 {
                    (VarStatus::AtUpper, self.upper[q])
                } else {
                    (VarStatus::AtLower, self.lower[q])
                };
                self.status[q] = st;
                self.move_nonbasic(q, v);
                self.iterations += 1;
            } else {
                self.pivot(r, q, leave);
            }
        }
    }

    /// Runs dual simplex to primal feasibility, then primal simplex to clear any
    /// residual dual infeasibility.
    pub fn solve(&mut self) -> LpStatus {
        for _ in 0..4 {
            self.make_dual_feasible();
            let st = self.dual_loop();
            if self.shifted {
                self.shift.iter_mut().for_each(|s| *s = 0.0);
                self.shifted = false;
                self.recompute_duals();
            }
            if st != LpStatus::Optimal {
                return st;
            }
            let st = self.primal_loop();
            if st != LpStatus::Optimal {
                return st;
            }
            if self.max_primal_infeasibility() <= self.tol.feas * 0.1 {
                return LpStatus::Optimal;
            }
            self.refactor();
        }
        LpStatus::IterationLimit
    }
}
