//! Dense two-phase primal simplex for small linear programs
//! `min cᵀx  s.t.  rows,  x ≥ 0`.
//!
//! Entering columns follow Dantzig's rule; after a run of degenerate pivots the
//! solver falls back to Bland's rule, which cannot cycle. Phase 1 minimizes the
//! sum of artificial variables and so detects infeasibility exactly up to the
//! feasibility tolerance.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    LessEq,
    GreaterEq,
    Equal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Sparse `(column, coefficient)` pairs.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Constraint {
            coeffs,
            relation,
            rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push(&mut self, constraint: Constraint) {
        self.constraints.push(constraint);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-9;
const FEAS_EPS: f64 = 1e-7;
const DEGENERATE_RUN: usize = 25;

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows` constraint rows followed by the reduced-cost row; each row holds
    /// `cols` coefficients and the right-hand side.
    data: Vec<f64>,
    basis: Vec<usize>,
    /// Columns allowed to enter the basis.
    enterable: Vec<bool>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width() + self.cols]
    }

    fn cost_row(&self) -> usize {
        self.rows
    }

    /// Loads `costs` into the reduced-cost row for the current basis.
    fn price(&mut self, costs: &[f64]) {
        let w = self.width();
        let z = self.rows * w;
        self.data[z..z + w].iter_mut().for_each(|v| *v = 0.0);
        self.data[z..z + self.cols].copy_from_slice(costs);
        for i in 0..self.rows {
            let cb = costs[self.basis[i]];
            if cb != 0.0 {
                for j in 0..w {
                    self.data[z + j] -= cb * self.data[i * w + j];
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let p = self.at(r, c);
        for j in 0..w {
            self.data[r * w + j] /= p;
        }
        self.data[r * w + c] = 1.0;
        let (head, tail) = self.data.split_at_mut(r * w);
        let (pivot_row, rest) = tail.split_at_mut(w);
        for row in head.chunks_exact_mut(w).chain(rest.chunks_exact_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let z = self.cost_row();
        let candidates = (0..self.cols).filter(|&j| self.enterable[j] && self.at(z, j) < -COST_EPS);
        if bland {
            candidates.min()
        } else {
            candidates.min_by(|&a, &b| self.at(z, a).total_cmp(&self.at(z, b)))
        }
    }

    fn leaving(&self, c: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let a = self.at(i, c);
            if a > PIVOT_EPS {
                let ratio = self.rhs(i).max(0.0) / a;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        best.map(|(i, _)| i)
    }

    /// Runs simplex iterations on the loaded cost row. Returns `false` when
    /// the problem is unbounded.
    fn optimize(&mut self, max_iter: usize) -> Result<bool> {
        let mut degenerate = 0usize;
        for _ in 0..max_iter {
            let bland = degenerate >= DEGENERATE_RUN;
            let Some(c) = self.entering(bland) else {
                return Ok(true);
            };
            let Some(r) = self.leaving(c) else {
                return Ok(false);
            };
            if self.rhs(r) <= FEAS_EPS {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
        }
        Err(Error::LpNumerical(format!("no convergence after {max_iter} pivots")))
    }

    fn drop_row(&mut self, r: usize) {
        let w = self.width();
        self.data.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }
}

/// Solves the LP. Numerical failure (iteration cap reached) is an error;
/// infeasibility and unboundedness are values.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.num_vars();
    if let Some(bad) = lp.constraints.iter().flat_map(|c| &c.coeffs).find(|(j, _)| *j >= n) {
        return Err(Error::DimensionMismatch(format!("constraint references column {}", bad.0)));
    }
    let m = lp.constraints.len();
    let slacks = lp.constraints.iter().filter(|c| c.relation != Relation::Equal).count();
    // sign-normalized relations
    let rows: Vec<(f64, Relation)> = lp
        .constraints
        .iter()
        .map(|c| {
            if c.rhs < 0.0 {
                let flipped = match c.relation {
                    Relation::LessEq => Relation::GreaterEq,
                    Relation::GreaterEq => Relation::LessEq,
                    Relation::Equal => Relation::Equal,
                };
                (-1.0, flipped)
            } else {
                (1.0, c.relation)
            }
        })
        .collect();
    let artificials = rows.iter().filter(|(_, rel)| *rel != Relation::LessEq).count();
    let cols = n + slacks + artificials;
    let w = cols + 1;
    let mut t = Tableau {
        rows: m,
        cols,
        data: vec![0.0; (m + 1) * w],
        basis: vec![0; m],
        enterable: vec![true; cols],
    };
    let (mut next_slack, mut next_art) = (n, n + slacks);
    for (i, (c, &(sign, rel))) in lp.constraints.iter().zip(&rows).enumerate() {
        for &(j, v) in &c.coeffs {
            t.data[i * w + j] += sign * v;
        }
        t.data[i * w + cols] = sign * c.rhs;
        match rel {
            Relation::LessEq => {
                t.data[i * w + next_slack] = 1.0;
                t.basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::GreaterEq => {
                t.data[i * w + next_slack] = -1.0;
                next_slack += 1;
                t.data[i * w + next_art] = 1.0;
                t.basis[i] = next_art;
                next_art += 1;
            }
            Relation::Equal => {
                t.data[i * w + next_art] = 1.0;
                t.basis[i] = next_art;
                next_art += 1;
            }
        }
    }
    let max_iter = 50 * (m + cols) + 1000;
    let is_artificial = |j: usize| j >= n + slacks;

    if artificials > 0 {
        let phase1: Vec<f64> = (0..cols).map(|j| if is_artificial(j) { 1.0 } else { 0.0 }).collect();
        t.price(&phase1);
        t.optimize(max_iter)?;
        let infeasibility = -t.rhs(t.cost_row());
        let scale = 1.0 + lp.constraints.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);
        if infeasibility > FEAS_EPS * scale {
            return Ok(LpSolution::Infeasible);
        }
        // drive zero-level artificials out of the basis
        let mut i = 0;
        while i < t.rows {
            if is_artificial(t.basis[i]) {
                let replacement = (0..n + slacks)
                    .filter(|&j| t.at(i, j).abs() > PIVOT_EPS)
                    .max_by(|&a, &b| t.at(i, a).abs().total_cmp(&t.at(i, b).abs()));
                match replacement {
                    Some(j) => t.pivot(i, j),
                    None => {
                        t.drop_row(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        for j in n + slacks..cols {
            t.enterable[j] = false;
        }
    }

    let mut costs = vec![0.0; cols];
    costs[..n].copy_from_slice(&lp.objective);
    t.price(&costs);
    if !t.optimize(max_iter)? {
        return Ok(LpSolution::Unbounded);
    }
    let mut x = vec![0.0; n];
    for i in 0..t.rows {
        if t.basis[i] < n {
            x[t.basis[i]] = t.rhs(i).max(0.0);
        }
    }
    let objective = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    Ok(LpSolution::Optimal { x, objective })
}
