//! Binary-model feasibility: is there a schedule giving every user in `M`
//! its `d_k` active blocks?
//!
//! The relaxed LP over `x ∈ [0,1]^{R×|M|}`
//!
//! ```text
//! min Σ c[k][r]·x[k][r]
//!   Σ_r x[k][r] ≥ d_k     (demand, one row per user)
//!   Σ_k x[k][r] ≤ 1       (capacity, one row per block)
//!   x[k][r] ≤ δ[k][r]     (activity, one row per variable)
//! ```
//!
//! has a totally unimodular constraint matrix, so with costs drawn uniformly
//! from `[0,1]` its optimum is unique and integral with probability one. The
//! LP answer is rounded, verified with exact integer arithmetic and, if that
//! fails, re-solved with fresh costs. A max-flow formulation of the same
//! polytope serves as an independent oracle and as the final fallback.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::lp::{self, Constraint, LinearProgram, LpSolution, Relation};
use crate::model::{verify_schedule, BinaryInstance, Schedule, SlaModel};

/// Cost redraws attempted after the first LP solve.
pub const MAX_RETRIES: usize = 5;
/// Distance from 0 or 1 under which an LP coordinate counts as integral.
pub const ROUNDING_TOLERANCE: f64 = 1e-6;

/// Relaxed scheduling LP for a user set `M`.
///
/// Columns are stacked block-major: column `r·|M| + i` is `x[M[i]][r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedLp {
    users: Vec<usize>,
    blocks: usize,
    demands: Vec<usize>,
    activity: Vec<bool>,
    costs: Vec<f64>,
}

impl RelaxedLp {
    pub fn users(&self) -> &[usize] {
        &self.users
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn column(&self, position: usize, block: usize) -> usize {
        block * self.users.len() + position
    }

    pub fn num_vars(&self) -> usize {
        self.users.len() * self.blocks
    }

    /// Demand, capacity and activity rows: `|M| + R + R·|M|`.
    pub fn num_constraints(&self) -> usize {
        self.users.len() + self.blocks + self.num_vars()
    }

    /// The full LP with every structural row, as displayed in the module docs.
    pub fn to_linear_program(&self) -> LinearProgram {
        let m = self.users.len();
        let mut lp = LinearProgram::new(self.costs.clone());
        for (i, &d) in self.demands.iter().enumerate() {
            let coeffs = (0..self.blocks).map(|r| (self.column(i, r), 1.0)).collect();
            lp.push(Constraint::new(coeffs, Relation::GreaterEq, d as f64));
        }
        for r in 0..self.blocks {
            let coeffs = (0..m).map(|i| (self.column(i, r), 1.0)).collect();
            lp.push(Constraint::new(coeffs, Relation::LessEq, 1.0));
        }
        for (j, &a) in self.activity.iter().enumerate() {
            lp.push(Constraint::new(vec![(j, 1.0)], Relation::LessEq, f64::from(u8::from(a))));
        }
        lp
    }

    /// Constraint matrix in `A·x ≤ b` form, rows ordered demand, capacity,
    /// activity. Demand rows carry `-1` entries.
    pub fn constraint_matrix(&self) -> Vec<Vec<i8>> {
        let n = self.num_vars();
        let m = self.users.len();
        let mut rows = Vec::with_capacity(self.num_constraints());
        for i in 0..m {
            let mut row = vec![0i8; n];
            (0..self.blocks).for_each(|r| row[self.column(i, r)] = -1);
            rows.push(row);
        }
        for r in 0..self.blocks {
            let mut row = vec![0i8; n];
            (0..m).for_each(|i| row[self.column(i, r)] = 1);
            rows.push(row);
        }
        for j in 0..n {
            let mut row = vec![0i8; n];
            row[j] = 1;
            rows.push(row);
        }
        rows
    }

    /// Writes the LP in CPLEX LP text format. Demand rows are named `u<k>`,
    /// capacity rows `b<r>`, activity rows `a<k>_<r>`, variables `x<k>_<r>`,
    /// all with original user indices.
    pub fn to_lp_format(&self) -> String {
        let var = |i: usize, r: usize| format!("x{}_{}", self.users[i], r);
        let mut out = String::from("\\ relaxed URLLC scheduling LP\nMinimize\n obj:");
        let m = self.users.len();
        for r in 0..self.blocks {
            for i in 0..m {
                let _ = write!(out, " + {} {}", self.costs[self.column(i, r)], var(i, r));
            }
        }
        out.push_str("\nSubject To\n");
        for (i, d) in self.demands.iter().enumerate() {
            let terms: Vec<String> = (0..self.blocks).map(|r| var(i, r)).collect();
            let _ = writeln!(out, " u{}: {} >= {d}", self.users[i], terms.join(" + "));
        }
        for r in 0..self.blocks {
            let terms: Vec<String> = (0..m).map(|i| var(i, r)).collect();
            if !terms.is_empty() {
                let _ = writeln!(out, " b{r}: {} <= 1", terms.join(" + "));
            }
        }
        for r in 0..self.blocks {
            for i in 0..m {
                let a = u8::from(self.activity[self.column(i, r)]);
                let _ = writeln!(out, " a{}_{r}: {} <= {a}", self.users[i], var(i, r));
            }
        }
        out.push_str("Bounds\n");
        for r in 0..self.blocks {
            for i in 0..m {
                let _ = writeln!(out, " 0 <= {} <= 1", var(i, r));
            }
        }
        out.push_str("End\n");
        out
    }
}

/// Builds the relaxed LP for users `M` with costs i.i.d. uniform on `[0,1]`.
pub fn build_relaxed_lp<R: Rng + ?Sized>(
    inst: &BinaryInstance,
    users: &[usize],
    rng: &mut R,
) -> Result<RelaxedLp> {
    inst.check_users(users)?;
    let m = users.len();
    let blocks = inst.blocks();
    let mut activity = vec![false; m * blocks];
    for r in 0..blocks {
        for (i, &k) in users.iter().enumerate() {
            activity[r * m + i] = inst.is_active(k, r);
        }
    }
    let costs = (0..m * blocks).map(|_| rng.random::<f64>()).collect();
    Ok(RelaxedLp {
        users: users.to_vec(),
        blocks,
        demands: users.iter().map(|&k| inst.demand(k)).collect(),
        activity,
        costs,
    })
}

/// Checks the sufficient condition for total unimodularity used on this
/// matrix: entries in `{-1, 0, 1}`; after negating the demand rows, every
/// column has at most one `+1` among the demand rows and at most one among
/// the capacity rows, no other non-zeros there; the activity rows form an
/// identity.
pub fn satisfies_bipartition_condition(lp: &RelaxedLp) -> bool {
    let a = lp.constraint_matrix();
    let (m, r, n) = (lp.users.len(), lp.blocks, lp.num_vars());
    if a.iter().flatten().any(|v| !(-1..=1).contains(v)) {
        return false;
    }
    for j in 0..n {
        let demand: Vec<i8> = a[..m].iter().map(|row| -row[j]).filter(|v| *v != 0).collect();
        let capacity: Vec<i8> = a[m..m + r].iter().map(|row| row[j]).filter(|v| *v != 0).collect();
        if demand.len() > 1 || capacity.len() > 1 || demand.iter().chain(&capacity).any(|v| *v != 1) {
            return false;
        }
    }
    a[m + r..]
        .iter()
        .enumerate()
        .all(|(i, row)| row.iter().enumerate().all(|(j, v)| *v == i8::from(i == j)))
}

/// Result of [`solve_lp`].
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(Vec<f64>),
    Infeasible,
}

/// Minimizes the LP cost over its polytope.
///
/// Presolve removes columns fixed to zero by their activity row and the
/// activity rows of the remaining columns (implied by the capacity rows), and
/// reports infeasibility outright when a user has fewer active blocks than its
/// demand or the demands exceed the usable blocks. The result is expanded back
/// to the full column space.
pub fn solve_lp(lp: &RelaxedLp) -> Result<LpOutcome> {
    let m = lp.users.len();
    let active_per_user: Vec<usize> = (0..m)
        .map(|i| (0..lp.blocks).filter(|&r| lp.activity[lp.column(i, r)]).count())
        .collect();
    if lp.demands.iter().zip(&active_per_user).any(|(d, a)| d > a) {
        return Ok(LpOutcome::Infeasible);
    }
    let usable: Vec<usize> = (0..lp.blocks)
        .filter(|&r| (0..m).any(|i| lp.activity[lp.column(i, r)]))
        .collect();
    if lp.demands.iter().sum::<usize>() > usable.len() {
        return Ok(LpOutcome::Infeasible);
    }

    let kept: Vec<usize> = (0..lp.num_vars()).filter(|&j| lp.activity[j]).collect();
    let mut local = vec![usize::MAX; lp.num_vars()];
    for (p, &j) in kept.iter().enumerate() {
        local[j] = p;
    }
    let mut reduced = LinearProgram::new(kept.iter().map(|&j| lp.costs[j]).collect());
    for (i, &d) in lp.demands.iter().enumerate() {
        if d == 0 {
            continue;
        }
        let coeffs = (0..lp.blocks)
            .map(|r| lp.column(i, r))
            .filter(|&j| lp.activity[j])
            .map(|j| (local[j], 1.0))
            .collect();
        reduced.push(Constraint::new(coeffs, Relation::GreaterEq, d as f64));
    }
    for &r in &usable {
        let coeffs = (0..m)
            .map(|i| lp.column(i, r))
            .filter(|&j| lp.activity[j])
            .map(|j| (local[j], 1.0))
            .collect();
        reduced.push(Constraint::new(coeffs, Relation::LessEq, 1.0));
    }
    match lp::solve(&reduced)? {
        LpSolution::Infeasible => Ok(LpOutcome::Infeasible),
        LpSolution::Unbounded => Err(Error::LpNumerical("bounded scheduling LP reported unbounded".into())),
        LpSolution::Optimal { x, .. } => {
            let mut full = vec![0.0; lp.num_vars()];
            for (p, &j) in kept.iter().enumerate() {
                full[j] = x[p];
            }
            Ok(LpOutcome::Optimal(full))
        }
    }
}

/// Answer to the feasibility question for one user set.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(Schedule),
    Infeasible,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }

    pub fn schedule(&self) -> Option<&Schedule> {
        match self {
            Feasibility::Feasible(s) => Some(s),
            Feasibility::Infeasible => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityOutcome {
    pub status: Feasibility,
    /// Cost redraws after the first solve.
    pub retry_count: usize,
    /// Whether the flow oracle produced the schedule.
    pub used_fallback: bool,
}

/// Rounds an LP point to a schedule, or `None` if some coordinate is further
/// than [`ROUNDING_TOLERANCE`] from an integer.
fn round_solution(inst: &BinaryInstance, lp: &RelaxedLp, x: &[f64]) -> Option<Schedule> {
    let mut schedule = Schedule::empty(inst.users(), inst.blocks());
    for r in 0..lp.blocks {
        for (i, &k) in lp.users.iter().enumerate() {
            let v = x[lp.column(i, r)];
            if (v - 1.0).abs() <= ROUNDING_TOLERANCE {
                schedule.assign(k, r);
            } else if v.abs() > ROUNDING_TOLERANCE {
                return None;
            }
        }
    }
    Some(schedule)
}

/// Decides whether `users` can be scheduled together, via the randomized-cost
/// relaxed LP. Integral answers are verified exactly; after
/// [`MAX_RETRIES`] failed redraws the flow oracle takes over.
pub fn check_feasibility<R: Rng + ?Sized>(
    inst: &BinaryInstance,
    users: &[usize],
    rng: &mut R,
) -> Result<FeasibilityOutcome> {
    inst.check_users(users)?;
    for attempt in 0..=MAX_RETRIES {
        let lp = build_relaxed_lp(inst, users, rng)?;
        match solve_lp(&lp)? {
            LpOutcome::Infeasible => {
                return Ok(FeasibilityOutcome {
                    status: Feasibility::Infeasible,
                    retry_count: attempt,
                    used_fallback: false,
                })
            }
            LpOutcome::Optimal(x) => {
                if let Some(schedule) = round_solution(inst, &lp, &x) {
                    if verify_schedule(SlaModel::Binary(inst), users, &schedule)? {
                        return Ok(FeasibilityOutcome {
                            status: Feasibility::Feasible(schedule),
                            retry_count: attempt,
                            used_fallback: false,
                        });
                    }
                }
            }
        }
    }
    match flow_feasibility_oracle(inst, users)? {
        Feasibility::Infeasible => Err(Error::Inconsistent(
            "LP found the user set feasible but the flow oracle did not".into(),
        )),
        status => Ok(FeasibilityOutcome {
            status,
            retry_count: MAX_RETRIES,
            used_fallback: true,
        }),
    }
}

/// Exact feasibility by max flow: source → user (capacity `d_k`) → active
/// block (1) → sink (1). Feasible iff the flow saturates every demand; the
/// integral flow is the schedule.
pub fn flow_feasibility_oracle(inst: &BinaryInstance, users: &[usize]) -> Result<Feasibility> {
    inst.check_users(users)?;
    let m = users.len();
    let blocks = inst.blocks();
    let (source, sink) = (0, m + blocks + 1);
    let mut net = FlowNetwork::new(m + blocks + 2);
    let mut links = Vec::new();
    let mut need = 0i64;
    for (i, &k) in users.iter().enumerate() {
        let d = inst.demand(k) as i64;
        need += d;
        net.add_edge(source, 1 + i, d);
        for r in inst.active_blocks(k) {
            links.push((k, r, net.add_edge(1 + i, 1 + m + r, 1)));
        }
    }
    for r in 0..blocks {
        net.add_edge(1 + m + r, sink, 1);
    }
    if net.max_flow(source, sink) < need {
        return Ok(Feasibility::Infeasible);
    }
    let mut schedule = Schedule::empty(inst.users(), blocks);
    for (k, r, e) in links {
        if net.flow_on(e) > 0 {
            schedule.assign(k, r);
        }
    }
    Ok(Feasibility::Feasible(schedule))
}
