//! Admission in the continuous SNR model, where every assigned block adds to
//! the finite-blocklength success probability of its user.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::admission::{greedy_admission, matching_admission_d1};
use crate::blocklength::{dispersion, gaussian_q_inv, min_snr_for_d, SlaParams, Snr};
use crate::error::{Error, Result};
use crate::feasibility::{check_feasibility, Feasibility};
use crate::model::{AdmissionResult, BinaryInstance, Schedule, SnrGrid};

/// Default number of ITA levels.
pub const DEFAULT_D_MAX: usize = 10;

/// The SLA inequality
/// `Σ_r (n·log2(1+γ_r) + ½·log2 n) − Q⁻¹(1−θ)·√(n·Σ_r V(γ_r)) − L ≥ 0`.
///
/// Allocations with no dispersion (empty or all-zero SNR) never satisfy it.
pub fn continuous_sla_satisfied(snrs: &[Snr], sla: &SlaParams) -> bool {
    let Ok(q) = gaussian_q_inv(sla.error_budget()) else {
        return false;
    };
    let n = f64::from(sla.channel_uses);
    let per_block = 0.5 * n.log2();
    let (bits, disp) = snrs.iter().fold((0.0, 0.0), |(bits, disp), s| {
        (bits + n * s.linear().ln_1p() / std::f64::consts::LN_2 + per_block, disp + dispersion(*s))
    });
    disp > 0.0 && bits - q * (n * disp).sqrt() - f64::from(sla.payload_bits) >= 0.0
}

/// Users by decreasing utility, ties in random order.
fn utility_order<R: Rng + ?Sized>(utilities: &[f64], rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..utilities.len()).collect();
    order.shuffle(rng);
    order.sort_by(|&a, &b| utilities[b].total_cmp(&utilities[a]));
    order
}

fn check_utilities(grid: &SnrGrid, utilities: &[f64]) -> Result<()> {
    if utilities.len() != grid.users() {
        return Err(Error::DimensionMismatch(format!(
            "{} utilities for {} users",
            utilities.len(),
            grid.users()
        )));
    }
    Ok(())
}

/// Random-placement baseline: users by decreasing utility draw free blocks
/// uniformly, one at a time, until their SLA holds. A user that runs out of
/// free blocks gives them all back and is rejected.
pub fn baseline_greedy_continuous<R: Rng + ?Sized>(
    grid: &SnrGrid,
    utilities: &[f64],
    sla: &SlaParams,
    rng: &mut R,
) -> Result<AdmissionResult> {
    check_utilities(grid, utilities)?;
    let mut free: Vec<usize> = (0..grid.blocks()).collect();
    let mut schedule = Schedule::empty(grid.users(), grid.blocks());
    let mut admitted = vec![false; grid.users()];
    for k in utility_order(utilities, rng) {
        let mut pool = free.clone();
        let mut taken = Vec::new();
        let mut snrs = Vec::new();
        while !pool.is_empty() {
            let r = pool.swap_remove(rng.random_range(0..pool.len()));
            taken.push(r);
            snrs.push(grid.snr(k, r));
            if continuous_sla_satisfied(&snrs, sla) {
                admitted[k] = true;
                break;
            }
        }
        if admitted[k] {
            taken.iter().for_each(|&r| schedule.assign(k, r));
            free.retain(|r| !taken.contains(r));
        }
    }
    Ok(AdmissionResult::new(admitted, schedule, utilities))
}

/// `s(d)` for `d = 1..=d_max`; `None` where `d` blocks cannot meet the SLA
/// anywhere in the search window.
pub fn level_thresholds(sla: &SlaParams, d_max: usize) -> Result<Vec<Option<Snr>>> {
    (1..=d_max)
        .map(|d| match min_snr_for_d(d, sla) {
            Ok(s) => Ok(Some(s)),
            Err(Error::UnreachableSla { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// How one ITA level was scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelMethod {
    /// The whole remaining user set was schedulable.
    Feasible,
    Matching,
    Greedy,
    /// `s(d)` does not exist.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItaLevel {
    pub d: usize,
    pub threshold_db: Option<f64>,
    pub method: LevelMethod,
    pub admitted: Vec<usize>,
}

/// Iterative Thresholding Algorithm with `s(d)` computed for `d ≤ d_max`.
pub fn ita<R: Rng + ?Sized>(
    grid: &SnrGrid,
    utilities: &[f64],
    sla: &SlaParams,
    d_max: usize,
    rng: &mut R,
) -> Result<AdmissionResult> {
    let thresholds = level_thresholds(sla, d_max)?;
    ita_traced(grid, utilities, &thresholds, rng).map(|(res, _)| res)
}

/// ITA with precomputed level thresholds (`thresholds[d-1] = s(d)`), also
/// returning what happened at each level.
///
/// At level `d` the remaining users and free blocks are binarized at `s(d)`
/// with demand `d`. If all of them can be scheduled, the feasibility schedule
/// is adopted; otherwise maximum matching (`d = 1`) or GREEDY picks a subset.
/// Users that received `d` blocks are admitted and their blocks leave the
/// pool. The loop stops after `d_max` levels or once users or blocks run out.
pub fn ita_traced<R: Rng + ?Sized>(
    grid: &SnrGrid,
    utilities: &[f64],
    thresholds: &[Option<Snr>],
    rng: &mut R,
) -> Result<(AdmissionResult, Vec<ItaLevel>)> {
    check_utilities(grid, utilities)?;
    let mut remaining: Vec<usize> = (0..grid.users()).collect();
    let mut available: Vec<usize> = (0..grid.blocks()).collect();
    let mut schedule = Schedule::empty(grid.users(), grid.blocks());
    let mut admitted = vec![false; grid.users()];
    let mut levels = Vec::new();

    for (d, threshold) in (1..).zip(thresholds) {
        if remaining.is_empty() || available.is_empty() {
            break;
        }
        let Some(s) = *threshold else {
            levels.push(ItaLevel { d, threshold_db: None, method: LevelMethod::Skipped, admitted: Vec::new() });
            continue;
        };
        let active = remaining
            .iter()
            .flat_map(|&k| available.iter().map(move |&r| grid.snr(k, r) >= s))
            .collect();
        let sub = BinaryInstance::new(
            remaining.len(),
            available.len(),
            active,
            vec![d; remaining.len()],
            remaining.iter().map(|&k| utilities[k]).collect(),
        )?;
        let everyone: Vec<usize> = (0..remaining.len()).collect();
        let (method, local) = match check_feasibility(&sub, &everyone, rng)?.status {
            Feasibility::Feasible(x) => (LevelMethod::Feasible, x),
            Feasibility::Infeasible if d == 1 => (LevelMethod::Matching, matching_admission_d1(&sub)?.schedule),
            Feasibility::Infeasible => (LevelMethod::Greedy, greedy_admission(&sub, rng).0.schedule),
        };

        let mut level_admitted = Vec::new();
        let mut used = vec![false; available.len()];
        for (i, &k) in remaining.iter().enumerate() {
            if local.assigned_count(i) < d {
                continue;
            }
            for j in local.blocks_of(i) {
                let r = available[j];
                if schedule.is_used(r) {
                    return Err(Error::Inconsistent(format!("ITA assigned block {r} twice")));
                }
                schedule.assign(k, r);
                used[j] = true;
            }
            admitted[k] = true;
            level_admitted.push(k);
        }
        available = available.iter().zip(&used).filter(|(_, u)| !**u).map(|(r, _)| *r).collect();
        remaining.retain(|&k| !admitted[k]);
        levels.push(ItaLevel { d, threshold_db: Some(s.db()), method, admitted: level_admitted });
    }
    Ok((AdmissionResult::new(admitted, schedule, utilities), levels))
}
