//! Admission control in the binary model: pick the user set of largest total
//! utility that can be scheduled together.

use std::cmp::Ordering;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{flow_feasibility_oracle, Feasibility};
use crate::model::{AdmissionResult, BinaryInstance, Schedule};

/// Largest user count [`exact_uum`] accepts.
pub const DEFAULT_EXACT_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyOutcome {
    Admitted { user: usize, blocks: Vec<usize> },
    Rejected { user: usize },
}

/// What GREEDY did, in processing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub order: Vec<usize>,
    pub outcomes: Vec<GreedyOutcome>,
}

/// Users sorted by decreasing utility, ties in random order.
fn decreasing_utility_order<R: Rng + ?Sized>(utilities: &[f64], rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..utilities.len()).collect();
    order.shuffle(rng);
    order.sort_by(|&a, &b| utilities[b].total_cmp(&utilities[a]));
    order
}

/// GREEDY: visit users by decreasing utility and give each `d_k` of its still
/// free active blocks, chosen uniformly at random. A user with too few free
/// active blocks is rejected and takes nothing.
pub fn greedy_admission<R: Rng + ?Sized>(inst: &BinaryInstance, rng: &mut R) -> (AdmissionResult, GreedyTrace) {
    let order = decreasing_utility_order(inst.utilities(), rng);
    let mut used = vec![false; inst.blocks()];
    let mut schedule = Schedule::empty(inst.users(), inst.blocks());
    let mut admitted = vec![false; inst.users()];
    let mut outcomes = Vec::with_capacity(order.len());
    for &k in &order {
        let free: Vec<usize> = inst.active_blocks(k).filter(|&r| !used[r]).collect();
        let d = inst.demand(k);
        if free.len() < d {
            outcomes.push(GreedyOutcome::Rejected { user: k });
            continue;
        }
        let mut blocks: Vec<usize> = free.choose_multiple(rng, d).copied().collect();
        blocks.sort_unstable();
        for &r in &blocks {
            used[r] = true;
            schedule.assign(k, r);
        }
        admitted[k] = true;
        outcomes.push(GreedyOutcome::Admitted { user: k, blocks });
    }
    let result = AdmissionResult::new(admitted, schedule, inst.utilities());
    (result, GreedyTrace { order, outcomes })
}

/// Kuhn augmenting path from user `k` over active blocks.
fn augment(inst: &BinaryInstance, k: usize, owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for r in inst.active_blocks(k) {
        if std::mem::replace(&mut seen[r], true) {
            continue;
        }
        if owner[r].is_none_or(|j| augment(inst, j, owner, seen)) {
            owner[r] = Some(k);
            return true;
        }
    }
    false
}

/// Maximum-utility admission when every user needs a single block.
///
/// Matchable user sets form a transversal matroid, so adding users in
/// decreasing utility whenever an augmenting path exists is optimal.
pub fn matching_admission_d1(inst: &BinaryInstance) -> Result<AdmissionResult> {
    if let Some(k) = (0..inst.users()).find(|&k| inst.demand(k) > 1) {
        return Err(Error::Precondition(format!(
            "matching admission needs d_k <= 1, user {k} has d = {}",
            inst.demand(k)
        )));
    }
    let mut order: Vec<usize> = (0..inst.users()).collect();
    order.sort_by(|&a, &b| inst.utility(b).total_cmp(&inst.utility(a)));
    let mut owner = vec![None; inst.blocks()];
    let mut admitted = vec![false; inst.users()];
    for k in order {
        admitted[k] = inst.demand(k) == 0 || augment(inst, k, &mut owner, &mut vec![false; inst.blocks()]);
    }
    let mut schedule = Schedule::empty(inst.users(), inst.blocks());
    for (r, k) in owner.iter().enumerate() {
        if let Some(k) = k {
            schedule.assign(*k, r);
        }
    }
    Ok(AdmissionResult::new(admitted, schedule, inst.utilities()))
}

/// Optimal admission with the default user cap.
pub fn exact_uum(inst: &BinaryInstance) -> Result<AdmissionResult> {
    exact_uum_capped(inst, DEFAULT_EXACT_CAP)
}

struct Search<'a> {
    inst: &'a BinaryInstance,
    order: Vec<usize>,
    suffix: Vec<f64>,
    best: f64,
    best_set: Vec<usize>,
    best_schedule: Schedule,
}

impl Search<'_> {
    fn explore(&mut self, depth: usize, chosen: &mut Vec<usize>, weight: f64) {
        if weight + self.suffix[depth] <= self.best {
            return;
        }
        if depth == self.order.len() {
            return;
        }
        let k = self.order[depth];
        chosen.push(k);
        // flow_feasibility_oracle cannot fail on a valid, duplicate-free user set
        if let Ok(Feasibility::Feasible(schedule)) = flow_feasibility_oracle(self.inst, chosen) {
            let w = weight + self.inst.utility(k);
            if w > self.best {
                self.best = w;
                self.best_set = chosen.clone();
                self.best_schedule = schedule;
            }
            self.explore(depth + 1, chosen, w);
        }
        chosen.pop();
        self.explore(depth + 1, chosen, weight);
    }
}

/// Optimal admission by branch and bound over users in decreasing utility.
/// Each partial set is checked with the max-flow oracle, and a branch is cut
/// once its utility plus all remaining utility cannot beat the incumbent.
pub fn exact_uum_capped(inst: &BinaryInstance, cap: usize) -> Result<AdmissionResult> {
    if inst.users() > cap {
        return Err(Error::CapExceeded {
            what: "exact admission users",
            size: inst.users(),
            cap,
        });
    }
    let mut order: Vec<usize> = (0..inst.users()).collect();
    order.sort_by(|&a, &b| match inst.utility(b).total_cmp(&inst.utility(a)) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    let mut suffix = vec![0.0; order.len() + 1];
    for i in (0..order.len()).rev() {
        suffix[i] = suffix[i + 1] + inst.utility(order[i]);
    }
    let mut search = Search {
        inst,
        order,
        suffix,
        best: 0.0,
        best_set: Vec::new(),
        best_schedule: Schedule::empty(inst.users(), inst.blocks()),
    };
    search.explore(0, &mut Vec::new(), 0.0);
    // zero-utility users that fit alongside the optimum are admitted too
    for k in 0..inst.users() {
        if !search.best_set.contains(&k) && inst.utility(k) == 0.0 {
            let mut with: Vec<usize> = search.best_set.clone();
            with.push(k);
            if let Feasibility::Feasible(s) = flow_feasibility_oracle(inst, &with)? {
                search.best_set = with;
                search.best_schedule = s;
            }
        }
    }
    let mut admitted = vec![false; inst.users()];
    search.best_set.iter().for_each(|&k| admitted[k] = true);
    Ok(AdmissionResult::new(admitted, search.best_schedule, inst.utilities()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{verify_schedule, SlaModel};
    use crate::seed::TrialRng;
    use rand::SeedableRng;

    fn inst(rows: &[&[u8]], demands: &[usize], w: &[f64]) -> BinaryInstance {
        let rows: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|&v| v == 1).collect()).collect();
        BinaryInstance::from_rows(&rows, demands.to_vec(), w.to_vec()).unwrap()
    }

    fn random_instance(rng: &mut TrialRng, users: usize, blocks: usize, max_d: usize, unit: bool) -> BinaryInstance {
        let active = (0..users * blocks).map(|_| rng.random::<f64>() < 0.5).collect();
        let demands = (0..users).map(|_| rng.random_range(1..=max_d)).collect();
        let w = (0..users).map(|_| if unit { 1.0 } else { rng.random_range(0.0..5.0) }).collect();
        BinaryInstance::new(users, blocks, active, demands, w).unwrap()
    }

    fn sound(i: &BinaryInstance, res: &AdmissionResult) {
        assert!(verify_schedule(SlaModel::Binary(i), &res.admitted_users(), &res.schedule).unwrap());
        for k in 0..i.users() {
            if !res.admitted[k] {
                assert_eq!(res.schedule.assigned_count(k), 0);
            }
        }
        let w: f64 = res.admitted_users().iter().map(|&k| i.utility(k)).sum();
        assert!((w - res.total_utility).abs() < 1e-12);
    }

    /// Best utility over every assignment of blocks to users (or to nobody).
    fn brute_force_optimum(i: &BinaryInstance) -> f64 {
        let (k, r) = (i.users(), i.blocks());
        let mut owner = vec![0usize; r];
        let mut best = 0.0f64;
        loop {
            if owner.iter().enumerate().all(|(b, &o)| o == 0 || i.is_active(o - 1, b)) {
                let mut counts = vec![0usize; k];
                owner.iter().filter(|&&o| o > 0).for_each(|&o| counts[o - 1] += 1);
                let w: f64 = (0..k).filter(|&u| counts[u] >= i.demand(u)).map(|u| i.utility(u)).sum();
                best = best.max(w);
            }
            let mut pos = 0;
            loop {
                if pos == r {
                    return best;
                }
                owner[pos] += 1;
                if owner[pos] <= k {
                    break;
                }
                owner[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn greedy_admits_everyone_when_blocks_are_plentiful() {
        let i = inst(&[&[1, 1, 1, 1], &[1, 1, 1, 1]], &[2, 2], &[1.0, 1.0]);
        let (res, trace) = greedy_admission(&i, &mut TrialRng::seed_from_u64(1));
        assert_eq!(res.admitted, vec![true, true]);
        assert_eq!(trace.outcomes.len(), 2);
        sound(&i, &res);
    }

    #[test]
    fn greedy_prefers_heavier_user() {
        let i = inst(&[&[1], &[1]], &[1, 1], &[1.0, 5.0]);
        for seed in 0..20 {
            let (res, trace) = greedy_admission(&i, &mut TrialRng::seed_from_u64(seed));
            assert_eq!(res.admitted, vec![false, true]);
            assert_eq!(res.total_utility, 5.0);
            assert_eq!(trace.order, vec![1, 0]);
            assert_eq!(trace.outcomes[1], GreedyOutcome::Rejected { user: 0 });
        }
    }

    #[test]
    fn greedy_breaks_ties_randomly() {
        let i = inst(&[&[1], &[1]], &[1, 1], &[1.0, 1.0]);
        let firsts: std::collections::BTreeSet<usize> = (0..40)
            .map(|s| greedy_admission(&i, &mut TrialRng::seed_from_u64(s)).1.order[0])
            .collect();
        assert_eq!(firsts.len(), 2);
    }

    #[test]
    fn greedy_trace_is_consistent() {
        let mut rng = TrialRng::seed_from_u64(4);
        for _ in 0..200 {
            let (users, blocks) = (rng.random_range(1..=6), rng.random_range(1..=10));
            let i = random_instance(&mut rng, users, blocks, 3, false);
            let (res, trace) = greedy_admission(&i, &mut rng);
            sound(&i, &res);
            assert!(trace.order.windows(2).all(|p| i.utility(p[0]) >= i.utility(p[1])));
            for o in &trace.outcomes {
                match o {
                    GreedyOutcome::Admitted { user, blocks } => {
                        assert_eq!(blocks.len(), i.demand(*user));
                        assert_eq!(res.schedule.blocks_of(*user).collect::<Vec<_>>(), *blocks);
                    }
                    GreedyOutcome::Rejected { user } => assert!(!res.admitted[*user]),
                }
            }
        }
    }

    #[test]
    fn greedy_meets_its_guarantee_on_unit_weights() {
        let mut rng = TrialRng::seed_from_u64(8);
        for _ in 0..500 {
            let (users, blocks) = (rng.random_range(1..=6), rng.random_range(1..=10));
            let i = random_instance(&mut rng, users, blocks, 3, true);
            let opt = exact_uum(&i).unwrap().total_utility;
            let (g, _) = greedy_admission(&i, &mut rng);
            assert!(g.total_utility * (i.max_demand() as f64 + 1.0) >= opt, "{} vs {opt}", g.total_utility);
        }
    }

    #[test]
    fn matching_examples() {
        let one = inst(&[&[1]], &[1], &[2.5]);
        assert_eq!(matching_admission_d1(&one).unwrap().total_utility, 2.5);
        let shared = inst(&[&[1], &[1]], &[1, 1], &[5.0, 1.0]);
        let res = matching_admission_d1(&shared).unwrap();
        assert_eq!(res.total_utility, 5.0);
        sound(&shared, &res);
        assert!(matches!(
            matching_admission_d1(&inst(&[&[1, 1]], &[2], &[1.0])),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn matching_needs_augmenting_paths() {
        // the heavy user grabs block 0 first; the second user must push it to block 1
        let i = inst(&[&[1, 1], &[1, 0]], &[1, 1], &[3.0, 2.0]);
        let res = matching_admission_d1(&i).unwrap();
        assert_eq!(res.admitted, vec![true, true]);
        sound(&i, &res);
    }

    #[test]
    fn matching_equals_exact_for_single_block_demands() {
        let mut rng = TrialRng::seed_from_u64(13);
        for _ in 0..300 {
            let (users, blocks) = (rng.random_range(1..=7), rng.random_range(1..=7));
            let i = random_instance(&mut rng, users, blocks, 1, false);
            let m = matching_admission_d1(&i).unwrap();
            sound(&i, &m);
            let e = exact_uum(&i).unwrap();
            assert!((m.total_utility - e.total_utility).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_examples() {
        let all = inst(&[&[1, 0], &[0, 1]], &[1, 1], &[1.0, 2.0]);
        let res = exact_uum(&all).unwrap();
        assert_eq!(res.admitted, vec![true, true]);
        assert_eq!(res.total_utility, 3.0);
        let triangle = inst(&[&[1, 1, 0], &[1, 0, 1], &[0, 1, 1]], &[2, 2, 2], &[1.0; 3]);
        let res = exact_uum(&triangle).unwrap();
        assert_eq!(res.admitted_count(), 1);
        sound(&triangle, &res);
    }

    #[test]
    fn exact_respects_cap() {
        let i = BinaryInstance::new(17, 1, vec![true; 17], vec![1; 17], vec![1.0; 17]).unwrap();
        assert!(matches!(exact_uum(&i), Err(Error::CapExceeded { size: 17, cap: 16, .. })));
        assert!(exact_uum_capped(&i, 20).is_ok());
    }

    #[test]
    fn exact_matches_schedule_enumeration() {
        let mut rng = TrialRng::seed_from_u64(17);
        for _ in 0..300 {
            let (users, blocks) = (rng.random_range(1..=3), rng.random_range(1..=6));
            let i = random_instance(&mut rng, users, blocks, 3, false);
            let res = exact_uum(&i).unwrap();
            sound(&i, &res);
            assert!((res.total_utility - brute_force_optimum(&i)).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_admits_zero_utility_users_that_fit() {
        let i = inst(&[&[1, 0], &[0, 1]], &[1, 1], &[1.0, 0.0]);
        assert_eq!(exact_uum(&i).unwrap().admitted, vec![true, true]);
    }
}
