//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Run with `cargo test -p urllc-core --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};

use urllc_core::admission::{exact_uum, greedy_admission, matching_admission_d1};
use urllc_core::blocklength::{min_snr_for_d, required_blocks, SlaParams, Snr, DEFAULT_BLOCK_CAP};
use urllc_core::experiment::{
    run_binary_experiment, run_continuous_experiment, summarize, to_csv_string, Algorithm,
};
use urllc_core::feasibility::{check_feasibility, flow_feasibility_oracle, Feasibility};
use urllc_core::model::{verify_schedule, BinaryInstance, ScenarioConfig, SlaModel, UtilityModel};
use urllc_core::reduction::{graph_to_urllc, independent_set_brute_force, UndirectedGraph};
use urllc_core::seed::TrialRng;

struct Check {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn check(id: &'static str, pass: bool, detail: String) -> Check {
    Check { id, pass, detail }
}

fn within(elapsed: Duration, limit: Duration) -> String {
    format!("{:.2}s of {:.0}s budget", elapsed.as_secs_f64(), limit.as_secs_f64())
}

/// Random binary instance with `K ≤ 6`, `R ≤ 10`, `d ≤ 3`.
fn small_instance(rng: &mut TrialRng, max_d: usize, unit: bool) -> BinaryInstance {
    let users = rng.random_range(1..=6);
    let blocks = rng.random_range(1..=10);
    let p = rng.random_range(0.3..0.9);
    let active = (0..users * blocks).map(|_| rng.random::<f64>() < p).collect();
    let demands = (0..users).map(|_| rng.random_range(1..=max_d)).collect();
    let w = (0..users).map(|_| if unit { 1.0 } else { rng.random_range(0.0..5.0) }).collect();
    BinaryInstance::new(users, blocks, active, demands, w).unwrap()
}

fn c1() -> Vec<Check> {
    let start = Instant::now();
    let sla = SlaParams::default();
    let at_half_db = required_blocks(Snr::from_db(0.5), &sla, DEFAULT_BLOCK_CAP);

    let curve: Vec<Option<usize>> = (-100..=300)
        .map(|t| required_blocks(Snr::from_db(f64::from(t) / 10.0), &sla, DEFAULT_BLOCK_CAP))
        .collect();
    let count = |c: &Option<usize>| c.unwrap_or(usize::MAX);
    let monotone = curve.windows(2).all(|w| count(&w[1]) <= count(&w[0]));
    let s3 = min_snr_for_d(3, &sla).map(|s| s.db());
    let threshold_ok = s3.as_ref().is_ok_and(|db| (-1.0..=2.0).contains(db));
    let limit = Duration::from_secs(1);
    let elapsed = start.elapsed();
    vec![
        check(
            "C1a",
            at_half_db == Some(3),
            format!("required_blocks(0.5 dB, L=256, θ=0.99999, n=84) = {at_half_db:?}, expected Some(3)"),
        ),
        check(
            "C1b",
            monotone && threshold_ok && elapsed < limit,
            format!(
                "curve over [-10, 30] dB non-increasing: {monotone}; 3-block threshold s(3) = {:.4} dB in [-1, 2]: {threshold_ok}; {}",
                s3.unwrap_or(f64::NAN),
                within(elapsed, limit)
            ),
        ),
    ]
}

fn c2() -> Vec<Check> {
    let start = Instant::now();
    let mut rng = TrialRng::seed_from_u64(0xC2);
    let (mut agree, mut verified, mut feasible) = (0, 0, 0);
    for _ in 0..1000 {
        let inst = small_instance(&mut rng, 3, true);
        let all: Vec<usize> = (0..inst.users()).collect();
        let lp = check_feasibility(&inst, &all, &mut rng).unwrap();
        let flow = flow_feasibility_oracle(&inst, &all).unwrap();
        agree += usize::from(lp.status.is_feasible() == flow.is_feasible());
        if let Feasibility::Feasible(x) = &lp.status {
            feasible += 1;
            verified += usize::from(verify_schedule(SlaModel::Binary(&inst), &all, x).unwrap());
        }
    }
    let limit = Duration::from_secs(30);
    let elapsed = start.elapsed();
    vec![check(
        "C2",
        agree == 1000 && verified == feasible && elapsed < limit,
        format!(
            "status agreement {agree}/1000, verified schedules {verified}/{feasible}; {}",
            within(elapsed, limit)
        ),
    )]
}

fn c3() -> Vec<Check> {
    let start = Instant::now();
    let mut rng = TrialRng::seed_from_u64(0xC3);
    let (mut instances, mut clean, mut redraws) = (0usize, 0usize, 0usize);
    while instances < 10_000 {
        let inst = small_instance(&mut rng, 3, true);
        let all: Vec<usize> = (0..inst.users()).collect();
        if !flow_feasibility_oracle(&inst, &all).unwrap().is_feasible() {
            continue;
        }
        instances += 1;
        let out = check_feasibility(&inst, &all, &mut rng).unwrap();
        redraws += out.retry_count;
        clean += usize::from(out.status.is_feasible() && !out.used_fallback);
    }
    let rate = clean as f64 / instances as f64;
    let limit = Duration::from_secs(300);
    let elapsed = start.elapsed();
    vec![check(
        "C3",
        rate >= 0.999 && elapsed < limit,
        format!(
            "LP rounding succeeded without fallback on {clean}/{instances} feasible instances ({:.4}%), {redraws} cost redraws in total; {}",
            100.0 * rate,
            within(elapsed, limit)
        ),
    )]
}

fn c4() -> Vec<Check> {
    let start = Instant::now();
    let mut rng = TrialRng::seed_from_u64(0xC4);
    let mut violations = 0;
    for _ in 0..500 {
        let inst = small_instance(&mut rng, 3, true);
        let opt = exact_uum(&inst).unwrap().total_utility;
        let (greedy, _) = greedy_admission(&inst, &mut rng);
        if greedy.total_utility * (inst.max_demand() as f64 + 1.0) < opt {
            violations += 1;
        }
    }

    let mut worst: Option<(f64, String)> = None;
    for (label, utility) in [("uniform [0,5]", UtilityModel::Uniform(5.0)), ("unit", UtilityModel::Unit)] {
        let cfg = ScenarioConfig {
            utility,
            trials: 500,
            seed: 0xC4,
            user_sweep: Some(vec![2, 4, 6, 8, 10, 12, 14]),
            ..ScenarioConfig::new(14, 50)
        };
        let stats = summarize(&run_binary_experiment(&cfg).unwrap());
        for k in cfg.user_counts() {
            let g = stats.get(Algorithm::Greedy, k, 50).unwrap().mean_utility;
            let e = stats.get(Algorithm::Exact, k, 50).unwrap().mean_utility;
            let ratio = if e > 0.0 { g / e } else { 1.0 };
            if worst.as_ref().is_none_or(|(w, _)| ratio < *w) {
                worst = Some((ratio, format!("{label}, K={k}")));
            }
        }
    }
    let (ratio, cell) = worst.unwrap();
    let limit = Duration::from_secs(120);
    let elapsed = start.elapsed();
    vec![check(
        "C4",
        violations == 0 && ratio >= 0.9 && elapsed < limit,
        format!(
            "1/(d+1) violations {violations}/500; worst mean greedy/exact utility {ratio:.4} ({cell}, R=50, 500 trials); {}",
            within(elapsed, limit)
        ),
    )]
}

fn c5() -> Vec<Check> {
    let start = Instant::now();
    let mut rng = TrialRng::seed_from_u64(0xC5);
    let mut equal = 0;
    for _ in 0..500 {
        let inst = small_instance(&mut rng, 1, false);
        let m = matching_admission_d1(&inst).unwrap();
        let e = exact_uum(&inst).unwrap();
        let valid = verify_schedule(SlaModel::Binary(&inst), &m.admitted_users(), &m.schedule).unwrap();
        equal += usize::from(valid && m.total_utility == e.total_utility);
    }
    let limit = Duration::from_secs(60);
    let elapsed = start.elapsed();
    vec![check(
        "C5",
        equal == 500 && elapsed < limit,
        format!("matching utility equals exact optimum on {equal}/500; {}", within(elapsed, limit)),
    )]
}

fn c6() -> Vec<Check> {
    let start = Instant::now();
    let mut rng = TrialRng::seed_from_u64(0xC6);
    let (mut subsets, mut matched, mut mis_equal) = (0, 0, 0);
    for _ in 0..50 {
        let n = rng.random_range(1..=8);
        let p = rng.random_range(0.2..0.7);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|_| rng.random::<f64>() < p)
            .collect();
        let g = UndirectedGraph::new(n, edges).unwrap();
        let inst = graph_to_urllc(&g);
        for mask in 0u32..1 << n {
            let set: Vec<usize> = (0..n).filter(|v| mask >> v & 1 == 1).collect();
            let schedulable = check_feasibility(&inst, &set, &mut rng).unwrap().status.is_feasible();
            subsets += 1;
            matched += usize::from(schedulable == g.is_independent(&set));
        }
        let opt = exact_uum(&inst).unwrap().total_utility;
        mis_equal += usize::from(opt == independent_set_brute_force(&g).unwrap() as f64);
    }
    let limit = Duration::from_secs(120);
    let elapsed = start.elapsed();
    vec![check(
        "C6",
        matched == subsets && mis_equal == 50 && elapsed < limit,
        format!(
            "independent iff schedulable on {matched}/{subsets} subsets; MIS = exact optimum on {mis_equal}/50 graphs; {}",
            within(elapsed, limit)
        ),
    )]
}

fn c7() -> Vec<Check> {
    let start = Instant::now();
    let mut congested_ok = true;
    let mut any_gain = false;
    let mut cells = Vec::new();
    for blocks in [10, 30] {
        let cfg = ScenarioConfig {
            trials: 1000,
            seed: 0xC7,
            user_sweep: Some(vec![10, 20, 30, 40, 50]),
            ..ScenarioConfig::new(10, blocks)
        };
        let stats = summarize(&run_continuous_experiment(&cfg).unwrap());
        for k in cfg.user_counts() {
            let ita = stats.get(Algorithm::Ita, k, blocks).unwrap().mean_admitted;
            let base = stats.get(Algorithm::Baseline, k, blocks).unwrap().mean_admitted;
            if k >= blocks {
                congested_ok &= ita >= base;
                any_gain |= ita > base;
            }
            cells.push(format!("R={blocks} K={k}: {ita:.2} vs {base:.2}"));
        }
    }
    let limit = Duration::from_secs(600);
    let elapsed = start.elapsed();
    vec![check(
        "C7",
        congested_ok && any_gain && elapsed < limit,
        format!(
            "mean admitted ITA vs baseline [{}]; ITA >= baseline in every K >= R cell: {congested_ok}; strict gain somewhere: {any_gain}; {}",
            cells.join(", "),
            within(elapsed, limit)
        ),
    )]
}

fn c8() -> Vec<Check> {
    let start = Instant::now();
    let binary = ScenarioConfig { trials: 50, seed: 0xC8, ..ScenarioConfig::new(8, 20) };
    let continuous = ScenarioConfig { user_sweep: Some(vec![10, 20]), ..binary.clone() };
    let run_b = || to_csv_string(&run_binary_experiment(&binary).unwrap()).unwrap();
    let run_c = || to_csv_string(&run_continuous_experiment(&continuous).unwrap()).unwrap();
    let same_b = run_b() == run_b();
    let same_c = run_c() == run_c();
    let limit = Duration::from_secs(60);
    let elapsed = start.elapsed();
    vec![check(
        "C8",
        same_b && same_c && elapsed < limit,
        format!(
            "byte-identical CSV on rerun: binary {same_b}, continuous {same_c}; {}",
            within(elapsed, limit)
        ),
    )]
}

fn main() -> ExitCode {
    let criteria: [fn() -> Vec<Check>; 8] = [c1, c2, c3, c4, c5, c6, c7, c8];
    let mut failed = 0;
    for criterion in criteria {
        for c in criterion() {
            println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.id, c.detail);
            failed += usize::from(!c.pass);
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criterion check(s) failed");
        ExitCode::FAILURE
    }
}
