//! Seeded Monte-Carlo comparisons, CSV persistence and summary statistics.
//!
//! Trials run in parallel, each drawing from RNG streams derived from
//! `(seed, trial)`, and rows come out ordered by user count, trial and
//! algorithm whatever the scheduling. Every schedule is re-verified before
//! its row is emitted.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admission::{exact_uum_capped, greedy_admission};
use crate::continuous::{baseline_greedy_continuous, ita_traced, level_thresholds};
use crate::error::{Error, Result};
use crate::model::{
    assign_demand_bands, binarize, demand_thresholds, generate_trial, verify_schedule, AdmissionResult,
    ScenarioConfig, SlaModel,
};
use crate::seed::{trial_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Greedy,
    Exact,
    Ita,
    Baseline,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Greedy => "greedy",
            Algorithm::Exact => "exact",
            Algorithm::Ita => "ita",
            Algorithm::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentMode {
    Binary,
    Continuous,
}

impl FromStr for ExperimentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(ExperimentMode::Binary),
            "continuous" => Ok(ExperimentMode::Continuous),
            other => Err(Error::invalid("mode", format!("expected binary or continuous, got {other:?}"))),
        }
    }
}

/// One algorithm on one trial. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResultRow {
    pub trial: u64,
    pub algorithm: Algorithm,
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "R")]
    pub blocks: usize,
    pub admitted_count: usize,
    pub total_utility: f64,
    pub runtime_us: u64,
    pub seed: u64,
}

pub const CSV_HEADER: [&str; 8] =
    ["trial", "algorithm", "K", "R", "admitted_count", "total_utility", "runtime_us", "seed"];

fn timed<T>(record: bool, f: impl FnOnce() -> Result<T>) -> Result<(T, u64)> {
    let start = Instant::now();
    let out = f()?;
    let us = if record { start.elapsed().as_micros() as u64 } else { 0 };
    Ok((out, us))
}

fn row(cfg: &ScenarioConfig, trial: u64, algorithm: Algorithm, res: &AdmissionResult, runtime_us: u64) -> ExperimentResultRow {
    ExperimentResultRow {
        trial,
        algorithm,
        users: cfg.users,
        blocks: cfg.blocks,
        admitted_count: res.admitted_count(),
        total_utility: res.total_utility,
        runtime_us,
        seed: cfg.seed,
    }
}

fn ensure_valid(ok: bool, algorithm: Algorithm, trial: u64) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Inconsistent(format!("{algorithm} produced an invalid schedule in trial {trial}")))
    }
}

/// Runs `per_trial` for every user count and trial, in parallel, keeping
/// rows in (user count, trial) order.
fn sweep<F>(cfg: &ScenarioConfig, per_trial: F) -> Result<Vec<ExperimentResultRow>>
where
    F: Fn(&ScenarioConfig, u64) -> Result<Vec<ExperimentResultRow>> + Sync,
{
    cfg.validate()?;
    let mut rows = Vec::new();
    for users in cfg.user_counts() {
        let cfg = cfg.with_users(users);
        let chunks: Vec<Vec<ExperimentResultRow>> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| per_trial(&cfg, t))
            .collect::<Result<_>>()?;
        rows.extend(chunks.into_iter().flatten());
    }
    Ok(rows)
}

/// Binary-model comparison of GREEDY against the exact optimum.
///
/// Per trial: draw the frame, assign demand bands from the mean SNRs,
/// binarize at `s(d_k)`, then run GREEDY and, when `K ≤ exact_cap`, the
/// exact oracle.
pub fn run_binary_experiment(cfg: &ScenarioConfig) -> Result<Vec<ExperimentResultRow>> {
    let band_thresholds = demand_thresholds(&[1, 2, 3], &cfg.sla)?;
    sweep(cfg, |cfg, t| {
        let trial = generate_trial(cfg, t);
        let demands = assign_demand_bands(&trial.mean_snr_db);
        let thresholds: Vec<_> = demands.iter().map(|&d| band_thresholds[d - 1]).collect();
        let inst = binarize(&trial.grid, &thresholds, &demands, &trial.utilities)?;
        let mut rng = trial_rng(cfg.seed, t, Stream::Algorithm);

        let (greedy, us) = timed(cfg.record_runtime, || Ok(greedy_admission(&inst, &mut rng).0))?;
        ensure_valid(
            verify_schedule(SlaModel::Binary(&inst), &greedy.admitted_users(), &greedy.schedule)?,
            Algorithm::Greedy,
            t,
        )?;
        let mut rows = vec![row(cfg, t, Algorithm::Greedy, &greedy, us)];
        if cfg.users <= cfg.exact_cap {
            let (exact, us) = timed(cfg.record_runtime, || exact_uum_capped(&inst, cfg.exact_cap))?;
            ensure_valid(
                verify_schedule(SlaModel::Binary(&inst), &exact.admitted_users(), &exact.schedule)?,
                Algorithm::Exact,
                t,
            )?;
            rows.push(row(cfg, t, Algorithm::Exact, &exact, us));
        }
        Ok(rows)
    })
}

/// Continuous-model comparison of ITA against the random-placement baseline
/// on the same frame.
pub fn run_continuous_experiment(cfg: &ScenarioConfig) -> Result<Vec<ExperimentResultRow>> {
    let thresholds = level_thresholds(&cfg.sla, cfg.d_max)?;
    sweep(cfg, |cfg, t| {
        let trial = generate_trial(cfg, t);
        let model = SlaModel::Continuous { grid: &trial.grid, sla: &cfg.sla };

        let mut rng = trial_rng(cfg.seed, t, Stream::Algorithm);
        let (ita, ita_us) = timed(cfg.record_runtime, || {
            ita_traced(&trial.grid, &trial.utilities, &thresholds, &mut rng).map(|(res, _)| res)
        })?;
        ensure_valid(verify_schedule(model, &ita.admitted_users(), &ita.schedule)?, Algorithm::Ita, t)?;

        let mut rng = trial_rng(cfg.seed, t, Stream::Baseline);
        let (base, base_us) = timed(cfg.record_runtime, || {
            baseline_greedy_continuous(&trial.grid, &trial.utilities, &cfg.sla, &mut rng)
        })?;
        ensure_valid(verify_schedule(model, &base.admitted_users(), &base.schedule)?, Algorithm::Baseline, t)?;

        Ok(vec![
            row(cfg, t, Algorithm::Ita, &ita, ita_us),
            row(cfg, t, Algorithm::Baseline, &base, base_us),
        ])
    })
}

pub fn run_experiment(cfg: &ScenarioConfig, mode: ExperimentMode) -> Result<Vec<ExperimentResultRow>> {
    match mode {
        ExperimentMode::Binary => run_binary_experiment(cfg),
        ExperimentMode::Continuous => run_continuous_experiment(cfg),
    }
}

/// Statistics of one algorithm at one `(K, R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "R")]
    pub blocks: usize,
    pub trials: usize,
    pub mean_admitted: f64,
    pub std_admitted: f64,
    pub mean_utility: f64,
    pub std_utility: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryStats {
    /// Ordered by `R`, then `K`, then algorithm.
    pub groups: Vec<AlgorithmSummary>,
}

impl SummaryStats {
    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn get(&self, algorithm: Algorithm, users: usize, blocks: usize) -> Option<&AlgorithmSummary> {
        self.groups
            .iter()
            .find(|g| g.algorithm == algorithm && g.users == users && g.blocks == blocks)
    }

    /// Mean admitted count of `num` over that of `den` at `(K, R)`; `None`
    /// unless both exist and the denominator mean is positive.
    pub fn admitted_ratio(&self, num: Algorithm, den: Algorithm, users: usize, blocks: usize) -> Option<f64> {
        let n = self.get(num, users, blocks)?;
        let d = self.get(den, users, blocks)?;
        (d.mean_admitted > 0.0).then(|| n.mean_admitted / d.mean_admitted)
    }

    pub fn ita_baseline_ratio(&self, users: usize, blocks: usize) -> Option<f64> {
        self.admitted_ratio(Algorithm::Ita, Algorithm::Baseline, users, blocks)
    }
}

/// Mean and sample standard deviation (zero for fewer than two values).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

pub fn summarize(rows: &[ExperimentResultRow]) -> SummaryStats {
    type Key = (usize, usize, Algorithm);
    let mut groups: BTreeMap<Key, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let entry = groups.entry((r.blocks, r.users, r.algorithm)).or_default();
        entry.0.push(r.admitted_count as f64);
        entry.1.push(r.total_utility);
    }
    let groups = groups
        .into_iter()
        .map(|((blocks, users, algorithm), (admitted, utility))| {
            let (mean_admitted, std_admitted) = mean_std(&admitted);
            let (mean_utility, std_utility) = mean_std(&utility);
            AlgorithmSummary {
                algorithm,
                users,
                blocks,
                trials: admitted.len(),
                mean_admitted,
                std_admitted,
                mean_utility,
                std_utility,
            }
        })
        .collect();
    SummaryStats { groups }
}

/// Writes rows as CSV (header always present, LF line endings).
pub fn write_csv_to<W: Write>(rows: &[ExperimentResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn to_csv_string(rows: &[ExperimentResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv_to(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV writer emits UTF-8"))
}

pub fn write_csv(rows: &[ExperimentResultRow], path: &Path) -> Result<()> {
    fs::write(path, to_csv_string(rows)?).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<ExperimentResultRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<Vec<ExperimentResultRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Plot-ready long table: one line per `(R, K, algorithm)`.
pub fn plot_data_string(stats: &SummaryStats) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record([
        "R",
        "K",
        "algorithm",
        "trials",
        "mean_admitted",
        "std_admitted",
        "mean_utility",
        "std_utility",
    ])?;
    for g in &stats.groups {
        w.write_record([
            g.blocks.to_string(),
            g.users.to_string(),
            g.algorithm.to_string(),
            g.trials.to_string(),
            g.mean_admitted.to_string(),
            g.std_admitted.to_string(),
            g.mean_utility.to_string(),
            g.std_utility.to_string(),
        ])?;
    }
    let buf = w.into_inner().map_err(|e| Error::Inconsistent(e.to_string()))?;
    Ok(String::from_utf8(buf).expect("CSV writer emits UTF-8"))
}

pub fn emit_plot_data(stats: &SummaryStats, path: &Path) -> Result<()> {
    fs::write(path, plot_data_string(stats)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_row(trial: u64, algorithm: Algorithm, admitted: usize, utility: f64) -> ExperimentResultRow {
        ExperimentResultRow {
            trial,
            algorithm,
            users: 4,
            blocks: 10,
            admitted_count: admitted,
            total_utility: utility,
            runtime_us: 0,
            seed: 7,
        }
    }

    #[test]
    fn empty_rows() {
        assert!(summarize(&[]).is_empty());
        assert_eq!(to_csv_string(&[]).unwrap(), "trial,algorithm,K,R,admitted_count,total_utility,runtime_us,seed\n");
        assert_eq!(parse_csv(&to_csv_string(&[]).unwrap()).unwrap(), vec![]);
    }

    #[test]
    fn hand_computed_summary() {
        let rows = vec![
            hand_row(0, Algorithm::Ita, 2, 2.0),
            hand_row(1, Algorithm::Ita, 4, 3.0),
            hand_row(0, Algorithm::Baseline, 3, 1.5),
        ];
        let s = summarize(&rows);
        let ita = s.get(Algorithm::Ita, 4, 10).unwrap();
        assert_eq!(ita.trials, 2);
        assert_eq!(ita.mean_admitted, 3.0);
        assert!((ita.std_admitted - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(ita.mean_utility, 2.5);
        let base = s.get(Algorithm::Baseline, 4, 10).unwrap();
        assert_eq!((base.mean_admitted, base.std_admitted), (3.0, 0.0));
        assert_eq!(s.ita_baseline_ratio(4, 10), Some(1.0));
        assert_eq!(s.ita_baseline_ratio(5, 10), None);
    }

    #[test]
    fn ratio_undefined_for_empty_baseline() {
        let s = summarize(&[hand_row(0, Algorithm::Ita, 1, 1.0), hand_row(0, Algorithm::Baseline, 0, 0.0)]);
        assert_eq!(s.ita_baseline_ratio(4, 10), None);
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let rows = vec![hand_row(0, Algorithm::Greedy, 2, 0.1 + 0.2), hand_row(0, Algorithm::Exact, 3, 1e-300)];
        let text = to_csv_string(&rows).unwrap();
        assert!(text.starts_with("trial,algorithm,K,R,admitted_count,total_utility,runtime_us,seed\n0,greedy,4,10,2,"));
        assert!(!text.contains('\r'));
        assert_eq!(parse_csv(&text).unwrap(), rows);
    }

    #[test]
    fn plot_data_layout() {
        let s = summarize(&[hand_row(0, Algorithm::Ita, 2, 2.0)]);
        assert_eq!(
            plot_data_string(&s).unwrap(),
            "R,K,algorithm,trials,mean_admitted,std_admitted,mean_utility,std_utility\n10,4,ita,1,2,0,2,0\n"
        );
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("binary".parse::<ExperimentMode>().unwrap(), ExperimentMode::Binary);
        assert!("both".parse::<ExperimentMode>().is_err());
    }

    #[test]
    fn zero_users_admit_nobody() {
        let cfg = ScenarioConfig { trials: 3, ..ScenarioConfig::new(0, 5) };
        for rows in [run_binary_experiment(&cfg).unwrap(), run_continuous_experiment(&cfg).unwrap()] {
            assert_eq!(rows.len(), 6);
            assert!(rows.iter().all(|r| r.admitted_count == 0 && r.total_utility == 0.0));
        }
    }

    #[test]
    fn rows_are_ordered_and_paired() {
        let cfg = ScenarioConfig { trials: 5, user_sweep: Some(vec![3, 6]), ..ScenarioConfig::new(0, 8) };
        let rows = run_continuous_experiment(&cfg).unwrap();
        let keys: Vec<(usize, u64, Algorithm)> = rows.iter().map(|r| (r.users, r.trial, r.algorithm)).collect();
        let expected: Vec<(usize, u64, Algorithm)> = [3, 6]
            .into_iter()
            .flat_map(|k| (0..5).flat_map(move |t| [(k, t, Algorithm::Ita), (k, t, Algorithm::Baseline)]))
            .collect();
        assert_eq!(keys, expected);
    }

    #[test]
    fn runtime_column_is_zero_unless_requested() {
        let cfg = ScenarioConfig { trials: 2, ..ScenarioConfig::new(4, 6) };
        assert!(run_binary_experiment(&cfg).unwrap().iter().all(|r| r.runtime_us == 0));
    }

    #[test]
    fn exact_is_skipped_above_cap() {
        let cfg = ScenarioConfig { trials: 2, exact_cap: 3, ..ScenarioConfig::new(4, 6) };
        assert!(run_binary_experiment(&cfg).unwrap().iter().all(|r| r.algorithm == Algorithm::Greedy));
    }
}
