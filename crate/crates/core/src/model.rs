//! Frames, users and schedules in both SNR models, plus random scenario
//! generation.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::blocklength::{frame_error_probability, min_snr_for_d, SlaParams, Snr};
use crate::error::{Error, Result};
use crate::seed::{trial_rng, Stream};

/// Per-user, per-block linear SNRs of one frame, stored row-major by user.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrGrid {
    users: usize,
    blocks: usize,
    gamma: Vec<Snr>,
}

impl SnrGrid {
    pub fn new(users: usize, blocks: usize, gamma: Vec<Snr>) -> Result<Self> {
        if gamma.len() != users * blocks {
            return Err(Error::DimensionMismatch(format!(
                "SNR grid has {} entries, expected {users}×{blocks}",
                gamma.len()
            )));
        }
        Ok(SnrGrid { users, blocks, gamma })
    }

    pub fn from_linear(users: usize, blocks: usize, gamma: &[f64]) -> Result<Self> {
        let gamma = gamma.iter().map(|&g| Snr::new(g)).collect::<Result<Vec<_>>>()?;
        SnrGrid::new(users, blocks, gamma)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let blocks = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != blocks) {
            return Err(Error::DimensionMismatch("ragged SNR rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        SnrGrid::from_linear(rows.len(), blocks, &flat)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn snr(&self, user: usize, block: usize) -> Snr {
        self.gamma[user * self.blocks + block]
    }

    pub fn row(&self, user: usize) -> &[Snr] {
        &self.gamma[user * self.blocks..(user + 1) * self.blocks]
    }

    /// Row-major linear values.
    pub fn linear_values(&self) -> Vec<f64> {
        self.gamma.iter().map(|s| s.linear()).collect()
    }
}

/// Binary SNR model instance: activity matrix, demands and utilities.
///
/// A demand of zero is vacuous: such a user is satisfied by an empty
/// allocation. This arises for isolated vertices in the independent-set
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryInstance {
    users: usize,
    blocks: usize,
    active: Vec<bool>,
    demands: Vec<usize>,
    utilities: Vec<f64>,
}

impl BinaryInstance {
    pub fn new(
        users: usize,
        blocks: usize,
        active: Vec<bool>,
        demands: Vec<usize>,
        utilities: Vec<f64>,
    ) -> Result<Self> {
        if active.len() != users * blocks {
            return Err(Error::DimensionMismatch(format!(
                "activity matrix has {} entries, expected {users}×{blocks}",
                active.len()
            )));
        }
        if demands.len() != users || utilities.len() != users {
            return Err(Error::DimensionMismatch(format!(
                "{} demands and {} utilities for {users} users",
                demands.len(),
                utilities.len()
            )));
        }
        if let Some(w) = utilities.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::invalid("utilities", format!("{w} is not a finite non-negative value")));
        }
        Ok(BinaryInstance {
            users,
            blocks,
            active,
            demands,
            utilities,
        })
    }

    /// Builds an instance from per-user activity rows.
    pub fn from_rows(rows: &[Vec<bool>], demands: Vec<usize>, utilities: Vec<f64>) -> Result<Self> {
        let blocks = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != blocks) {
            return Err(Error::DimensionMismatch("ragged activity rows".into()));
        }
        let active = rows.iter().flatten().copied().collect();
        BinaryInstance::new(rows.len(), blocks, active, demands, utilities)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn is_active(&self, user: usize, block: usize) -> bool {
        self.active[user * self.blocks + block]
    }

    pub fn active_blocks(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.active[user * self.blocks..(user + 1) * self.blocks];
        row.iter().enumerate().filter(|(_, a)| **a).map(|(r, _)| r)
    }

    pub fn active_count(&self, user: usize) -> usize {
        self.active_blocks(user).count()
    }

    pub fn demand(&self, user: usize) -> usize {
        self.demands[user]
    }

    pub fn demands(&self) -> &[usize] {
        &self.demands
    }

    pub fn utility(&self, user: usize) -> f64 {
        self.utilities[user]
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }

    pub fn max_demand(&self) -> usize {
        self.demands.iter().copied().max().unwrap_or(0)
    }

    /// Sub-instance on the given users and blocks, in the given order.
    pub fn restrict(&self, users: &[usize], blocks: &[usize]) -> BinaryInstance {
        let active = users
            .iter()
            .flat_map(|&k| blocks.iter().map(move |&r| self.is_active(k, r)))
            .collect();
        BinaryInstance {
            users: users.len(),
            blocks: blocks.len(),
            active,
            demands: users.iter().map(|&k| self.demands[k]).collect(),
            utilities: users.iter().map(|&k| self.utilities[k]).collect(),
        }
    }

    pub(crate) fn check_users(&self, users: &[usize]) -> Result<()> {
        check_user_set(users, self.users)
    }
}

pub(crate) fn check_user_set(users: &[usize], total: usize) -> Result<()> {
    if let Some(k) = users.iter().find(|&&k| k >= total) {
        return Err(Error::DimensionMismatch(format!("user {k} out of range for {total} users")));
    }
    let mut seen = vec![false; total];
    for &k in users {
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::Precondition(format!("user {k} listed twice")));
        }
    }
    Ok(())
}

/// 0/1 assignment of resource blocks to users.
///
/// The matrix form can represent a block shared by two users so that
/// [`verify_schedule`] can reject it; schedules produced by this crate never
/// do that.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "ScheduleRepr", try_from = "ScheduleRepr")]
pub struct Schedule {
    users: usize,
    blocks: usize,
    x: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleRepr {
    #[serde(rename = "K")]
    users: usize,
    #[serde(rename = "R")]
    blocks: usize,
    /// Blocks held by each user.
    assignments: Vec<Vec<usize>>,
}

impl From<Schedule> for ScheduleRepr {
    fn from(s: Schedule) -> Self {
        ScheduleRepr {
            users: s.users,
            blocks: s.blocks,
            assignments: (0..s.users).map(|k| s.blocks_of(k).collect()).collect(),
        }
    }
}

impl TryFrom<ScheduleRepr> for Schedule {
    type Error = Error;

    fn try_from(repr: ScheduleRepr) -> Result<Self> {
        if repr.assignments.len() != repr.users {
            return Err(Error::DimensionMismatch("one assignment list per user expected".into()));
        }
        let mut s = Schedule::empty(repr.users, repr.blocks);
        for (k, blocks) in repr.assignments.iter().enumerate() {
            for &r in blocks {
                if r >= repr.blocks {
                    return Err(Error::DimensionMismatch(format!("block {r} out of range")));
                }
                s.assign(k, r);
            }
        }
        Ok(s)
    }
}

impl Schedule {
    pub fn empty(users: usize, blocks: usize) -> Self {
        Schedule {
            users,
            blocks,
            x: vec![false; users * blocks],
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn assign(&mut self, user: usize, block: usize) {
        self.x[user * self.blocks + block] = true;
    }

    pub fn unassign(&mut self, user: usize, block: usize) {
        self.x[user * self.blocks + block] = false;
    }

    pub fn is_assigned(&self, user: usize, block: usize) -> bool {
        self.x[user * self.blocks + block]
    }

    pub fn blocks_of(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.x[user * self.blocks..(user + 1) * self.blocks];
        row.iter().enumerate().filter(|(_, a)| **a).map(|(r, _)| r)
    }

    pub fn assigned_count(&self, user: usize) -> usize {
        self.blocks_of(user).count()
    }

    /// Number of users holding the block.
    pub fn holders(&self, block: usize) -> usize {
        (0..self.users).filter(|&k| self.is_assigned(k, block)).count()
    }

    pub fn is_used(&self, block: usize) -> bool {
        (0..self.users).any(|k| self.is_assigned(k, block))
    }
}

/// Admission vector, supporting schedule and collected utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionResult {
    pub admitted: Vec<bool>,
    pub schedule: Schedule,
    pub total_utility: f64,
}

impl AdmissionResult {
    pub fn new(admitted: Vec<bool>, schedule: Schedule, utilities: &[f64]) -> Self {
        let total_utility = admitted
            .iter()
            .zip(utilities)
            .filter(|(z, _)| **z)
            .map(|(_, w)| w)
            .sum();
        AdmissionResult {
            admitted,
            schedule,
            total_utility,
        }
    }

    pub fn nobody(users: usize, blocks: usize) -> Self {
        AdmissionResult {
            admitted: vec![false; users],
            schedule: Schedule::empty(users, blocks),
            total_utility: 0.0,
        }
    }

    pub fn admitted_users(&self) -> Vec<usize> {
        self.admitted.iter().enumerate().filter(|(_, z)| **z).map(|(k, _)| k).collect()
    }

    pub fn admitted_count(&self) -> usize {
        self.admitted.iter().filter(|z| **z).count()
    }
}

/// Which SLA constraint a schedule is checked against.
#[derive(Debug, Clone, Copy)]
pub enum SlaModel<'a> {
    /// `Σ_r x[k][r] ≥ d_k` with `x ≤ δ`.
    Binary(&'a BinaryInstance),
    /// Frame error probability at most `1 − θ`.
    Continuous {
        grid: &'a SnrGrid,
        sla: &'a SlaParams,
    },
}

/// Checks that no block is shared and that every user in `users` meets its
/// SLA under `x`. The binary check is pure integer arithmetic.
pub fn verify_schedule(model: SlaModel<'_>, users: &[usize], x: &Schedule) -> Result<bool> {
    let (k_total, r_total) = match model {
        SlaModel::Binary(inst) => (inst.users(), inst.blocks()),
        SlaModel::Continuous { grid, .. } => (grid.users(), grid.blocks()),
    };
    if x.users() != k_total || x.blocks() != r_total {
        return Err(Error::DimensionMismatch(format!(
            "schedule is {}×{}, model is {k_total}×{r_total}",
            x.users(),
            x.blocks()
        )));
    }
    check_user_set(users, k_total)?;
    if (0..r_total).any(|r| x.holders(r) > 1) {
        return Ok(false);
    }
    match model {
        SlaModel::Binary(inst) => {
            let within_activity =
                (0..k_total).all(|k| x.blocks_of(k).all(|r| inst.is_active(k, r)));
            Ok(within_activity && users.iter().all(|&k| x.assigned_count(k) >= inst.demand(k)))
        }
        SlaModel::Continuous { grid, sla } => Ok(users.iter().all(|&k| {
            let snrs: Vec<Snr> = x.blocks_of(k).map(|r| grid.snr(k, r)).collect();
            frame_error_probability(&snrs, sla) <= sla.error_budget()
        })),
    }
}

/// `δ[k][r] = 1` iff `γ[k][r] ≥ threshold_k`.
pub fn binarize(
    grid: &SnrGrid,
    thresholds: &[Snr],
    demands: &[usize],
    utilities: &[f64],
) -> Result<BinaryInstance> {
    if thresholds.len() != grid.users() {
        return Err(Error::DimensionMismatch(format!(
            "{} thresholds for {} users",
            thresholds.len(),
            grid.users()
        )));
    }
    let active = (0..grid.users())
        .flat_map(|k| grid.row(k).iter().map(move |g| *g >= thresholds[k]))
        .collect();
    BinaryInstance::new(grid.users(), grid.blocks(), active, demands.to_vec(), utilities.to_vec())
}

/// Demand bands used in the binary experiments: one block above 12.5 dB mean
/// SNR, three below 4 dB, two in between.
pub fn assign_demand_bands(mean_snr_db: &[f64]) -> Vec<usize> {
    mean_snr_db
        .iter()
        .map(|&db| {
            if db > 12.5 {
                1
            } else if db < 4.0 {
                3
            } else {
                2
            }
        })
        .collect()
}

/// Activity thresholds `s(d_k)`: with them, `d_k` active blocks are exactly
/// enough for user `k`.
pub fn demand_thresholds(demands: &[usize], sla: &SlaParams) -> Result<Vec<Snr>> {
    let mut cache: Vec<Option<Snr>> = Vec::new();
    demands
        .iter()
        .map(|&d| {
            if d == 0 {
                return Ok(Snr::ZERO);
            }
            if cache.len() < d {
                cache.resize(d, None);
            }
            if let Some(s) = cache[d - 1] {
                return Ok(s);
            }
            let s = min_snr_for_d(d, sla)?;
            cache[d - 1] = Some(s);
            Ok(s)
        })
        .collect()
}

/// Large-scale mean SNR of each user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanSnrModel {
    /// Uniform in dB over `[lo, hi]`.
    UniformDb(f64, f64),
    FixedDb(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    /// Exponential(1) power gain per block, i.i.d. over users and blocks.
    #[default]
    Rayleigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityModel {
    #[default]
    Unit,
    /// Uniform on `[0, w_max]`.
    Uniform(f64),
    /// `max(0, log10(mean SNR))`.
    LogMeanSnr,
}

fn default_trials() -> usize {
    1000
}

fn default_mean_snr() -> MeanSnrModel {
    MeanSnrModel::UniformDb(0.0, 20.0)
}

fn default_d_max() -> usize {
    10
}

fn default_exact_cap() -> usize {
    16
}

/// System and experiment parameters. Serialized as the JSON config file read
/// by the CLI; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "R")]
    pub blocks: usize,
    #[serde(default)]
    pub sla: SlaParams,
    #[serde(default = "default_mean_snr")]
    pub mean_snr: MeanSnrModel,
    #[serde(default)]
    pub fading: Fading,
    #[serde(default)]
    pub utility: UtilityModel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Optional list of user counts to sweep; `K` is used when absent.
    #[serde(rename = "K_sweep", default, skip_serializing_if = "Option::is_none")]
    pub user_sweep: Option<Vec<usize>>,
    /// Highest ITA level.
    #[serde(default = "default_d_max")]
    pub d_max: usize,
    /// Largest user count handed to the exact oracle.
    #[serde(default = "default_exact_cap")]
    pub exact_cap: usize,
    /// Record wall-clock runtimes in result rows. Off by default so that
    /// reruns produce identical output.
    #[serde(default)]
    pub record_runtime: bool,
}

impl ScenarioConfig {
    pub fn new(users: usize, blocks: usize) -> Self {
        ScenarioConfig {
            users,
            blocks,
            sla: SlaParams::default(),
            mean_snr: default_mean_snr(),
            fading: Fading::Rayleigh,
            utility: UtilityModel::Unit,
            seed: 0,
            trials: default_trials(),
            user_sweep: None,
            d_max: default_d_max(),
            exact_cap: default_exact_cap(),
            record_runtime: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sla.validate()?;
        match self.mean_snr {
            MeanSnrModel::UniformDb(lo, hi) => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::Config(format!("mean_snr: need finite lo <= hi, got [{lo}, {hi}]")));
                }
            }
            MeanSnrModel::FixedDb(db) if !db.is_finite() => {
                return Err(Error::Config("mean_snr: fixed_db must be finite".into()));
            }
            MeanSnrModel::FixedDb(_) => {}
        }
        if let UtilityModel::Uniform(w_max) = self.utility {
            if !(w_max.is_finite() && w_max >= 0.0) {
                return Err(Error::Config(format!("utility: uniform bound {w_max} must be >= 0")));
            }
        }
        if self.trials == 0 {
            return Err(Error::Config("trials: must be at least 1".into()));
        }
        if self.d_max == 0 {
            return Err(Error::Config("d_max: must be at least 1".into()));
        }
        Ok(())
    }

    /// Parses and validates a JSON config.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ScenarioConfig::from_json(&text).map_err(|e| match e {
            Error::Json(source) => Error::Config(format!("{}: {source}", path.display())),
            other => other,
        })
    }

    /// User counts covered by a run.
    pub fn user_counts(&self) -> Vec<usize> {
        self.user_sweep.clone().unwrap_or_else(|| vec![self.users])
    }

    pub fn with_users(&self, users: usize) -> Self {
        ScenarioConfig {
            users,
            user_sweep: None,
            ..self.clone()
        }
    }
}

/// One generated frame with the user statistics that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub grid: SnrGrid,
    pub mean_snr_db: Vec<f64>,
    pub utilities: Vec<f64>,
}

/// Draws the frame for `trial_index`. Deterministic in `(cfg.seed, trial_index)`.
pub fn generate_trial(cfg: &ScenarioConfig, trial_index: u64) -> Trial {
    let mut rng = trial_rng(cfg.seed, trial_index, Stream::Grid);
    let mean_snr_db: Vec<f64> = (0..cfg.users)
        .map(|_| match cfg.mean_snr {
            MeanSnrModel::UniformDb(lo, hi) => lo + (hi - lo) * rng.random::<f64>(),
            MeanSnrModel::FixedDb(db) => db,
        })
        .collect();
    let mut gamma = Vec::with_capacity(cfg.users * cfg.blocks);
    for &db in &mean_snr_db {
        let mean = Snr::from_db(db).linear();
        for _ in 0..cfg.blocks {
            let fade: f64 = match cfg.fading {
                Fading::Rayleigh => rng.sample(Exp1),
            };
            gamma.push(Snr::new(mean * fade).expect("fading keeps SNR finite and non-negative"));
        }
    }
    let mut urng = trial_rng(cfg.seed, trial_index, Stream::Utilities);
    let utilities = mean_snr_db
        .iter()
        .map(|&db| match cfg.utility {
            UtilityModel::Unit => 1.0,
            UtilityModel::Uniform(w_max) => w_max * urng.random::<f64>(),
            UtilityModel::LogMeanSnr => (db / 10.0).max(0.0),
        })
        .collect();
    Trial {
        grid: SnrGrid::new(cfg.users, cfg.blocks, gamma).expect("dimensions match by construction"),
        mean_snr_db,
        utilities,
    }
}

pub fn generate_snr_grid(cfg: &ScenarioConfig, trial_index: u64) -> SnrGrid {
    generate_trial(cfg, trial_index).grid
}

/// JSON fixture exchanged with the CLI and golden tests. Matrices are flat and
/// row-major by user; absent sections are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "R")]
    pub blocks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demands: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sla: Option<SlaParams>,
}

impl InstanceFile {
    pub fn from_binary(inst: &BinaryInstance) -> Self {
        InstanceFile {
            users: inst.users(),
            blocks: inst.blocks(),
            gamma: None,
            delta: Some(inst.active.iter().map(|&a| u8::from(a)).collect()),
            demands: Some(inst.demands.clone()),
            utilities: Some(inst.utilities.clone()),
            sla: None,
        }
    }

    pub fn from_grid(grid: &SnrGrid, utilities: &[f64], sla: &SlaParams) -> Self {
        InstanceFile {
            users: grid.users(),
            blocks: grid.blocks(),
            gamma: Some(grid.linear_values()),
            delta: None,
            demands: None,
            utilities: Some(utilities.to_vec()),
            sla: Some(*sla),
        }
    }

    pub fn grid(&self) -> Result<SnrGrid> {
        let gamma = self.gamma.as_ref().ok_or_else(|| Error::Config("instance has no `gamma`".into()))?;
        SnrGrid::from_linear(self.users, self.blocks, gamma)
    }

    /// Utilities, defaulting to one per user.
    pub fn utilities(&self) -> Vec<f64> {
        self.utilities.clone().unwrap_or_else(|| vec![1.0; self.users])
    }

    pub fn sla(&self) -> Result<SlaParams> {
        let sla = self.sla.unwrap_or_default();
        sla.validate()?;
        Ok(sla)
    }

    pub fn binary(&self) -> Result<BinaryInstance> {
        let delta = self.delta.as_ref().ok_or_else(|| Error::Config("instance has no `delta`".into()))?;
        if let Some(v) = delta.iter().find(|&&v| v > 1) {
            return Err(Error::invalid("delta", format!("entry {v} is not 0 or 1")));
        }
        let demands = self.demands.clone().ok_or_else(|| Error::Config("instance has no `demands`".into()))?;
        BinaryInstance::new(
            self.users,
            self.blocks,
            delta.iter().map(|&v| v == 1).collect(),
            demands,
            self.utilities(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}
