//! Finite-blocklength error probability over jointly coded resource blocks.
//!
//! A user transmitting `L` bits over a set of resource blocks, each carrying
//! `n` channel uses at SNR `γ_r`, fails with probability
//!
//! ```text
//!           ⎛ n·Σ log2(1+γ_r) − L + 0.5·log2(n)·|blocks| ⎞
//! p_e  =  Q ⎜ ─────────────────────────────────────────── ⎟
//!           ⎝           sqrt(n·Σ V(γ_r))                 ⎠
//! ```
//!
//! with `V(γ) = 1 − 1/(1+γ)²` the AWGN channel dispersion and `Q` the standard
//! Gaussian tail. Everything here is a pure function.

use std::f64::consts::{LN_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear-scale signal-to-noise ratio.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Snr(f64);

impl Snr {
    pub const ZERO: Snr = Snr(0.0);

    pub fn new(linear: f64) -> Result<Self> {
        if linear.is_finite() && linear >= 0.0 {
            Ok(Snr(linear))
        } else {
            Err(Error::invalid("snr", format!("{linear} is not a finite non-negative value")))
        }
    }

    /// Panics on a finite input producing a non-finite value, which cannot happen
    /// for `db < 3000`.
    pub fn from_db(db: f64) -> Self {
        let linear = 10f64.powf(db / 10.0);
        assert!(linear.is_finite() && linear >= 0.0, "SNR of {db} dB is out of range");
        Snr(linear)
    }

    pub fn linear(self) -> f64 {
        self.0
    }

    /// `-inf` for a zero SNR.
    pub fn db(self) -> f64 {
        10.0 * self.0.log10()
    }
}

impl TryFrom<f64> for Snr {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Snr::new(value)
    }
}

impl From<Snr> for f64 {
    fn from(snr: Snr) -> f64 {
        snr.0
    }
}

/// Per-user service-level agreement: deliver `payload_bits` with probability at
/// least `reliability`, over blocks of `channel_uses` channel uses each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlaParams {
    #[serde(rename = "L_bits")]
    pub payload_bits: u32,
    #[serde(rename = "theta")]
    pub reliability: f64,
    #[serde(rename = "n")]
    pub channel_uses: u32,
}

impl Default for SlaParams {
    /// 32-byte packets at five nines over 12 subcarriers × 7 symbols.
    fn default() -> Self {
        SlaParams {
            payload_bits: 256,
            reliability: 0.99999,
            channel_uses: 84,
        }
    }
}

impl SlaParams {
    pub fn new(payload_bits: u32, reliability: f64, channel_uses: u32) -> Result<Self> {
        let sla = SlaParams {
            payload_bits,
            reliability,
            channel_uses,
        };
        sla.validate()?;
        Ok(sla)
    }

    pub fn validate(&self) -> Result<()> {
        if self.payload_bits == 0 {
            return Err(Error::invalid("L_bits", "must be at least 1"));
        }
        if !(self.reliability > 0.0 && self.reliability < 1.0) {
            return Err(Error::invalid("theta", format!("{} is not in (0, 1)", self.reliability)));
        }
        if self.channel_uses == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        Ok(())
    }

    /// Largest admissible frame error probability, `1 − θ`.
    pub fn error_budget(&self) -> f64 {
        1.0 - self.reliability
    }
}

/// Gaussian tail probability `Pr(N(0,1) > x)`.
pub fn gaussian_q(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

fn gaussian_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`gaussian_q`] on `(0, 1)`.
pub fn gaussian_q_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", format!("{p} is not in (0, 1)")));
    }
    if p > 0.5 {
        // exact for p in (0.5, 1)
        return Ok(-upper_tail_inverse(1.0 - p));
    }
    Ok(upper_tail_inverse(p))
}

/// Solves `Q(x) = p` for `p <= 0.5` with Newton steps on `ln Q(x) − ln p`,
/// safeguarded by a bisection bracket.
fn upper_tail_inverse(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let target = p.ln();
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    let mut x = 1.0;
    for _ in 0..200 {
        let q = gaussian_q(x);
        if q == 0.0 {
            hi = x;
            x = 0.5 * (lo + hi);
            continue;
        }
        let residual = q.ln() - target;
        if residual > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = -gaussian_pdf(x) / q;
        let mut next = x - residual / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1.0) || hi - lo <= 1e-15 * x.max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

/// AWGN channel dispersion `V(γ) = 1 − 1/(1+γ)²`.
pub fn dispersion(snr: Snr) -> f64 {
    let g = snr.linear();
    // γ(γ+2)/(1+γ)² avoids cancellation near zero
    g * (g + 2.0) / ((1.0 + g) * (1.0 + g))
}

/// Frame error probability of one user jointly coding over the given blocks.
///
/// An empty allocation, or one whose blocks all have zero SNR, carries no
/// information and returns 1.
pub fn frame_error_probability(snrs: &[Snr], sla: &SlaParams) -> f64 {
    match normalized_margin(snrs, sla) {
        Some(z) => gaussian_q(z),
        None => 1.0,
    }
}

/// Argument of `Q` in the error probability, or `None` when the dispersion sum
/// vanishes.
pub(crate) fn normalized_margin(snrs: &[Snr], sla: &SlaParams) -> Option<f64> {
    let n = f64::from(sla.channel_uses);
    let (rate, disp) = snrs.iter().fold((0.0, 0.0), |(rate, disp), s| {
        (rate + s.linear().ln_1p() / LN_2, disp + dispersion(*s))
    });
    if disp <= 0.0 {
        return None;
    }
    let numerator =
        n * rate - f64::from(sla.payload_bits) + 0.5 * n.log2() * snrs.len() as f64;
    Some(numerator / (n * disp).sqrt())
}

/// Default cap on the number of blocks a single user may need.
pub const DEFAULT_BLOCK_CAP: usize = 50;

/// Smallest `d <= d_cap` such that `d` blocks at `snr` meet the SLA, or `None`
/// when no such `d` exists.
pub fn required_blocks(snr: Snr, sla: &SlaParams, d_cap: usize) -> Option<usize> {
    let budget = sla.error_budget();
    let mut blocks = Vec::with_capacity(d_cap);
    for d in 1..=d_cap {
        blocks.push(snr);
        if frame_error_probability(&blocks, sla) <= budget {
            return Some(d);
        }
    }
    None
}

fn uniform_blocks_suffice(snr: Snr, blocks: usize, sla: &SlaParams) -> bool {
    frame_error_probability(&vec![snr; blocks], sla) <= sla.error_budget()
}

/// Search window for [`min_snr_for_d_in`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrSearch {
    pub floor_db: f64,
    pub ceiling_db: f64,
    pub tolerance_db: f64,
}

impl Default for SnrSearch {
    fn default() -> Self {
        SnrSearch {
            floor_db: -20.0,
            ceiling_db: 40.0,
            tolerance_db: 1e-6,
        }
    }
}

/// Minimum SNR `s(d)` such that `d` blocks at that SNR meet the SLA, using the
/// default search window.
pub fn min_snr_for_d(blocks: usize, sla: &SlaParams) -> Result<Snr> {
    min_snr_for_d_in(blocks, sla, &SnrSearch::default())
}

/// Bisection in dB for the threshold `s(d)`. The returned SNR always satisfies
/// the SLA with `d` blocks; it is clamped to the window floor when even the
/// floor suffices.
pub fn min_snr_for_d_in(blocks: usize, sla: &SlaParams, window: &SnrSearch) -> Result<Snr> {
    if blocks == 0 {
        return Err(Error::invalid("d", "must be at least 1"));
    }
    let unreachable = || Error::UnreachableSla {
        blocks,
        floor_db: window.floor_db,
        ceiling_db: window.ceiling_db,
    };
    let (mut lo, mut hi) = (window.floor_db, window.ceiling_db);
    if !uniform_blocks_suffice(Snr::from_db(hi), blocks, sla) {
        return Err(unreachable());
    }
    if uniform_blocks_suffice(Snr::from_db(lo), blocks, sla) {
        return Ok(Snr::from_db(lo));
    }
    while hi - lo > window.tolerance_db {
        let mid = 0.5 * (lo + hi);
        if uniform_blocks_suffice(Snr::from_db(mid), blocks, sla) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Snr::from_db(hi))
}
