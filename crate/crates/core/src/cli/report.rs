//! Report and table writers. Floats are written with 17 significant digits.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::sampling::{CountRecord, WeakValueEstimate};
use crate::verify::BornTrial;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// `x` with 17 significant digits.
pub fn sig17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// A float serialized as a JSON number with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Float(pub f64);

impl Serialize for Float {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(sig17(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexOut {
    pub re: Float,
    pub im: Float,
}

impl From<Complex64> for ComplexOut {
    fn from(c: Complex64) -> Self {
        Self {
            re: Float(c.re),
            im: Float(c.im),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateOut {
    pub w: ComplexOut,
    pub se_re: Float,
    pub se_im: Float,
    pub shots_per_setting: u64,
    pub p_post_hat: Float,
}

impl From<&WeakValueEstimate> for EstimateOut {
    fn from(e: &WeakValueEstimate) -> Self {
        Self {
            w: e.w.into(),
            se_re: Float(e.se_re),
            se_im: Float(e.se_im),
            shots_per_setting: e.shots_per_setting,
            p_post_hat: Float(e.p_post_hat),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOut {
    pub replication: usize,
    pub w1: EstimateOut,
    pub w2: EstimateOut,
    pub w12: EstimateOut,
    pub residual: Float,
    pub se_residual: Float,
    pub z_score: Float,
}

impl TrialOut {
    pub fn new(replication: usize, t: &BornTrial) -> Self {
        Self {
            replication,
            w1: (&t.w1).into(),
            w2: (&t.w2).into(),
            w12: (&t.w12).into(),
            residual: Float(t.residual),
            se_residual: Float(t.se_residual),
            z_score: Float(t.z_score),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceOut {
    pub w1: ComplexOut,
    pub w2: ComplexOut,
    pub w12: ComplexOut,
    pub residual: Float,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedEntry {
    pub replication: usize,
    pub run: String,
    pub setting: String,
    pub purpose: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub replications: usize,
    pub median_abs_residual: Float,
    pub median_abs_z: Float,
    pub fraction_abs_z_within_4: Float,
    pub median_se_re_w12: Float,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub wall_clock_seconds: Float,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub artifact_version: String,
    pub mode: String,
    /// The configuration as run, in TOML; feed it back to `run` to replay.
    pub config_toml: String,
    pub master_seed: u64,
    /// Noise-free values from the same state, marks and instrument model.
    pub exact_reference: ReferenceOut,
    pub ideal_reference: ReferenceOut,
    pub trials: Vec<TrialOut>,
    pub summary: Summary,
    pub seed_ledger: Vec<SeedEntry>,
    pub timing: Timing,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn summarize(trials: &[BornTrial]) -> Summary {
    let within = trials.iter().filter(|t| t.z_score.abs() <= 4.0).count();
    Summary {
        replications: trials.len(),
        median_abs_residual: Float(median(trials.iter().map(|t| t.residual.abs()))),
        median_abs_z: Float(median(trials.iter().map(|t| t.z_score.abs()))),
        fraction_abs_z_within_4: Float(within as f64 / trials.len().max(1) as f64),
        median_se_re_w12: Float(median(trials.iter().map(|t| t.w12.se_re))),
    }
}

pub fn counts_csv(records: &[CountRecord]) -> String {
    let mut out = String::from("setting,shots,passed,plus,minus\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.setting, r.shots, r.passed, r.plus_counts, r.minus_counts
        )
        .unwrap();
    }
    out
}

pub fn residuals_csv(trials: &[BornTrial]) -> String {
    let mut out = String::from("replication,residual\n");
    for (i, t) in trials.iter().enumerate() {
        writeln!(out, "{i},{}", sig17(t.residual)).unwrap();
    }
    out
}
