//! Monte-Carlo photon counting behind the pinhole and the polarization
//! analyzer, plus the estimators built from the resulting tallies.
//!
//! Shots are drawn in fixed-size chunks, each with its own ChaCha stream
//! keyed by the chunk index. A record is the field-wise sum of its chunks, so
//! the result does not depend on how chunks are spread across workers.
//!
//! Analyzer settings in the optical picture (pointer `|0>` = diagonal
//! polarization, prepared from `|H>` by a half-wave plate at 22.5 deg):
//! `Z` separates diagonal/anti-diagonal, `X` separates `H`/`V`, `Y` separates
//! the two circular polarizations (quarter-wave plate in front of the PBS).

use std::fmt;
use std::ops::Range;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{extract_weak_value, ExpectationTriple, PrefactorConvention};
use crate::qstate::PointerState;

/// Shots per independently seeded chunk.
pub const CHUNK_SHOTS: u64 = 1 << 16;

/// Resample count used when bootstrap errors are requested without a count.
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// Bloch direction of the `+1` outcome. For `Z` that outcome is `|0>`.
    pub fn direction(self) -> [f64; 3] {
        match self {
            Axis::X => [1.0, 0.0, 0.0],
            Axis::Y => [0.0, 1.0, 0.0],
            Axis::Z => [0.0, 0.0, 1.0],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Unnormalized pointer statistics: pass probability and Bloch vector scaled
/// by it. Incoherent mixtures of pointers add field-wise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointerStatistics {
    pub p_post: f64,
    pub bloch: [f64; 3],
}

impl PointerStatistics {
    pub fn from_pointer(pointer: &PointerState) -> Self {
        Self {
            p_post: pointer.norm_sqr(),
            bloch: pointer.bloch(),
        }
    }

    pub fn from_mixture<'a>(pointers: impl IntoIterator<Item = &'a PointerState>) -> Self {
        pointers.into_iter().fold(
            Self {
                p_post: 0.0,
                bloch: [0.0; 3],
            },
            |acc, p| {
                let s = Self::from_pointer(p);
                Self {
                    p_post: acc.p_post + s.p_post,
                    bloch: [
                        acc.bloch[0] + s.bloch[0],
                        acc.bloch[1] + s.bloch[1],
                        acc.bloch[2] + s.bloch[2],
                    ],
                }
            },
        )
    }

    /// Pass probability and `P(+1 | pass)` for a projective measurement along
    /// the unit vector `direction`.
    pub fn outcome_probabilities(&self, direction: [f64; 3]) -> OutcomeProbabilities {
        let p_pass = self.p_post.clamp(0.0, 1.0);
        if self.p_post <= 0.0 {
            return OutcomeProbabilities {
                p_pass: 0.0,
                p_plus: 0.5,
            };
        }
        let along: f64 = direction.iter().zip(&self.bloch).map(|(n, r)| n * r).sum();
        let p_plus = ((self.p_post + along) / (2.0 * self.p_post)).clamp(0.0, 1.0);
        OutcomeProbabilities { p_pass, p_plus }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeProbabilities {
    /// Probability a photon passes the pinhole.
    pub p_pass: f64,
    /// Probability of the `+1` outcome given that it passed.
    pub p_plus: f64,
}

/// Tallies for one analyzer setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: Axis,
    pub shots: u64,
    pub passed: u64,
    pub plus_counts: u64,
    pub minus_counts: u64,
}

impl CountRecord {
    pub fn empty(setting: Axis) -> Self {
        Self {
            setting,
            shots: 0,
            passed: 0,
            plus_counts: 0,
            minus_counts: 0,
        }
    }

    /// Field-wise sum of two batches taken with the same setting.
    pub fn merge(&self, other: &CountRecord) -> Result<CountRecord> {
        if self.setting != other.setting {
            return Err(Error::IncompleteRecords);
        }
        Ok(CountRecord {
            setting: self.setting,
            shots: self.shots + other.shots,
            passed: self.passed + other.passed,
            plus_counts: self.plus_counts + other.plus_counts,
            minus_counts: self.minus_counts + other.minus_counts,
        })
    }

    /// Mean of the `+-1` outcome among passed photons.
    pub fn conditional_mean(&self) -> f64 {
        if self.passed == 0 {
            return 0.0;
        }
        (self.plus_counts as f64 - self.minus_counts as f64) / self.passed as f64
    }

    pub fn minus_rate(&self) -> f64 {
        if self.passed == 0 {
            return 0.0;
        }
        self.minus_counts as f64 / self.passed as f64
    }
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("probability clamped to [0, 1]")
        .sample(rng)
}

fn chunk_count(shots: u64) -> u64 {
    shots.div_ceil(CHUNK_SHOTS)
}

fn sample_chunk(
    setting: Axis,
    probs: OutcomeProbabilities,
    shots: u64,
    seed: u64,
    chunk: u64,
) -> CountRecord {
    let start = chunk * CHUNK_SHOTS;
    let n = shots.saturating_sub(start).min(CHUNK_SHOTS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let passed = binomial(&mut rng, n, probs.p_pass);
    let plus = binomial(&mut rng, passed, probs.p_plus);
    CountRecord {
        setting,
        shots: n,
        passed,
        plus_counts: plus,
        minus_counts: passed - plus,
    }
}

/// Draws the chunks in `chunks` of a `shots`-photon run.
pub fn sample_chunks(
    setting: Axis,
    probs: OutcomeProbabilities,
    shots: u64,
    seed: u64,
    chunks: Range<u64>,
) -> CountRecord {
    chunks
        .map(|c| sample_chunk(setting, probs, shots, seed, c))
        .fold(CountRecord::empty(setting), |acc, r| {
            acc.merge(&r).expect("same setting")
        })
}

pub fn sample_record(
    setting: Axis,
    probs: OutcomeProbabilities,
    shots: u64,
    seed: u64,
) -> CountRecord {
    sample_chunks(setting, probs, shots, seed, 0..chunk_count(shots))
}

/// Same as [`sample_record`], with chunks spread over the current rayon pool.
pub fn sample_record_parallel(
    setting: Axis,
    probs: OutcomeProbabilities,
    shots: u64,
    seed: u64,
) -> CountRecord {
    (0..chunk_count(shots))
        .into_par_iter()
        .map(|c| sample_chunk(setting, probs, shots, seed, c))
        .reduce(
            || CountRecord::empty(setting),
            |a, b| a.merge(&b).expect("same setting"),
        )
}

/// Sends `shots` photons with post-selected pointer `pointer` through the
/// pinhole and an ideal analyzer set to `setting`.
pub fn simulate_counts(
    pointer: &PointerState,
    setting: Axis,
    shots: u64,
    seed: u64,
) -> CountRecord {
    let probs = PointerStatistics::from_pointer(pointer).outcome_probabilities(setting.direction());
    sample_record(setting, probs, shots, seed)
}

/// Shared by the count estimator and its infinite-shot limit. `p_post` is the
/// pooled pass rate; the means are conditional on passing.
fn triple_from_rates(
    p_post: f64,
    mean_x: f64,
    mean_y: f64,
    minus_rate_z: f64,
) -> ExpectationTriple {
    ExpectationTriple {
        sx: p_post * mean_x,
        sy: p_post * mean_y,
        p1: p_post * minus_rate_z,
        p_post,
    }
}

fn by_axis<T: Copy>(items: &[T], axis_of: impl Fn(&T) -> Axis) -> Result<[T; 3]> {
    let mut out: [Option<T>; 3] = [None; 3];
    for item in items {
        let slot = &mut out[axis_of(item) as usize];
        if slot.is_some() {
            return Err(Error::IncompleteRecords);
        }
        *slot = Some(*item);
    }
    match out {
        [Some(x), Some(y), Some(z)] => Ok([x, y, z]),
        _ => Err(Error::IncompleteRecords),
    }
}

/// Unnormalized-convention expectations from one record per axis.
pub fn estimate_expectations(records: &[CountRecord]) -> Result<ExpectationTriple> {
    let [x, y, z] = by_axis(records, |r| r.setting)?;
    if x.shots != y.shots || x.shots != z.shots || x.shots == 0 {
        return Err(Error::IncompleteRecords);
    }
    let total_shots = (x.shots + y.shots + z.shots) as f64;
    let p_post = (x.passed + y.passed + z.passed) as f64 / total_shots;
    if p_post > 0.0 {
        if let Some(r) = [x, y, z].iter().find(|r| r.passed == 0) {
            return Err(Error::InsufficientCounts(r.setting));
        }
    }
    Ok(triple_from_rates(
        p_post,
        x.conditional_mean(),
        y.conditional_mean(),
        z.minus_rate(),
    ))
}

/// The infinite-shot limit of [`estimate_expectations`].
pub fn expectations_from_probabilities(
    probs: &[(Axis, OutcomeProbabilities)],
) -> Result<ExpectationTriple> {
    let [(_, x), (_, y), (_, z)] = by_axis(probs, |(a, _)| *a)?;
    let p_post = (x.p_pass + y.p_pass + z.p_pass) / 3.0;
    Ok(triple_from_rates(
        p_post,
        2.0 * x.p_plus - 1.0,
        2.0 * y.p_plus - 1.0,
        1.0 - z.p_plus,
    ))
}

/// How standard errors of a weak-value estimate are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SeMethod {
    /// First-order propagation of binomial variances.
    #[default]
    DeltaMethod,
    /// Parametric bootstrap over the observed counts.
    Bootstrap { resamples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakValueEstimate {
    pub w: Complex64,
    pub se_re: f64,
    pub se_im: f64,
    pub shots_per_setting: u64,
    pub p_post_hat: f64,
}

impl WeakValueEstimate {
    /// A value known without sampling error.
    pub fn exact(w: Complex64, p_post: f64) -> Self {
        Self {
            w,
            se_re: 0.0,
            se_im: 0.0,
            shots_per_setting: 0,
            p_post_hat: p_post,
        }
    }
}

pub fn estimate_weak_value(
    records: &[CountRecord],
    overlap: Complex64,
    convention: PrefactorConvention,
    se_method: SeMethod,
) -> Result<WeakValueEstimate> {
    let triple = estimate_expectations(records)?;
    let w = extract_weak_value(&triple, overlap, convention)?;
    let [x, y, z] = by_axis(records, |r| r.setting)?;
    let f = convention.prefactor(overlap);
    let (se_re, se_im) = match se_method {
        SeMethod::DeltaMethod => delta_method_se(&x, &y, &z, f),
        SeMethod::Bootstrap { resamples, seed } => {
            bootstrap_se(&[x, y, z], overlap, convention, resamples, seed)
        }
    };
    Ok(WeakValueEstimate {
        w,
        se_re,
        se_im,
        shots_per_setting: x.shots,
        p_post_hat: triple.p_post,
    })
}

// Re W = f p (m_x + 2 q_z), Im W = f p m_y with p the pooled pass rate, m the
// conditional +-1 means and q_z the |1> rate. Conditional means are
// uncorrelated with the pass counts, so the variances add.
fn delta_method_se(x: &CountRecord, y: &CountRecord, z: &CountRecord, f: f64) -> (f64, f64) {
    let total = (x.shots + y.shots + z.shots) as f64;
    let p = (x.passed + y.passed + z.passed) as f64 / total;
    let var_p = p * (1.0 - p) / total;
    let mx = x.conditional_mean();
    let my = y.conditional_mean();
    let q = z.minus_rate();
    let var_mean = |m: f64, n: u64| {
        if n == 0 {
            0.0
        } else {
            (1.0 - m * m) / n as f64
        }
    };
    let var_mx = var_mean(mx, x.passed);
    let var_my = var_mean(my, y.passed);
    let var_q = if z.passed == 0 {
        0.0
    } else {
        q * (1.0 - q) / z.passed as f64
    };

    let re_core = mx + 2.0 * q;
    let var_re = re_core * re_core * var_p + p * p * (var_mx + 4.0 * var_q);
    let var_im = my * my * var_p + p * p * var_my;
    (
        f.abs() * var_re.max(0.0).sqrt(),
        f.abs() * var_im.max(0.0).sqrt(),
    )
}

fn bootstrap_se(
    records: &[CountRecord; 3],
    overlap: Complex64,
    convention: PrefactorConvention,
    resamples: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let resampled: Vec<CountRecord> = records
            .iter()
            .map(|r| {
                let p_pass = r.passed as f64 / r.shots as f64;
                let passed = binomial(&mut rng, r.shots, p_pass);
                let p_plus = if r.passed == 0 {
                    0.5
                } else {
                    r.plus_counts as f64 / r.passed as f64
                };
                let plus = binomial(&mut rng, passed, p_plus);
                CountRecord {
                    setting: r.setting,
                    shots: r.shots,
                    passed,
                    plus_counts: plus,
                    minus_counts: passed - plus,
                }
            })
            .collect();
        // degenerate resamples carry no estimate
        if let Ok(w) = estimate_expectations(&resampled)
            .and_then(|t| extract_weak_value(&t, overlap, convention))
        {
            draws.push(w);
        }
    }
    let sd = |vals: Vec<f64>| {
        let n = vals.len();
        if n < 2 {
            return 0.0;
        }
        let mean = vals.iter().sum::<f64>() / n as f64;
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    (
        sd(draws.iter().map(|w| w.re).collect()),
        sd(draws.iter().map(|w| w.im).collect()),
    )
}
