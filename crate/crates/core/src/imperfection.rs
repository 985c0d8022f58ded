//! Instrument-error models: SLM phase error, analyzer misalignment, finite
//! pinhole aperture and dark counts.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{
    apply_coupling, extract_weak_value, postselect_p0, CouplingConfig, ExpectationTriple,
    PrefactorConvention,
};
use crate::qstate::{JointState, MarkSet, PointerState, PositionWavefunction};
use crate::sampling::{
    expectations_from_probabilities, sample_record, Axis, CountRecord, PointerStatistics,
};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImperfectionConfig {
    /// Extra SLM phase on marked cells: the phase becomes `pi + delta`, so
    /// the coupling angle becomes `theta + delta/2`.
    pub slm_phase_error_delta: f64,
    /// Rotation of every analyzer basis about the Bloch Y axis (radians).
    pub analyzer_angle_error: f64,
    /// Momentum bins `|k| <= halfwidth` pass the pinhole.
    pub pinhole_halfwidth: usize,
    /// Per-shot probability of a background click with a random outcome.
    pub dark_rate: f64,
}

impl ImperfectionConfig {
    pub fn is_ideal(&self) -> bool {
        *self == Self::default()
    }

    pub fn validate(&self, n_points: usize) -> Result<()> {
        if !self.slm_phase_error_delta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "slm_phase_error_delta",
                reason: "must be finite".into(),
            });
        }
        if !self.analyzer_angle_error.is_finite() {
            return Err(Error::InvalidParameter {
                name: "analyzer_angle_error",
                reason: "must be finite".into(),
            });
        }
        if !(0.0..1.0).contains(&self.dark_rate) {
            return Err(Error::InvalidParameter {
                name: "dark_rate",
                reason: format!("{} is outside [0, 1)", self.dark_rate),
            });
        }
        check_window(self.pinhole_halfwidth, n_points)
    }

    pub fn effective_theta(&self, theta: f64) -> f64 {
        theta + 0.5 * self.slm_phase_error_delta
    }
}

fn check_window(halfwidth: usize, n_points: usize) -> Result<()> {
    if 2 * halfwidth >= n_points {
        return Err(Error::WindowTooWide {
            halfwidth,
            n_points,
        });
    }
    Ok(())
}

/// Coupling with the SLM phase error folded into the rotation angle.
pub fn apply_coupling_imperfect(
    psi: &PositionWavefunction,
    marks: &MarkSet,
    theta: f64,
    cfg: &ImperfectionConfig,
) -> Result<JointState> {
    let coupling = CouplingConfig::new(cfg.effective_theta(theta), marks.clone())?;
    apply_coupling(psi, &coupling)
}

/// Pointers reaching the detector through a pinhole of the given half-width,
/// one per momentum bin. Bins hit different points of the focal plane, so
/// they combine as an incoherent mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerMixture {
    pub bins: Vec<(isize, PointerState)>,
}

impl PointerMixture {
    pub fn statistics(&self) -> PointerStatistics {
        PointerStatistics::from_mixture(self.bins.iter().map(|(_, p)| p))
    }

    pub fn p_post(&self) -> f64 {
        self.bins.iter().map(|(_, p)| p.norm_sqr()).sum()
    }
}

pub fn postselect_window(joint: &JointState, halfwidth: usize) -> Result<PointerMixture> {
    check_window(halfwidth, joint.grid().n_points())?;
    if halfwidth == 0 {
        return Ok(PointerMixture {
            bins: vec![(0, postselect_p0(joint))],
        });
    }
    let h = halfwidth as isize;
    let bins = (-h..=h).map(|k| (k, joint.project_momentum(k))).collect();
    Ok(PointerMixture { bins })
}

/// Analyzer direction for `setting` after rotating the basis by `angle`
/// about the Bloch Y axis: `X -> cos X - sin Z`, `Z -> cos Z + sin X`.
pub fn misaligned_direction(setting: Axis, angle: f64) -> [f64; 3] {
    let [nx, ny, nz] = setting.direction();
    let (s, c) = angle.sin_cos();
    [c * nx + s * nz, ny, c * nz - s * nx]
}

pub fn measure_with_misalignment(
    pointer: &PointerState,
    setting: Axis,
    angle_error: f64,
    shots: u64,
    seed: u64,
) -> CountRecord {
    measure_statistics(
        &PointerStatistics::from_pointer(pointer),
        setting,
        angle_error,
        shots,
        seed,
    )
}

/// Counting with a misaligned analyzer on arbitrary (possibly mixed) pointer
/// statistics.
pub fn measure_statistics(
    stats: &PointerStatistics,
    setting: Axis,
    angle_error: f64,
    shots: u64,
    seed: u64,
) -> CountRecord {
    let probs = stats.outcome_probabilities(misaligned_direction(setting, angle_error));
    sample_record(setting, probs, shots, seed)
}

/// Adds background clicks among the shots that did not pass the pinhole, each
/// with a fair-coin outcome.
pub fn inject_dark_counts(record: &CountRecord, dark_rate: f64, seed: u64) -> CountRecord {
    if dark_rate <= 0.0 {
        return *record;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idle = record.shots - record.passed;
    let dark = if idle == 0 {
        0
    } else {
        Binomial::new(idle, dark_rate.min(1.0))
            .unwrap()
            .sample(&mut rng)
    };
    let dark_plus = if dark == 0 {
        0
    } else {
        Binomial::new(dark, 0.5).unwrap().sample(&mut rng)
    };
    CountRecord {
        passed: record.passed + dark,
        plus_counts: record.plus_counts + dark_plus,
        minus_counts: record.minus_counts + dark - dark_plus,
        ..*record
    }
}

/// Infinite-shot expectation values seen through the imperfect analyzer and
/// detector, for pointer statistics already shaped by the SLM and pinhole.
pub fn expected_expectations(
    stats: &PointerStatistics,
    cfg: &ImperfectionConfig,
) -> ExpectationTriple {
    let d = cfg.dark_rate;
    let probs: Vec<_> = Axis::ALL
        .iter()
        .map(|&axis| {
            let mut p =
                stats.outcome_probabilities(misaligned_direction(axis, cfg.analyzer_angle_error));
            if d > 0.0 {
                let idle = (1.0 - p.p_pass) * d;
                let pass = p.p_pass + idle;
                p.p_plus = if pass > 0.0 {
                    (p.p_pass * p.p_plus + 0.5 * idle) / pass
                } else {
                    0.5
                };
                p.p_pass = pass;
            }
            (axis, p)
        })
        .collect();
    expectations_from_probabilities(&probs).expect("one entry per axis")
}

/// The weak value the imperfect apparatus would report with unlimited shots.
pub fn expected_weak_value(
    psi: &PositionWavefunction,
    marks: &MarkSet,
    theta: f64,
    cfg: &ImperfectionConfig,
    convention: PrefactorConvention,
) -> Result<Complex64> {
    let joint = apply_coupling_imperfect(psi, marks, theta, cfg)?;
    let mixture = postselect_window(&joint, cfg.pinhole_halfwidth)?;
    let triple = expected_expectations(&mixture.statistics(), cfg);
    extract_weak_value(&triple, psi.zero_momentum_overlap(), convention)
}
