//! Noise-free measurement pipeline: coupling, zero-momentum post-selection,
//! pointer expectation values and weak-value extraction.
//!
//! The coupling `H = theta * sum_i |x_i><x_i| (x) sigma_y` rotates the pointer
//! by `R(theta) = exp(-i theta sigma_y)` on marked cells, with
//! `sigma_y |0> = i |1>` so that `R(theta)|0> = cos(theta)|0> + sin(theta)|1>`.
//! At `theta = pi/2` marked cells carry `|1>`, equivalently
//! `|0> - sqrt(2)|->`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{
    JointState, MarkSet, PointerState, PositionWavefunction, DEGENERACY_THRESHOLD,
};

/// Post-selection probabilities at or below this are rejected by extraction.
pub const MIN_POST_SELECTION_PROBABILITY: f64 = 1e-15;

/// The full-flip coupling strength.
pub const FULL_FLIP_THETA: f64 = FRAC_PI_2;

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingConfig {
    theta: f64,
    marks: MarkSet,
}

impl CouplingConfig {
    pub fn new(theta: f64, marks: MarkSet) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::ThetaOutOfRange(theta));
        }
        Ok(Self { theta, marks })
    }

    pub fn full_flip(marks: MarkSet) -> Self {
        Self {
            theta: FULL_FLIP_THETA,
            marks,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn marks(&self) -> &MarkSet {
        &self.marks
    }
}

/// Pointer expectation values on the unnormalized post-selected state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationTriple {
    /// `<phi|sigma_x|phi>`
    pub sx: f64,
    /// `<phi|sigma_y|phi>`
    pub sy: f64,
    /// `<phi|1><1|phi>`
    pub p1: f64,
    /// `<phi|phi>`, the probability of passing the pinhole.
    pub p_post: f64,
}

/// Which prefactor turns the measured expectations into a weak value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefactorConvention {
    /// `1 / (2 |<p=0|psi>|^2)`: what substituting the post-selected pointer
    /// into the expectation values actually yields.
    #[default]
    Derived,
    /// `1 / (2 |C|^2)` with `C = 1/<p=0|psi>`, i.e. `|<p=0|psi>|^2 / 2`. Off by
    /// a factor `|C|^4` whenever `|<p=0|psi>| != 1`.
    PaperLiteral,
}

impl PrefactorConvention {
    pub fn prefactor(self, overlap: Complex64) -> f64 {
        let overlap_sqr = overlap.norm_sqr();
        match self {
            PrefactorConvention::Derived => 0.5 / overlap_sqr,
            PrefactorConvention::PaperLiteral => 0.5 * overlap_sqr,
        }
    }
}

/// `R(theta)|0>`.
pub fn rotated_ket0(theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (c, s)
}

/// Couples the system to a pointer prepared in `|0>`.
pub fn apply_coupling(psi: &PositionWavefunction, cfg: &CouplingConfig) -> Result<JointState> {
    let grid = psi.grid();
    cfg.marks.validate(grid)?;
    let (c, s) = rotated_ket0(cfg.theta);
    let zero = Complex64::new(0.0, 0.0);
    let amps = psi
        .amps()
        .iter()
        .enumerate()
        .map(|(x, &a)| {
            if cfg.marks.contains(x) {
                [a * c, a * s]
            } else {
                [a, zero]
            }
        })
        .collect();
    JointState::new(grid, amps)
}

/// Projects the system onto `|p=0>`; the returned pointer is not renormalized.
pub fn postselect_p0(joint: &JointState) -> PointerState {
    joint.project_momentum(0)
}

pub fn exact_expectations(pointer: &PointerState) -> ExpectationTriple {
    let cross = pointer.amp0.conj() * pointer.amp1;
    ExpectationTriple {
        sx: 2.0 * cross.re,
        sy: 2.0 * cross.im,
        p1: pointer.amp1.norm_sqr(),
        p_post: pointer.norm_sqr(),
    }
}

/// Turns pointer expectations into the weak value of the marked projector sum.
///
/// `(sx + 2 p1) + i sy = 2 conj(phi0) a1` for the post-selected pointer
/// `a0|0> + a1|1>` with `a0 + a1 = phi0 = <p=0|psi>`, so dividing by
/// `2 |phi0|^2` leaves `a1 / phi0`.
pub fn extract_weak_value(
    t: &ExpectationTriple,
    overlap: Complex64,
    convention: PrefactorConvention,
) -> Result<Complex64> {
    if t.p_post <= MIN_POST_SELECTION_PROBABILITY {
        return Err(Error::DegeneratePostSelection(t.p_post.max(0.0).sqrt()));
    }
    if overlap.norm() < DEGENERACY_THRESHOLD {
        return Err(Error::DegeneratePostSelection(overlap.norm()));
    }
    let f = convention.prefactor(overlap);
    Ok(Complex64::new(f * (t.sx + 2.0 * t.p1), f * t.sy))
}

/// Coupling, post-selection, expectations and extraction in one call.
pub fn run_exact(psi: &PositionWavefunction, marks: &MarkSet, theta: f64) -> Result<Complex64> {
    run_exact_with(psi, marks, theta, PrefactorConvention::Derived)
}

pub fn run_exact_with(
    psi: &PositionWavefunction,
    marks: &MarkSet,
    theta: f64,
    convention: PrefactorConvention,
) -> Result<Complex64> {
    let overlap = psi.zero_momentum_overlap();
    if overlap.norm() < DEGENERACY_THRESHOLD {
        return Err(Error::DegeneratePostSelection(overlap.norm()));
    }
    let cfg = CouplingConfig::new(theta, marks.clone())?;
    let joint = apply_coupling(psi, &cfg)?;
    let pointer = postselect_p0(&joint);
    extract_weak_value(&exact_expectations(&pointer), overlap, convention)
}
