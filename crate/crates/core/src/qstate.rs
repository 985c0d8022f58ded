//! State representations for the system and the qubit pointer.
//!
//! The position basis is a finite grid `|x_0>..|x_{N-1}>`. Momentum states
//! are connected to it by the unitary DFT
//!
//! ```text
//! <p_k|x_n> = exp(-2 pi i k n / N) / sqrt(N)
//! ```
//!
//! so the zero-momentum row is the constant `1/sqrt(N)`. The pointer is a
//! qubit on `{|0>, |1>}`; in the optical picture `|0>` is the diagonal
//! polarization `(|H> + |V>)/sqrt(2)` and `|1>` the anti-diagonal one.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Overlaps with magnitude below this are treated as a failed post-selection.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Tolerance on the squared norm of states flagged as normalized.
pub const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    n_points: usize,
}

impl GridSpec {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::GridTooSmall(n_points));
        }
        Ok(Self { n_points })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// `<p=0|x>`, identical for every grid point.
    pub fn zero_momentum_amplitude(&self) -> f64 {
        1.0 / (self.n_points as f64).sqrt()
    }

    /// `<p_k|x>` for a signed momentum bin `k` (taken mod N).
    pub fn momentum_amplitude(&self, k: isize, x: usize) -> Complex64 {
        let n = self.n_points as isize;
        let k = k.rem_euclid(n) as usize;
        // reduce k*x mod N before the float conversion to keep the phase exact
        let phase = -2.0 * PI * ((k * x) % self.n_points) as f64 / self.n_points as f64;
        Complex64::from_polar(self.zero_momentum_amplitude(), phase)
    }
}

/// A wavefunction on the position grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionWavefunction {
    grid: GridSpec,
    amps: Vec<Complex64>,
    normalized: bool,
}

impl PositionWavefunction {
    /// Builds a state from raw amplitudes, rescaling them to unit norm.
    pub fn normalized(grid: GridSpec, amps: Vec<Complex64>) -> Result<Self> {
        check_len(grid, amps.len())?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let amps = amps.into_iter().map(|a| a / norm).collect();
        Ok(Self {
            grid,
            amps,
            normalized: true,
        })
    }

    /// Wraps amplitudes whose squared norm is an event probability in `[0, 1]`.
    pub fn sub_normalized(grid: GridSpec, amps: Vec<Complex64>) -> Result<Self> {
        check_len(grid, amps.len())?;
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if !(0.0..=1.0 + NORM_TOLERANCE).contains(&norm_sqr) {
            return Err(Error::InvalidParameter {
                name: "amps",
                reason: format!("squared norm {norm_sqr} is not a probability"),
            });
        }
        Ok(Self {
            grid,
            amps,
            normalized: false,
        })
    }

    /// The equal superposition `1/sqrt(N)` on every grid point.
    pub fn uniform(grid: GridSpec) -> Self {
        let a = Complex64::new(grid.zero_momentum_amplitude(), 0.0);
        Self {
            grid,
            amps: vec![a; grid.n_points()],
            normalized: true,
        }
    }

    /// Complex standard-normal draws, normalized. Deterministic in `seed`.
    pub fn random(grid: GridSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..grid.n_points())
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            })
            .collect();
        // a zero draw on every point has probability zero
        Self::normalized(grid, amps).expect("gaussian draws are nonzero")
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, x: usize) -> Complex64 {
        self.amps[x]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<p_k|psi>` for a signed momentum bin.
    pub fn momentum_amplitude(&self, k: isize) -> Complex64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(x, a)| self.grid.momentum_amplitude(k, x) * a)
            .sum()
    }

    /// `phi(p=0) = <p=0|psi> = sum_x psi(x) / sqrt(N)`.
    pub fn zero_momentum_overlap(&self) -> Complex64 {
        let sum: Complex64 = self.amps.iter().sum();
        sum * self.grid.zero_momentum_amplitude()
    }

    /// The proportionality constant `C' = <p=0|x> / <p=0|psi>` between the
    /// projector weak value and the wavefunction: `<|x><x|>_w = C' psi(x)`.
    ///
    /// This differs from `1/<p=0|psi>` by the position-independent factor
    /// `1/sqrt(N)`, which cancels in every interference check.
    pub fn weak_constant(&self) -> Result<Complex64> {
        let overlap = self.zero_momentum_overlap();
        if overlap.norm() < DEGENERACY_THRESHOLD {
            return Err(Error::DegeneratePostSelection(overlap.norm()));
        }
        Ok(Complex64::new(self.grid.zero_momentum_amplitude(), 0.0) / overlap)
    }
}

fn check_len(grid: GridSpec, got: usize) -> Result<()> {
    if got != grid.n_points() {
        return Err(Error::LengthMismatch {
            expected: grid.n_points(),
            got,
        });
    }
    Ok(())
}

/// Qubit pointer `amp0 |0> + amp1 |1>`.
///
/// After post-selection the state is left unnormalized: its squared norm is
/// the probability that the photon passed the pinhole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointerState {
    pub amp0: Complex64,
    pub amp1: Complex64,
    normalized: bool,
}

impl PointerState {
    pub fn sub_normalized(amp0: Complex64, amp1: Complex64) -> Self {
        Self {
            amp0,
            amp1,
            normalized: false,
        }
    }

    pub fn normalized(amp0: Complex64, amp1: Complex64) -> Result<Self> {
        let norm = (amp0.norm_sqr() + amp1.norm_sqr()).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            amp0: amp0 / norm,
            amp1: amp1 / norm,
            normalized: true,
        })
    }

    pub fn ket0() -> Self {
        Self {
            amp0: Complex64::new(1.0, 0.0),
            amp1: Complex64::new(0.0, 0.0),
            normalized: true,
        }
    }

    pub fn ket1() -> Self {
        Self {
            amp0: Complex64::new(0.0, 0.0),
            amp1: Complex64::new(1.0, 0.0),
            normalized: true,
        }
    }

    /// `|-> = (|0> - |1>)/sqrt(2)`.
    pub fn ket_minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amp0: Complex64::new(h, 0.0),
            amp1: Complex64::new(-h, 0.0),
            normalized: true,
        }
    }

    pub fn zero() -> Self {
        Self::sub_normalized(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp0.norm_sqr() + self.amp1.norm_sqr()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PointerState) -> Complex64 {
        self.amp0.conj() * other.amp0 + self.amp1.conj() * other.amp1
    }

    /// Unnormalized Bloch vector `(<sx>, <sy>, <sz>)` on the stored amplitudes.
    pub fn bloch(&self) -> [f64; 3] {
        let cross = self.amp0.conj() * self.amp1;
        [
            2.0 * cross.re,
            2.0 * cross.im,
            self.amp0.norm_sqr() - self.amp1.norm_sqr(),
        ]
    }
}

/// System-pointer state; entry `[x][q]` is the amplitude of `|x> (x) |q>`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    grid: GridSpec,
    amps: Vec<[Complex64; 2]>,
}

impl JointState {
    pub fn new(grid: GridSpec, amps: Vec<[Complex64; 2]>) -> Result<Self> {
        check_len(grid, amps.len())?;
        Ok(Self { grid, amps })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn amps(&self) -> &[[Complex64; 2]] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps
            .iter()
            .map(|[a0, a1]| a0.norm_sqr() + a1.norm_sqr())
            .sum()
    }

    /// Pointer components attached to grid point `x` (unnormalized).
    pub fn pointer_at(&self, x: usize) -> PointerState {
        let [a0, a1] = self.amps[x];
        PointerState::sub_normalized(a0, a1)
    }

    /// `(<p_k| (x) I) |Psi>`, the pointer left behind when the photon is found
    /// in momentum bin `k`.
    pub fn project_momentum(&self, k: isize) -> PointerState {
        if k.rem_euclid(self.grid.n_points() as isize) == 0 {
            let w = self.grid.zero_momentum_amplitude();
            let (s0, s1) = self.amps.iter().fold(
                (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
                |(s0, s1), [a0, a1]| (s0 + a0, s1 + a1),
            );
            return PointerState::sub_normalized(s0 * w, s1 * w);
        }
        let (s0, s1) = self.amps.iter().enumerate().fold(
            (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
            |(s0, s1), (x, [a0, a1])| {
                let bra = self.grid.momentum_amplitude(k, x);
                (s0 + bra * a0, s1 + bra * a1)
            },
        );
        PointerState::sub_normalized(s0, s1)
    }
}

/// Grid cells where the SLM adds its phase; the measured observable is the
/// sum of their position projectors.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<usize>", from = "Vec<usize>")]
pub struct MarkSet {
    indices: Vec<usize>,
}

impl MarkSet {
    /// Sorts and deduplicates the given indices.
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn all(grid: GridSpec) -> Self {
        Self {
            indices: (0..grid.n_points()).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.indices.binary_search(&x).is_ok()
    }

    pub fn union(&self, other: &MarkSet) -> MarkSet {
        MarkSet::new(self.indices.iter().chain(&other.indices).copied())
    }

    pub fn is_disjoint(&self, other: &MarkSet) -> bool {
        self.indices.iter().all(|x| !other.contains(*x))
    }

    pub fn validate(&self, grid: GridSpec) -> Result<()> {
        match self.indices.last() {
            Some(&index) if index >= grid.n_points() => Err(Error::MarkOutOfRange {
                index,
                n_points: grid.n_points(),
            }),
            _ => Ok(()),
        }
    }
}

impl From<Vec<usize>> for MarkSet {
    fn from(v: Vec<usize>) -> Self {
        MarkSet::new(v)
    }
}

impl From<MarkSet> for Vec<usize> {
    fn from(m: MarkSet) -> Self {
        m.indices
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    fn alternating_phase_n4() -> PositionWavefunction {
        let grid = GridSpec::new(4).unwrap();
        let amps = (0..4)
            .map(|n| Complex64::from_polar(0.5, PI * n as f64 / 2.0))
            .collect();
        PositionWavefunction::normalized(grid, amps).unwrap()
    }

    #[test]
    fn grid_rejects_single_point() {
        assert_eq!(GridSpec::new(1), Err(Error::GridTooSmall(1)));
        assert_eq!(GridSpec::new(0), Err(Error::GridTooSmall(0)));
    }

    #[test]
    fn zero_momentum_row_is_constant() {
        let grid = GridSpec::new(7).unwrap();
        for x in 0..7 {
            assert!(close(
                grid.momentum_amplitude(0, x),
                c(1.0 / 7f64.sqrt(), 0.0)
            ));
        }
        // the momentum basis is orthonormal
        for k in 0..7isize {
            for j in 0..7isize {
                let ip: Complex64 = (0..7)
                    .map(|x| grid.momentum_amplitude(k, x).conj() * grid.momentum_amplitude(j, x))
                    .sum();
                let want = if k == j { 1.0 } else { 0.0 };
                assert!(close(ip, c(want, 0.0)), "k={k} j={j} -> {ip}");
            }
        }
        assert!(close(
            grid.momentum_amplitude(-1, 3),
            grid.momentum_amplitude(6, 3)
        ));
    }

    #[test]
    fn uniform_amplitudes() {
        let psi = PositionWavefunction::uniform(GridSpec::new(4).unwrap());
        assert!(psi.amps().iter().all(|a| *a == c(0.5, 0.0)));
        assert!(psi.is_normalized());
        let psi = PositionWavefunction::uniform(GridSpec::new(2).unwrap());
        assert!(psi.amps().iter().all(|a| close(*a, c(FRAC_1_SQRT_2, 0.0))));
    }

    #[test]
    fn random_is_deterministic_and_normalized() {
        let grid = GridSpec::new(8).unwrap();
        let a = PositionWavefunction::random(grid, 1);
        let b = PositionWavefunction::random(grid, 1);
        assert_eq!(a, b);
        assert!((a.norm_sqr() - 1.0).abs() < 1e-12);
        let other = PositionWavefunction::random(grid, 2);
        assert_ne!(a.amps(), other.amps());
    }

    #[test]
    fn overlap_examples() {
        let psi = PositionWavefunction::uniform(GridSpec::new(4).unwrap());
        assert!(close(psi.zero_momentum_overlap(), c(1.0, 0.0)));

        let grid2 = GridSpec::new(2).unwrap();
        let psi = PositionWavefunction::normalized(
            grid2,
            vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)],
        )
        .unwrap();
        assert!(close(psi.zero_momentum_overlap(), c(0.5, 0.5)));

        assert!(alternating_phase_n4().zero_momentum_overlap().norm() < 1e-15);
    }

    #[test]
    fn weak_constant_examples() {
        let psi = PositionWavefunction::uniform(GridSpec::new(4).unwrap());
        assert!(close(psi.weak_constant().unwrap(), c(0.5, 0.0)));

        let grid2 = GridSpec::new(2).unwrap();
        let psi = PositionWavefunction::normalized(
            grid2,
            vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)],
        )
        .unwrap();
        assert!(close(
            psi.weak_constant().unwrap(),
            c(FRAC_1_SQRT_2, -FRAC_1_SQRT_2)
        ));

        assert!(matches!(
            alternating_phase_n4().weak_constant(),
            Err(Error::DegeneratePostSelection(_))
        ));
    }

    #[test]
    fn normalization_errors() {
        let grid = GridSpec::new(3).unwrap();
        assert_eq!(
            PositionWavefunction::normalized(grid, vec![c(0.0, 0.0); 3]),
            Err(Error::ZeroNorm)
        );
        assert_eq!(
            PositionWavefunction::normalized(grid, vec![c(1.0, 0.0); 2]),
            Err(Error::LengthMismatch {
                expected: 3,
                got: 2
            })
        );
        assert!(PositionWavefunction::sub_normalized(grid, vec![c(1.0, 0.0); 3]).is_err());
        let sub = PositionWavefunction::sub_normalized(grid, vec![c(0.5, 0.0); 3]).unwrap();
        assert!(!sub.is_normalized());
        assert!((sub.norm_sqr() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn mark_set_is_sorted_and_validated() {
        let m = MarkSet::new([3, 1, 3, 0]);
        assert_eq!(m.indices(), &[0, 1, 3]);
        assert!(m.contains(3) && !m.contains(2));
        let grid = GridSpec::new(3).unwrap();
        assert_eq!(
            m.validate(grid),
            Err(Error::MarkOutOfRange {
                index: 3,
                n_points: 3
            })
        );
        assert!(MarkSet::empty().validate(grid).is_ok());
        assert_eq!(MarkSet::all(grid).indices(), &[0, 1, 2]);
        assert!(MarkSet::new([0]).is_disjoint(&MarkSet::new([1, 2])));
        assert!(!m.is_disjoint(&MarkSet::new([1])));
    }

    #[test]
    fn momentum_projection_matches_state_dft() {
        let grid = GridSpec::new(6).unwrap();
        let psi = PositionWavefunction::random(grid, 11);
        let joint = JointState::new(
            grid,
            psi.amps()
                .iter()
                .map(|a| [*a, Complex64::new(0.0, 0.0)])
                .collect(),
        )
        .unwrap();
        for k in -2..=2 {
            let p = joint.project_momentum(k);
            assert!(close(p.amp0, psi.momentum_amplitude(k)));
            assert_eq!(p.amp1, c(0.0, 0.0));
        }
    }

    #[test]
    fn pointer_bloch_vector() {
        let p = PointerState::normalized(c(1.0, 0.0), c(0.0, 1.0)).unwrap();
        let [x, y, z] = p.bloch();
        assert!(x.abs() < 1e-15 && (y - 1.0).abs() < 1e-15 && z.abs() < 1e-15);
        let [x, _, z] = PointerState::ket_minus().bloch();
        assert!((x + 1.0).abs() < 1e-15 && z.abs() < 1e-15);
    }
}
