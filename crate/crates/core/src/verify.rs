//! Independent oracles, the Born-rule interference residual, and the
//! three-run experiment: mark `x1`, mark `x2`, mark both.
//!
//! The oracles work on dense matrices and never call into the protocol
//! pipeline, so they can arbitrate it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imperfection::{
    apply_coupling_imperfect, expected_expectations, inject_dark_counts, measure_statistics,
    postselect_window, ImperfectionConfig,
};
use crate::protocol::{exact_expectations, extract_weak_value, PrefactorConvention};
use crate::qstate::{MarkSet, PositionWavefunction, DEGENERACY_THRESHOLD};
use crate::sampling::{estimate_weak_value, Axis, CountRecord, SeMethod, WeakValueEstimate};
use crate::seeds::derive_seed;

type Matrix = Vec<Vec<Complex64>>;

fn zeros(rows: usize, cols: usize) -> Matrix {
    vec![vec![Complex64::new(0.0, 0.0); cols]; rows]
}

fn mat_vec(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn vdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn zero_momentum_bra(n: usize) -> Vec<Complex64> {
    vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n]
}

/// `<p=0| A |psi> / <p=0|psi>` with `A = sum_i |x_i><x_i|` built as a dense
/// `N x N` matrix.
pub fn oracle_weak_value(psi: &PositionWavefunction, marks: &MarkSet) -> Result<Complex64> {
    let n = psi.grid().n_points();
    marks.validate(psi.grid())?;
    let mut a = zeros(n, n);
    for &x in marks.indices() {
        a[x][x] = Complex64::new(1.0, 0.0);
    }
    let bra = zero_momentum_bra(n);
    let denom = vdot(&bra, psi.amps());
    if denom.norm() < DEGENERACY_THRESHOLD {
        return Err(Error::DegeneratePostSelection(denom.norm()));
    }
    Ok(vdot(&bra, &mat_vec(&a, psi.amps())) / denom)
}

/// `exp(-i theta P (x) sigma_y)` as a dense `2N x 2N` matrix (index `2x + q`).
/// Since `(P (x) sigma_y)^2 = P (x) I`, the exponential is
/// `(I - P) (x) I + P (x) (cos theta I - i sin theta sigma_y)`.
pub fn coupling_unitary(n: usize, marks: &MarkSet, theta: f64) -> Matrix {
    let (s, c) = theta.sin_cos();
    // -i sin(theta) sigma_y = [[0, -sin], [sin, 0]]
    let rot = [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ];
    let mut u = zeros(2 * n, 2 * n);
    for x in 0..n {
        for q in 0..2 {
            for r in 0..2 {
                u[2 * x + q][2 * x + r] = if marks.contains(x) {
                    rot[q][r]
                } else if q == r {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
        }
    }
    u
}

/// Dense state-vector simulation of coupling, post-selection and extraction.
pub fn oracle_joint_pipeline(
    psi: &PositionWavefunction,
    marks: &MarkSet,
    theta: f64,
) -> Result<Complex64> {
    oracle_joint_pipeline_with(psi, marks, theta, PrefactorConvention::Derived)
}

pub fn oracle_joint_pipeline_with(
    psi: &PositionWavefunction,
    marks: &MarkSet,
    theta: f64,
    convention: PrefactorConvention,
) -> Result<Complex64> {
    let n = psi.grid().n_points();
    marks.validate(psi.grid())?;
    let mut initial = vec![Complex64::new(0.0, 0.0); 2 * n];
    for (x, a) in psi.amps().iter().enumerate() {
        initial[2 * x] = *a;
    }
    let evolved = mat_vec(&coupling_unitary(n, marks, theta), &initial);

    // <p=0| (x) I as a 2 x 2N matrix
    let bra = zero_momentum_bra(n);
    let mut post = zeros(2, 2 * n);
    for x in 0..n {
        post[0][2 * x] = bra[x];
        post[1][2 * x + 1] = bra[x];
    }
    let pointer = mat_vec(&post, &evolved);

    let i = Complex64::new(0.0, 1.0);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let sigma_x = vec![vec![zero, one], vec![one, zero]];
    let sigma_y = vec![vec![zero, -i], vec![i, zero]];
    let proj_1 = vec![vec![zero, zero], vec![zero, one]];
    let expect = |m: &Matrix| vdot(&pointer, &mat_vec(m, &pointer)).re;
    let (sx, sy, p1) = (expect(&sigma_x), expect(&sigma_y), expect(&proj_1));
    let p_post = vdot(&pointer, &pointer).re;

    let overlap = vdot(&bra, psi.amps());
    if overlap.norm() < DEGENERACY_THRESHOLD
        || p_post <= crate::protocol::MIN_POST_SELECTION_PROBABILITY
    {
        return Err(Error::DegeneratePostSelection(overlap.norm()));
    }
    let f = match convention {
        PrefactorConvention::Derived => 0.5 / overlap.norm_sqr(),
        PrefactorConvention::PaperLiteral => 0.5 * overlap.norm_sqr(),
    };
    Ok(Complex64::new(f * (sx + 2.0 * p1), f * sy))
}

/// Smallest denominator used when normalizing the residual.
pub const RESIDUAL_FLOOR: f64 = 1e-30;

/// Relative violation of `|w1 + w2|^2 = |w1|^2 + |w2|^2 + 2 Re(w1 conj(w2))`
/// with `w12` measured separately. Invariant under `w -> c w`.
pub fn born_residual(w1: Complex64, w2: Complex64, w12: Complex64) -> f64 {
    let (num, den) = residual_parts(w1, w2, w12);
    num / den
}

fn residual_parts(w1: Complex64, w2: Complex64, w12: Complex64) -> (f64, f64) {
    let num = w12.norm_sqr() - w1.norm_sqr() - w2.norm_sqr() - 2.0 * (w1 * w2.conj()).re;
    let den = (w12.norm_sqr() + w1.norm_sqr() + w2.norm_sqr()).max(RESIDUAL_FLOOR);
    (num, den)
}

/// First-order standard error of [`born_residual`] from the six component
/// standard errors, treated as independent.
pub fn residual_standard_error(
    w1: &WeakValueEstimate,
    w2: &WeakValueEstimate,
    w12: &WeakValueEstimate,
) -> f64 {
    let (num, den) = residual_parts(w1.w, w2.w, w12.w);
    let sum = w1.w + w2.w;
    // d num / d component, d den / d component
    let grads = [
        (-2.0 * sum.re, 2.0 * w1.w.re, w1.se_re),
        (-2.0 * sum.im, 2.0 * w1.w.im, w1.se_im),
        (-2.0 * sum.re, 2.0 * w2.w.re, w2.se_re),
        (-2.0 * sum.im, 2.0 * w2.w.im, w2.se_im),
        (2.0 * w12.w.re, 2.0 * w12.w.re, w12.se_re),
        (2.0 * w12.w.im, 2.0 * w12.w.im, w12.se_im),
    ];
    grads
        .iter()
        .map(|(dn, dd, se)| {
            let g = (dn * den - num * dd) / (den * den);
            (g * se).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BornTrial {
    pub w1: WeakValueEstimate,
    pub w2: WeakValueEstimate,
    pub w12: WeakValueEstimate,
    pub residual: f64,
    pub se_residual: f64,
    /// `residual / se_residual`; zero when there is no sampling error.
    pub z_score: f64,
}

impl BornTrial {
    pub fn from_estimates(
        w1: WeakValueEstimate,
        w2: WeakValueEstimate,
        w12: WeakValueEstimate,
    ) -> Self {
        let residual = born_residual(w1.w, w2.w, w12.w);
        let se_residual = residual_standard_error(&w1, &w2, &w12);
        let z_score = if se_residual > 0.0 {
            residual / se_residual
        } else {
            0.0
        };
        Self {
            w1,
            w2,
            w12,
            residual,
            se_residual,
            z_score,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Exact,
    Sampled { shots: u64, seed: u64 },
}

/// Whether the three runs share one prepared state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Preparation {
    #[default]
    Fixed,
    /// Every run draws a fresh random state (negative control for
    /// preparation drift); extraction still uses the nominal state's overlap.
    Redrawn { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RunLabel {
    W1,
    W2,
    W12,
}

impl RunLabel {
    pub const ALL: [RunLabel; 3] = [RunLabel::W1, RunLabel::W2, RunLabel::W12];

    pub fn as_str(self) -> &'static str {
        match self {
            RunLabel::W1 => "w1",
            RunLabel::W2 => "w2",
            RunLabel::W12 => "w12",
        }
    }
}

/// Seed of the counting stream for one run and analyzer setting.
pub fn counting_seed(seed: u64, run: RunLabel, axis: Axis) -> u64 {
    derive_seed(seed, &[run.as_str(), axis.label(), "counts"])
}

pub fn dark_seed(seed: u64, run: RunLabel, axis: Axis) -> u64 {
    derive_seed(seed, &[run.as_str(), axis.label(), "dark"])
}

pub fn bootstrap_seed(seed: u64, run: RunLabel) -> u64 {
    derive_seed(seed, &[run.as_str(), "bootstrap"])
}

pub fn preparation_seed(seed: u64, run: RunLabel) -> u64 {
    derive_seed(seed, &[run.as_str(), "preparation"])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub label: RunLabel,
    pub marks: MarkSet,
    pub estimate: WeakValueEstimate,
    /// One record per axis in sampled mode.
    pub records: Vec<CountRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BornRun {
    pub trial: BornTrial,
    pub runs: Vec<RunOutcome>,
}

/// The mark-`x1`, mark-`x2`, mark-both protocol on one prepared state.
#[derive(Debug, Clone, PartialEq)]
pub struct BornExperiment {
    pub psi: PositionWavefunction,
    pub x1: usize,
    pub x2: usize,
    pub theta: f64,
    pub imperfections: ImperfectionConfig,
    pub convention: PrefactorConvention,
    pub preparation: Preparation,
    pub se_method: SeMethod,
}

impl BornExperiment {
    pub fn new(psi: PositionWavefunction, x1: usize, x2: usize) -> Self {
        Self {
            psi,
            x1,
            x2,
            theta: crate::protocol::FULL_FLIP_THETA,
            imperfections: ImperfectionConfig::default(),
            convention: PrefactorConvention::Derived,
            preparation: Preparation::Fixed,
            se_method: SeMethod::DeltaMethod,
        }
    }

    pub fn marks(&self, run: RunLabel) -> MarkSet {
        match run {
            RunLabel::W1 => MarkSet::new([self.x1]),
            RunLabel::W2 => MarkSet::new([self.x2]),
            RunLabel::W12 => MarkSet::new([self.x1, self.x2]),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.x1 == self.x2 {
            return Err(Error::IdenticalMarks(self.x1));
        }
        let grid = self.psi.grid();
        self.marks(RunLabel::W12).validate(grid)?;
        self.imperfections.validate(grid.n_points())?;
        let overlap = self.psi.zero_momentum_overlap();
        if overlap.norm() < DEGENERACY_THRESHOLD {
            return Err(Error::DegeneratePostSelection(overlap.norm()));
        }
        Ok(())
    }

    fn prepared_state(&self, run: RunLabel) -> PositionWavefunction {
        match self.preparation {
            Preparation::Fixed => self.psi.clone(),
            Preparation::Redrawn { seed } => {
                PositionWavefunction::random(self.psi.grid(), preparation_seed(seed, run))
            }
        }
    }

    pub fn run(&self, mode: RunMode) -> Result<BornRun> {
        self.validate()?;
        let overlap = self.psi.zero_momentum_overlap();
        let runs = RunLabel::ALL
            .iter()
            .map(|&label| self.run_one(label, overlap, mode))
            .collect::<Result<Vec<_>>>()?;
        let trial = BornTrial::from_estimates(runs[0].estimate, runs[1].estimate, runs[2].estimate);
        Ok(BornRun { trial, runs })
    }

    fn run_one(&self, label: RunLabel, overlap: Complex64, mode: RunMode) -> Result<RunOutcome> {
        let marks = self.marks(label);
        let psi = self.prepared_state(label);
        let imp = &self.imperfections;
        let joint = apply_coupling_imperfect(&psi, &marks, self.theta, imp)?;
        let mixture = postselect_window(&joint, imp.pinhole_halfwidth)?;
        let (estimate, records) = match mode {
            RunMode::Exact => {
                let triple = if imp.is_ideal() {
                    exact_expectations(&mixture.bins[0].1)
                } else {
                    expected_expectations(&mixture.statistics(), imp)
                };
                let w = extract_weak_value(&triple, overlap, self.convention)?;
                (WeakValueEstimate::exact(w, triple.p_post), Vec::new())
            }
            RunMode::Sampled { shots, seed } => {
                let stats = mixture.statistics();
                let records: Vec<CountRecord> = Axis::ALL
                    .iter()
                    .map(|&axis| {
                        let r = measure_statistics(
                            &stats,
                            axis,
                            imp.analyzer_angle_error,
                            shots,
                            counting_seed(seed, label, axis),
                        );
                        inject_dark_counts(&r, imp.dark_rate, dark_seed(seed, label, axis))
                    })
                    .collect();
                let se_method = match self.se_method {
                    SeMethod::Bootstrap { resamples, .. } => SeMethod::Bootstrap {
                        resamples,
                        seed: bootstrap_seed(seed, label),
                    },
                    m => m,
                };
                (
                    estimate_weak_value(&records, overlap, self.convention, se_method)?,
                    records,
                )
            }
        };
        Ok(RunOutcome {
            label,
            marks,
            estimate,
            records,
        })
    }
}

/// Runs the three-run protocol and returns only the trial summary.
pub fn run_born_experiment(
    psi: &PositionWavefunction,
    x1: usize,
    x2: usize,
    mode: RunMode,
    imperfections: &ImperfectionConfig,
) -> Result<BornTrial> {
    let mut exp = BornExperiment::new(psi.clone(), x1, x2);
    exp.imperfections = *imperfections;
    Ok(exp.run(mode)?.trial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{
        apply_coupling, postselect_p0, run_exact, CouplingConfig, FULL_FLIP_THETA,
    };
    use crate::qstate::GridSpec;
    use crate::sampling::simulate_counts;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    fn half_i_state() -> PositionWavefunction {
        let grid = GridSpec::new(2).unwrap();
        PositionWavefunction::normalized(grid, vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)])
            .unwrap()
    }

    /// exp(-i H) by scaling and squaring of a Taylor series.
    fn expm_minus_i(h: &Matrix) -> Matrix {
        let n = h.len();
        let squarings = 8;
        let scale = Complex64::new(0.0, -1.0 / f64::powi(2.0, squarings));
        let a: Matrix = h
            .iter()
            .map(|row| row.iter().map(|v| v * scale).collect())
            .collect();
        let mul = |x: &Matrix, y: &Matrix| -> Matrix {
            let mut out = zeros(n, n);
            for i in 0..n {
                for k in 0..n {
                    for j in 0..n {
                        out[i][j] += x[i][k] * y[k][j];
                    }
                }
            }
            out
        };
        let mut result = zeros(n, n);
        let mut term = zeros(n, n);
        for i in 0..n {
            result[i][i] = c(1.0, 0.0);
            term[i][i] = c(1.0, 0.0);
        }
        for k in 1..30 {
            term = mul(&term, &a);
            term.iter_mut().flatten().for_each(|v| *v /= k as f64);
            result
                .iter_mut()
                .flatten()
                .zip(term.iter().flatten())
                .for_each(|(r, t)| *r += t);
        }
        for _ in 0..squarings {
            result = mul(&result, &result);
        }
        result
    }

    #[test]
    fn closed_form_unitary_matches_matrix_exponential() {
        for (n, marks, theta) in [
            (2, vec![0], 0.3),
            (4, vec![1, 3], FULL_FLIP_THETA),
            (3, vec![0, 1, 2], 2.9),
        ] {
            let marks = MarkSet::new(marks);
            let mut h = zeros(2 * n, 2 * n);
            for &x in marks.indices() {
                // theta * sigma_y on the pointer of cell x
                h[2 * x][2 * x + 1] = c(0.0, -theta);
                h[2 * x + 1][2 * x] = c(0.0, theta);
            }
            let want = expm_minus_i(&h);
            let got = coupling_unitary(n, &marks, theta);
            for (rw, rg) in want.iter().zip(&got) {
                for (a, b) in rw.iter().zip(rg) {
                    assert!((a - b).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn oracle_weak_value_examples() {
        let uniform = PositionWavefunction::uniform(GridSpec::new(4).unwrap());
        assert!(close(
            oracle_weak_value(&uniform, &MarkSet::new([0])).unwrap(),
            c(0.25, 0.0)
        ));
        assert!(close(
            oracle_weak_value(&uniform, &MarkSet::all(uniform.grid())).unwrap(),
            c(1.0, 0.0)
        ));
        assert!(close(
            oracle_weak_value(&half_i_state(), &MarkSet::new([1])).unwrap(),
            c(0.5, 0.5)
        ));
    }

    #[test]
    fn oracle_rejects_orthogonal_state() {
        let grid = GridSpec::new(2).unwrap();
        let psi = PositionWavefunction::normalized(grid, vec![c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert!(matches!(
            oracle_weak_value(&psi, &MarkSet::new([0])),
            Err(Error::DegeneratePostSelection(_))
        ));
        assert!(matches!(
            oracle_joint_pipeline(&psi, &MarkSet::new([0]), FULL_FLIP_THETA),
            Err(Error::DegeneratePostSelection(_))
        ));
    }

    #[test]
    fn weak_constant_times_amplitude_is_projector_weak_value() {
        let psi = PositionWavefunction::random(GridSpec::new(12).unwrap(), 99);
        let cp = psi.weak_constant().unwrap();
        for x in 0..12 {
            let oracle = oracle_weak_value(&psi, &MarkSet::new([x])).unwrap();
            assert!(close(cp * psi.amplitude(x), oracle));
        }
    }

    #[test]
    fn joint_oracle_on_n2_exhaustive() {
        let psi = half_i_state();
        for marks in [vec![], vec![0], vec![1], vec![0, 1]] {
            let marks = MarkSet::new(marks);
            let a = oracle_joint_pipeline(&psi, &marks, FULL_FLIP_THETA).unwrap();
            let b = oracle_weak_value(&psi, &marks).unwrap();
            assert!(close(a, b), "{marks:?}: {a} vs {b}");
            assert!(close(a, run_exact(&psi, &marks, FULL_FLIP_THETA).unwrap()));
        }
    }

    #[test]
    fn residual_examples() {
        assert!(born_residual(c(0.25, 0.0), c(0.25, 0.0), c(0.5, 0.0)).abs() < 1e-15);
        assert_eq!(born_residual(c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)), 0.0);
        let r = born_residual(c(0.25, 0.0), c(0.25, 0.0), c(0.4, 0.0));
        assert!((r - (-0.09 / 0.285)).abs() < 1e-12, "{r}");
        assert_eq!(born_residual(c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)), 0.0);
    }

    #[test]
    fn residual_se_matches_finite_differences() {
        let est = |re: f64, im: f64, se_re: f64, se_im: f64| WeakValueEstimate {
            w: c(re, im),
            se_re,
            se_im,
            shots_per_setting: 1,
            p_post_hat: 0.5,
        };
        let (w1, w2, w12) = (
            est(0.3, -0.1, 0.01, 0.02),
            est(0.2, 0.4, 0.03, 0.01),
            est(0.45, 0.35, 0.02, 0.02),
        );
        let se = residual_standard_error(&w1, &w2, &w12);
        let h = 1e-6;
        let mut var = 0.0;
        let comps = [
            (0, true),
            (0, false),
            (1, true),
            (1, false),
            (2, true),
            (2, false),
        ];
        for (which, real) in comps {
            let mut ws = [w1.w, w2.w, w12.w];
            let ses = [w1, w2, w12].map(|e| if real { e.se_re } else { e.se_im });
            let step = if real { c(h, 0.0) } else { c(0.0, h) };
            ws[which] += step;
            let up = born_residual(ws[0], ws[1], ws[2]);
            ws[which] -= 2.0 * step;
            let down = born_residual(ws[0], ws[1], ws[2]);
            var += ((up - down) / (2.0 * h) * ses[which]).powi(2);
        }
        assert!((se - var.sqrt()).abs() < 1e-8, "{se} vs {}", var.sqrt());
    }

    #[test]
    fn exact_mode_residual_vanishes() {
        let psi = PositionWavefunction::random(GridSpec::new(16).unwrap(), 31);
        let t = run_born_experiment(&psi, 3, 11, RunMode::Exact, &ImperfectionConfig::default())
            .unwrap();
        assert!(t.residual.abs() < 1e-12);
        assert_eq!(t.z_score, 0.0);
    }

    #[test]
    fn experiment_errors() {
        let psi = PositionWavefunction::uniform(GridSpec::new(4).unwrap());
        let ideal = ImperfectionConfig::default();
        assert_eq!(
            run_born_experiment(&psi, 1, 1, RunMode::Exact, &ideal),
            Err(Error::IdenticalMarks(1))
        );
        assert_eq!(
            run_born_experiment(&psi, 0, 7, RunMode::Exact, &ideal),
            Err(Error::MarkOutOfRange {
                index: 7,
                n_points: 4
            })
        );
        let grid = GridSpec::new(2).unwrap();
        let dark = PositionWavefunction::normalized(grid, vec![c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert!(matches!(
            run_born_experiment(&dark, 0, 1, RunMode::Exact, &ideal),
            Err(Error::DegeneratePostSelection(_))
        ));
    }

    #[test]
    fn sampled_records_match_the_ideal_pipeline() {
        let psi = PositionWavefunction::uniform(GridSpec::new(4).unwrap());
        let exp = BornExperiment::new(psi.clone(), 0, 1);
        let seed = 42;
        let run = exp
            .run(RunMode::Sampled {
                shots: 200_000,
                seed,
            })
            .unwrap();
        for outcome in &run.runs {
            let joint =
                apply_coupling(&psi, &CouplingConfig::full_flip(outcome.marks.clone())).unwrap();
            let pointer = postselect_p0(&joint);
            for r in &outcome.records {
                let ideal = simulate_counts(
                    &pointer,
                    r.setting,
                    200_000,
                    counting_seed(seed, outcome.label, r.setting),
                );
                assert_eq!(*r, ideal);
            }
        }
    }

    #[test]
    fn redrawn_preparation_breaks_the_identity() {
        let psi = PositionWavefunction::random(GridSpec::new(8).unwrap(), 2);
        let mut exp = BornExperiment::new(psi, 1, 5);
        let fixed = exp.run(RunMode::Exact).unwrap().trial.residual;
        exp.preparation = Preparation::Redrawn { seed: 3 };
        let drift = exp.run(RunMode::Exact).unwrap().trial.residual;
        assert!(fixed.abs() < 1e-12);
        assert!(drift.abs() > 1e-3, "{drift}");
    }
}
