use std::fs;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, ModeSpec, PreparationSpec, StandardErrorSpec};
use super::report::{
    counts_csv, median, residuals_csv, sig17, summarize, Float, ReferenceOut, RunReport, SeedEntry,
    Timing, TrialOut, ARTIFACT_VERSION,
};
use super::CliError;
use crate::protocol::{run_exact_with, PrefactorConvention, FULL_FLIP_THETA};
use crate::qstate::{GridSpec, MarkSet, PositionWavefunction};
use crate::sampling::{Axis, SeMethod};
use crate::seeds::derive_seed;
use crate::verify::{
    bootstrap_seed, counting_seed, dark_seed, oracle_joint_pipeline, oracle_weak_value,
    preparation_seed, BornExperiment, BornRun, BornTrial, Preparation, RunLabel, RunMode,
};

/// Tolerance of every oracle comparison.
pub const ORACLE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExecOptions {
    /// Worker threads for replications; `None` uses one per core.
    pub workers: Option<usize>,
    /// Replaces `master_seed` from the config file.
    pub seed: Option<u64>,
}

/// Everything computed for one configuration.
#[derive(Debug, Clone)]
pub struct Execution {
    pub config: ExperimentConfig,
    pub runs: Vec<BornRun>,
    pub report: RunReport,
}

impl Execution {
    pub fn trials(&self) -> Vec<BornTrial> {
        self.runs.iter().map(|r| r.trial).collect()
    }
}

fn replication_seed(master: u64, replication: usize) -> u64 {
    derive_seed(master, &["replication", &replication.to_string()])
}

fn experiment_for(
    cfg: &ExperimentConfig,
    psi: &PositionWavefunction,
    replication: usize,
) -> BornExperiment {
    let mut exp = BornExperiment::new(psi.clone(), cfg.x1, cfg.x2);
    exp.theta = cfg.theta;
    exp.imperfections = cfg.imperfections;
    exp.convention = cfg.prefactor_convention;
    exp.preparation = match cfg.preparation {
        PreparationSpec::Fixed => Preparation::Fixed,
        PreparationSpec::Redrawn => Preparation::Redrawn {
            seed: replication_seed(cfg.master_seed, replication),
        },
    };
    exp.se_method = match cfg.standard_errors {
        StandardErrorSpec::DeltaMethod => SeMethod::DeltaMethod,
        // the per-run seed is derived inside the experiment
        StandardErrorSpec::Bootstrap => SeMethod::Bootstrap {
            resamples: cfg.bootstrap_resamples,
            seed: 0,
        },
    };
    exp
}

fn seed_ledger(cfg: &ExperimentConfig, replications: usize) -> Vec<SeedEntry> {
    let mut ledger = Vec::new();
    for rep in 0..replications {
        let seed = replication_seed(cfg.master_seed, rep);
        let mut push = |run: RunLabel, setting: &str, purpose: &str, s: u64| {
            ledger.push(SeedEntry {
                replication: rep,
                run: run.as_str().into(),
                setting: setting.into(),
                purpose: purpose.into(),
                seed: s,
            })
        };
        for run in RunLabel::ALL {
            if cfg.preparation == PreparationSpec::Redrawn {
                push(run, "-", "preparation", preparation_seed(seed, run));
            }
            if cfg.mode == ModeSpec::Exact {
                continue;
            }
            for axis in Axis::ALL {
                push(run, axis.label(), "counts", counting_seed(seed, run, axis));
                if cfg.imperfections.dark_rate > 0.0 {
                    push(run, axis.label(), "dark", dark_seed(seed, run, axis));
                }
            }
            if cfg.standard_errors == StandardErrorSpec::Bootstrap {
                push(run, "-", "bootstrap", bootstrap_seed(seed, run));
            }
        }
    }
    ledger
}

fn reference(run: &BornRun) -> ReferenceOut {
    ReferenceOut {
        w1: run.trial.w1.w.into(),
        w2: run.trial.w2.w.into(),
        w12: run.trial.w12.w.into(),
        residual: Float(run.trial.residual),
    }
}

fn build_pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::ConfigInvalid {
                field: "--workers".into(),
                message: "must be at least 1".into(),
            });
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::ConfigInvalid {
        field: "--workers".into(),
        message: e.to_string(),
    })
}

/// Runs every replication of the three-run protocol described by `cfg`.
pub fn execute(cfg: &ExperimentConfig, opts: ExecOptions) -> Result<Execution, CliError> {
    let started = Instant::now();
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    let psi = cfg.wavefunction()?;
    let replications = match cfg.mode {
        ModeSpec::Exact => 1,
        ModeSpec::Sampled => cfg.replications,
    };

    let pool = build_pool(opts.workers)?;
    let runs: Vec<BornRun> = pool.install(|| {
        (0..replications)
            .into_par_iter()
            .map(|rep| {
                let mode = match cfg.mode {
                    ModeSpec::Exact => RunMode::Exact,
                    ModeSpec::Sampled => RunMode::Sampled {
                        shots: cfg.shots_per_setting,
                        seed: replication_seed(cfg.master_seed, rep),
                    },
                };
                experiment_for(&cfg, &psi, rep).run(mode)
            })
            .collect::<crate::Result<Vec<_>>>()
    })?;

    let exact = experiment_for(&cfg, &psi, 0).run(RunMode::Exact)?;
    let mut ideal_exp = experiment_for(&cfg, &psi, 0);
    ideal_exp.imperfections = Default::default();
    ideal_exp.preparation = Preparation::Fixed;
    ideal_exp.theta = FULL_FLIP_THETA;
    let ideal = ideal_exp.run(RunMode::Exact)?;

    let trials: Vec<BornTrial> = runs.iter().map(|r| r.trial).collect();
    let report = RunReport {
        artifact_version: ARTIFACT_VERSION.into(),
        mode: match cfg.mode {
            ModeSpec::Exact => "exact".into(),
            ModeSpec::Sampled => "sampled".into(),
        },
        config_toml: cfg.to_toml_string(),
        master_seed: cfg.master_seed,
        exact_reference: reference(&exact),
        ideal_reference: reference(&ideal),
        trials: trials
            .iter()
            .enumerate()
            .map(|(i, t)| TrialOut::new(i, t))
            .collect(),
        summary: summarize(&trials),
        seed_ledger: seed_ledger(&cfg, replications),
        timing: Timing {
            wall_clock_seconds: Float(started.elapsed().as_secs_f64()),
            workers: pool.current_num_threads(),
        },
    };
    Ok(Execution {
        config: cfg,
        runs,
        report,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// `run`: executes the config and writes `report.json`, `config.toml`,
/// `residuals.csv` and (sampled mode) one `counts_<run>.csv` per run into
/// `out_dir`.
pub fn cmd_run(
    config_path: &Path,
    out_dir: &Path,
    opts: ExecOptions,
) -> Result<Execution, CliError> {
    let cfg = ExperimentConfig::load(config_path)?;
    let exec = execute(&cfg, opts)?;
    create_dir(out_dir)?;
    write(&out_dir.join("report.json"), &exec.report.to_json())?;
    write(&out_dir.join("config.toml"), &exec.report.config_toml)?;
    write(
        &out_dir.join("residuals.csv"),
        &residuals_csv(&exec.trials()),
    )?;
    if exec.config.mode == ModeSpec::Sampled {
        for (i, label) in RunLabel::ALL.iter().enumerate() {
            // rows grouped by replication, settings in X, Y, Z order
            let records: Vec<_> = exec
                .runs
                .iter()
                .flat_map(|r| r.runs[i].records.iter().copied())
                .collect();
            write(
                &out_dir.join(format!("counts_{}.csv", label.as_str())),
                &counts_csv(&records),
            )?;
        }
    }
    Ok(exec)
}

pub const SWEEP_PARAMETERS: [&str; 8] = [
    "shots_per_setting",
    "replications",
    "master_seed",
    "theta",
    "dark_rate",
    "slm_phase_error_delta",
    "analyzer_angle_error",
    "pinhole_halfwidth",
];

fn as_count(parameter: &str, value: f64) -> Result<u64, CliError> {
    if value < 0.0 || value.fract() != 0.0 || !value.is_finite() || value > u64::MAX as f64 {
        return Err(CliError::ConfigInvalid {
            field: parameter.into(),
            message: format!("{value} is not a non-negative integer"),
        });
    }
    Ok(value as u64)
}

/// Sets a numeric config field by name and re-validates the config.
pub fn set_parameter(
    cfg: &mut ExperimentConfig,
    parameter: &str,
    value: f64,
) -> Result<(), CliError> {
    match parameter {
        "shots_per_setting" | "shots" => cfg.shots_per_setting = as_count(parameter, value)?,
        "replications" => cfg.replications = as_count(parameter, value)? as usize,
        "master_seed" => cfg.master_seed = as_count(parameter, value)?,
        "theta" => cfg.theta = value,
        "dark_rate" => cfg.imperfections.dark_rate = value,
        "slm_phase_error_delta" | "delta" => cfg.imperfections.slm_phase_error_delta = value,
        "analyzer_angle_error" => cfg.imperfections.analyzer_angle_error = value,
        "pinhole_halfwidth" => {
            cfg.imperfections.pinhole_halfwidth = as_count(parameter, value)? as usize
        }
        other => return Err(CliError::UnknownParameter(other.into())),
    }
    cfg.validate()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub replications: usize,
    pub median_residual: f64,
    pub median_abs_residual: f64,
    pub median_abs_z: f64,
    pub fraction_abs_z_within_4: f64,
    pub median_se_re_w12: f64,
}

fn sweep_csv(parameter: &str, rows: &[SweepRow]) -> String {
    let mut out = format!(
        "{parameter},replications,median_residual,median_abs_residual,median_abs_z,fraction_abs_z_within_4,median_se_re_w12\n"
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            sig17(r.value),
            r.replications,
            sig17(r.median_residual),
            sig17(r.median_abs_residual),
            sig17(r.median_abs_z),
            sig17(r.fraction_abs_z_within_4),
            sig17(r.median_se_re_w12)
        ));
    }
    out
}

/// One row of Born-trial summaries per parameter value.
pub fn sweep(
    cfg: &ExperimentConfig,
    parameter: &str,
    values: &[f64],
    opts: ExecOptions,
) -> Result<Vec<SweepRow>, CliError> {
    if !SWEEP_PARAMETERS.contains(&parameter) && !matches!(parameter, "shots" | "delta") {
        return Err(CliError::UnknownParameter(parameter.into()));
    }
    values
        .iter()
        .map(|&value| {
            let mut point = cfg.clone();
            if let Some(seed) = opts.seed {
                point.master_seed = seed;
            }
            set_parameter(&mut point, parameter, value)?;
            let exec = execute(&point, ExecOptions { seed: None, ..opts })?;
            let trials = exec.trials();
            Ok(SweepRow {
                value,
                replications: trials.len(),
                median_residual: median(trials.iter().map(|t| t.residual)),
                median_abs_residual: median(trials.iter().map(|t| t.residual.abs())),
                median_abs_z: median(trials.iter().map(|t| t.z_score.abs())),
                fraction_abs_z_within_4: trials.iter().filter(|t| t.z_score.abs() <= 4.0).count()
                    as f64
                    / trials.len() as f64,
                median_se_re_w12: median(trials.iter().map(|t| t.w12.se_re)),
            })
        })
        .collect()
}

/// `sweep`: writes `sweep_<parameter>.csv` into `out_dir`.
pub fn cmd_sweep(
    config_path: &Path,
    parameter: &str,
    values: &[f64],
    out_dir: &Path,
    opts: ExecOptions,
) -> Result<Vec<SweepRow>, CliError> {
    let cfg = ExperimentConfig::load(config_path)?;
    let rows = sweep(&cfg, parameter, values, opts)?;
    create_dir(out_dir)?;
    write(
        &out_dir.join(format!("sweep_{parameter}.csv")),
        &sweep_csv(parameter, &rows),
    )?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: String,
    pub cases: usize,
    pub max_abs_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheckSummary {
    pub convention: PrefactorConvention,
    pub checks: Vec<OracleCheck>,
    /// `W_derived / W_literal` on the `(1, i)/sqrt(2)` fixture; equals `|C|^4`.
    pub prefactor_mismatch_factor: f64,
}

impl OracleCheckSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = format!("prefactor convention: {:?}\n", self.convention);
        for c in &self.checks {
            out.push_str(&format!(
                "{} {} ({} cases, max |error| = {})\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.cases,
                sig17(c.max_abs_error)
            ));
        }
        out.push_str(&format!(
            "derived / paper-literal prefactor on the (1, i)/sqrt(2) fixture: {}\n",
            sig17(self.prefactor_mismatch_factor)
        ));
        out.push_str(if self.passed() {
            "oracle check passed\n"
        } else {
            "oracle check FAILED\n"
        });
        out
    }
}

struct Comparison {
    name: String,
    cases: usize,
    max_err: f64,
}

impl Comparison {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            cases: 0,
            max_err: 0.0,
        }
    }

    fn record(&mut self, a: Complex64, b: Complex64) {
        self.cases += 1;
        let err = (a - b).norm();
        // NaN must fail the check
        self.max_err = if err.is_nan() {
            f64::INFINITY
        } else {
            self.max_err.max(err)
        };
    }

    fn finish(self) -> OracleCheck {
        OracleCheck {
            passed: self.max_err < ORACLE_TOLERANCE,
            name: self.name,
            cases: self.cases,
            max_abs_error: self.max_err,
        }
    }
}

/// Random mark set, each cell included with probability 1/2.
pub fn random_marks(rng: &mut ChaCha8Rng, n: usize) -> MarkSet {
    MarkSet::new((0..n).filter(|_| rng.random_bool(0.5)))
}

/// The seeded oracle sweep: protocol pipeline (under `convention`) against
/// the dense weak value and the dense joint-state simulation.
pub fn oracle_check(cfg: &ExperimentConfig) -> Result<OracleCheckSummary, CliError> {
    let convention = cfg.prefactor_convention;
    let theta = FULL_FLIP_THETA;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, &["oracle-check"]));
    let mut vs_weak =
        Comparison::new("pipeline vs dense weak value, N in {2, 4, 16, 64} x 100 states");
    let mut vs_joint = Comparison::new(
        "pipeline vs dense joint-state simulation, N in {2, 4, 16, 64} x 100 states",
    );
    for n in [2usize, 4, 16, 64] {
        let grid = GridSpec::new(n)?;
        for _ in 0..100 {
            let psi = PositionWavefunction::random(grid, rng.random());
            let marks = random_marks(&mut rng, n);
            let w = run_exact_with(&psi, &marks, theta, convention)?;
            vs_weak.record(w, oracle_weak_value(&psi, &marks)?);
            vs_joint.record(w, oracle_joint_pipeline(&psi, &marks, theta)?);
        }
    }

    let mut exhaustive = Comparison::new("N = 2 exhaustive mark sets x 25 states");
    let grid2 = GridSpec::new(2)?;
    for _ in 0..25 {
        let psi = PositionWavefunction::random(grid2, rng.random());
        for marks in [vec![], vec![0], vec![1], vec![0, 1]] {
            let marks = MarkSet::new(marks);
            exhaustive.record(
                run_exact_with(&psi, &marks, theta, convention)?,
                oracle_weak_value(&psi, &marks)?,
            );
        }
    }

    let h = std::f64::consts::FRAC_1_SQRT_2;
    let fixture = PositionWavefunction::normalized(
        grid2,
        vec![Complex64::new(h, 0.0), Complex64::new(0.0, h)],
    )?;
    let mut prefactor = Comparison::new("prefactor fixture (1, i)/sqrt(2), |<p=0|psi>|^2 = 1/2");
    for marks in [vec![0], vec![1], vec![0, 1]] {
        let marks = MarkSet::new(marks);
        prefactor.record(
            run_exact_with(&fixture, &marks, theta, convention)?,
            oracle_weak_value(&fixture, &marks)?,
        );
    }
    let marks0 = MarkSet::new([0]);
    let mismatch = run_exact_with(&fixture, &marks0, theta, PrefactorConvention::Derived)?.norm()
        / run_exact_with(&fixture, &marks0, theta, PrefactorConvention::PaperLiteral)?.norm();

    let psi = cfg.wavefunction()?;
    let mut configured = Comparison::new("configured state, marks {x1}, {x2}, {x1, x2}");
    for marks in [
        MarkSet::new([cfg.x1]),
        MarkSet::new([cfg.x2]),
        MarkSet::new([cfg.x1, cfg.x2]),
    ] {
        configured.record(
            run_exact_with(&psi, &marks, theta, convention)?,
            oracle_weak_value(&psi, &marks)?,
        );
    }

    Ok(OracleCheckSummary {
        convention,
        checks: vec![
            vs_weak.finish(),
            vs_joint.finish(),
            exhaustive.finish(),
            prefactor.finish(),
            configured.finish(),
        ],
        prefactor_mismatch_factor: mismatch,
    })
}

/// `oracle-check`: without a config file the defaults (uniform N = 4,
/// derived prefactor) are used.
pub fn cmd_oracle_check(
    config_path: Option<&Path>,
    opts: ExecOptions,
) -> Result<OracleCheckSummary, CliError> {
    let mut cfg = match config_path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = opts.seed {
        cfg.master_seed = seed;
    }
    oracle_check(&cfg)
}
