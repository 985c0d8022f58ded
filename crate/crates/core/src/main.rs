use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use weakborn::cli::{cmd_oracle_check, cmd_run, cmd_sweep, CliError, ExecOptions};

#[derive(Parser)]
#[command(
    name = "weakborn",
    version,
    about = "Weak-value wavefunction measurement and Born-rule checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Worker threads for replications (default: one per core)
    #[arg(long)]
    workers: Option<usize>,
    /// Override master_seed from the config
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn options(&self) -> ExecOptions {
        ExecOptions {
            workers: self.workers,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the three-run protocol and write a report directory
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Repeat the run for each value of one numeric parameter
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        parameter: String,
        /// Comma-separated values, e.g. 1e4,1e5,1e6
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the pipeline against the dense oracles
    OracleCheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn fail(err: CliError) -> ExitCode {
    eprintln!("error: {err}");
    if let Some(hint) = err.hint() {
        eprintln!("hint: {hint}");
    }
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            common,
        } => match cmd_run(&config, &out, common.options()) {
            Ok(exec) => {
                let s = &exec.report.summary;
                println!(
                    "{} replication(s); median |residual| = {:e}; median |z| = {:e}; report in {}",
                    s.replications,
                    s.median_abs_residual.0,
                    s.median_abs_z.0,
                    out.join("report.json").display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Sweep {
            config,
            parameter,
            values,
            out,
            common,
        } => match cmd_sweep(&config, &parameter, &values, &out, common.options()) {
            Ok(rows) => {
                println!(
                    "{} row(s) written to {}",
                    rows.len(),
                    out.join(format!("sweep_{parameter}.csv")).display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::OracleCheck { config, common } => {
            match cmd_oracle_check(config.as_deref(), common.options()) {
                Ok(summary) => {
                    print!("{}", summary.render());
                    if summary.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(4)
                    }
                }
                Err(e) => fail(e),
            }
        }
    }
}
