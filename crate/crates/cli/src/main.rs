use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vrscp_cli::config::ExperimentConfig;
use vrscp_cli::{cmd_eval, cmd_oracle_check, presets, run_config, EvalArgs};
use vrscp_core::oracle_suites::Suite;

#[derive(Parser)]
#[command(name = "vrscp", version, about = "Variance-reduced cubic Newton policy optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config's `output_dir`).
        #[arg(long, env = "VRSCP_OUT_DIR")]
        out: Option<PathBuf>,
        /// Seeds run in parallel on this many threads.
        #[arg(long, env = "VRSCP_WORKERS", default_value_t = 1)]
        workers: usize,
        /// Write per-seed solver traces as CSV under `traces/`.
        #[arg(long)]
        trace: bool,
    },
    /// Lower-confidence curve and PR score of a set of records.
    Eval {
        /// Glob selecting record files of a single algorithm.
        pattern: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        #[arg(long)]
        grid_step: Option<u64>,
        /// Probe horizon; defaults to the shortest run's last probe.
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long, env = "VRSCP_OUT_DIR", default_value = ".")]
        out: PathBuf,
    },
    /// Run the oracle verification suites.
    OracleCheck {
        suite: SuiteArg,
        #[arg(long, env = "VRSCP_OUT_DIR", default_value = ".")]
        out: PathBuf,
    },
    /// Print a preset experiment config.
    Preset {
        /// walker, hopper, reacher or humanoid.
        name: String,
        #[arg(long, default_value = "vrscp")]
        algorithm: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Estimators,
    Cubic,
    Saddle,
    All,
}

impl SuiteArg {
    fn suite(self) -> (Suite, &'static str) {
        match self {
            SuiteArg::Estimators => (Suite::Estimators, "estimators"),
            SuiteArg::Cubic => (Suite::Cubic, "cubic"),
            SuiteArg::Saddle => (Suite::Saddle, "saddle"),
            SuiteArg::All => (Suite::All, "all"),
        }
    }
}

fn fail(code: u8, err: anyhow::Error) -> ExitCode {
    eprintln!("error: {err:#}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
            trace,
        } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(2, e),
            };
            match run_config(&cfg, out, workers, trace) {
                Ok(m) => {
                    println!(
                        "{} seeds of {} finished in {:.1} s (config {})",
                        m.seeds.len(),
                        m.algorithm,
                        m.wall_time_seconds,
                        &m.config_hash[..12]
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(1, e),
            }
        }
        Command::Eval {
            pattern,
            n,
            confidence,
            grid_step,
            horizon,
            out,
        } => {
            let args = EvalArgs {
                pattern,
                n,
                confidence,
                grid_step,
                horizon,
                out,
            };
            match cmd_eval(&args) {
                Ok(r) => {
                    println!(
                        "{}: PR({}) = {:?} over {} grid points (step {}, horizon {})",
                        r.algorithm,
                        r.n,
                        r.pr,
                        r.curve.len(),
                        r.grid_step,
                        r.horizon
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(1, e),
            }
        }
        Command::OracleCheck { suite, out } => {
            let (suite, name) = suite.suite();
            match cmd_oracle_check(suite, name, &out) {
                Ok(s) if s.passed => ExitCode::SUCCESS,
                Ok(_) => ExitCode::FAILURE,
                Err(e) => fail(1, e),
            }
        }
        Command::Preset { name, algorithm } => {
            match presets::preset(&name, &algorithm).and_then(|c| c.to_toml()) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(2, e),
            }
        }
    }
}
