//! `nlexp` — experiment runner for discretely supported nonlinear
//! expectation models: convergence studies against the limiting PDE, the
//! verification suite, tightness statistics, and generator tables.

use clap::{Args, Parser, Subcommand};
use nlexp_cli::config::ConfigDoc;
use nlexp_cli::report::{EnvironmentStamp, ExperimentReport, ReportFormat};
use nlexp_cli::{experiment, verify, CliError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nlexp", version, about = "Limit-theorem experiments for nonlinear expectation models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML: one [model] plus experiment sections).
    #[arg(long)]
    config: PathBuf,
    /// Directory for emitted reports; omit to print to stdout only.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Row format for emitted reports.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Nested values for each n against the PDE origin value.
    Converge(RunArgs),
    /// Same pipeline with the per-step penalty divided by n.
    Corollary1(RunArgs),
    /// Solve the limiting PDE once (or with refinement levels).
    Pde(RunArgs),
    /// Run the verification suite.
    Verify(RunArgs),
    /// Tightness statistic and tail bound.
    Tightness(RunArgs),
    /// Tabulate the generator over a configured (A, p) grid.
    GeneratorTable(RunArgs),
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Converge(a)
            | Command::Corollary1(a)
            | Command::Pde(a)
            | Command::Verify(a)
            | Command::Tightness(a)
            | Command::GeneratorTable(a) => a,
        }
    }
}

fn missing(section: &str) -> CliError {
    CliError::Config(format!("config has no [{section}] section"))
}

fn run(cli: &Cli) -> Result<ExperimentReport, CliError> {
    let args = cli.command.args();
    let cfg = ConfigDoc::from_path(&args.config)?;
    let spec = cfg.build_spec()?;
    let stamp = EnvironmentStamp::new(args.seed, args.config.display().to_string());

    let report = match &cli.command {
        Command::Converge(_) => {
            let doc = cfg.converge.as_ref().ok_or_else(|| missing("converge"))?;
            experiment::run_convergence(&spec, doc, stamp)?
        }
        Command::Corollary1(_) => {
            let doc = cfg
                .corollary1
                .as_ref()
                .or(cfg.converge.as_ref())
                .ok_or_else(|| missing("corollary1"))?;
            experiment::run_corollary1(&spec, doc, stamp)?
        }
        Command::Pde(_) => {
            let doc = cfg.pde.as_ref().ok_or_else(|| missing("pde"))?;
            experiment::run_pde(&spec, doc, stamp, args.out.as_deref())?
        }
        Command::Verify(_) => {
            let doc = cfg.verify.clone().unwrap_or_default();
            verify::verify_suite(&spec, &doc, stamp)?
        }
        Command::Tightness(_) => {
            let doc = cfg.tightness.as_ref().ok_or_else(|| missing("tightness"))?;
            experiment::run_tightness(&spec, doc, stamp)?
        }
        Command::GeneratorTable(_) => {
            let doc = cfg
                .generator_table
                .as_ref()
                .ok_or_else(|| missing("generator_table"))?;
            experiment::run_generator_table(&spec, doc, stamp, args.out.as_deref())?
        }
    };

    if let Some(dir) = &args.out {
        let format = ReportFormat::parse(&args.format)?;
        for path in report.emit(dir, format)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for line in report.console_lines() {
                println!("{line}");
            }
            if report.all_pass() {
                ExitCode::SUCCESS
            } else {
                eprintln!("one or more checks failed");
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
