use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nullforge_cli::{run_demo, run_scenario, Command, RunOptions, EXIT_SCHEMA};

#[derive(Parser)]
#[command(name = "nullforge", version, about = "Directed curves on null cones: build, correct and certify")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Correct periods, integrate and check directedness.
    Build(RunArgs),
    /// Run every certificate configured in the scenario.
    Certify(RunArgs),
    /// Mesh refinement study and OBJ export.
    Mesh(RunArgs),
    /// Map the curve into SL2(C) and check determinant and nullity.
    Sl2(RunArgs),
    /// Growth table on concentric shells.
    Growth(RunArgs),
    /// Certify every built-in generator, one subdirectory each.
    Demo(CommonArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (JSON).
    #[arg(short, long)]
    config: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// Directory for artifacts and the summary.
    #[arg(short, long, default_value = ".")]
    out_dir: PathBuf,
    /// Overrides the solver seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the embedding and SL2 grid sizes.
    #[arg(long)]
    grid: Option<usize>,
    /// Only report errors.
    #[arg(short, long)]
    quiet: bool,
}

impl CommonArgs {
    fn options(&self) -> RunOptions {
        RunOptions { out_dir: self.out_dir.clone(), seed: self.seed, grid: self.grid }
    }
}

fn init(common: &CommonArgs) -> Result<(), String> {
    let level = if common.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Ok(value) = std::env::var("NULLFORGE_THREADS") {
        let threads: usize = value.parse().map_err(|_| format!("NULLFORGE_THREADS must be a positive integer, got '{value}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, command, config) = match &cli.command {
        Sub::Build(a) => (&a.common, Some(Command::Build), Some(&a.config)),
        Sub::Certify(a) => (&a.common, Some(Command::Certify), Some(&a.config)),
        Sub::Mesh(a) => (&a.common, Some(Command::Mesh), Some(&a.config)),
        Sub::Sl2(a) => (&a.common, Some(Command::Sl2), Some(&a.config)),
        Sub::Growth(a) => (&a.common, Some(Command::Growth), Some(&a.config)),
        Sub::Demo(c) => (c, None, None),
    };
    if let Err(msg) = init(common) {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_SCHEMA as u8);
    }
    let options = common.options();
    let code = match (command, config) {
        (Some(cmd), Some(path)) => {
            let outcome = run_scenario(path, cmd, &options);
            if !common.quiet {
                for check in &outcome.summary.checks {
                    println!("{:<12} {}", check.name, if check.passed { "pass" } else { "FAIL" });
                }
                println!("status: {} (summary in {})", outcome.summary.status, outcome.summary_path.display());
            }
            if let Some(msg) = &outcome.summary.message {
                eprintln!("{msg}");
            }
            outcome.exit_code
        }
        _ => {
            let (code, summary) = run_demo(&options);
            if !common.quiet {
                for run in &summary.runs {
                    let verdict = if run.exit_code == run.expected_exit_code { "as expected" } else { "UNEXPECTED" };
                    println!("{:<16} exit {} ({}, {verdict})", run.generator, run.exit_code, run.status);
                }
            }
            code
        }
    };
    ExitCode::from(code as u8)
}
