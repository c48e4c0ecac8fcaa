use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod commands;
mod output;
mod spec;

use spec::{ExperimentSpec, Format, Overrides};

#[derive(Parser)]
#[command(name = "allocsim", version, about = "Simulate adaptive allocation designs and compute their limits")]
struct Cli {
    /// Worker threads for replications (default: all cores)
    #[arg(long, global = true, env = "ALLOCSIM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replications and write a summary plus trajectories
    Simulate(SpecArgs),
    /// Print the theoretical limiting allocation
    Limit(SpecArgs),
    /// Check the rule's declared properties on grids and random inputs
    Verify(SpecArgs),
    /// Print the design catalogue
    ListDesigns {
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

#[derive(Args)]
struct SpecArgs {
    /// Experiment spec, TOML or JSON (by extension)
    spec: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
    /// Trajectory format
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Override a spec value, e.g. `--set design.p=0.9` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl SpecArgs {
    fn load(&self) -> Result<ExperimentSpec> {
        let o = Overrides {
            set: self.set.clone(),
            seed: self.seed,
            reps: self.reps,
            horizon: self.horizon,
            out: self.out.clone(),
            format: self.format,
        };
        ExperimentSpec::load(&self.spec, &o)
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a.load()?).map(|_| true),
        Command::Limit(a) => commands::limit(&a.load()?).map(|_| true),
        Command::Verify(a) => commands::verify(&a.load()?),
        Command::ListDesigns { format } => commands::list_designs(format).map(|_| true),
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(anyhow::Error::from)
            .and_then(|pool| pool.install(|| run(cli))),
        None => run(cli),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
