use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stormarket_cli::config::Mode;
use stormarket_cli::run;
use stormarket_cli::{Failure, RunConfig};

/// Day-ahead market simulation with strategic storage.
#[derive(Parser)]
#[command(name = "stormarket", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Improvement needed before a player changes schedule.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Sweep cap of the equilibrium search.
    #[arg(long)]
    max_sweeps: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Failure> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(t) = self.tolerance {
            cfg.tolerance = t;
        }
        if let Some(m) = self.max_sweeps {
            cfg.max_sweeps = m;
        }
        cfg.check()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check data and scenario, listing every violated rule.
    Validate(Common),
    /// Write the cleaned curves and renewables of the simulated day.
    Ingest(Common),
    /// Size aggregate storage and split it between players.
    Size(Common),
    /// Search for a pure Nash equilibrium.
    Nash(Common),
    /// Solve the welfare-maximising dispatch.
    Planner(Common),
    /// Run the grid of the config's `sweep` section.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parallel grid points; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Tabulate saved run summaries against the first one.
    Compare {
        #[arg(required = true, num_args = 1..)]
        summaries: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate(c) => run::validate(&c.load()?),
        Command::Ingest(c) => run::ingest(&c.load()?).map(drop),
        Command::Size(c) => run::size(&c.load()?).map(drop),
        Command::Nash(c) => run::single(&c.load()?, Mode::Nash).map(drop),
        Command::Planner(c) => run::single(&c.load()?, Mode::Planner).map(drop),
        Command::Sweep { common, jobs } => {
            let cfg = common.load()?;
            if cfg.sweep.is_none() {
                return Err(Failure::config("the config has no `sweep` section"));
            }
            run::sweep(&cfg, jobs).map(drop)
        }
        Command::Compare { summaries, out } => run::compare(&summaries, &out).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
