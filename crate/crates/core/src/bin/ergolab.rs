use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ergolab::experiments::{self, ExperimentConfig, ExperimentKind};

#[derive(Parser, Debug)]
#[command(name = "ergolab", version, about = "Monte Carlo and transfer-operator experiments for infinite ergodic theory")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides `run.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSVs and run metadata.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Largest grid point (overrides `run.grid_max`).
    #[arg(long, global = true)]
    grid_max: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Occupation-time summaries.
    Simulate,
    /// Darling-Kac distributional check.
    Dk,
    /// Stable limit of return-time sums.
    Stable,
    /// One-sided law of the iterated logarithm.
    Lil,
    /// Exact occupation / return-time duality check.
    Duality,
    /// Rényi inequality moment ratio.
    Renyi,
    /// Moment-set Laplace sums.
    Moments,
    /// Dual ergodic averages of the transfer operator.
    Wpde,
    /// Asymptotic renewal equation.
    Renewal,
    /// Mixing-coefficient estimates.
    Mixing,
    /// Ulam invariant density.
    Ulam,
    /// Neutral-branch tail.
    Tail,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::Simulate => ExperimentKind::Simulate,
            Command::Dk => ExperimentKind::Dk,
            Command::Stable => ExperimentKind::Stable,
            Command::Lil => ExperimentKind::Lil,
            Command::Duality => ExperimentKind::Duality,
            Command::Renyi => ExperimentKind::Renyi,
            Command::Moments => ExperimentKind::Moments,
            Command::Wpde => ExperimentKind::Wpde,
            Command::Renewal => ExperimentKind::Renewal,
            Command::Mixing => ExperimentKind::Mixing,
            Command::Ulam => ExperimentKind::Ulam,
            Command::Tail => ExperimentKind::Tail,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> ergolab::Result<bool> {
    let g = &cli.global;
    let path = g.config.as_ref().ok_or_else(|| ergolab::Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = g.seed {
        cfg.run.seed = seed;
    }
    if let Some(n) = g.grid_max {
        cfg.run.grid_max = n;
    }
    cfg.validate()?;
    let kind = cli.command.kind();
    let table = match g.threads {
        Some(k) => experiments::run_with_threads(kind, &cfg, k)?,
        None => experiments::run(kind, &cfg)?,
    };
    let out = g.out.clone().or_else(|| cfg.run.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    table.write_dir(&out, &experiments::metadata(kind, &cfg, &table))?;
    // A closed stdout (e.g. piped into `head`) must not change the exit code.
    let mut stdout = std::io::stdout().lock();
    for row in table.rows.iter().filter(|r| r.verdict.outcome != experiments::Outcome::Info) {
        let _ = writeln!(stdout, "{:<24} n={:<10} value={:<14.6e} {}", row.statistic, row.n, row.value, row.verdict);
    }
    let _ = writeln!(stdout, "{} -> {}", kind, out.display());
    Ok(table.all_pass())
}
