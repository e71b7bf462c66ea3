use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lattice_ym::config::{parse_config, ExperimentKind, RunConfig};
use lattice_ym::record::RecordSink;
use lattice_ym::runner::{exit_code, run_experiment, EXIT_ERROR};

/// Lattice Yang-Mills: Langevin dynamics, Metropolis sampling and bound checks.
#[derive(Debug, Parser)]
#[command(name = "lattice-ym", version)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// TOML configuration; omitted keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Record file (line-delimited JSON); stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,

    /// Print the effective configuration, defaults included, and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Deterministic checks of every implemented formula.
    Verify,
    /// Langevin trajectory with time-averaged observables.
    Langevin,
    /// Metropolis reference chain.
    Gibbs,
    /// Coupled Langevin pairs and their contraction rate.
    Couple,
    /// Metropolis sampling plus the variance, susceptibility and decay checks.
    Measure,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::Verify => ExperimentKind::Verify,
            Command::Langevin => ExperimentKind::Langevin,
            Command::Gibbs => ExperimentKind::Gibbs,
            Command::Couple => ExperimentKind::Couple,
            Command::Measure => ExperimentKind::Measure,
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, String> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text).map_err(|e| e.to_string())?;
    if let Some(c) = cli.command {
        cfg.experiment = c.kind();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.output {
        cfg.output = Some(o.clone());
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn run(cfg: &RunConfig) -> i32 {
    let mut stderr = io::stderr();
    // verify prints its check lines to stdout; other experiments log to stderr
    let mut stdout_log = io::stdout();
    let log: &mut (dyn Write + Send) = if cfg.experiment == ExperimentKind::Verify {
        &mut stdout_log
    } else {
        &mut stderr
    };
    let result = match &cfg.output {
        Some(path) => match File::options().create(true).append(true).open(path) {
            Ok(f) => run_experiment(cfg, &mut RecordSink::new(BufWriter::new(f)), log),
            Err(e) => {
                eprintln!("error: cannot open {}: {e}", path.display());
                return EXIT_ERROR;
            }
        },
        // verify without --output keeps stdout to its PASS/FAIL lines
        None if cfg.experiment == ExperimentKind::Verify => run_experiment(cfg, &mut RecordSink::new(io::sink()), log),
        None => run_experiment(cfg, &mut RecordSink::new(io::stdout()), log),
    };
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    exit_code(&result)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    ExitCode::from(run(&cfg) as u8)
}
