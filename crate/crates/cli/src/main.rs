use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use islands_cli::config::{Format, RunConfig};
use islands_cli::{commands, exit, records, CliError};
use islands_core::mc::{with_threads, write_reports_csv, TestReport};

/// Simulation and exact evaluation of the anchored-island coverage model.
#[derive(Parser)]
#[command(name = "islands", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate exact quantities by quadrature.
    Exact(Common),
    /// Monte Carlo estimates of the ocean measure.
    Simulate(Common),
    /// Run statistical and numerical test suites; exit 1 if any fails.
    Verify(Common),
    /// Evaluate quantities over a parameter grid.
    Scan(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads for replications.
    #[arg(long, env = "ISLANDS_THREADS")]
    threads: Option<usize>,
}

enum Output {
    Records(Vec<records::Record>),
    Reports(Vec<TestReport>),
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.run.seed = s;
    }
    if let Some(r) = common.reps {
        cfg.run.reps = r;
    }
    if let Some(f) = common.format {
        cfg.output.format = f;
    }
    if let Some(p) = &common.out {
        cfg.output.path = Some(p.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: &Output, cfg: &RunConfig) -> Result<(), CliError> {
    let sink: Box<dyn Write> = match &cfg.output.path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| {
                CliError::Io(format!("cannot create {}: {e}", p.display()))
            })?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match (out, cfg.output.format) {
        (Output::Records(r), f) => records::write(r, f, sink),
        (Output::Reports(r), Format::Csv) => Ok(write_reports_csv(r, sink)?),
        (Output::Reports(r), Format::Json) => {
            let mut sink = sink;
            serde_json::to_writer_pretty(&mut sink, r).map_err(CliError::io)?;
            writeln!(sink).map_err(CliError::io)?;
            sink.flush().map_err(CliError::io)
        }
    }
}

fn run(command: Command) -> Result<i32, CliError> {
    let (common, which) = match &command {
        Command::Exact(c) => (c, 0),
        Command::Simulate(c) => (c, 1),
        Command::Verify(c) => (c, 2),
        Command::Scan(c) => (c, 3),
    };
    let cfg = load(common)?;
    if common.threads == Some(0) {
        return Err(CliError::Config("--threads must be positive".into()));
    }
    let output = with_threads(common.threads, || -> Result<Output, CliError> {
        Ok(match which {
            0 => Output::Records(commands::exact(&cfg)?),
            1 => Output::Records(commands::simulate(&cfg)?),
            2 => Output::Reports(commands::verify(&cfg)?),
            _ => Output::Records(commands::scan(&cfg)?),
        })
    })??;
    emit(&output, &cfg)?;
    if let Output::Reports(reports) = &output {
        for r in reports {
            eprintln!("{}", r.summary_line());
        }
        if reports.iter().any(|r| !r.pass) {
            return Ok(exit::TEST_FAILURE);
        }
    }
    Ok(exit::OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("islands: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
