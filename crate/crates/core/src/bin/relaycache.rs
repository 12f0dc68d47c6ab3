use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use relaycache::experiment::{self, Mode};
use relaycache::{sim, Error, ExperimentConfig, SlotSemantics};

#[derive(Parser)]
#[command(
    name = "relaycache",
    version,
    about = "Relay cache/queue throughput model"
)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the busy-relay cache-hit semantics.
    #[arg(long, global = true, value_enum)]
    semantics: Option<SemanticsArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SemanticsArg {
    Blocked,
    DataCenter,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Analytic,
    Oracle,
    Simulate,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Link success probability table.
    Links,
    /// Closed-form chain and throughputs.
    Analytic,
    /// Exact enumeration of slot events.
    Oracle,
    /// Monte Carlo simulation.
    Simulate {
        /// Per-slot trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate every value of the config's sweep.
    Sweep {
        #[arg(long, value_enum, default_value = "analytic")]
        mode: ModeArg,
    },
    /// Printed formulas vs. enumeration vs. simulation.
    Compare,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    if let Some(s) = cli.semantics {
        cfg.sim.semantics = match s {
            SemanticsArg::Blocked => SlotSemantics::Blocked,
            SemanticsArg::DataCenter => SlotSemantics::DataCenter,
        };
    }

    match cli.command {
        Command::Links => {
            let rows = experiment::links(&cfg)?;
            experiment::write_links(&rows, cfg.geometry.sinr_threshold_db, output(&cli.out)?)
        }
        Command::Analytic | Command::Oracle => {
            let mode = match cli.command {
                Command::Analytic => Mode::Analytic,
                _ => Mode::Oracle,
            };
            cfg.sweep = None;
            let rows = experiment::evaluate(&cfg, mode)?;
            experiment::write_reports(&rows, output(&cli.out)?)
        }
        Command::Simulate { trace } => {
            cfg.sweep = None;
            cfg.validate()?;
            let scn = cfg.resolve()?;
            let mut trace_file = trace
                .map(|p| {
                    File::create(&p)
                        .map(BufWriter::new)
                        .map_err(|e| Error::Io(format!("{}: {e}", p.display())))
                })
                .transpose()?;
            let result = sim::run_traced(
                &scn.budget,
                &scn.traffic,
                scn.cache.queue_size,
                &cfg.sim,
                trace_file.as_mut().map(|w| w as &mut dyn Write),
            )?;
            drop(trace_file);
            let c = result.counters;
            eprintln!(
                "direct {} relayed {} accepted {} dropped {} u2 served {} u2 blocked {}",
                c.delivered_direct,
                c.delivered_relayed,
                c.accepted,
                c.dropped_full,
                c.u2_served,
                c.u2_blocked
            );
            let row = experiment::simulated_row(&scn, &cfg.sim, result);
            experiment::write_reports(&[row], output(&cli.out)?)
        }
        Command::Sweep { mode } => {
            if cfg.sweep.is_none() {
                return Err(Error::Config("config has no sweep section".into()));
            }
            let mode = match mode {
                ModeArg::Analytic => Mode::Analytic,
                ModeArg::Oracle => Mode::Oracle,
                ModeArg::Simulate => Mode::Simulate,
                ModeArg::All => Mode::All,
            };
            let rows = experiment::evaluate(&cfg, mode)?;
            experiment::write_reports(&rows, output(&cli.out)?)
        }
        Command::Compare => {
            let cmp = experiment::compare(&cfg)?;
            experiment::write_comparison(&cmp, output(&cli.out)?)?;
            eprint!("{}", experiment::summarize(&cmp));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
