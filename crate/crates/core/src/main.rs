//! Command-line front end for the surface-tracing simulator.
//!
//! Exit codes: 0 success, 1 scenario validation or I/O failure,
//! 2 runtime failure (divergence, no contact reached), 64 usage error.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use surftrace::scenario::{parse_override, KeyValue, Scenario};
use surftrace::{sim, Error};

#[derive(Parser)]
#[command(
    name = "surftrace",
    version,
    about = "Hybrid force-motion surface tracing with online normal estimation",
    disable_help_subcommand = true
)]
struct Cli {
    /// Suppress informational output (results are still written to files).
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario; writes NAME.csv and NAME.summary.txt.
    Run {
        /// Scenario file (TOML).
        scenario: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run a scenario with estimation on and off; writes NAME.on.csv,
    /// NAME.off.csv, both summaries, and NAME.delta.txt.
    Compare {
        /// Scenario file (TOML).
        scenario: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Check a scenario file against the schema without simulating.
    Validate {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Override a value before validation (dotted.key=value); repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
        set: Vec<KeyValue>,
    },
    /// List scenario files (*.cfg) under a directory.
    ListScenarios {
        /// Directory to scan.
        #[arg(default_value = "scenarios")]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunOpts {
    /// Directory for output files (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override a scenario value (dotted.key=value); repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    set: Vec<KeyValue>,
    /// Replace the scenario's random seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet {
        "error"
    } else {
        "info"
    }))
    .format_timestamp(None)
    .init();

    match dispatch(cli.command, cli.quiet) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                Error::ScenarioIo(_) | Error::ScenarioInvalid(_) => 1,
                _ => 2,
            })
        }
    }
}

fn dispatch(command: Command, quiet: bool) -> Result<(), Error> {
    match command {
        Command::Run { scenario, opts } => {
            let scn = load(&scenario, &opts)?;
            let output = sim::run(&scn)?;
            fs::create_dir_all(&opts.out).map_err(|e| out_dir_error(&opts.out, &e))?;
            write_log(&opts.out, &format!("{}.csv", scn.name), &output.records)?;
            let summary = sim::summary_text(&scn.name, &output.summary);
            write_text(&opts.out, &format!("{}.summary.txt", scn.name), &summary)?;
            if !quiet {
                print!("{summary}");
            }
            Ok(())
        }
        Command::Compare { scenario, opts } => {
            let scn = load(&scenario, &opts)?;
            let outcome = sim::compare(&scn)?;
            fs::create_dir_all(&opts.out).map_err(|e| out_dir_error(&opts.out, &e))?;
            write_log(&opts.out, &format!("{}.on.csv", scn.name), &outcome.on.records)?;
            write_log(&opts.out, &format!("{}.off.csv", scn.name), &outcome.off.records)?;
            write_text(
                &opts.out,
                &format!("{}.on.summary.txt", scn.name),
                &sim::summary_text(&scn.name, &outcome.on.summary),
            )?;
            write_text(
                &opts.out,
                &format!("{}.off.summary.txt", scn.name),
                &sim::summary_text(&scn.name, &outcome.off.summary),
            )?;
            let delta = sim::delta_text(&scn.name, &outcome);
            write_text(&opts.out, &format!("{}.delta.txt", scn.name), &delta)?;
            if !quiet {
                print!("{delta}");
            }
            Ok(())
        }
        Command::Validate { scenario, set } => {
            let scn = Scenario::load(&scenario, &set)?;
            if !quiet {
                println!("ok: {} ({} steps at {} Hz)", scn.name, scn.step_count(), scn.rate);
            }
            Ok(())
        }
        Command::ListScenarios { dir } => {
            let entries = fs::read_dir(&dir)
                .map_err(|e| Error::ScenarioIo(format!("{}: {e}", dir.display())))?;
            let mut names: Vec<String> = entries
                .filter_map(|entry| {
                    let path = entry.ok()?.path();
                    if path.extension().is_some_and(|ext| ext == "cfg") {
                        Some(path.file_stem()?.to_string_lossy().into_owned())
                    } else {
                        None
                    }
                })
                .collect();
            names.sort();
            for name in names {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn load(path: &Path, opts: &RunOpts) -> Result<Scenario, Error> {
    let mut scn = Scenario::load(path, &opts.set)?;
    if let Some(seed) = opts.seed {
        scn.seed = seed;
    }
    Ok(scn)
}

fn out_dir_error(dir: &Path, err: &std::io::Error) -> Error {
    Error::ScenarioIo(format!("cannot create output directory {}: {err}", dir.display()))
}

fn write_log(dir: &Path, file: &str, records: &[sim::StepRecord]) -> Result<(), Error> {
    let path = dir.join(file);
    let io_err = |e: std::io::Error| Error::ScenarioIo(format!("{}: {e}", path.display()));
    let mut out = BufWriter::new(fs::File::create(&path).map_err(io_err)?);
    sim::write_csv(&mut out, records).map_err(io_err)?;
    out.flush().map_err(io_err)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_text(dir: &Path, file: &str, text: &str) -> Result<(), Error> {
    let path = dir.join(file);
    fs::write(&path, text).map_err(|e| Error::ScenarioIo(format!("{}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}
