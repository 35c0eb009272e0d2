use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use decical::grid_store::DataFormat;
use decical::report::{
    run_compare, run_diagnostics, run_evaluate, synth_to_dir, with_threads, OutputFormat,
    ReportError, RunConfig, SynthConfig,
};

#[derive(Parser)]
#[command(name = "decical", version, about = "Decision-level evaluation of ensemble forecasts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
    /// Worker threads (results do not depend on it)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Decisions, cost gaps and (optionally) diagnostics for a config
    Evaluate(RunArgs),
    /// CRPS, spread-skill ratio and PIT histograms only
    Diagnostics(RunArgs),
    /// Relative improvement of a candidate report over a reference report
    Compare {
        reference: PathBuf,
        candidate: PathBuf,
        #[arg(long, default_value = "comparison")]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
    },
    /// Synthetic observations, forecasters and their latent laws
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        data_format: Option<DataFormat>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn load_run(args: &RunArgs) -> Result<RunConfig, ReportError> {
    let mut cfg = RunConfig::from_path(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(out) = &args.out {
        // relative to the working directory, not the config
        cfg.out = std::env::current_dir()
            .map(|d| d.join(out))
            .unwrap_or_else(|_| out.clone());
    }
    if let Some(f) = args.format {
        cfg.output_format = f;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String, ReportError> {
    match cli.command {
        Command::Evaluate(args) => {
            let cfg = load_run(&args)?;
            let report = run_evaluate(&cfg)?;
            Ok(format!(
                "{} aggregate rows written to {}",
                report.aggregate_rows().len(),
                cfg.out_dir().display()
            ))
        }
        Command::Diagnostics(args) => {
            let cfg = load_run(&args)?;
            let summary = run_diagnostics(&cfg)?;
            Ok(format!(
                "diagnostics for {} lead times written to {}",
                summary.leads.len(),
                cfg.out_dir().display()
            ))
        }
        Command::Compare {
            reference,
            candidate,
            out,
            format,
        } => {
            let c = run_compare(&reference, &candidate, &out, format)?;
            Ok(format!(
                "{} comparison rows written to {}",
                c.aggregates.len() + c.diagnostics.len(),
                out.display()
            ))
        }
        Command::Synth {
            config,
            seed,
            out,
            data_format,
            threads,
        } => {
            let mut cfg = SynthConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(f) = data_format {
                cfg.data_format = f;
            }
            let written = with_threads(threads.unwrap_or(0), || synth_to_dir(&cfg, &out))?;
            Ok(format!(
                "{} ensembles written to {}",
                written.ensembles.len(),
                out.display()
            ))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
