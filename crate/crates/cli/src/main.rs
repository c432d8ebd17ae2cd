use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fedpoison_cli::plot::{read_auc_series, render_svg};
use fedpoison_cli::{cmd_run, cmd_sweep, parse_config, RunOptions, SweepSpec};

#[derive(Parser)]
#[command(name = "fedpoison", version, about = "Federated poisoning attack / robust aggregation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its per-round CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the final global parameters as text.
        #[arg(long)]
        dump_params: bool,
        /// Fill the wallclock_s column (breaks byte-identical reruns).
        #[arg(long)]
        record_wallclock: bool,
    },
    /// Run an attack x defense x seed matrix and write a summary CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        attacks: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        defenses: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        record_wallclock: bool,
    },
    /// Draw test AUC per round of one or more run CSVs as an SVG chart.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out, dump_params, record_wallclock } => {
            let rc = parse_config(&config)?;
            let outcome = cmd_run(&rc.experiment, seed, &out, RunOptions { dump_params, record_wallclock })?;
            eprintln!("wrote {}", outcome.csv_path.display());
            if let Some(p) = outcome.params_path {
                eprintln!("wrote {}", p.display());
            }
            println!("final_auc {}", outcome.final_auc);
        }
        Command::Sweep { config, attacks, defenses, seeds, out, jobs, record_wallclock } => {
            let rc = parse_config(&config)?;
            let spec = SweepSpec { attacks: &attacks, defenses: &defenses, seeds: &seeds, jobs, record_wallclock };
            let (manifest, rows) = cmd_sweep(&rc, &spec, &out)?;
            for row in &rows {
                println!("{}", row.to_csv());
            }
            eprintln!("wrote {} run CSVs and {}", manifest.run_csvs.len(), manifest.summary_path.display());
        }
        Command::Plot { csv, out } => {
            let mut series = Vec::new();
            for path in &csv {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                series.push((label, read_auc_series(&text)?));
            }
            std::fs::write(&out, render_svg(&series)?).with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(())
}
