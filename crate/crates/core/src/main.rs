use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use colocate::experiment::{
    chain_experiments, emit_waiting_histogram, histogram_csv, read_decision_log, run_experiment, ExperimentConfig,
    ExperimentError, ExperimentReport,
};
use colocate::grouping::fit_groups;
use colocate::preference::{SoftmaxAxis, UpdateMode};
use colocate::scheduler::{check_starvation_bound, Variant};
use colocate::workload::{load_traces, summarize_job, trace_job_ids};

#[derive(Parser)]
#[command(name = "colocate", version, about = "Co-location aware scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster per-job usage profiles from a trace CSV.
    Group {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, default_value_t = 6)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run a single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        /// Run a single scheduler instead of the configured list.
        #[arg(long, value_parser = parse_serde::<Variant>)]
        scheduler: Option<Variant>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        matrix_in: Option<PathBuf>,
        #[arg(long)]
        matrix_out: Option<PathBuf>,
        #[arg(long, value_parser = parse_serde::<SoftmaxAxis>)]
        softmax_axis: Option<SoftmaxAxis>,
        #[arg(long, value_parser = parse_serde::<UpdateMode>)]
        update_mode: Option<UpdateMode>,
        /// Check the config and exit.
        #[arg(long)]
        validate: bool,
    },
    /// Run configs in order, handing learned state from one to the next.
    Chain {
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
    },
    /// Summarize a decision log or a report.
    Report {
        /// Decision log (JSON lines) to turn into a waiting-time histogram.
        #[arg(long, required_unless_present = "table")]
        log: Option<PathBuf>,
        /// Check dispatches against this waiting limit.
        #[arg(long, requires = "log")]
        waiting_limit: Option<u32>,
        /// report.json to print as a table.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_serde<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Io(format!("{}: {e}", path.display()))
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), ExperimentError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn group(traces: PathBuf, k: usize, seed: u64, out: Option<PathBuf>) -> Result<(), ExperimentError> {
    let records = load_traces(&traces).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let profiles = trace_job_ids(&records)
        .into_iter()
        .map(|id| {
            let p = summarize_job(&records, &id).map_err(|e| ExperimentError::Config(e.to_string()))?;
            Ok((id, p))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let model = fit_groups(&profiles, k, seed)?;
    for (job, g) in &model.labels {
        println!("{job}\t{g}");
    }
    if let Some(path) = out {
        model.save(path)?;
    }
    Ok(())
}

fn real_main(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Group { traces, k, seed, out } => group(traces, k, seed, out),
        Command::Run {
            config,
            seed,
            scheduler,
            out,
            matrix_in,
            matrix_out,
            softmax_axis,
            update_mode,
            validate,
        } => {
            let mut c = ExperimentConfig::load_unchecked(&config)?;
            let cwd = std::env::current_dir().map_err(|e| io_err(&config, e))?;
            let abs = |p: PathBuf| if p.is_relative() { cwd.join(p) } else { p };
            if let Some(s) = seed {
                c.seeds = vec![s];
            }
            if let Some(v) = scheduler {
                c.schedulers = vec![v];
                c.baseline = None;
            }
            if let Some(p) = out {
                c.output_dir = abs(p);
            }
            if let Some(p) = matrix_in {
                c.matrix_in = Some(abs(p));
            }
            if let Some(p) = matrix_out {
                c.matrix_out = Some(abs(p));
            }
            if let Some(a) = softmax_axis {
                c.softmax_axis = a;
            }
            if let Some(m) = update_mode {
                c.update_mode = m;
            }
            c.validate()?;
            if validate {
                println!("{}: ok", config.display());
                return Ok(());
            }
            let report = run_experiment(&c)?;
            print!("{}", report.table());
            Ok(())
        }
        Command::Chain { configs } => {
            let configs = configs
                .iter()
                .map(ExperimentConfig::load_unchecked)
                .collect::<Result<Vec<_>, _>>()?;
            for report in chain_experiments(&configs)? {
                print!("{}", report.table());
            }
            Ok(())
        }
        Command::Report {
            log,
            waiting_limit,
            table,
            out,
        } => {
            if let Some(path) = table {
                let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
                let report: ExperimentReport =
                    serde_json::from_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
                return emit(out.as_ref(), &report.table());
            }
            let path = log.expect("clap enforces --log without --table");
            let records = read_decision_log(&path)?;
            if let Some(limit) = waiting_limit {
                check_starvation_bound(&records, limit).map_err(|e| ExperimentError::Invariant(vec![e.to_string()]))?;
            }
            emit(out.as_ref(), &histogram_csv(&emit_waiting_histogram(&records)?))
        }
    }
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
