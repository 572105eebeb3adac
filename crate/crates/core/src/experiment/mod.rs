//! Config-driven experiments: group a workload, run every scheduler on every
//! seed, and write the report, logs and learned state.

mod config;
mod report;
mod runner;

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::grouping::{fit_groups, profile_sample_run, GroupingError, GroupingModel, ProfilingBench};
use crate::preference::{PreferenceError, PreferenceMatrix, UpdateMode};
use crate::scheduler::{check_starvation_bound, SchedulerError, Variant};
use crate::sim::{generate_workload, generator::WorkloadError, JobCatalog, SimError};
use crate::workload::{Job, ResourceProfile};

pub use config::{CatalogSource, ExperimentConfig};
pub use report::{
    decision_log_jsonl, emit_waiting_histogram, histogram_csv, median, read_decision_log, ExperimentReport,
    HistogramRow, RunSummary, SchedulerSummary, UtilizationPct,
};
pub use runner::{run_scheduler, JobOutcome, RunOutcome, RunSetup, RunningView, SampleScope, CONSERVATION_TOLERANCE};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("invariant violated: {}", .0.join("; "))]
    Invariant(Vec<String>),
    #[error(transparent)]
    Grouping(#[from] GroupingError),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
}

impl ExperimentError {
    /// Process exit status: 2 for broken invariants, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Invariant(_) => 2,
            _ => 1,
        }
    }
}

/// In-memory result of an experiment, before anything is written.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    /// Scheduler-major, seed-minor, matching the config order.
    pub runs: Vec<RunOutcome>,
    pub grouping: GroupingModel,
    /// State handed to the next experiment in a chain.
    pub matrix: PreferenceMatrix,
}

fn history_profiles(config: &ExperimentConfig, catalog: &JobCatalog) -> Result<Vec<(String, ResourceProfile)>, ExperimentError> {
    match &config.history_kinds {
        None => Ok(catalog.profiles()),
        Some(kinds) => kinds
            .iter()
            .map(|k| Ok((k.clone(), catalog.get(k)?.demand)))
            .collect(),
    }
}

/// Loads or fits the grouping model, then labels every job. Kinds unknown
/// to the model are profiled with a short sample run on an idle node.
pub fn group_jobs(
    config: &ExperimentConfig,
    catalog: &JobCatalog,
    workloads: &mut [Vec<Job>],
) -> Result<GroupingModel, ExperimentError> {
    let mut model = match &config.grouping_in {
        Some(path) => {
            let m = GroupingModel::load(path)?;
            if m.k != config.k {
                return Err(ExperimentError::Config(format!(
                    "grouping model {} has k = {}, config asks for {}",
                    path.display(),
                    m.k,
                    config.k
                )));
            }
            m
        }
        None => {
            let seed = config.grouping_seed.unwrap_or(config.seeds[0]);
            fit_groups(&history_profiles(config, catalog)?, config.k, seed)?
        }
    };
    let bench = ProfilingBench::default();
    for job in workloads.iter_mut().flatten() {
        let group = match model.cached(&job.kind) {
            Some(g) => g,
            None => {
                let profile = profile_sample_run(job, &bench, config.sample_fraction)?;
                model.assign_group(job, &profile)
            }
        };
        job.group = Some(group);
    }
    Ok(model)
}

fn initial_matrix(config: &ExperimentConfig) -> Result<PreferenceMatrix, ExperimentError> {
    match &config.matrix_in {
        Some(path) => {
            let mut h = PreferenceMatrix::load(path)?;
            h.ensure_dimension(config.k)?;
            h.set_alpha(config.alpha)?;
            Ok(h)
        }
        None => Ok(PreferenceMatrix::zeros(config.k, config.alpha)?),
    }
}

fn pct(p: &ResourceProfile) -> UtilizationPct {
    UtilizationPct {
        cpu: p.cpu * 100.0,
        mem: p.mem * 100.0,
        disk: p.disk * 100.0,
        net: p.net * 100.0,
        iowait: p.iowait * 100.0,
    }
}

fn summarize(config: &ExperimentConfig, runs: &[RunOutcome]) -> Result<ExperimentReport, ExperimentError> {
    let mut violations = Vec::new();
    let mut schedulers = Vec::new();
    for &variant in &config.schedulers {
        let mine: Vec<&RunOutcome> = runs.iter().filter(|r| r.variant == variant).collect();
        let mut summaries = Vec::new();
        for r in &mine {
            let tag = format!("{variant} seed {}", r.seed);
            violations.extend(r.violations.iter().map(|v| format!("{tag}: {v}")));
            let histogram = emit_waiting_histogram(&r.decisions)?;
            let total: u64 = histogram.iter().map(|h| h.count).sum();
            if total as usize != r.jobs.len() {
                violations.push(format!("{tag}: histogram counts {total} dispatches for {} jobs", r.jobs.len()));
            }
            if variant == Variant::PreferenceWaitLimit {
                if let Err(e) = check_starvation_bound(&r.decisions, config.waiting_limit) {
                    violations.push(format!("{tag}: {e}"));
                }
            }
            summaries.push(RunSummary {
                seed: r.seed,
                makespan_s: r.makespan,
                utilization_pct: pct(&r.utilization),
                dispatched: r.decisions.len(),
                rounds: r.rounds,
                max_waiting_rounds: r.decisions.iter().map(|d| d.waiting_rounds).max().unwrap_or(0),
                waiting_histogram: histogram,
            });
        }
        let makespans: Vec<f64> = mine.iter().map(|r| r.makespan).collect();
        let n = mine.len() as f64;
        let mean = |f: fn(&ResourceProfile) -> f64| mine.iter().map(|r| f(&r.utilization)).sum::<f64>() / n;
        let mean_util = ResourceProfile {
            cpu: mean(|p| p.cpu),
            mem: mean(|p| p.mem),
            disk: mean(|p| p.disk),
            net: mean(|p| p.net),
            iowait: mean(|p| p.iowait),
        };
        schedulers.push(SchedulerSummary {
            scheduler: variant,
            makespan_median_s: median(&makespans),
            makespan_min_s: makespans.iter().copied().fold(f64::INFINITY, f64::min),
            makespan_max_s: makespans.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            utilization_mean_pct: pct(&mean_util),
            delta_vs_baseline_pct: None,
            runs: summaries,
        });
    }
    let baseline = config.baseline_variant();
    if let Some(b) = baseline {
        let reference = schedulers
            .iter()
            .find(|s| s.scheduler == b)
            .map(|s| s.makespan_median_s)
            .expect("baseline is among the schedulers");
        for s in &mut schedulers {
            s.delta_vs_baseline_pct = Some((s.makespan_median_s - reference) / reference * 100.0);
        }
    }
    Ok(ExperimentReport {
        name: config.name.clone(),
        source: "simulated".to_string(),
        seeds: config.seeds.clone(),
        baseline,
        schedulers,
        violations,
    })
}

/// Runs the experiment without touching the filesystem, apart from reading
/// `matrix_in` and `grouping_in`.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentRun, ExperimentError> {
    config.validate()?;
    let catalog = config.catalog.resolve()?;
    let mut workloads = Vec::with_capacity(config.seeds.len());
    let mut arrival = None;
    for &seed in &config.seeds {
        let w = generate_workload(&config.workload, &catalog, seed)?;
        arrival = Some((w.arrival, w.initial));
        workloads.push(w.jobs);
    }
    let (arrival, initial) = arrival.expect("seeds are not empty");
    let grouping = group_jobs(config, &catalog, &mut workloads)?;
    let start = initial_matrix(config)?;

    let cells: Vec<(Variant, usize)> = config
        .schedulers
        .iter()
        .flat_map(|&v| (0..config.seeds.len()).map(move |i| (v, i)))
        .collect();
    let runs = cells
        .par_iter()
        .map(|&(variant, i)| {
            let setup = RunSetup {
                variant,
                seed: config.seeds[i],
                cluster: config.cluster,
                placement: config.placement,
                learning: config.learning(),
                sample_scope: config.sample_scope,
                running_view: config.running_view,
                waiting_limit: config.waiting_limit,
                arrival,
                initial,
            };
            run_scheduler(&setup, &workloads[i], &start)
        })
        .collect::<Result<Vec<_>, _>>()?;

    // Runs of the first learning scheduler are independent episodes from the
    // same start; the handed-on matrix pools their gains. Assign mode has no
    // meaningful sum, so it keeps the first seed's matrix.
    let learner = config.schedulers.iter().copied().find(|v| v.learns());
    let mut matrix = start.clone();
    for r in runs.iter().filter(|r| Some(r.variant) == learner) {
        if config.update_mode == UpdateMode::Assign {
            matrix = r.matrix.clone();
            break;
        }
        matrix.add_learned(&start, &r.matrix)?;
    }
    let report = summarize(config, &runs)?;
    Ok(ExperimentRun {
        report,
        runs,
        grouping,
        matrix,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| ExperimentError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))
}

/// Writes report, logs, matrices and the grouping model for a finished run.
pub fn write_outputs(config: &ExperimentConfig, run: &ExperimentRun) -> Result<(), ExperimentError> {
    let dir = &config.output_dir;
    write(&dir.join("report.json"), &run.report.to_json())?;
    write(&dir.join("utilization.csv"), &run.report.utilization_csv())?;
    write(&dir.join("waiting_histogram.csv"), &run.report.waiting_histogram_csv())?;
    for r in &run.runs {
        let stem = format!("{}-seed{}", r.variant, r.seed);
        write(&dir.join("decisions").join(format!("{stem}.jsonl")), &decision_log_jsonl(&r.decisions))?;
        let mut events = String::new();
        for e in &r.trace {
            events.push_str(&serde_json::to_string(e).expect("trace serializes"));
            events.push('\n');
        }
        write(&dir.join("events").join(format!("{stem}.jsonl")), &events)?;
        if r.variant.learns() {
            write(&dir.join("matrices").join(format!("{stem}.json")), &r.matrix.to_json())?;
        }
    }
    let grouping = serde_json::to_string_pretty(&run.grouping).expect("model serializes") + "\n";
    write(&dir.join("grouping.json"), &grouping)?;
    if let Some(p) = &config.matrix_out {
        write(p, &run.matrix.to_json())?;
    }
    if let Some(p) = &config.grouping_out {
        write(p, &grouping)?;
    }
    Ok(())
}

/// Executes, writes every output, and reports invariant violations as an
/// error after the files are on disk.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let run = execute(config)?;
    write_outputs(config, &run)?;
    run.report.ensure_clean()?;
    Ok(run.report)
}

/// Runs configs in order. A config without `matrix_in` (or `grouping_in`)
/// picks up the previous config's `matrix_out` (or `grouping_out`).
pub fn chain_experiments(configs: &[ExperimentConfig]) -> Result<Vec<ExperimentReport>, ExperimentError> {
    let mut reports = Vec::with_capacity(configs.len());
    let mut prev: Option<&ExperimentConfig> = None;
    for config in configs {
        let mut config = config.clone();
        if let Some(p) = prev {
            if config.matrix_in.is_none() {
                config.matrix_in = p.matrix_out.clone();
            }
            if config.grouping_in.is_none() {
                config.grouping_in = p.grouping_out.clone();
            }
        }
        reports.push(run_experiment(&config)?);
        prev = Some(configs.get(reports.len() - 1).expect("index in range"));
    }
    Ok(reports)
}
