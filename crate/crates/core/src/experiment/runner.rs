//! One simulated run: a scheduler, a seed and a grouped workload.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::preference::{GoodnessSample, LearningConfig, PreferenceMatrix};
use crate::scheduler::{DecisionRecord, SchedulerPolicy, Variant};
use crate::sim::{ArrivalMode, ArrivalProcess, ClusterSpec, ClusterState, PlacementPolicy, SimEvent, TraceEntry};
use crate::workload::{Job, JobQueue, ResourceProfile};

/// Which nodes feed the preference update after a completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleScope {
    /// Every occupied node in the cluster.
    #[default]
    Cluster,
    /// Only the nodes that hosted the completed job.
    Affected,
}

/// How running jobs enter the selection distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunningView {
    /// One term per running job, so busier groups weigh more.
    #[default]
    PerJob,
    /// One term per distinct running group.
    Distinct,
}

/// Everything a single run needs besides the jobs themselves.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub variant: Variant,
    pub seed: u64,
    pub cluster: ClusterSpec,
    pub placement: PlacementPolicy,
    pub learning: LearningConfig,
    pub sample_scope: SampleScope,
    pub running_view: RunningView,
    pub waiting_limit: u32,
    pub arrival: ArrivalMode,
    /// Jobs released before the first dispatch in online modes. `None`
    /// releases twice as many as fit the empty cluster, so the scheduler
    /// has a queue to choose from once the first wave is placed.
    pub initial: Option<usize>,
}

impl RunSetup {
    pub fn new(variant: Variant, seed: u64, cluster: ClusterSpec) -> Self {
        Self {
            variant,
            seed,
            cluster,
            placement: PlacementPolicy::Spread,
            learning: LearningConfig::default(),
            sample_scope: SampleScope::Cluster,
            running_view: RunningView::PerJob,
            waiting_limit: 20,
            arrival: ArrivalMode::Batch,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobOutcome {
    pub job: crate::workload::JobId,
    pub kind: String,
    pub group: Option<usize>,
    pub started_at: f64,
    pub finished_at: f64,
    pub work_done: f64,
    pub base_duration: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub variant: Variant,
    pub seed: u64,
    /// Seconds from the first dispatch to the last completion.
    pub makespan: f64,
    /// Mean per-node usage over the makespan window, in [0, 1].
    pub utilization: ResourceProfile,
    pub decisions: Vec<DecisionRecord>,
    pub jobs: Vec<JobOutcome>,
    pub trace: Vec<TraceEntry>,
    pub matrix: PreferenceMatrix,
    pub rounds: u64,
    pub violations: Vec<String>,
}

/// Relative tolerance of the work conservation check.
pub const CONSERVATION_TOLERANCE: f64 = 1e-9;

fn initial_release(jobs: &VecDeque<Job>, total_slots: u32) -> usize {
    let mut used = 0u32;
    let mut n = 0;
    for j in jobs {
        if used + j.containers > total_slots {
            break;
        }
        used += j.containers;
        n += 1;
    }
    (2 * n).max(1)
}

fn release(pending: &mut VecDeque<Job>, queue: &mut JobQueue, n: usize) -> Result<(), ExperimentError> {
    for _ in 0..n {
        match pending.pop_front() {
            Some(job) => queue.push(job).map_err(|e| ExperimentError::Config(e.to_string()))?,
            None => break,
        }
    }
    Ok(())
}

/// Runs `jobs` (already grouped, in queue order) to completion.
///
/// `matrix` is the starting preference matrix; learning variants return
/// the updated copy in the outcome.
pub fn run_scheduler(setup: &RunSetup, jobs: &[Job], matrix: &PreferenceMatrix) -> Result<RunOutcome, ExperimentError> {
    let mut cluster = ClusterState::new(setup.cluster)?;
    let limit = (setup.variant == Variant::PreferenceWaitLimit).then_some(setup.waiting_limit);
    let mut policy = SchedulerPolicy::new(setup.variant, limit, setup.seed)?;
    let mut h = matrix.clone();
    let mut pending: VecDeque<Job> = jobs.iter().cloned().collect();
    let mut queue = JobQueue::new();
    let mut arrivals = ArrivalProcess::new(setup.arrival, setup.seed);

    let first = match setup.arrival {
        ArrivalMode::Batch => pending.len(),
        _ => setup
            .initial
            .unwrap_or_else(|| initial_release(&pending, cluster.total_slots())),
    };
    release(&mut pending, &mut queue, first)?;

    let mut round = 0u64;
    let mut decisions = Vec::new();
    let mut outcomes = Vec::new();
    let mut violations = Vec::new();
    let mut first_dispatch: Option<f64> = None;
    let mut last_completion = 0.0f64;

    let mut dispatch = |cluster: &mut ClusterState,
                        queue: &mut JobQueue,
                        policy: &mut SchedulerPolicy,
                        h: &PreferenceMatrix,
                        round: u64,
                        decisions: &mut Vec<DecisionRecord>|
     -> Result<(), ExperimentError> {
        while !queue.is_empty() {
            let free = cluster.free_slots();
            if free == 0 {
                break;
            }
            let over_limit = policy.over_limit(queue).len();
            let running = match setup.running_view {
                RunningView::PerJob => cluster.running_job_groups(),
                RunningView::Distinct => cluster.running_groups().into_iter().collect(),
            };
            let Some(decision) = policy.select_next(h, queue, &running, free, &setup.learning)? else {
                break;
            };
            let job = queue
                .remove(decision.chosen_job)
                .expect("scheduler chose a queued job");
            decisions.push(DecisionRecord {
                round,
                time: cluster.clock(),
                policy: setup.variant,
                job: job.id,
                kind: job.kind.clone(),
                group: job.group,
                reason: decision.reason,
                waiting_rounds: job.waiting_rounds,
                over_limit,
                distribution: decision.distribution_snapshot,
            });
            first_dispatch.get_or_insert(cluster.clock());
            cluster.place_job(job, setup.placement)?;
        }
        Ok(())
    };

    dispatch(&mut cluster, &mut queue, &mut policy, &h, round, &mut decisions)?;
    loop {
        match cluster.step() {
            Some(SimEvent::Completed(c)) => {
                let base = c.job.base_duration;
                if (c.work_done - base).abs() > CONSERVATION_TOLERANCE * base.max(1.0) {
                    violations.push(format!(
                        "job {} integrated {} of {} seconds of work",
                        c.job.id, c.work_done, base
                    ));
                }
                last_completion = c.finished_at;
                let mut observations = c.observations.clone();
                if setup.sample_scope == SampleScope::Cluster {
                    observations.extend(cluster.current_observations());
                    observations.sort_by_key(|o| o.node_id);
                }
                let samples: Vec<GoodnessSample> = observations
                    .iter()
                    .filter_map(|o| GoodnessSample::from_observation(o, setup.learning.beta))
                    .collect();
                round += 1;
                policy.on_job_finished(&mut h, &mut queue, &samples, &setup.learning)?;
                outcomes.push(JobOutcome {
                    job: c.job.id,
                    kind: c.job.kind.clone(),
                    group: c.job.group,
                    started_at: c.started_at,
                    finished_at: c.finished_at,
                    work_done: c.work_done,
                    base_duration: base,
                });
                let n = arrivals.next_batch();
                release(&mut pending, &mut queue, n)?;
            }
            Some(SimEvent::Arrived(job)) => {
                queue.push(job).map_err(|e| ExperimentError::Config(e.to_string()))?;
            }
            None => {
                if pending.is_empty() {
                    break;
                }
                // Idle cluster with jobs still to come: release the next batch.
                let n = arrivals.next_batch().max(1);
                release(&mut pending, &mut queue, n)?;
            }
        }
        dispatch(&mut cluster, &mut queue, &mut policy, &h, round, &mut decisions)?;
    }
    if !queue.is_empty() {
        return Err(ExperimentError::Invariant(vec![format!(
            "{} queued jobs can never be dispatched on an idle cluster",
            queue.len()
        )]));
    }

    let start = first_dispatch.unwrap_or(0.0);
    let makespan = last_completion - start;
    let utilization = if makespan > 0.0 {
        cluster.cluster_utilization((start, last_completion))?
    } else {
        ResourceProfile::ZERO
    };
    if outcomes.len() != jobs.len() {
        violations.push(format!("{} of {} jobs completed", outcomes.len(), jobs.len()));
    }
    Ok(RunOutcome {
        variant: setup.variant,
        seed: setup.seed,
        makespan,
        utilization,
        decisions,
        jobs: outcomes,
        trace: cluster.trace().to_vec(),
        matrix: h,
        rounds: round,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::JobId;

    fn job(id: u64, group: usize, cpu: f64, containers: u32) -> Job {
        let p = ResourceProfile::new(cpu, 0.05, 0.02, 0.02, 0.01).unwrap();
        Job::new(JobId(id), format!("k{group}"), p, 100.0, containers)
            .unwrap()
            .with_group(group)
    }

    #[test]
    fn conserves_work_and_completes_everything() {
        let jobs: Vec<Job> = (0..12).map(|i| job(i, (i % 3) as usize, 0.3, 2)).collect();
        let h = PreferenceMatrix::zeros(3, 0.1).unwrap();
        for v in Variant::ALL {
            let setup = RunSetup::new(v, 4, ClusterSpec { nodes: 2, slots_per_node: 2 });
            let out = run_scheduler(&setup, &jobs, &h).unwrap();
            assert!(out.violations.is_empty(), "{v}: {:?}", out.violations);
            assert_eq!(out.jobs.len(), 12);
            assert_eq!(out.decisions.len(), 12);
            assert_eq!(out.rounds, 12);
            assert!(out.makespan >= 100.0 * 12.0 / 2.0 - 1e-9);
        }
    }

    #[test]
    fn baselines_do_not_learn() {
        let jobs: Vec<Job> = (0..6).map(|i| job(i, (i % 2) as usize, 0.6, 1)).collect();
        let h = PreferenceMatrix::zeros(2, 0.1).unwrap();
        let setup = RunSetup::new(Variant::RoundRobin, 1, ClusterSpec { nodes: 1, slots_per_node: 2 });
        let out = run_scheduler(&setup, &jobs, &h).unwrap();
        assert_eq!(out.matrix, h);
        let setup = RunSetup::new(Variant::Preference, 1, ClusterSpec { nodes: 1, slots_per_node: 2 });
        let out = run_scheduler(&setup, &jobs, &h).unwrap();
        assert_ne!(out.matrix, h);
    }

    #[test]
    fn online_release_drains_everything() {
        let jobs: Vec<Job> = (0..20).map(|i| job(i, (i % 2) as usize, 0.2, 1)).collect();
        let h = PreferenceMatrix::zeros(2, 0.1).unwrap();
        for mode in [ArrivalMode::Car, ArrivalMode::Aar] {
            let mut setup = RunSetup::new(Variant::PreferenceWaitLimit, 3, ClusterSpec { nodes: 2, slots_per_node: 2 });
            setup.arrival = mode;
            setup.initial = Some(1);
            let out = run_scheduler(&setup, &jobs, &h).unwrap();
            assert_eq!(out.jobs.len(), 20);
        }
    }

    #[test]
    fn oversized_job_is_an_invariant_error() {
        let jobs = vec![job(0, 0, 0.2, 5)];
        let h = PreferenceMatrix::zeros(1, 0.1).unwrap();
        let setup = RunSetup::new(Variant::Fifo, 1, ClusterSpec { nodes: 1, slots_per_node: 4 });
        assert!(matches!(run_scheduler(&setup, &jobs, &h), Err(ExperimentError::Invariant(_))));
    }
}
