//! Job selection policies.
//!
//! The learned policy samples a group from the preference-based selection
//! distribution and then a job of that group. The waiting-limit variant
//! additionally weights jobs within a group by their waiting time and
//! dispatches any job that has waited `waiting_limit` rounds ahead of the
//! learned choice. FIFO and round-robin are the non-learning baselines.
//!
//! Waiting time is counted in scheduling rounds; a round ends with each job
//! completion.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preference::{GoodnessSample, LearningConfig, PreferenceError, PreferenceMatrix, UpdateSummary};
use crate::rng::{stream, Stream};
use crate::workload::{Job, JobId, JobQueue};

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("the queue is empty")]
    EmptyQueue,
    #[error("{0} requires a positive waiting limit")]
    MissingWaitingLimit(Variant),
    #[error("{0} does not use a waiting limit")]
    UnexpectedWaitingLimit(Variant),
    #[error("job {0} has no group assigned")]
    Ungrouped(JobId),
    #[error("unknown scheduler `{0}` (expected hugo, hugo_star, round_robin or fifo)")]
    UnknownVariant(String),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
}

/// Scheduler variant. Serialized names are the ones accepted on the command
/// line and in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Preference-guided group sampling, uniform choice within the group.
    #[serde(rename = "hugo")]
    Preference,
    /// As `Preference`, with waiting-time weights and a waiting limit.
    #[serde(rename = "hugo_star")]
    PreferenceWaitLimit,
    #[serde(rename = "round_robin")]
    RoundRobin,
    #[serde(rename = "fifo")]
    Fifo,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Preference,
        Variant::PreferenceWaitLimit,
        Variant::RoundRobin,
        Variant::Fifo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Preference => "hugo",
            Variant::PreferenceWaitLimit => "hugo_star",
            Variant::RoundRobin => "round_robin",
            Variant::Fifo => "fifo",
        }
    }

    pub fn learns(self) -> bool {
        matches!(self, Variant::Preference | Variant::PreferenceWaitLimit)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = SchedulerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| SchedulerError::UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    PreferenceSampled,
    WaitingLimitOverride,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchedulingDecision {
    pub chosen_job: JobId,
    pub chosen_group: Option<usize>,
    pub distribution_snapshot: BTreeMap<usize, f64>,
    pub reason: Reason,
}

#[derive(Debug, Clone)]
pub struct SchedulerPolicy {
    variant: Variant,
    waiting_limit: Option<u32>,
    rng: ChaCha8Rng,
}

impl SchedulerPolicy {
    pub fn new(variant: Variant, waiting_limit: Option<u32>, seed: u64) -> Result<Self, SchedulerError> {
        match (variant, waiting_limit) {
            (Variant::PreferenceWaitLimit, None | Some(0)) => return Err(SchedulerError::MissingWaitingLimit(variant)),
            (Variant::PreferenceWaitLimit, Some(_)) | (_, None) => {}
            (_, Some(_)) => return Err(SchedulerError::UnexpectedWaitingLimit(variant)),
        }
        Ok(Self {
            variant,
            waiting_limit,
            rng: stream(seed, Stream::Scheduler),
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn waiting_limit(&self) -> Option<u32> {
        self.waiting_limit
    }

    /// Jobs currently at or over the waiting limit, in queue order.
    pub fn over_limit<'q>(&self, queue: &'q JobQueue) -> Vec<&'q Job> {
        match self.waiting_limit {
            Some(limit) if self.variant == Variant::PreferenceWaitLimit => {
                queue.iter().filter(|j| j.waiting_rounds >= limit).collect()
            }
            _ => Vec::new(),
        }
    }

    /// The job that must run regardless of preferences, if any. Several
    /// over-limit jobs are sampled in proportion to their waiting time.
    pub fn waiting_limit_override(&mut self, queue: &JobQueue) -> Option<JobId> {
        let over = self.over_limit(queue);
        if over.is_empty() {
            return None;
        }
        Some(self.pick_weighted_by_wait(&over).id)
    }

    /// Chooses one job among same-group candidates.
    pub fn pick_within_group<'a>(&mut self, candidates: &[&'a Job]) -> &'a Job {
        assert!(!candidates.is_empty(), "pick_within_group needs candidates");
        if candidates.len() == 1 {
            return candidates[0];
        }
        match self.variant {
            Variant::PreferenceWaitLimit => self.pick_weighted_by_wait(candidates),
            _ => candidates[self.rng.gen_range(0..candidates.len())],
        }
    }

    fn pick_weighted_by_wait<'a>(&mut self, candidates: &[&'a Job]) -> &'a Job {
        if candidates.len() == 1 {
            return candidates[0];
        }
        let total: u64 = candidates.iter().map(|j| j.waiting_rounds as u64).sum();
        if total == 0 {
            return candidates[self.rng.gen_range(0..candidates.len())];
        }
        let mut target = self.rng.gen_range(0..total);
        for j in candidates {
            let w = j.waiting_rounds as u64;
            if target < w {
                return j;
            }
            target -= w;
        }
        unreachable!("target below total weight")
    }

    fn sample_group(&mut self, distribution: &BTreeMap<usize, f64>) -> usize {
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        let mut last_positive = None;
        for (&g, &p) in distribution {
            if p <= 0.0 {
                continue;
            }
            last_positive = Some(g);
            acc += p;
            if u < acc {
                return g;
            }
        }
        last_positive.expect("distribution has positive mass")
    }

    /// Picks the next job to dispatch among those that fit `free_slots`.
    /// `running_groups` lists the groups of running jobs; repeats weight a
    /// group by how many of its jobs run.
    ///
    /// Returns `Ok(None)` when nothing can be dispatched right now: no queued
    /// job fits, the FIFO head does not fit, or an over-limit job is waiting
    /// for enough slots to free up.
    pub fn select_next(
        &mut self,
        h: &PreferenceMatrix,
        queue: &JobQueue,
        running_groups: &[usize],
        free_slots: u32,
        learning: &LearningConfig,
    ) -> Result<Option<SchedulingDecision>, SchedulerError> {
        if queue.is_empty() {
            return Err(SchedulerError::EmptyQueue);
        }
        let fits = |j: &&Job| j.containers <= free_slots;
        let baseline = |job: &Job| SchedulingDecision {
            chosen_job: job.id,
            chosen_group: job.group,
            distribution_snapshot: BTreeMap::new(),
            reason: Reason::Baseline,
        };
        match self.variant {
            Variant::Fifo => Ok(queue.head().filter(fits).map(baseline)),
            Variant::RoundRobin => Ok(queue.iter().find(fits).map(baseline)),
            Variant::Preference | Variant::PreferenceWaitLimit => {
                let over = self.over_limit(queue);
                if !over.is_empty() {
                    let ready: Vec<&Job> = over.iter().copied().filter(fits).collect();
                    if ready.is_empty() {
                        return Ok(None);
                    }
                    let job = self.pick_weighted_by_wait(&ready);
                    return Ok(Some(SchedulingDecision {
                        chosen_job: job.id,
                        chosen_group: job.group,
                        distribution_snapshot: BTreeMap::new(),
                        reason: Reason::WaitingLimitOverride,
                    }));
                }
                let eligible: Vec<&Job> = queue.iter().filter(fits).collect();
                if eligible.is_empty() {
                    return Ok(None);
                }
                let mut queued_groups = BTreeSet::new();
                for j in &eligible {
                    queued_groups.insert(j.group.ok_or(SchedulerError::Ungrouped(j.id))?);
                }
                let distribution = h.selection_distribution(running_groups, &queued_groups, learning.softmax_axis)?;
                let group = self.sample_group(&distribution);
                let candidates: Vec<&Job> = eligible.into_iter().filter(|j| j.group == Some(group)).collect();
                let job = self.pick_within_group(&candidates);
                Ok(Some(SchedulingDecision {
                    chosen_job: job.id,
                    chosen_group: Some(group),
                    distribution_snapshot: distribution,
                    reason: Reason::PreferenceSampled,
                }))
            }
        }
    }

    /// Ends a scheduling round: every queued job waits one round longer, and
    /// learning variants fold the node samples into `h`.
    pub fn on_job_finished(
        &mut self,
        h: &mut PreferenceMatrix,
        queue: &mut JobQueue,
        samples: &[GoodnessSample],
        learning: &LearningConfig,
    ) -> Result<Option<UpdateSummary>, SchedulerError> {
        for job in queue.iter_mut() {
            job.waiting_rounds += 1;
        }
        if !self.variant.learns() {
            return Ok(None);
        }
        Ok(Some(h.update_preferences(samples, learning)?))
    }
}

/// One line of the JSON-lines decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub round: u64,
    pub time: f64,
    pub policy: Variant,
    pub job: JobId,
    pub kind: String,
    pub group: Option<usize>,
    pub reason: Reason,
    pub waiting_rounds: u32,
    /// Queued jobs at or over the waiting limit when this decision was made.
    pub over_limit: usize,
    pub distribution: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("job {job} dispatched after {waiting_rounds} rounds, bound is {bound}")]
pub struct StarvationViolation {
    pub job: JobId,
    pub waiting_rounds: u32,
    pub bound: u32,
}

/// Largest number of simultaneously over-limit jobs seen in a log.
pub fn max_over_limit(records: &[DecisionRecord]) -> u32 {
    records.iter().map(|r| r.over_limit as u32).max().unwrap_or(0)
}

/// Checks that no dispatch waited longer than `limit + Q_max` rounds, where
/// `Q_max` is the largest over-limit set seen in the log.
pub fn check_starvation_bound(records: &[DecisionRecord], limit: u32) -> Result<(), StarvationViolation> {
    let bound = limit + max_over_limit(records);
    match records.iter().find(|r| r.waiting_rounds > bound) {
        Some(r) => Err(StarvationViolation {
            job: r.job,
            waiting_rounds: r.waiting_rounds,
            bound,
        }),
        None => Ok(()),
    }
}
