//! Deterministic discrete-event simulator of a container cluster.
//!
//! Nodes offer a fixed number of container slots and unit capacity per
//! resource. Co-resident jobs contend as described in [`contention`]. Progress
//! is integrated exactly between events; rates are recomputed whenever a
//! node's resident set changes, so no fixed timestep is involved.

pub mod contention;
pub mod generator;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::workload::{Job, JobId, ResourceProfile, DIM};
use contention::ContentionSnapshot;

pub use generator::{
    generate_workload, standard_catalog, ArrivalMode, ArrivalProcess, JobCatalog, KindSpec, QueueSpec, Workload,
    WorkloadSpec,
};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("job {job} needs {needed} containers but only {free} slots are free")]
    InsufficientSlots { job: JobId, needed: u32, free: u32 },
    #[error("job {0} is already running")]
    AlreadyRunning(JobId),
    #[error("window [{start}, {end}] is outside the simulated history [0, {clock}]")]
    WindowOutOfRange { start: f64, end: f64, clock: f64 },
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("sample fraction {0} is outside (0, 1]")]
    SampleFraction(f64),
    #[error("cluster must have at least one node with at least one slot")]
    EmptyCluster,
}

/// Shape of a homogeneous cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub nodes: usize,
    pub slots_per_node: u32,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        Self {
            nodes: 32,
            slots_per_node: 8,
        }
    }
}

/// How a job's containers are spread over nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementPolicy {
    /// One container per node with free slots, cycling in node order.
    #[default]
    Spread,
    /// Fill the lowest-id node before moving on.
    Pack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resident {
    pub group: Option<usize>,
    pub containers: u32,
    pub demand: ResourceProfile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct UsageSegment {
    start: f64,
    usage: ResourceProfile,
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub node_id: usize,
    pub slots_total: u32,
    pub slots_used: u32,
    pub residents: BTreeMap<JobId, Resident>,
    /// When the current resident set formed.
    pub combination_start: f64,
    segments: Vec<UsageSegment>,
}

impl NodeState {
    fn new(node_id: usize, slots_total: u32) -> Self {
        Self {
            node_id,
            slots_total,
            slots_used: 0,
            residents: BTreeMap::new(),
            combination_start: 0.0,
            segments: vec![UsageSegment {
                start: 0.0,
                usage: ResourceProfile::ZERO,
            }],
        }
    }

    pub fn free_slots(&self) -> u32 {
        self.slots_total - self.slots_used
    }

    pub fn contention(&self) -> ContentionSnapshot {
        ContentionSnapshot::compute(self.node_id, self.residents.values().map(|r| (&r.demand, r.containers)))
    }

    /// Multiset of resident groups as group -> job count.
    pub fn group_counts(&self) -> BTreeMap<usize, u32> {
        let mut counts = BTreeMap::new();
        for r in self.residents.values() {
            if let Some(g) = r.group {
                *counts.entry(g).or_insert(0) += 1;
            }
        }
        counts
    }

    fn record_change(&mut self, now: f64) {
        let usage = self.contention().usage();
        match self.segments.last_mut() {
            Some(last) if last.start == now => last.usage = usage,
            _ => self.segments.push(UsageSegment { start: now, usage }),
        }
        self.combination_start = now;
    }

    /// Time-averaged usage over `[start, end]` given the history up to `clock`.
    fn average_usage(&self, start: f64, end: f64, clock: f64) -> ResourceProfile {
        let mut acc = [0.0; DIM];
        for (i, seg) in self.segments.iter().enumerate() {
            let seg_end = self.segments.get(i + 1).map_or(clock, |s| s.start);
            let lo = seg.start.max(start);
            let hi = seg_end.min(end);
            if hi > lo {
                for (a, u) in acc.iter_mut().zip(seg.usage.to_array()) {
                    *a += u * (hi - lo);
                }
            }
        }
        let span = end - start;
        ResourceProfile::from_array_unchecked(acc.map(|a| (a / span).clamp(0.0, 1.0)))
    }
}

#[derive(Debug, Clone)]
pub struct RunningJob {
    pub job: Job,
    pub placement: BTreeMap<usize, u32>,
    pub started_at: f64,
    pub remaining: f64,
    pub work_done: f64,
    pub rate: f64,
    last_update: f64,
    version: u64,
    /// Integral of the per-container observed profile over time.
    observed_integral: [f64; DIM],
}

/// Usage of one node over the lifetime of one resident combination.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoLocationObservation {
    pub node_id: usize,
    /// group -> number of resident jobs of that group
    pub groups: BTreeMap<usize, u32>,
    pub usage: ResourceProfile,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub job: Job,
    pub placement: BTreeMap<usize, u32>,
    pub started_at: f64,
    pub finished_at: f64,
    /// Integrated progress; equals `base_duration` up to rounding.
    pub work_done: f64,
    /// Time-averaged per-container profile the job observed.
    pub observed: ResourceProfile,
    pub observations: Vec<CoLocationObservation>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimEvent {
    Arrived(Job),
    Completed(Completion),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Arrival,
    Dispatch,
    Completion,
}

/// One line of the exported event trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub time: f64,
    pub event: TraceKind,
    pub job: JobId,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone)]
enum Pending {
    Arrival(Job),
    Completion { job: JobId, version: u64 },
}

#[derive(Debug, Clone)]
struct Scheduled {
    time: f64,
    seq: u64,
    what: Pending,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    // reversed: BinaryHeap pops the earliest (time, seq) first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Nodes, running jobs and the pending event queue.
#[derive(Debug, Clone)]
pub struct ClusterState {
    nodes: Vec<NodeState>,
    clock: f64,
    events: BinaryHeap<Scheduled>,
    running: BTreeMap<JobId, RunningJob>,
    seq: u64,
    trace: Vec<TraceEntry>,
    dispatched: u64,
    completed: u64,
}

impl ClusterState {
    pub fn new(spec: ClusterSpec) -> Result<Self, SimError> {
        if spec.nodes == 0 || spec.slots_per_node == 0 {
            return Err(SimError::EmptyCluster);
        }
        Ok(Self {
            nodes: (0..spec.nodes).map(|i| NodeState::new(i, spec.slots_per_node)).collect(),
            clock: 0.0,
            events: BinaryHeap::new(),
            running: BTreeMap::new(),
            seq: 0,
            trace: Vec::new(),
            dispatched: 0,
            completed: 0,
        })
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> Result<&NodeState, SimError> {
        self.nodes.get(id).ok_or(SimError::UnknownNode(id))
    }

    pub fn running(&self) -> impl Iterator<Item = &RunningJob> {
        self.running.values()
    }

    pub fn running_job(&self, id: JobId) -> Option<&RunningJob> {
        self.running.get(&id)
    }

    pub fn is_idle(&self) -> bool {
        self.running.is_empty()
    }

    pub fn has_pending_events(&self) -> bool {
        !self.events.is_empty()
    }

    pub fn free_slots(&self) -> u32 {
        self.nodes.iter().map(NodeState::free_slots).sum()
    }

    pub fn total_slots(&self) -> u32 {
        self.nodes.iter().map(|n| n.slots_total).sum()
    }

    /// Distinct groups with at least one running job.
    pub fn running_groups(&self) -> BTreeSet<usize> {
        self.running.values().filter_map(|r| r.job.group).collect()
    }

    /// Group of every running job, in job id order. Repeats are kept.
    pub fn running_job_groups(&self) -> Vec<usize> {
        self.running.values().filter_map(|r| r.job.group).collect()
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn dispatched_count(&self) -> u64 {
        self.dispatched
    }

    pub fn completed_count(&self) -> u64 {
        self.completed
    }

    /// Container counts per node for `containers` more containers, without
    /// changing any state.
    pub fn plan_placement(
        &self,
        job: JobId,
        containers: u32,
        policy: PlacementPolicy,
    ) -> Result<BTreeMap<usize, u32>, SimError> {
        let free = self.free_slots();
        if free < containers {
            return Err(SimError::InsufficientSlots {
                job,
                needed: containers,
                free,
            });
        }
        let mut left: Vec<u32> = self.nodes.iter().map(NodeState::free_slots).collect();
        let mut plan = BTreeMap::new();
        let mut remaining = containers;
        match policy {
            PlacementPolicy::Spread => {
                while remaining > 0 {
                    for (id, slots) in left.iter_mut().enumerate() {
                        if remaining == 0 {
                            break;
                        }
                        if *slots > 0 {
                            *slots -= 1;
                            remaining -= 1;
                            *plan.entry(id).or_insert(0) += 1;
                        }
                    }
                }
            }
            PlacementPolicy::Pack => {
                for (id, slots) in left.iter().enumerate() {
                    if remaining == 0 {
                        break;
                    }
                    let take = (*slots).min(remaining);
                    if take > 0 {
                        plan.insert(id, take);
                        remaining -= take;
                    }
                }
            }
        }
        Ok(plan)
    }

    /// Places and starts `job` at the current clock.
    pub fn place_job(&mut self, job: Job, policy: PlacementPolicy) -> Result<BTreeMap<usize, u32>, SimError> {
        if self.running.contains_key(&job.id) {
            return Err(SimError::AlreadyRunning(job.id));
        }
        let plan = self.plan_placement(job.id, job.containers, policy)?;
        self.start_with_placement(job, plan.clone());
        Ok(plan)
    }

    fn start_with_placement(&mut self, job: Job, plan: BTreeMap<usize, u32>) {
        let now = self.clock;
        self.advance_progress(now);
        for (&node_id, &count) in &plan {
            let node = &mut self.nodes[node_id];
            node.slots_used += count;
            node.residents.insert(
                job.id,
                Resident {
                    group: job.group,
                    containers: count,
                    demand: job.demand,
                },
            );
            node.record_change(now);
        }
        self.trace.push(TraceEntry {
            time: now,
            event: TraceKind::Dispatch,
            job: job.id,
            nodes: plan.keys().copied().collect(),
        });
        self.dispatched += 1;
        let id = job.id;
        let remaining = job.base_duration;
        self.running.insert(
            id,
            RunningJob {
                job,
                placement: plan,
                started_at: now,
                remaining,
                work_done: 0.0,
                rate: 0.0,
                last_update: now,
                version: 0,
                observed_integral: [0.0; DIM],
            },
        );
        self.refresh_rates();
    }

    /// Queues an arrival at `time` (clamped to the current clock).
    pub fn schedule_arrival(&mut self, job: Job, time: f64) {
        let time = time.max(self.clock);
        self.push_event(time, Pending::Arrival(job));
    }

    fn push_event(&mut self, time: f64, what: Pending) {
        self.seq += 1;
        self.events.push(Scheduled {
            time,
            seq: self.seq,
            what,
        });
    }

    /// Integrates every running job's progress up to `now`.
    fn advance_progress(&mut self, now: f64) {
        let nodes = &self.nodes;
        for r in self.running.values_mut() {
            let dt = now - r.last_update;
            if dt > 0.0 {
                let done = r.rate * dt;
                r.work_done += done;
                r.remaining -= done;
                let observed = observed_profile(nodes, r);
                for (acc, v) in r.observed_integral.iter_mut().zip(observed.to_array()) {
                    *acc += v * dt;
                }
            }
            r.last_update = now;
        }
    }

    /// Recomputes rates after a resident change and reschedules completions
    /// whose rate moved.
    fn refresh_rates(&mut self) {
        let snapshots: Vec<ContentionSnapshot> = self.nodes.iter().map(NodeState::contention).collect();
        let now = self.clock;
        let mut reschedule = Vec::new();
        for r in self.running.values_mut() {
            let rate = r
                .placement
                .keys()
                .map(|&n| snapshots[n].job_rate(&r.job.demand))
                .fold(1.0, f64::min);
            if rate != r.rate {
                r.rate = rate;
                r.version += 1;
                let remaining = r.remaining.max(0.0);
                reschedule.push((now + remaining / rate, r.job.id, r.version));
            }
        }
        for (time, job, version) in reschedule {
            self.push_event(time, Pending::Completion { job, version });
        }
    }

    /// Usage of every occupied node over its current, still running
    /// combination. Nodes whose combination started at the current clock
    /// are skipped.
    pub fn current_observations(&self) -> Vec<CoLocationObservation> {
        let now = self.clock;
        self.nodes
            .iter()
            .filter(|n| !n.residents.is_empty() && now > n.combination_start)
            .map(|n| CoLocationObservation {
                node_id: n.node_id,
                groups: n.group_counts(),
                usage: n.average_usage(n.combination_start, now, now),
                window: (n.combination_start, now),
            })
            .collect()
    }

    /// Processes the next valid event. Returns `None` once the queue is empty.
    pub fn step(&mut self) -> Option<SimEvent> {
        loop {
            let next = self.events.pop()?;
            match next.what {
                Pending::Completion { job, version } => {
                    let current = self.running.get(&job).map(|r| r.version);
                    if current != Some(version) {
                        continue;
                    }
                    self.clock = next.time.max(self.clock);
                    return Some(SimEvent::Completed(self.complete(job)));
                }
                Pending::Arrival(job) => {
                    self.clock = next.time.max(self.clock);
                    self.trace.push(TraceEntry {
                        time: self.clock,
                        event: TraceKind::Arrival,
                        job: job.id,
                        nodes: Vec::new(),
                    });
                    return Some(SimEvent::Arrived(job));
                }
            }
        }
    }

    fn complete(&mut self, id: JobId) -> Completion {
        let now = self.clock;
        self.advance_progress(now);
        let mut observations = Vec::new();
        let running = self.running.remove(&id).expect("completion for a running job");
        for &node_id in running.placement.keys() {
            let node = &self.nodes[node_id];
            let start = node.combination_start;
            if now > start {
                observations.push(CoLocationObservation {
                    node_id,
                    groups: node.group_counts(),
                    usage: node.average_usage(start, now, now),
                    window: (start, now),
                });
            }
        }
        for (&node_id, &count) in &running.placement {
            let node = &mut self.nodes[node_id];
            node.slots_used -= count;
            node.residents.remove(&id);
            node.record_change(now);
        }
        self.completed += 1;
        self.trace.push(TraceEntry {
            time: now,
            event: TraceKind::Completion,
            job: id,
            nodes: running.placement.keys().copied().collect(),
        });
        self.refresh_rates();
        let elapsed = now - running.started_at;
        let observed = if elapsed > 0.0 {
            ResourceProfile::from_array_unchecked(running.observed_integral.map(|v| (v / elapsed).clamp(0.0, 1.0)))
        } else {
            observed_profile(&self.nodes, &running)
        };
        Completion {
            work_done: running.work_done,
            finished_at: now,
            started_at: running.started_at,
            placement: running.placement,
            observed,
            job: running.job,
            observations,
        }
    }

    /// Per-resource time-averaged usage of one node over `window`.
    pub fn node_utilization(&self, node_id: usize, window: (f64, f64)) -> Result<ResourceProfile, SimError> {
        let node = self.node(node_id)?;
        let (start, end) = window;
        if !(start >= 0.0 && end <= self.clock && start < end) {
            return Err(SimError::WindowOutOfRange {
                start,
                end,
                clock: self.clock,
            });
        }
        Ok(node.average_usage(start, end, self.clock))
    }

    /// Usage averaged over all nodes and over `window`.
    pub fn cluster_utilization(&self, window: (f64, f64)) -> Result<ResourceProfile, SimError> {
        let mut acc = [0.0; DIM];
        for n in 0..self.nodes.len() {
            let u = self.node_utilization(n, window)?;
            for (a, v) in acc.iter_mut().zip(u.to_array()) {
                *a += v;
            }
        }
        let count = self.nodes.len() as f64;
        Ok(ResourceProfile::from_array_unchecked(acc.map(|a| a / count)))
    }
}

fn observed_profile(nodes: &[NodeState], r: &RunningJob) -> ResourceProfile {
    // container-weighted mean over the job's nodes
    let mut acc = [0.0; DIM];
    let mut total = 0.0;
    for (&n, &count) in &r.placement {
        let seen = nodes[n].contention().observed_by(&r.job.demand);
        for (a, v) in acc.iter_mut().zip(seen.to_array()) {
            *a += v * count as f64;
        }
        total += count as f64;
    }
    ResourceProfile::from_array_unchecked(acc.map(|a| a / total))
}

/// Runs `job` scaled down to `sample_fraction` of its work, with one
/// container on a single node shared with `background` jobs that outlive the
/// sample. Returns the per-container profile the job observed.
pub fn profile_run(job: &Job, background: &[ResourceProfile], sample_fraction: f64) -> Result<ResourceProfile, SimError> {
    if !(sample_fraction > 0.0 && sample_fraction <= 1.0) {
        return Err(SimError::SampleFraction(sample_fraction));
    }
    let slots = 1 + background.len() as u32;
    let mut cluster = ClusterState::new(ClusterSpec {
        nodes: 1,
        slots_per_node: slots,
    })?;
    let sample_work = job.base_duration * sample_fraction;
    for (i, demand) in background.iter().enumerate() {
        let mut antagonist = job.clone();
        antagonist.id = JobId(u64::MAX - i as u64);
        antagonist.kind = "antagonist".into();
        antagonist.demand = *demand;
        antagonist.containers = 1;
        antagonist.group = None;
        antagonist.base_duration = f64::MAX / 4.0;
        cluster.place_job(antagonist, PlacementPolicy::Pack)?;
    }
    let mut probe = job.clone();
    probe.containers = 1;
    probe.base_duration = sample_work;
    let id = probe.id;
    cluster.place_job(probe, PlacementPolicy::Pack)?;
    while let Some(event) = cluster.step() {
        if let SimEvent::Completed(done) = event {
            if done.job.id == id {
                return Ok(done.observed);
            }
        }
    }
    unreachable!("probe job always completes before the antagonists")
}
