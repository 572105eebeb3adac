//! Job catalogs and queue generation.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream, Stream};
use crate::workload::{Job, JobError, JobId, ResourceProfile};

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("unknown job kind `{0}`")]
    UnknownKind(String),
    #[error("workload produces no jobs")]
    Empty,
    #[error(transparent)]
    Job(#[from] JobError),
}

/// Definition of one recurring job kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSpec {
    pub demand: ResourceProfile,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_containers")]
    pub containers: u32,
    /// Human-readable name, informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn default_duration() -> f64 {
    600.0
}

fn default_containers() -> u32 {
    32
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobCatalog {
    pub kinds: BTreeMap<String, KindSpec>,
}

impl JobCatalog {
    pub fn get(&self, kind: &str) -> Result<&KindSpec, WorkloadError> {
        self.kinds.get(kind).ok_or_else(|| WorkloadError::UnknownKind(kind.to_string()))
    }

    pub fn instantiate(&self, id: JobId, kind: &str) -> Result<Job, WorkloadError> {
        let spec = self.get(kind)?;
        Ok(Job::new(id, kind, spec.demand, spec.duration, spec.containers)?)
    }

    /// Kind names paired with their demand, in name order.
    pub fn profiles(&self) -> Vec<(String, ResourceProfile)> {
        self.kinds.iter().map(|(k, s)| (k.clone(), s.demand)).collect()
    }
}

fn kind(label: &str, v: [f64; 5]) -> KindSpec {
    KindSpec {
        demand: ResourceProfile::from_array(v).expect("catalog demand in range"),
        duration: default_duration(),
        containers: default_containers(),
        label: Some(label.to_string()),
    }
}

/// Nine synthetic kinds `A`..`I` with per-container demand vectors built so
/// that they fall into six groups:
/// `{A, D, I}` cpu-heavy, `{E, F}` cpu+memory, `{B}` memory+network,
/// `{G}` disk-heavy, `{H}` disk+network, `{C}` low usage.
pub fn standard_catalog() -> JobCatalog {
    let kinds = [
        ("A", kind("K-Means", [0.200, 0.080, 0.030, 0.030, 0.010])),
        ("D", kind("Linear Regression", [0.210, 0.070, 0.030, 0.020, 0.010])),
        ("I", kind("Word Count", [0.190, 0.080, 0.040, 0.030, 0.020])),
        ("E", kind("Logistic Regression", [0.140, 0.170, 0.020, 0.030, 0.010])),
        ("F", kind("SVM", [0.150, 0.180, 0.020, 0.020, 0.010])),
        ("B", kind("PageRank", [0.070, 0.130, 0.030, 0.170, 0.020])),
        ("G", kind("TPC-H", [0.060, 0.070, 0.190, 0.060, 0.050])),
        ("H", kind("Sort", [0.050, 0.090, 0.130, 0.130, 0.060])),
        ("C", kind("Connected Components", [0.050, 0.050, 0.020, 0.040, 0.010])),
    ];
    JobCatalog {
        kinds: kinds.into_iter().map(|(k, s)| (k.to_string(), s)).collect(),
    }
}

/// Order in which jobs enter the queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum QueueSpec {
    /// Whitespace-separated kinds, repeated `times` times.
    Repeat { pattern: String, times: usize },
    /// Whitespace-separated kinds, used as is.
    Sequence { sequence: String },
    /// `count` kinds drawn uniformly from `kinds` (default: whole catalog).
    Random {
        count: usize,
        #[serde(default)]
        kinds: Option<Vec<String>>,
    },
}

/// When queued jobs become visible to the scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalMode {
    /// The whole queue is known up front.
    #[default]
    Batch,
    /// One job joins after every scheduling round.
    Car,
    /// One, two or three jobs join after every round with probability
    /// 0.6, 0.2 and 0.2.
    Aar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    #[serde(flatten)]
    pub queue: QueueSpec,
    #[serde(default)]
    pub arrival: ArrivalMode,
    /// Jobs visible at time zero in online modes. `None` lets the driver
    /// release twice as many as fit the empty cluster.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<usize>,
}

impl WorkloadSpec {
    pub fn repeat(pattern: &str, times: usize) -> Self {
        Self {
            queue: QueueSpec::Repeat {
                pattern: pattern.to_string(),
                times,
            },
            arrival: ArrivalMode::Batch,
            initial: None,
        }
    }

    pub fn sequence(sequence: &str) -> Self {
        Self {
            queue: QueueSpec::Sequence {
                sequence: sequence.to_string(),
            },
            arrival: ArrivalMode::Batch,
            initial: None,
        }
    }

    pub fn with_arrival(mut self, arrival: ArrivalMode, initial: Option<usize>) -> Self {
        self.arrival = arrival;
        self.initial = initial;
        self
    }
}

/// Materialized jobs in queue order plus the rule that releases them.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub jobs: Vec<Job>,
    pub arrival: ArrivalMode,
    pub initial: Option<usize>,
}

pub fn generate_workload(spec: &WorkloadSpec, catalog: &JobCatalog, seed: u64) -> Result<Workload, WorkloadError> {
    let kinds: Vec<String> = match &spec.queue {
        QueueSpec::Repeat { pattern, times } => {
            let unit: Vec<&str> = pattern.split_whitespace().collect();
            (0..*times).flat_map(|_| unit.iter().map(|s| s.to_string())).collect()
        }
        QueueSpec::Sequence { sequence } => sequence.split_whitespace().map(str::to_string).collect(),
        QueueSpec::Random { count, kinds } => {
            let pool: Vec<String> = match kinds {
                Some(k) => k.clone(),
                None => catalog.kinds.keys().cloned().collect(),
            };
            if pool.is_empty() {
                return Err(WorkloadError::Empty);
            }
            let mut rng = stream(seed, Stream::Queue);
            (0..*count).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect()
        }
    };
    if kinds.is_empty() {
        return Err(WorkloadError::Empty);
    }
    let jobs = kinds
        .iter()
        .enumerate()
        .map(|(i, k)| catalog.instantiate(JobId(i as u64), k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Workload {
        jobs,
        arrival: spec.arrival,
        initial: spec.initial,
    })
}

/// Number of jobs released after each scheduling round.
#[derive(Debug, Clone)]
pub struct ArrivalProcess {
    mode: ArrivalMode,
    rng: ChaCha8Rng,
}

impl ArrivalProcess {
    pub fn new(mode: ArrivalMode, seed: u64) -> Self {
        Self {
            mode,
            rng: stream(seed, Stream::Arrivals),
        }
    }

    pub fn next_batch(&mut self) -> usize {
        match self.mode {
            ArrivalMode::Batch => 0,
            ArrivalMode::Car => 1,
            ArrivalMode::Aar => {
                let u: f64 = self.rng.gen();
                if u < 0.6 {
                    1
                } else if u < 0.8 {
                    2
                } else {
                    3
                }
            }
        }
    }
}
