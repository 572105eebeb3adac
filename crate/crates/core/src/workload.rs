//! Jobs, resource profiles and monitoring traces.
//!
//! Every other module speaks in terms of these types. Utilization is always a
//! fraction of one node's capacity, so a [`ResourceProfile`] is unit-free.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of monitored resource dimensions.
pub const DIM: usize = 5;

/// Field names in vector order.
pub const FIELD_NAMES: [&str; DIM] = ["cpu", "mem", "disk", "net", "iowait"];

/// Exact CSV header of a trace file.
pub const TRACE_HEADER: &str = "job_id,node_id,timestamp,cpu,mem,disk,net,iowait";

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("{field} = {value} is outside [0, 1]")]
    OutOfRange { field: &'static str, value: f64 },
}

/// Per-resource utilization, each component a fraction of node capacity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResourceProfile {
    pub cpu: f64,
    pub mem: f64,
    pub disk: f64,
    pub net: f64,
    pub iowait: f64,
}

impl ResourceProfile {
    pub const ZERO: ResourceProfile = ResourceProfile {
        cpu: 0.0,
        mem: 0.0,
        disk: 0.0,
        net: 0.0,
        iowait: 0.0,
    };

    pub fn new(cpu: f64, mem: f64, disk: f64, net: f64, iowait: f64) -> Result<Self, ProfileError> {
        Self::from_array([cpu, mem, disk, net, iowait])
    }

    pub fn from_array(values: [f64; DIM]) -> Result<Self, ProfileError> {
        for (field, value) in FIELD_NAMES.iter().zip(values) {
            if !(0.0..=1.0).contains(&value) {
                return Err(ProfileError::OutOfRange { field, value });
            }
        }
        Ok(Self::from_array_unchecked(values))
    }

    pub(crate) fn from_array_unchecked(v: [f64; DIM]) -> Self {
        Self {
            cpu: v[0],
            mem: v[1],
            disk: v[2],
            net: v[3],
            iowait: v[4],
        }
    }

    pub fn to_array(&self) -> [f64; DIM] {
        [self.cpu, self.mem, self.disk, self.net, self.iowait]
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn squared_distance(&self, other: &ResourceProfile) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn distance(&self, other: &ResourceProfile) -> f64 {
        self.squared_distance(other).sqrt()
    }
}

/// Identifier of a job instance within one workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub u64);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum JobError {
    #[error("job {0} requests zero containers")]
    NoContainers(JobId),
    #[error("job {id} has non-positive base duration {duration}")]
    BadDuration { id: JobId, duration: f64 },
    #[error("job {id}: {source}")]
    Demand { id: JobId, source: ProfileError },
}

/// A data-parallel job waiting for, or holding, cluster containers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: JobId,
    /// Workload label shared by recurring runs of the same job, e.g. `"kmeans"`.
    pub kind: String,
    /// Mean per-container demand.
    pub demand: ResourceProfile,
    /// Runtime in seconds under zero contention.
    pub base_duration: f64,
    pub containers: u32,
    pub group: Option<usize>,
    pub submit_time: f64,
    pub waiting_rounds: u32,
}

impl Job {
    pub fn new(
        id: JobId,
        kind: impl Into<String>,
        demand: ResourceProfile,
        base_duration: f64,
        containers: u32,
    ) -> Result<Self, JobError> {
        if containers == 0 {
            return Err(JobError::NoContainers(id));
        }
        if !(base_duration > 0.0 && base_duration.is_finite()) {
            return Err(JobError::BadDuration {
                id,
                duration: base_duration,
            });
        }
        if let Err(source) = ResourceProfile::from_array(demand.to_array()) {
            return Err(JobError::Demand { id, source });
        }
        Ok(Self {
            id,
            kind: kind.into(),
            demand,
            base_duration,
            containers,
            group: None,
            submit_time: 0.0,
            waiting_rounds: 0,
        })
    }

    pub fn with_group(mut self, group: usize) -> Self {
        self.group = Some(group);
        self
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum QueueError {
    #[error("job {0} is already queued")]
    Duplicate(JobId),
}

/// Waiting jobs in arrival order. Ids are unique.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JobQueue {
    jobs: VecDeque<Job>,
}

impl JobQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_jobs(jobs: impl IntoIterator<Item = Job>) -> Result<Self, QueueError> {
        let mut queue = Self::new();
        for job in jobs {
            queue.push(job)?;
        }
        Ok(queue)
    }

    pub fn push(&mut self, job: Job) -> Result<(), QueueError> {
        if self.contains(job.id) {
            return Err(QueueError::Duplicate(job.id));
        }
        self.jobs.push_back(job);
        Ok(())
    }

    pub fn contains(&self, id: JobId) -> bool {
        self.jobs.iter().any(|j| j.id == id)
    }

    pub fn get(&self, id: JobId) -> Option<&Job> {
        self.jobs.iter().find(|j| j.id == id)
    }

    /// Removes a job while keeping the relative order of the rest.
    pub fn remove(&mut self, id: JobId) -> Option<Job> {
        let pos = self.jobs.iter().position(|j| j.id == id)?;
        self.jobs.remove(pos)
    }

    pub fn head(&self) -> Option<&Job> {
        self.jobs.front()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Job> {
        self.jobs.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Job> {
        self.jobs.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    /// Distinct groups of queued jobs that have one assigned.
    pub fn groups(&self) -> BTreeSet<usize> {
        self.jobs.iter().filter_map(|j| j.group).collect()
    }
}

/// One monitoring sample of a job's usage on one node.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub job_id: String,
    pub node_id: String,
    pub timestamp: f64,
    pub usage: ResourceProfile,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot open trace file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected header `{TRACE_HEADER}`, found `{found}`")]
    Header { line: usize, found: String },
    #[error("line {line}: expected 8 columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("line {line}: field `{field}` is not a number: `{value}`")]
    NotANumber {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: field `{field}` = {value} is outside [0, 1]")]
    OutOfRange {
        line: usize,
        field: &'static str,
        value: f64,
    },
    #[error("line {line}: timestamp {timestamp} goes backwards for job {job_id} on node {node_id}")]
    NonMonotonic {
        line: usize,
        job_id: String,
        node_id: String,
        timestamp: f64,
    },
    #[error("line {line}: {source}")]
    Csv { line: usize, source: csv::Error },
    #[error("no trace records for job {0}")]
    UnknownJob(String),
}

/// Reads a trace CSV. The first offending row aborts the load.
pub fn load_traces(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>, TraceError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_traces(file)
}

pub fn read_traces<R: std::io::Read>(reader: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = Vec::new();
    let mut last_seen: std::collections::BTreeMap<(String, String), f64> = Default::default();
    let mut saw_header = false;
    for (idx, row) in rdr.records().enumerate() {
        let row = row.map_err(|source| TraceError::Csv {
            line: idx + 1,
            source,
        })?;
        let line = row.position().map_or(idx + 1, |p| p.line() as usize);
        if line == 1 {
            let found = row.iter().collect::<Vec<_>>().join(",");
            if found != TRACE_HEADER {
                return Err(TraceError::Header { line, found });
            }
            saw_header = true;
            continue;
        }
        if row.len() != 8 {
            return Err(TraceError::ColumnCount {
                line,
                found: row.len(),
            });
        }
        let number = |col: usize, field: &'static str| -> Result<f64, TraceError> {
            row[col]
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| TraceError::NotANumber {
                    line,
                    field,
                    value: row[col].to_string(),
                })
        };
        let timestamp = number(2, "timestamp")?;
        let mut usage = [0.0; DIM];
        for (i, field) in FIELD_NAMES.iter().enumerate() {
            let value = number(3 + i, field)?;
            if !(0.0..=1.0).contains(&value) {
                return Err(TraceError::OutOfRange { line, field, value });
            }
            usage[i] = value;
        }
        let job_id = row[0].to_string();
        let node_id = row[1].to_string();
        let key = (job_id.clone(), node_id.clone());
        if let Some(&prev) = last_seen.get(&key) {
            if timestamp < prev {
                return Err(TraceError::NonMonotonic {
                    line,
                    job_id,
                    node_id,
                    timestamp,
                });
            }
        }
        last_seen.insert(key, timestamp);
        records.push(TraceRecord {
            job_id,
            node_id,
            timestamp,
            usage: ResourceProfile::from_array_unchecked(usage),
        });
    }
    if !saw_header {
        return Err(TraceError::Header {
            line: 1,
            found: String::new(),
        });
    }
    Ok(records)
}

/// Writes records in the trace CSV format. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_traces<W: std::io::Write>(mut out: W, records: &[TraceRecord]) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in records {
        let u = r.usage;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.job_id, r.node_id, r.timestamp, u.cpu, u.mem, u.disk, u.net, u.iowait
        )?;
    }
    Ok(())
}

/// Records belonging to one job, in file order.
pub fn records_for<'a>(records: &'a [TraceRecord], job_id: &'a str) -> impl Iterator<Item = &'a TraceRecord> {
    records.iter().filter(move |r| r.job_id == job_id)
}

/// Per-field arithmetic mean over every record of `job_id`.
pub fn summarize_job(records: &[TraceRecord], job_id: &str) -> Result<ResourceProfile, TraceError> {
    let mut sum = [0.0; DIM];
    let mut count = 0usize;
    for r in records_for(records, job_id) {
        for (s, v) in sum.iter_mut().zip(r.usage.to_array()) {
            *s += v;
        }
        count += 1;
    }
    if count == 0 {
        return Err(TraceError::UnknownJob(job_id.to_string()));
    }
    let n = count as f64;
    // clamp guards against the mean drifting a ulp outside the record range
    let mut mean = sum.map(|s| s / n);
    for (i, m) in mean.iter_mut().enumerate() {
        let (lo, hi) = records_for(records, job_id)
            .map(|r| r.usage.to_array()[i])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        *m = m.clamp(lo, hi);
    }
    Ok(ResourceProfile::from_array_unchecked(mean))
}

/// Distinct job ids in first-appearance order.
pub fn trace_job_ids(records: &[TraceRecord]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.job_id.clone()))
        .map(|r| r.job_id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(cpu: f64) -> ResourceProfile {
        ResourceProfile::new(cpu, 0.1, 0.2, 0.3, 0.0).unwrap()
    }

    fn record(job: &str, node: &str, ts: f64, cpu: f64) -> TraceRecord {
        TraceRecord {
            job_id: job.into(),
            node_id: node.into(),
            timestamp: ts,
            usage: profile(cpu),
        }
    }

    #[test]
    fn profile_rejects_out_of_range() {
        let err = ResourceProfile::new(1.2, 0.0, 0.0, 0.0, 0.0).unwrap_err();
        assert_eq!(err, ProfileError::OutOfRange { field: "cpu", value: 1.2 });
        assert!(ResourceProfile::new(0.0, 0.0, 0.0, 0.0, -0.1).is_err());
    }

    #[test]
    fn job_invariants() {
        let d = profile(0.5);
        assert!(matches!(Job::new(JobId(1), "a", d, 10.0, 0), Err(JobError::NoContainers(_))));
        assert!(matches!(Job::new(JobId(1), "a", d, 0.0, 1), Err(JobError::BadDuration { .. })));
        assert!(Job::new(JobId(1), "a", d, 10.0, 1).is_ok());
    }

    #[test]
    fn queue_rejects_duplicates_and_keeps_order() {
        let d = profile(0.5);
        let mut q = JobQueue::new();
        for i in 0..4 {
            q.push(Job::new(JobId(i), "a", d, 1.0, 1).unwrap()).unwrap();
        }
        assert_eq!(
            q.push(Job::new(JobId(2), "a", d, 1.0, 1).unwrap()),
            Err(QueueError::Duplicate(JobId(2)))
        );
        q.remove(JobId(1));
        let ids: Vec<_> = q.iter().map(|j| j.id.0).collect();
        assert_eq!(ids, vec![0, 2, 3]);
    }

    #[test]
    fn parse_three_rows() {
        let text = format!(
            "{TRACE_HEADER}\nA,n1,0,0.5,0.1,0.1,0.1,0\nA,n1,5,0.4,0.1,0.1,0.1,0\nB,n2,0,0.2,0.3,0.4,0.5,0.01\n"
        );
        let recs = read_traces(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[2].job_id, "B");
        assert_eq!(recs[2].usage.iowait, 0.01);
    }

    #[test]
    fn out_of_range_names_line_and_field() {
        let text = format!("{TRACE_HEADER}\nA,n1,0,0.5,0.1,0.1,0.1,0\nA,n1,5,1.7,0.1,0.1,0.1,0\n");
        let err = read_traces(text.as_bytes()).unwrap_err();
        match err {
            TraceError::OutOfRange { line, field, value } => {
                assert_eq!((line, field, value), (3, "cpu", 1.7));
            }
            other => panic!("unexpected error {other}"),
        }
        assert!(err_string(&text).contains("line 3"));
    }

    fn err_string(text: &str) -> String {
        read_traces(text.as_bytes()).unwrap_err().to_string()
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(
            read_traces("job,node\n".as_bytes()),
            Err(TraceError::Header { line: 1, .. })
        ));
        let short = format!("{TRACE_HEADER}\nA,n1,0,0.5\n");
        assert!(matches!(
            read_traces(short.as_bytes()),
            Err(TraceError::ColumnCount { line: 2, found: 4 })
        ));
        let nan = format!("{TRACE_HEADER}\nA,n1,x,0.5,0,0,0,0\n");
        assert!(matches!(
            read_traces(nan.as_bytes()),
            Err(TraceError::NotANumber { line: 2, field: "timestamp", .. })
        ));
        let back = format!("{TRACE_HEADER}\nA,n1,5,0.5,0,0,0,0\nA,n1,0,0.5,0,0,0,0\n");
        assert!(matches!(
            read_traces(back.as_bytes()),
            Err(TraceError::NonMonotonic { line: 3, .. })
        ));
        assert!(matches!(
            load_traces("/definitely/not/here.csv"),
            Err(TraceError::Io { .. })
        ));
    }

    #[test]
    fn two_jobs_two_nodes() {
        let text = format!(
            "{TRACE_HEADER}\nA,n1,0,0.5,0,0,0,0\nA,n2,0,0.3,0,0,0,0\nB,n1,0,0.2,0,0,0,0\nB,n2,0,0.1,0,0,0,0\n"
        );
        let recs = read_traces(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 4);
        assert_eq!(records_for(&recs, "A").count(), 2);
        assert_eq!(records_for(&recs, "B").count(), 2);
        assert_eq!(trace_job_ids(&recs), vec!["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn summarize_means() {
        let one = vec![record("A", "n", 0.0, 0.4)];
        assert_eq!(summarize_job(&one, "A").unwrap().cpu, 0.4);
        let two = vec![record("A", "n", 0.0, 0.2), record("A", "n", 5.0, 0.6)];
        assert!((summarize_job(&two, "A").unwrap().cpu - 0.4).abs() < 1e-15);
        assert!(matches!(summarize_job(&two, "Z"), Err(TraceError::UnknownJob(_))));
    }

    #[test]
    fn summarize_ten_records_against_brute_force() {
        let cpus = [0.11, 0.93, 0.47, 0.05, 0.66, 0.72, 0.38, 0.29, 0.81, 0.14];
        let recs: Vec<_> = cpus
            .iter()
            .enumerate()
            .map(|(i, &c)| record("J", "n1", 5.0 * i as f64, c))
            .chain(std::iter::once(record("other", "n1", 0.0, 1.0)))
            .collect();
        // oracle: (sum of the ten literals) / 10 = 4.56 / 10
        let got = summarize_job(&recs, "J").unwrap();
        assert!((got.cpu - 0.456).abs() < 1e-12);
        assert!((got.mem - 0.1).abs() < 1e-12);
    }
}
