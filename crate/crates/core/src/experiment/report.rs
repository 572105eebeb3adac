//! Aggregated results and the files written next to them.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::scheduler::{DecisionRecord, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub waiting_rounds: u32,
    pub count: u64,
}

/// Utilization in percent of node capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilizationPct {
    pub cpu: f64,
    pub mem: f64,
    pub disk: f64,
    pub net: f64,
    pub iowait: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub makespan_s: f64,
    pub utilization_pct: UtilizationPct,
    pub dispatched: usize,
    pub rounds: u64,
    pub max_waiting_rounds: u32,
    pub waiting_histogram: Vec<HistogramRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerSummary {
    pub scheduler: Variant,
    pub makespan_median_s: f64,
    pub makespan_min_s: f64,
    pub makespan_max_s: f64,
    pub utilization_mean_pct: UtilizationPct,
    /// Median makespan relative to the baseline scheduler, in percent.
    /// Negative is faster.
    pub delta_vs_baseline_pct: Option<f64>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    /// All figures come from the simulator, never from a real cluster.
    pub source: String,
    pub seeds: Vec<u64>,
    pub baseline: Option<Variant>,
    pub schedulers: Vec<SchedulerSummary>,
    pub violations: Vec<String>,
}

impl ExperimentReport {
    pub fn scheduler(&self, v: Variant) -> Option<&SchedulerSummary> {
        self.schedulers.iter().find(|s| s.scheduler == v)
    }

    /// Turns recorded invariant violations into an error.
    pub fn ensure_clean(&self) -> Result<(), ExperimentError> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::Invariant(self.violations.clone()))
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per scheduler and seed.
    pub fn utilization_csv(&self) -> String {
        let mut out = String::from("scheduler,seed,makespan_s,cpu_pct,mem_pct,disk_pct,net_pct,iowait_pct,delta_vs_baseline_pct\n");
        for s in &self.schedulers {
            let delta = s.delta_vs_baseline_pct.map(|d| format!("{d:.3}")).unwrap_or_default();
            for r in &s.runs {
                let u = r.utilization_pct;
                let _ = writeln!(
                    out,
                    "{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{}",
                    s.scheduler, r.seed, r.makespan_s, u.cpu, u.mem, u.disk, u.net, u.iowait, delta
                );
            }
        }
        out
    }

    pub fn waiting_histogram_csv(&self) -> String {
        let mut out = String::from("scheduler,seed,waiting_rounds,count\n");
        for s in &self.schedulers {
            for r in &s.runs {
                for row in &r.waiting_histogram {
                    let _ = writeln!(out, "{},{},{},{}", s.scheduler, r.seed, row.waiting_rounds, row.count);
                }
            }
        }
        out
    }

    /// Plain-text summary table.
    pub fn table(&self) -> String {
        let mut out = format!("{} ({})\n", self.name, self.source);
        let _ = writeln!(
            out,
            "{:<12} {:>12} {:>12} {:>12} {:>8} {:>8} {:>8} {:>8} {:>9}",
            "scheduler", "median_s", "min_s", "max_s", "cpu%", "mem%", "disk%", "net%", "delta%"
        );
        for s in &self.schedulers {
            let u = s.utilization_mean_pct;
            let delta = s.delta_vs_baseline_pct.map(|d| format!("{d:+.2}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<12} {:>12.1} {:>12.1} {:>12.1} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>9}",
                s.scheduler.name(),
                s.makespan_median_s,
                s.makespan_min_s,
                s.makespan_max_s,
                u.cpu,
                u.mem,
                u.disk,
                u.net,
                delta
            );
        }
        out
    }
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Counts dispatches by the number of rounds the job waited. Rows cover
/// every value from zero to the maximum, so empty buckets appear as zeros.
pub fn emit_waiting_histogram(records: &[DecisionRecord]) -> Result<Vec<HistogramRow>, ExperimentError> {
    let max = records
        .iter()
        .map(|r| r.waiting_rounds)
        .max()
        .ok_or_else(|| ExperimentError::Config("decision log is empty".into()))?;
    let mut counts = vec![0u64; max as usize + 1];
    for r in records {
        counts[r.waiting_rounds as usize] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(w, count)| HistogramRow {
            waiting_rounds: w as u32,
            count,
        })
        .collect())
}

pub fn histogram_csv(rows: &[HistogramRow]) -> String {
    let mut out = String::from("waiting_rounds,count\n");
    for r in rows {
        let _ = writeln!(out, "{},{}", r.waiting_rounds, r.count);
    }
    out
}

pub fn decision_log_jsonl(records: &[DecisionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn read_decision_log(path: impl AsRef<Path>) -> Result<Vec<DecisionRecord>, ExperimentError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| ExperimentError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::Reason;
    use crate::workload::JobId;
    use std::collections::BTreeMap;

    fn rec(id: u64, w: u32) -> DecisionRecord {
        DecisionRecord {
            round: 0,
            time: 0.0,
            policy: Variant::PreferenceWaitLimit,
            job: JobId(id),
            kind: "A".into(),
            group: Some(0),
            reason: Reason::PreferenceSampled,
            waiting_rounds: w,
            over_limit: 0,
            distribution: BTreeMap::new(),
        }
    }

    #[test]
    fn histogram_fills_gaps_and_sums_to_dispatches() {
        let recs = vec![rec(0, 0), rec(1, 3), rec(2, 3), rec(3, 1)];
        let h = emit_waiting_histogram(&recs).unwrap();
        let counts: Vec<u64> = h.iter().map(|r| r.count).collect();
        assert_eq!(counts, vec![1, 1, 0, 2]);
        assert_eq!(counts.iter().sum::<u64>(), 4);
        assert_eq!(histogram_csv(&h), "waiting_rounds,count\n0,1\n1,1\n2,0\n3,2\n");
        assert!(emit_waiting_histogram(&[]).is_err());
    }

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn decision_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let recs = vec![rec(0, 2), rec(1, 0)];
        std::fs::write(&path, decision_log_jsonl(&recs)).unwrap();
        assert_eq!(read_decision_log(&path).unwrap(), recs);
    }
}
