//! Offline grouping of job profiles and online assignment of jobs to groups.
//!
//! Groups come from k-means on the raw 5-dimensional profile vectors with
//! k-means++ seeding. All dimensions are already fractions in `[0, 1]`, so
//! no normalization is applied. Assignment picks the nearest centroid by
//! Euclidean distance, ties going to the lower group index.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream, Stream};
use crate::sim::{self, SimError};
use crate::workload::{Job, ResourceProfile, DIM};

#[derive(Debug, Error)]
pub enum GroupingError {
    #[error("no profiles to group")]
    Empty,
    #[error("k must be positive")]
    ZeroK,
    #[error("k = {k} exceeds the {distinct} distinct profiles")]
    TooFewProfiles { k: usize, distinct: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("profiling run failed: {0}")]
    Profiling(#[from] SimError),
    #[error("model file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("model file {path}: {source}")]
    Format { path: String, source: serde_json::Error },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub max_iterations: usize,
    /// Stop once no centroid moves farther than this.
    pub tolerance: f64,
    /// Independent seedings; the lowest final objective wins.
    pub restarts: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-9,
            restarts: 8,
        }
    }
}

type Point = [f64; DIM];

fn sq_dist(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; the lowest index wins ties.
pub fn nearest_centroid(point: &Point, centroids: &[Point]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// k-means++ seeding: the first centre uniformly, each further one with
/// probability proportional to its squared distance from the chosen set.
pub fn kmeanspp_seeds<R: Rng>(points: &[Point], k: usize, rng: &mut R) -> Vec<usize> {
    let mut chosen = vec![rng.gen_range(0..points.len())];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total implies a candidate")
        } else {
            // all remaining points coincide with chosen centres
            (0..points.len()).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen
}

#[derive(Debug, Clone, PartialEq)]
pub struct LloydResult {
    pub centroids: Vec<Point>,
    pub assignments: Vec<usize>,
    /// Objective after each assignment step.
    pub objective_history: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Lloyd refinement from the given initial centroids. An emptied cluster
/// keeps its previous centroid.
pub fn lloyd(points: &[Point], initial: Vec<Point>, opts: &KMeansOptions) -> LloydResult {
    let k = initial.len();
    let mut centroids = initial;
    let mut assignments = vec![0; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..opts.max_iterations {
        iterations += 1;
        for (a, p) in assignments.iter_mut().zip(points) {
            *a = nearest_centroid(p, &centroids);
        }
        history.push(objective(points, &assignments, &centroids));
        let mut sums = vec![[0.0; DIM]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
            counts[a] += 1;
        }
        let mut movement: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let updated = sums[c].map(|s| s / counts[c] as f64);
            movement = movement.max(sq_dist(&updated, &centroids[c]).sqrt());
            centroids[c] = updated;
        }
        if movement < opts.tolerance {
            break;
        }
    }
    for (a, p) in assignments.iter_mut().zip(points) {
        *a = nearest_centroid(p, &centroids);
    }
    let objective = objective(points, &assignments, &centroids);
    LloydResult {
        centroids,
        assignments,
        objective_history: history,
        objective,
        iterations,
    }
}

/// Sum of squared distances of points to their assigned centroids.
pub fn objective(points: &[Point], assignments: &[usize], centroids: &[Point]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum()
}

/// Centroids that partition profiles into `k` groups, plus a cache of group
/// labels per job kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingModel {
    pub k: usize,
    pub centroids: Vec<ResourceProfile>,
    pub labels: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: GroupingModel,
    /// Lloyd result of the winning restart.
    pub best: LloydResult,
    pub restart_objectives: Vec<f64>,
}

pub fn fit_groups(profiles: &[(String, ResourceProfile)], k: usize, seed: u64) -> Result<GroupingModel, GroupingError> {
    Ok(fit_groups_with(profiles, k, seed, &KMeansOptions::default())?.model)
}

pub fn fit_groups_with(
    profiles: &[(String, ResourceProfile)],
    k: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<FitReport, GroupingError> {
    if profiles.is_empty() {
        return Err(GroupingError::Empty);
    }
    if k == 0 {
        return Err(GroupingError::ZeroK);
    }
    let points: Vec<Point> = profiles.iter().map(|(_, p)| p.to_array()).collect();
    let distinct = count_distinct(&points);
    if k > distinct {
        return Err(GroupingError::TooFewProfiles { k, distinct });
    }
    let mut rng = stream(seed, Stream::Grouping);
    let mut best: Option<LloydResult> = None;
    let mut restart_objectives = Vec::new();
    for _ in 0..opts.restarts.max(1) {
        let seeds = kmeanspp_seeds(&points, k, &mut rng);
        let initial = seeds.iter().map(|&i| points[i]).collect();
        let run = lloyd(&points, initial, opts);
        restart_objectives.push(run.objective);
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let labels = profiles
        .iter()
        .zip(&best.assignments)
        .map(|((kind, _), &g)| (kind.clone(), g))
        .collect();
    let model = GroupingModel {
        k,
        centroids: best
            .centroids
            .iter()
            .map(|c| ResourceProfile::from_array_unchecked(c.map(|v| v.clamp(0.0, 1.0))))
            .collect(),
        labels,
    };
    Ok(FitReport {
        model,
        best,
        restart_objectives,
    })
}

fn count_distinct(points: &[Point]) -> usize {
    let mut keys: Vec<[u64; DIM]> = points.iter().map(|p| p.map(f64::to_bits)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

impl GroupingModel {
    pub fn validate(&self) -> Result<(), GroupingError> {
        if self.k == 0 || self.centroids.len() != self.k {
            return Err(GroupingError::InvalidModel(format!(
                "k = {} but {} centroids",
                self.k,
                self.centroids.len()
            )));
        }
        if let Some(c) = self.centroids.iter().find(|c| !c.is_valid()) {
            return Err(GroupingError::InvalidModel(format!("centroid out of range: {c:?}")));
        }
        if let Some((kind, g)) = self.labels.iter().find(|(_, &g)| g >= self.k) {
            return Err(GroupingError::InvalidModel(format!("label {kind} -> {g} outside [0, {})", self.k)));
        }
        Ok(())
    }

    /// Nearest group for a profile, ignoring the label cache.
    pub fn nearest(&self, profile: &ResourceProfile) -> usize {
        let centroids: Vec<Point> = self.centroids.iter().map(ResourceProfile::to_array).collect();
        nearest_centroid(&profile.to_array(), &centroids)
    }

    pub fn cached(&self, kind: &str) -> Option<usize> {
        self.labels.get(kind).copied()
    }

    /// Group for `job`. Recurring kinds hit the label cache; otherwise the
    /// nearest centroid to `profile` is cached under the job's kind.
    pub fn assign_group(&mut self, job: &Job, profile: &ResourceProfile) -> usize {
        if let Some(g) = self.cached(&job.kind) {
            return g;
        }
        let g = self.nearest(profile);
        self.labels.insert(job.kind.clone(), g);
        g
    }

    /// Re-clusters with the same `k`, dropping the label cache.
    pub fn refit(&self, profiles: &[(String, ResourceProfile)], seed: u64) -> Result<GroupingModel, GroupingError> {
        fit_groups(profiles, self.k, seed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GroupingError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("model serializes");
        std::fs::write(path, text + "\n").map_err(|source| GroupingError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GroupingError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| GroupingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let model: GroupingModel = serde_json::from_str(&text).map_err(|source| GroupingError::Format {
            path: path.display().to_string(),
            source,
        })?;
        model.validate()?;
        Ok(model)
    }
}

/// Where sample profiling runs execute: a single node shared with optional
/// background load.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfilingBench {
    pub background: Vec<ResourceProfile>,
}

/// Profiles a job that has no cached label by running `sample_fraction` of
/// its work in the simulator.
pub fn profile_sample_run(job: &Job, bench: &ProfilingBench, sample_fraction: f64) -> Result<ResourceProfile, GroupingError> {
    Ok(sim::profile_run(job, &bench.background, sample_fraction)?)
}
