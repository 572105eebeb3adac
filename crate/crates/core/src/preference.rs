//! Group-level co-location preferences learned with a gradient-bandit rule.
//!
//! `H[e][g]` is the preference of group `e` for sharing nodes with group `g`.
//! The pick probability of `g` next to a running `e` is a softmax of `H`;
//! by default it is normalized over the *first* index with `g` fixed,
//! `exp(H[e][g]) / sum_b exp(H[b][g])`, and [`SoftmaxAxis::Row`] gives the
//! conventional `exp(H[e][g]) / sum_b exp(H[e][b])`.
//!
//! After a job completes, every node it ran on yields a goodness sample
//! `R_n`, and for each ordered group pair `(i, j)` on that node
//!
//! ```text
//! dH[i][j] = a(R_n - Rbar_i)(1 - pi_i(j)) - sum_{x in groups_n \ {i, j}} a(R_n - Rbar_i) pi_i(x)
//! ```
//!
//! where `Rbar_i` is the mean goodness of nodes hosting group `i`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::CoLocationObservation;
use crate::workload::ResourceProfile;

#[derive(Debug, Error)]
pub enum PreferenceError {
    #[error("no queued groups to choose from")]
    EmptyQueue,
    #[error("group {group} outside [0, {k})")]
    GroupOutOfRange { group: usize, k: usize },
    #[error("learning rate must be positive and finite, got {0}")]
    BadAlpha(f64),
    #[error("matrix must be at least 1x1")]
    ZeroK,
    #[error("preference matrix became non-finite at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("matrix is {found}x{found}, expected {expected}x{expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("malformed matrix: {0}")]
    Malformed(String),
    #[error("matrix file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("matrix file {path}: {source}")]
    Format { path: String, source: serde_json::Error },
}

/// Normalization axis of the pick-probability softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoftmaxAxis {
    /// Sum over the first index with the column fixed.
    #[default]
    Column,
    /// Sum over the second index with the row fixed.
    Row,
}

/// Whether an update adds to `H` or overwrites the touched entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    #[default]
    Increment,
    /// Each touched entry takes the value computed for it; when several
    /// nodes touch the same pair, the last sample in the batch wins.
    Assign,
}

/// Which samples the goodness baseline `Rbar_i` averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineScope {
    /// Only the samples of the current update.
    Batch,
    /// Every sample seen so far, including the current update.
    #[default]
    Cumulative,
}

/// Co-location goodness of a node: mean utilization of the four capacity
/// resources minus `beta` times I/O wait. Lies in `[-beta, 1]`.
pub fn colocation_goodness(usage: &ResourceProfile, beta: f64) -> f64 {
    (usage.cpu + usage.mem + usage.disk + usage.net) / 4.0 - beta * usage.iowait
}

/// Goodness of one node over one resident combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodnessSample {
    pub node_id: usize,
    /// group -> number of resident jobs of that group
    pub groups_on_node: BTreeMap<usize, u32>,
    pub goodness: f64,
    pub window: (f64, f64),
}

impl GoodnessSample {
    pub fn new(node_id: usize, groups_on_node: BTreeMap<usize, u32>, goodness: f64) -> Self {
        Self {
            node_id,
            groups_on_node,
            goodness,
            window: (0.0, 1.0),
        }
    }

    /// `None` when no resident job carries a group.
    pub fn from_observation(obs: &CoLocationObservation, beta: f64) -> Option<Self> {
        if obs.groups.is_empty() || obs.window.0 >= obs.window.1 {
            return None;
        }
        Some(Self {
            node_id: obs.node_id,
            groups_on_node: obs.groups.clone(),
            goodness: colocation_goodness(&obs.usage, beta),
            window: obs.window,
        })
    }
}

/// Knobs of the learning rule other than the learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningConfig {
    pub beta: f64,
    pub softmax_axis: SoftmaxAxis,
    pub update_mode: UpdateMode,
    pub baseline: BaselineScope,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            softmax_axis: SoftmaxAxis::Column,
            update_mode: UpdateMode::Increment,
            baseline: BaselineScope::Cumulative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BaselineStat {
    pub sum: f64,
    pub count: u64,
}

/// The k x k preference matrix with its learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixFile", into = "MatrixFile")]
pub struct PreferenceMatrix {
    k: usize,
    alpha: f64,
    entries: Vec<f64>,
    baseline: Vec<BaselineStat>,
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    k: usize,
    alpha: f64,
    entries: Vec<Vec<f64>>,
    #[serde(default)]
    baseline: Vec<BaselineStat>,
}

impl From<PreferenceMatrix> for MatrixFile {
    fn from(m: PreferenceMatrix) -> Self {
        Self {
            k: m.k,
            alpha: m.alpha,
            entries: m.entries.chunks(m.k).map(<[f64]>::to_vec).collect(),
            baseline: m.baseline,
        }
    }
}

impl TryFrom<MatrixFile> for PreferenceMatrix {
    type Error = PreferenceError;

    fn try_from(f: MatrixFile) -> Result<Self, Self::Error> {
        let mut m = PreferenceMatrix::zeros(f.k, f.alpha)?;
        if f.entries.len() != f.k || f.entries.iter().any(|r| r.len() != f.k) {
            return Err(PreferenceError::Malformed(format!("entries are not {0}x{0}", f.k)));
        }
        m.entries = f.entries.concat();
        if let Some(pos) = m.entries.iter().position(|v| !v.is_finite()) {
            return Err(PreferenceError::NonFinite(pos / f.k, pos % f.k));
        }
        if !f.baseline.is_empty() {
            if f.baseline.len() != f.k {
                return Err(PreferenceError::Malformed(format!(
                    "baseline has {} entries, expected {}",
                    f.baseline.len(),
                    f.k
                )));
            }
            m.baseline = f.baseline;
        }
        Ok(m)
    }
}

/// What one update changed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UpdateSummary {
    /// Per-pair value computed by the rule: the increment, or in assign mode
    /// the value written.
    pub deltas: BTreeMap<(usize, usize), f64>,
    pub baselines: BTreeMap<usize, f64>,
}

impl PreferenceMatrix {
    /// All-zero preferences.
    pub fn zeros(k: usize, alpha: f64) -> Result<Self, PreferenceError> {
        if k == 0 {
            return Err(PreferenceError::ZeroK);
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(PreferenceError::BadAlpha(alpha));
        }
        Ok(Self {
            k,
            alpha,
            entries: vec![0.0; k * k],
            baseline: vec![BaselineStat::default(); k],
        })
    }

    /// Builds a matrix from rows.
    pub fn from_rows(rows: &[Vec<f64>], alpha: f64) -> Result<Self, PreferenceError> {
        MatrixFile {
            k: rows.len(),
            alpha,
            entries: rows.to_vec(),
            baseline: Vec::new(),
        }
        .try_into()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: f64) -> Result<(), PreferenceError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(PreferenceError::BadAlpha(alpha));
        }
        self.alpha = alpha;
        Ok(())
    }

    pub fn get(&self, e: usize, g: usize) -> f64 {
        self.entries[e * self.k + g]
    }

    pub fn set(&mut self, e: usize, g: usize, value: f64) {
        self.entries[e * self.k + g] = value;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.k).map(<[f64]>::to_vec).collect()
    }

    pub fn baseline_stats(&self) -> &[BaselineStat] {
        &self.baseline
    }

    fn check_group(&self, group: usize) -> Result<(), PreferenceError> {
        if group >= self.k {
            Err(PreferenceError::GroupOutOfRange { group, k: self.k })
        } else {
            Ok(())
        }
    }

    /// Probability of picking group `g` to run next to a running group `e`.
    pub fn pick_probability(&self, e: usize, g: usize, axis: SoftmaxAxis) -> Result<f64, PreferenceError> {
        self.check_group(e)?;
        self.check_group(g)?;
        Ok(self.pick_probability_unchecked(e, g, axis))
    }

    fn pick_probability_unchecked(&self, e: usize, g: usize, axis: SoftmaxAxis) -> f64 {
        let term = |b: usize| match axis {
            SoftmaxAxis::Column => self.get(b, g),
            SoftmaxAxis::Row => self.get(e, b),
        };
        let shift = (0..self.k).map(term).fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = (0..self.k).map(|b| (term(b) - shift).exp()).sum();
        (self.get(e, g) - shift).exp() / denom
    }

    /// Distribution over the queued groups for the next pick, given the
    /// groups currently running. Falls back to uniform when nothing runs.
    pub fn selection_distribution(
        &self,
        running: &[usize],
        queued: &BTreeSet<usize>,
        axis: SoftmaxAxis,
    ) -> Result<BTreeMap<usize, f64>, PreferenceError> {
        if queued.is_empty() {
            return Err(PreferenceError::EmptyQueue);
        }
        for &g in running.iter().chain(queued) {
            self.check_group(g)?;
        }
        if running.is_empty() {
            let p = 1.0 / queued.len() as f64;
            return Ok(queued.iter().map(|&g| (g, p)).collect());
        }
        let mut weight: BTreeMap<usize, f64> = queued.iter().map(|&g| (g, 0.0)).collect();
        for &e in running {
            let pis: Vec<(usize, f64)> = queued
                .iter()
                .map(|&g| (g, self.pick_probability_unchecked(e, g, axis)))
                .collect();
            let norm: f64 = pis.iter().map(|(_, p)| p).sum();
            for (g, p) in pis {
                *weight.get_mut(&g).expect("queued group") += p / norm;
            }
        }
        let total: f64 = weight.values().sum();
        Ok(weight.into_iter().map(|(g, w)| (g, w / total)).collect())
    }

    /// Applies the gradient-bandit rule for a batch of node samples. All pick
    /// probabilities are taken from the matrix as it was before the batch.
    pub fn update_preferences(
        &mut self,
        samples: &[GoodnessSample],
        config: &LearningConfig,
    ) -> Result<UpdateSummary, PreferenceError> {
        if samples.is_empty() {
            return Ok(UpdateSummary::default());
        }
        for s in samples {
            for &g in s.groups_on_node.keys() {
                self.check_group(g)?;
            }
        }
        let before = self.clone();
        let baselines = self.baselines(samples, config.baseline);
        let mut deltas: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut assigned: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for s in samples {
            let omega: Vec<usize> = s.groups_on_node.keys().copied().collect();
            for &i in &omega {
                let step = self.alpha * (s.goodness - baselines[&i]);
                for &j in &omega {
                    if i == j && s.groups_on_node[&i] < 2 {
                        continue;
                    }
                    let mut d = step * (1.0 - before.pick_probability_unchecked(i, j, config.softmax_axis));
                    for &a in omega.iter().filter(|&&a| a != i && a != j) {
                        d -= step * before.pick_probability_unchecked(i, a, config.softmax_axis);
                    }
                    *deltas.entry((i, j)).or_insert(0.0) += d;
                    assigned.insert((i, j), d);
                }
            }
        }
        match config.update_mode {
            UpdateMode::Increment => {
                for (&(i, j), &d) in &deltas {
                    let v = self.get(i, j) + d;
                    self.set(i, j, v);
                }
            }
            UpdateMode::Assign => {
                for (&(i, j), &d) in &assigned {
                    self.set(i, j, d);
                }
            }
        }
        if let Some(pos) = self.entries.iter().position(|v| !v.is_finite()) {
            *self = before;
            return Err(PreferenceError::NonFinite(pos / self.k, pos % self.k));
        }
        let deltas = match config.update_mode {
            UpdateMode::Increment => deltas,
            UpdateMode::Assign => assigned,
        };
        Ok(UpdateSummary { deltas, baselines })
    }

    fn baselines(&mut self, samples: &[GoodnessSample], scope: BaselineScope) -> BTreeMap<usize, f64> {
        let mut batch: BTreeMap<usize, BaselineStat> = BTreeMap::new();
        for s in samples {
            for &g in s.groups_on_node.keys() {
                let stat = batch.entry(g).or_default();
                stat.sum += s.goodness;
                stat.count += 1;
            }
        }
        batch
            .into_iter()
            .map(|(g, stat)| {
                let stat = match scope {
                    BaselineScope::Batch => stat,
                    BaselineScope::Cumulative => {
                        let total = &mut self.baseline[g];
                        total.sum += stat.sum;
                        total.count += stat.count;
                        *total
                    }
                };
                (g, stat.sum / stat.count as f64)
            })
            .collect()
    }

    /// Adds what `learned` gained relative to `base`: entry differences and
    /// the extra baseline observations. Pools independent learning runs that
    /// all started from `base`.
    pub fn add_learned(&mut self, base: &PreferenceMatrix, learned: &PreferenceMatrix) -> Result<(), PreferenceError> {
        base.ensure_dimension(self.k)?;
        learned.ensure_dimension(self.k)?;
        for ((v, b), l) in self.entries.iter_mut().zip(&base.entries).zip(&learned.entries) {
            *v += l - b;
        }
        for ((v, b), l) in self.baseline.iter_mut().zip(&base.baseline).zip(&learned.baseline) {
            v.sum += l.sum - b.sum;
            v.count += l.count - b.count;
        }
        Ok(())
    }

    pub fn ensure_dimension(&self, k: usize) -> Result<(), PreferenceError> {
        if self.k != k {
            return Err(PreferenceError::DimensionMismatch {
                expected: k,
                found: self.k,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes") + "\n"
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PreferenceError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| PreferenceError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PreferenceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PreferenceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| PreferenceError::Format {
            path: path.display().to_string(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn literal() -> LearningConfig {
        LearningConfig {
            baseline: BaselineScope::Batch,
            ..LearningConfig::default()
        }
    }

    fn groups(gs: &[usize]) -> BTreeMap<usize, u32> {
        gs.iter().map(|&g| (g, 1)).collect()
    }

    #[test]
    fn goodness_examples() {
        assert_eq!(colocation_goodness(&ResourceProfile::ZERO, 1.0), 0.0);
        let full = ResourceProfile::new(1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(colocation_goodness(&full, 1.0), 1.0);
        let mixed = ResourceProfile::new(0.8, 0.4, 0.2, 0.2, 0.3).unwrap();
        assert!((colocation_goodness(&mixed, 1.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn uniform_pick_probability() {
        let h = PreferenceMatrix::zeros(4, 0.1).unwrap();
        for e in 0..4 {
            for g in 0..4 {
                assert_eq!(h.pick_probability(e, g, SoftmaxAxis::Column).unwrap(), 0.25);
                assert_eq!(h.pick_probability(e, g, SoftmaxAxis::Row).unwrap(), 0.25);
            }
        }
        assert!(h.pick_probability(4, 0, SoftmaxAxis::Column).is_err());
    }

    #[test]
    fn closed_form_two_by_two() {
        let h = PreferenceMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]], 0.1).unwrap();
        let e = std::f64::consts::E;
        let p = h.pick_probability(0, 0, SoftmaxAxis::Column).unwrap();
        assert!((p - e / (e + 1.0)).abs() < 1e-15);
        assert!((p - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn column_axis_normalizes_columns() {
        let h = PreferenceMatrix::from_rows(&[vec![0.3, -1.0, 2.0], vec![0.7, 0.1, 0.0], vec![-0.2, 0.5, 1.1]], 0.1)
            .unwrap();
        for g in 0..3 {
            let col: f64 = (0..3).map(|e| h.pick_probability(e, g, SoftmaxAxis::Column).unwrap()).sum();
            assert!((col - 1.0).abs() < 1e-12);
        }
        for e in 0..3 {
            let row: f64 = (0..3).map(|g| h.pick_probability(e, g, SoftmaxAxis::Row).unwrap()).sum();
            assert!((row - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn large_entries_do_not_overflow() {
        let h = PreferenceMatrix::from_rows(&[vec![800.0, 0.0], vec![799.0, 0.0]], 0.1).unwrap();
        let p = h.pick_probability(0, 0, SoftmaxAxis::Column).unwrap();
        assert!(p.is_finite() && p > 0.7);
    }

    #[test]
    fn selection_uniform_and_degenerate() {
        let h = PreferenceMatrix::zeros(4, 0.1).unwrap();
        let d = h
            .selection_distribution(&[1], &BTreeSet::from([2, 3]), SoftmaxAxis::Column)
            .unwrap();
        assert_eq!(d, BTreeMap::from([(2, 0.5), (3, 0.5)]));
        let skew = PreferenceMatrix::from_rows(&[vec![5.0, -3.0], vec![0.0, 9.0]], 0.1).unwrap();
        let single = skew
            .selection_distribution(&[0, 1], &BTreeSet::from([1]), SoftmaxAxis::Column)
            .unwrap();
        assert_eq!(single, BTreeMap::from([(1, 1.0)]));
        assert!(matches!(
            h.selection_distribution(&[0], &BTreeSet::new(), SoftmaxAxis::Column),
            Err(PreferenceError::EmptyQueue)
        ));
        let empty_c = h
            .selection_distribution(&[], &BTreeSet::from([0, 1, 2]), SoftmaxAxis::Column)
            .unwrap();
        assert!(empty_c.values().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn zero_advantage_leaves_matrix_alone() {
        let mut h = PreferenceMatrix::zeros(3, 0.1).unwrap();
        let s = GoodnessSample::new(0, groups(&[0, 2]), 0.4);
        h.update_preferences(&[s], &literal()).unwrap();
        assert_eq!(h, PreferenceMatrix::zeros(3, 0.1).unwrap().with_baseline_of(&h));
    }

    #[test]
    fn positive_and_negative_advantage() {
        // two nodes share group 0; node 0 scores higher than the mean
        let mut h = PreferenceMatrix::zeros(3, 0.1).unwrap();
        let good = GoodnessSample::new(0, groups(&[0, 1]), 0.8);
        let bad = GoodnessSample::new(1, groups(&[0, 2]), 0.2);
        h.update_preferences(&[good, bad], &literal()).unwrap();
        assert!(h.get(0, 1) > 0.0);
        assert!(h.get(0, 2) < 0.0);
    }

    #[test]
    fn two_node_hand_computed() {
        // H = 0, k = 3, alpha = 0.5, column axis: every pi = 1/3.
        // node A: {0,1}, R = 0.9; node B: {0,2}, R = 0.3.
        // Rbar_0 = 0.6, Rbar_1 = 0.9, Rbar_2 = 0.3.
        // dH[0][1] = 0.5 * 0.3 * (2/3) = 0.1; dH[0][2] = 0.5 * -0.3 * (2/3) = -0.1
        // dH[1][0] = dH[2][0] = 0 (zero advantage)
        let mut h = PreferenceMatrix::zeros(3, 0.5).unwrap();
        let samples = [
            GoodnessSample::new(0, groups(&[0, 1]), 0.9),
            GoodnessSample::new(1, groups(&[0, 2]), 0.3),
        ];
        h.update_preferences(&samples, &literal()).unwrap();
        let expected = [[0.0, 0.1, -0.1], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((h.get(i, j) - expected[i][j]).abs() < 1e-15, "({i},{j}) = {}", h.get(i, j));
            }
        }
    }

    #[test]
    fn three_groups_subtract_third_term() {
        // one node {0,1,2}, R = 1 and a second node {0}, R = 0 -> Rbar_0 = 0.5
        // dH[0][1] = a*0.5*(1 - 1/3) - a*0.5*(1/3) = a * 0.5 * 1/3
        let mut h = PreferenceMatrix::zeros(3, 0.3).unwrap();
        let samples = [
            GoodnessSample::new(0, groups(&[0, 1, 2]), 1.0),
            GoodnessSample::new(1, groups(&[0]), 0.0),
        ];
        h.update_preferences(&samples, &literal()).unwrap();
        assert!((h.get(0, 1) - 0.3 * 0.5 / 3.0).abs() < 1e-15);
        assert!((h.get(0, 2) - 0.3 * 0.5 / 3.0).abs() < 1e-15);
        assert_eq!(h.get(0, 0), 0.0);
    }

    #[test]
    fn diagonal_only_with_two_jobs_of_a_group() {
        let mut h = PreferenceMatrix::zeros(2, 0.1).unwrap();
        // Omega = {0} on the first node, so dH[0][0] = a * 0.4 * (1 - 1/2).
        let pair = GoodnessSample::new(0, BTreeMap::from([(0, 2)]), 0.9);
        let other = GoodnessSample::new(1, BTreeMap::from([(0, 1), (1, 1)]), 0.1);
        let summary = h.update_preferences(&[pair, other], &literal()).unwrap();
        assert!(summary.deltas.contains_key(&(0, 0)));
        assert!((h.get(0, 0) - 0.1 * 0.4 * 0.5).abs() < 1e-15);
        assert!(!summary.deltas.contains_key(&(1, 1)));
    }

    #[test]
    fn pooling_adds_each_runs_gain() {
        let base = PreferenceMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]], 0.1).unwrap();
        let mut a = base.clone();
        a.set(0, 1, 0.5);
        let mut b = base.clone();
        b.set(0, 1, -0.2);
        b.set(1, 1, 0.3);
        let mut pooled = base.clone();
        pooled.add_learned(&base, &a).unwrap();
        pooled.add_learned(&base, &b).unwrap();
        assert_eq!(pooled.rows(), vec![vec![1.0, 0.3], vec![0.0, 0.3]]);
        assert!(pooled.add_learned(&base, &PreferenceMatrix::zeros(3, 0.1).unwrap()).is_err());
    }

    #[test]
    fn cumulative_baseline_remembers_history() {
        let mut h = PreferenceMatrix::zeros(2, 0.1).unwrap();
        let cfg = LearningConfig::default();
        h.update_preferences(&[GoodnessSample::new(0, groups(&[0, 1]), 0.2)], &cfg)
            .unwrap();
        assert_eq!(h.get(0, 1), 0.0);
        let s = h
            .update_preferences(&[GoodnessSample::new(0, groups(&[0, 1]), 0.6)], &cfg)
            .unwrap();
        assert!((s.baselines[&0] - 0.4).abs() < 1e-15);
        assert!(h.get(0, 1) > 0.0);
    }

    #[test]
    fn assign_mode_overwrites() {
        let mut h = PreferenceMatrix::from_rows(&[vec![0.0, 5.0], vec![0.0, 0.0]], 0.1).unwrap();
        let cfg = LearningConfig {
            update_mode: UpdateMode::Assign,
            ..literal()
        };
        h.update_preferences(&[GoodnessSample::new(0, groups(&[0, 1]), 0.5)], &cfg)
            .unwrap();
        assert_eq!(h.get(0, 1), 0.0);
    }

    #[test]
    fn rejects_out_of_range_groups() {
        let mut h = PreferenceMatrix::zeros(2, 0.1).unwrap();
        let s = GoodnessSample::new(0, groups(&[0, 5]), 0.5);
        assert!(matches!(
            h.update_preferences(&[s], &literal()),
            Err(PreferenceError::GroupOutOfRange { group: 5, k: 2 })
        ));
        assert!(h.update_preferences(&[], &literal()).unwrap().deltas.is_empty());
    }

    #[test]
    fn file_roundtrip_and_guards() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.json");
        let mut h = PreferenceMatrix::zeros(3, 0.25).unwrap();
        h.set(1, 2, -0.125);
        h.save(&path).unwrap();
        let back = PreferenceMatrix::load(&path).unwrap();
        assert_eq!(back, h);
        assert!(back.ensure_dimension(3).is_ok());
        assert!(matches!(
            back.ensure_dimension(4),
            Err(PreferenceError::DimensionMismatch { expected: 4, found: 3 })
        ));
        std::fs::write(&path, r#"{"k":2,"alpha":0.1,"entries":[[0,0]]}"#).unwrap();
        assert!(PreferenceMatrix::load(&path).is_err());
        assert!(PreferenceMatrix::zeros(2, 0.0).is_err());
    }

    impl PreferenceMatrix {
        fn with_baseline_of(mut self, other: &PreferenceMatrix) -> Self {
            self.baseline = other.baseline.clone();
            self
        }
    }
}
