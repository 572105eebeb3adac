//! Declarative experiment description, read from TOML.
//!
//! ```toml
//! name = "learning-phase"
//! schedulers = ["hugo", "round_robin"]
//! seeds = [1, 2, 3]
//! k = 6
//! alpha = 0.1
//! output_dir = "out/learning-phase"
//!
//! [cluster]
//! nodes = 32
//! slots_per_node = 8
//!
//! [workload]
//! mode = "repeat"
//! pattern = "C B G A F H"
//! times = 10
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentError, RunningView, SampleScope};
use crate::preference::{BaselineScope, LearningConfig, SoftmaxAxis, UpdateMode};
use crate::scheduler::Variant;
use crate::sim::{standard_catalog, ClusterSpec, JobCatalog, PlacementPolicy, WorkloadSpec};

/// Job kinds either by builtin name or spelled out inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CatalogSource {
    Builtin(String),
    Inline(JobCatalog),
}

impl Default for CatalogSource {
    fn default() -> Self {
        CatalogSource::Builtin("standard".to_string())
    }
}

impl CatalogSource {
    pub fn resolve(&self) -> Result<JobCatalog, ExperimentError> {
        match self {
            CatalogSource::Builtin(name) if name == "standard" => Ok(standard_catalog()),
            CatalogSource::Builtin(name) => Err(ExperimentError::Config(format!("unknown builtin catalog `{name}`"))),
            CatalogSource::Inline(c) => Ok(c.clone()),
        }
    }
}

fn default_k() -> usize {
    6
}
fn default_alpha() -> f64 {
    0.1
}
fn default_beta() -> f64 {
    1.0
}
fn default_waiting_limit() -> u32 {
    20
}
fn default_sample_fraction() -> f64 {
    0.1
}
fn default_seeds() -> Vec<u64> {
    vec![1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub schedulers: Vec<Variant>,
    /// Reference for the relative makespan delta. Defaults to `round_robin`
    /// when it is among the schedulers.
    #[serde(default)]
    pub baseline: Option<Variant>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Only used by `hugo_star`.
    #[serde(default = "default_waiting_limit")]
    pub waiting_limit: u32,
    #[serde(default)]
    pub softmax_axis: SoftmaxAxis,
    #[serde(default)]
    pub update_mode: UpdateMode,
    #[serde(default)]
    pub baseline_scope: BaselineScope,
    #[serde(default)]
    pub sample_scope: SampleScope,
    #[serde(default)]
    pub running_view: RunningView,
    #[serde(default)]
    pub placement: PlacementPolicy,
    #[serde(default = "default_sample_fraction")]
    pub sample_fraction: f64,
    /// Seed for grouping; defaults to the first run seed.
    #[serde(default)]
    pub grouping_seed: Option<u64>,
    /// Kinds treated as historic runs when fitting groups. Defaults to the
    /// whole catalog. Kinds outside this list are profiled on first sight.
    #[serde(default)]
    pub history_kinds: Option<Vec<String>>,
    #[serde(default)]
    pub matrix_in: Option<PathBuf>,
    #[serde(default)]
    pub matrix_out: Option<PathBuf>,
    #[serde(default)]
    pub grouping_in: Option<PathBuf>,
    #[serde(default)]
    pub grouping_out: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub cluster: ClusterSpec,
    #[serde(default)]
    pub catalog: CatalogSource,
    pub workload: WorkloadSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// Loads, resolves relative paths against the file's directory and
    /// validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let config = Self::load_unchecked(path)?;
        config.validate()?;
        Ok(config)
    }

    /// As [`load`](Self::load) without validation, for configs whose input
    /// files are produced by an earlier step.
    pub fn load_unchecked(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: Self = toml::from_str(&text)
            .map_err(|e| ExperimentError::Config(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for p in [
            &mut self.matrix_in,
            &mut self.matrix_out,
            &mut self.grouping_in,
            &mut self.grouping_out,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |msg: String| Err(ExperimentError::Config(msg));
        if self.schedulers.is_empty() {
            return fail("at least one scheduler is required".into());
        }
        if self.seeds.is_empty() {
            return fail("seeds must not be empty".into());
        }
        if self.k == 0 {
            return fail("k must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return fail(format!("beta must be non-negative, got {}", self.beta));
        }
        if self.waiting_limit == 0 {
            return fail("waiting_limit must be positive".into());
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return fail(format!("sample_fraction must be in (0, 1], got {}", self.sample_fraction));
        }
        if self.cluster.nodes == 0 || self.cluster.slots_per_node == 0 {
            return fail("cluster must have nodes and slots".into());
        }
        if let Some(b) = self.baseline {
            if !self.schedulers.contains(&b) {
                return fail(format!("baseline {b} is not among the schedulers"));
            }
        }
        for p in [&self.matrix_in, &self.grouping_in].into_iter().flatten() {
            if !p.exists() {
                return fail(format!("input file {} does not exist", p.display()));
            }
        }
        let catalog = self.catalog.resolve()?;
        let total_slots = self.cluster.nodes as u32 * self.cluster.slots_per_node;
        for (name, kind) in &catalog.kinds {
            if kind.containers == 0 || kind.containers > total_slots {
                return fail(format!(
                    "kind {name} requests {} containers, cluster has {total_slots} slots",
                    kind.containers
                ));
            }
        }
        Ok(())
    }

    pub fn learning(&self) -> LearningConfig {
        LearningConfig {
            beta: self.beta,
            softmax_axis: self.softmax_axis,
            update_mode: self.update_mode,
            baseline: self.baseline_scope,
        }
    }

    pub fn baseline_variant(&self) -> Option<Variant> {
        self.baseline.or_else(|| {
            self.schedulers
                .contains(&Variant::RoundRobin)
                .then_some(Variant::RoundRobin)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        name = "t"
        schedulers = ["hugo", "round_robin"]
        output_dir = "out"
        [workload]
        mode = "repeat"
        pattern = "A B"
        times = 2
    "#;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.k, 6);
        assert_eq!(c.alpha, 0.1);
        assert_eq!(c.beta, 1.0);
        assert_eq!(c.seeds, vec![1]);
        assert_eq!(c.cluster, ClusterSpec::default());
        assert_eq!(c.softmax_axis, SoftmaxAxis::Column);
        assert_eq!(c.update_mode, UpdateMode::Increment);
        assert_eq!(c.baseline_variant(), Some(Variant::RoundRobin));
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.seeds.clear();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.matrix_in = Some("/no/such/matrix.json".into());
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.baseline = Some(Variant::Fifo);
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_toml("name = 1").is_err());
        assert!(ExperimentConfig::from_toml(&format!("bogus = 3\n{MINIMAL}")).is_err());
    }

    #[test]
    fn inline_catalog() {
        let text = format!(
            "{MINIMAL}\n[catalog.A]\ndemand = {{ cpu = 0.5, mem = 0.0, disk = 0.0, net = 0.0, iowait = 0.0 }}\ncontainers = 2\n"
        );
        let c = ExperimentConfig::from_toml(&text).unwrap();
        let cat = c.catalog.resolve().unwrap();
        assert_eq!(cat.get("A").unwrap().containers, 2);
    }
}
