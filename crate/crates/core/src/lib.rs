//! Co-location aware scheduling for data-parallel jobs on a shared cluster.
//!
//! Jobs are clustered into resource-usage groups ([`grouping`]). A `k x k`
//! preference matrix ([`preference`]) learns which groups run well together
//! from per-node usage observed after each completion, and the
//! [`scheduler`] samples the next group to dispatch from it. Everything runs
//! against a deterministic discrete-event cluster model ([`sim`]), and
//! [`experiment`] drives whole config-defined comparisons.
//!
//! ```
//! use colocate::preference::{PreferenceMatrix, SoftmaxAxis};
//! use std::collections::BTreeSet;
//!
//! let h = PreferenceMatrix::zeros(3, 0.1).unwrap();
//! let dist = h
//!     .selection_distribution(&[0], &BTreeSet::from([1, 2]), SoftmaxAxis::Column)
//!     .unwrap();
//! assert!((dist[&1] - 0.5).abs() < 1e-12);
//! ```
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod experiment;
pub mod grouping;
pub mod preference;
pub mod rng;
pub mod scheduler;
pub mod sim;
pub mod workload;
