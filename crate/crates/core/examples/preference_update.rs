//! One learning step: two nodes report how well their residents got along,
//! and the preference matrix moves toward the better pairing.
//!
//! ```text
//! cargo run --example preference_update
//! ```

use std::collections::BTreeMap;

use colocate::preference::{colocation_goodness, GoodnessSample, LearningConfig, PreferenceMatrix};
use colocate::workload::ResourceProfile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut h = PreferenceMatrix::zeros(2, 0.1)?;
    let learning = LearningConfig::default();

    // Node 0 runs a CPU job next to a disk job; node 1 runs two disk jobs.
    let mixed = ResourceProfile::new(0.8, 0.3, 0.7, 0.1, 0.05)?;
    let crowded = ResourceProfile::new(0.1, 0.2, 0.5, 0.1, 0.6)?;
    let samples = [
        GoodnessSample::new(0, BTreeMap::from([(0, 1), (1, 1)]), colocation_goodness(&mixed, learning.beta)),
        GoodnessSample::new(1, BTreeMap::from([(1, 2)]), colocation_goodness(&crowded, learning.beta)),
    ];
    for s in &samples {
        println!("node {} groups {:?} goodness {:.3}", s.node_id, s.groups_on_node, s.goodness);
    }

    let summary = h.update_preferences(&samples, &learning)?;
    println!("baselines {:?}", summary.baselines);
    for (e, row) in h.rows().iter().enumerate() {
        println!("H[{e}] = {row:?}");
    }
    Ok(())
}
