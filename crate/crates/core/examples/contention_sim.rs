//! Runs the cluster simulator by hand: two CPU-heavy jobs share a node and
//! slow each other down, a disk-heavy job on the other node runs at full speed.
//!
//! ```text
//! cargo run --example contention_sim
//! ```

use colocate::sim::{ClusterSpec, ClusterState, PlacementPolicy, SimEvent};
use colocate::workload::{Job, JobId, ResourceProfile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cluster = ClusterState::new(ClusterSpec { nodes: 2, slots_per_node: 2 })?;
    let cpu = ResourceProfile::new(0.8, 0.1, 0.05, 0.05, 0.0)?;
    let disk = ResourceProfile::new(0.1, 0.1, 0.8, 0.05, 0.1)?;

    cluster.place_job(Job::new(JobId(0), "cpu", cpu, 100.0, 1)?, PlacementPolicy::Pack)?;
    cluster.place_job(Job::new(JobId(1), "cpu", cpu, 100.0, 1)?, PlacementPolicy::Pack)?;
    let nodes = cluster.place_job(Job::new(JobId(2), "disk", disk, 100.0, 1)?, PlacementPolicy::Pack)?;
    println!("disk job placed on {nodes:?}");

    while let Some(event) = cluster.step() {
        if let SimEvent::Completed(c) = event {
            println!(
                "{} {} ran {:.1}s -> {:.1}s, observed cpu {:.2} iowait {:.2}",
                c.job.kind, c.job.id, c.started_at, c.finished_at, c.observed.cpu, c.observed.iowait
            );
        }
    }
    let util = cluster.cluster_utilization((0.0, cluster.clock()))?;
    println!("makespan {:.1}s, mean cpu {:.2}", cluster.clock(), util.cpu);
    Ok(())
}
