//! Groups the standard job kinds by resource profile, then places a kind the
//! model has never seen by profiling a short sample run.
//!
//! ```text
//! cargo run --example grouping
//! ```

use colocate::grouping::{fit_groups, profile_sample_run, ProfilingBench};
use colocate::sim::standard_catalog;
use colocate::workload::JobId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let catalog = standard_catalog();
    let history: Vec<_> = catalog
        .profiles()
        .into_iter()
        .filter(|(kind, _)| kind != "I")
        .collect();
    let mut model = fit_groups(&history, 6, 7)?;
    for (kind, group) in &model.labels {
        println!("{kind} -> group {group}");
    }

    let unseen = catalog.instantiate(JobId(0), "I")?;
    let profile = profile_sample_run(&unseen, &ProfilingBench::default(), 0.1)?;
    let group = model.assign_group(&unseen, &profile);
    println!("I (profiled) -> group {group}");
    Ok(())
}
