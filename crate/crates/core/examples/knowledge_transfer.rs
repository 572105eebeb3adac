//! Learns on two job kinds, then schedules two kinds it has never seen. The
//! unseen kinds are profiled into the existing groups, so a run seeded with
//! the learned matrix can be compared against one that starts from zero.
//!
//! ```text
//! cargo run --release --example knowledge_transfer
//! ```

use std::path::Path;

use colocate::experiment::{execute, write_outputs, ExperimentConfig};

const CATALOG: &str = r#"
[cluster]
nodes = 4
slots_per_node = 4

[catalog]
cpu_a = { demand = { cpu = 0.45, mem = 0.05, disk = 0.02, net = 0.02, iowait = 0.01 }, duration = 100.0, containers = 1 }
disk_a = { demand = { cpu = 0.05, mem = 0.05, disk = 0.45, net = 0.02, iowait = 0.02 }, duration = 100.0, containers = 1 }
cpu_b = { demand = { cpu = 0.42, mem = 0.08, disk = 0.03, net = 0.02, iowait = 0.01 }, duration = 100.0, containers = 1 }
disk_b = { demand = { cpu = 0.06, mem = 0.04, disk = 0.43, net = 0.04, iowait = 0.02 }, duration = 100.0, containers = 1 }
"#;

fn config(name: &str, dir: &Path, kinds: [&str; 2], extra: &str) -> Result<ExperimentConfig, Box<dyn std::error::Error>> {
    let sequence = format!("{}{}", format!("{} ", kinds[0]).repeat(15), format!("{} ", kinds[1]).repeat(15));
    let text = format!(
        r#"
name = "{name}"
schedulers = ["hugo"]
seeds = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
k = 2
history_kinds = ["cpu_a", "disk_a"]
output_dir = "{name}"
{extra}
{CATALOG}
[workload]
mode = "sequence"
sequence = "{}"
"#,
        sequence.trim()
    );
    let mut c = ExperimentConfig::from_toml(&text)?;
    c.resolve_paths(dir);
    Ok(c)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("colocate-transfer");
    let seen = config(
        "seen",
        &dir,
        ["cpu_a", "disk_a"],
        "matrix_out = \"state/matrix.json\"\ngrouping_out = \"state/grouping.json\"",
    )?;
    let run = execute(&seen)?;
    write_outputs(&seen, &run)?;

    let warm = config(
        "warm",
        &dir,
        ["cpu_b", "disk_b"],
        "matrix_in = \"state/matrix.json\"\ngrouping_in = \"state/grouping.json\"",
    )?;
    let cold = config("cold", &dir, ["cpu_b", "disk_b"], "grouping_in = \"state/grouping.json\"")?;
    for c in [&warm, &cold] {
        let run = execute(c)?;
        let labels = &run.grouping.labels;
        println!(
            "{}: median makespan {:.1}s (cpu_b -> {}, disk_b -> {})",
            c.name, run.report.schedulers[0].makespan_median_s, labels["cpu_b"], labels["disk_b"]
        );
    }
    Ok(())
}
