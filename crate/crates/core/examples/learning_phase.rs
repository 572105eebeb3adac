//! Learns a preference matrix on a repeated job pattern and compares the
//! learned scheduler against round-robin.
//!
//! ```text
//! cargo run --release --example learning_phase
//! ```

use colocate::experiment::{execute, ExperimentConfig};

const CONFIG: &str = r#"
name = "learning"
schedulers = ["hugo", "round_robin"]
seeds = [1, 2, 3, 4, 5]
history_kinds = ["A", "B", "C", "F", "G", "H"]
output_dir = "unused"

[workload]
mode = "repeat"
pattern = "C B G A F H"
times = 10
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig::from_toml(CONFIG)?;
    config.validate()?;
    let run = execute(&config)?;
    print!("{}", run.report.table());
    for (e, row) in run.matrix.rows().iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:+.3}")).collect();
        println!("H[{e}] {}", cells.join(" "));
    }
    Ok(())
}
