//! Jobs trickle in after every scheduling round. The waiting limit caps how
//! long any job sits in the queue; the histogram shows the cutoff.
//!
//! ```text
//! cargo run --release --example online_arrivals
//! ```

use colocate::experiment::{emit_waiting_histogram, execute, histogram_csv, ExperimentConfig};
use colocate::scheduler::{check_starvation_bound, max_over_limit, Variant};

const CONFIG: &str = r#"
name = "online"
schedulers = ["hugo_star", "hugo"]
seeds = [1]
waiting_limit = 20
output_dir = "unused"

[workload]
mode = "sequence"
sequence = "C B B E A E E B I H H C B I H C E G F F A F C I G D A G I C G A F F D E G D A I D B H D H"
arrival = "aar"
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig::from_toml(CONFIG)?;
    config.validate()?;
    let run = execute(&config)?;
    for out in &run.runs {
        let worst = out.decisions.iter().map(|d| d.waiting_rounds).max().unwrap_or(0);
        println!("{}: makespan {:.1}s, longest wait {worst} rounds", out.variant, out.makespan);
        if out.variant == Variant::PreferenceWaitLimit {
            let q = max_over_limit(&out.decisions);
            match check_starvation_bound(&out.decisions, config.waiting_limit) {
                Ok(()) => println!("bound holds with at most {q} jobs over the limit"),
                Err(e) => println!("bound exceeded with at most {q} jobs over the limit: {e}"),
            }
            print!("{}", histogram_csv(&emit_waiting_histogram(&out.decisions)?));
        }
    }
    Ok(())
}
