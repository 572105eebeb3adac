//! Draws the next job from a queue using a learned matrix, and shows how the
//! waiting limit takes over once a job has waited too long.
//!
//! ```text
//! cargo run --example selection_sampling
//! ```

use colocate::preference::{LearningConfig, PreferenceMatrix};
use colocate::scheduler::{SchedulerPolicy, Variant};
use colocate::workload::{Job, JobId, JobQueue, ResourceProfile};

fn job(id: u64, group: usize, waiting: u32) -> Result<Job, Box<dyn std::error::Error>> {
    let demand = ResourceProfile::new(0.3, 0.1, 0.1, 0.1, 0.0)?;
    let mut j = Job::new(JobId(id), format!("g{group}"), demand, 60.0, 1)?.with_group(group);
    j.waiting_rounds = waiting;
    Ok(j)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Group 0 likes running next to group 1 and dislikes itself.
    let h = PreferenceMatrix::from_rows(&[vec![-1.0, 1.0, 0.0], vec![1.0, -1.0, 0.0], vec![0.0, 0.0, 0.0]], 0.1)?;
    let learning = LearningConfig::default();
    let running = [0, 0, 2];

    let queue = JobQueue::from_jobs([job(1, 0, 0)?, job(2, 1, 3)?, job(3, 2, 1)?])?;
    let mut hugo = SchedulerPolicy::new(Variant::Preference, None, 1)?;
    let d = hugo.select_next(&h, &queue, &running, 4, &learning)?.expect("a job fits");
    println!("distribution {:?}", d.distribution_snapshot);
    println!("picked {} ({:?})", d.chosen_job, d.reason);

    let queue = JobQueue::from_jobs([job(1, 0, 25)?, job(2, 1, 3)?, job(3, 2, 1)?])?;
    let mut star = SchedulerPolicy::new(Variant::PreferenceWaitLimit, Some(20), 1)?;
    let d = star.select_next(&h, &queue, &running, 4, &learning)?.expect("a job fits");
    println!("with limit 20: picked {} ({:?})", d.chosen_job, d.reason);
    Ok(())
}
