//! Stops a configured run halfway, resumes it from the checkpoint and checks
//! the history matches an uninterrupted run.
//!
//!     cargo run --release --example checkpoint_resume

use std::fs;

use apiary::app::{parse_config, resume, run, RunControl, HISTORY_FILE};

const CONFIG: &str = r#"
mode = "benchmark"

[colony]
num_food_sources = 10
abandonment_limit = 20
iterations = 60
seed = 4

[benchmark]
function = "rosenbrock"
dimension = 3
"#;

fn main() -> apiary::Result<()> {
    let root = std::env::temp_dir().join("apiary-checkpoint-example");
    let _ = fs::remove_dir_all(&root);
    let config = parse_config(CONFIG)?;

    let whole = config.clone().with_output_dir(root.join("whole"));
    run(&whole, &RunControl::default())?;

    let split = config.with_output_dir(root.join("split"));
    let first = run(
        &split,
        &RunControl {
            stop_after_iteration: Some(30),
            ..RunControl::default()
        },
    )?;
    println!(
        "stopped after {} iterations, best so far {:.4e}",
        first.summary.iterations_completed, first.summary.best_objective
    );
    let second = resume(&split, &RunControl::default())?;
    println!(
        "resumed to {} iterations, best {:.4e}",
        second.summary.iterations_completed, second.summary.best_objective
    );

    let read = |dir: &str| fs::read(root.join(dir).join(HISTORY_FILE)).expect("history exists");
    println!("histories identical: {}", read("whole") == read("split"));
    Ok(())
}
