//! Time one recommendation decision (candidate construction, actor forward
//! pass, dot-product scoring) and one training step at the usual timing
//! protocol: state and action of size 1, feature dimension 100, candidate
//! set of 100.
//!
//! ```text
//! cargo run --release --example bench_decision
//! ```

use textrec::config::RunConfig;
use textrec::pipeline::{bench_decision, bench_training_step};

fn main() {
    let config = RunConfig {
        dim: 100,
        candidate_size: 100,
        hidden: vec![256, 128],
        seed: 1,
        ..RunConfig::default()
    };

    println!("timing decisions (2000 reps) ...");
    let decision = bench_decision(&config, 2000).expect("bench runs");
    println!(
        "  per decision: {:.4} ms mean, {:.4} ms std, {:.4} ms median",
        decision.mean_ms, decision.std_ms, decision.median_ms
    );

    println!("timing training steps (200 reps) ...");
    let step = bench_training_step(&config, 200).expect("bench runs");
    println!(
        "  per training step: {:.3} ms mean, {:.3} ms std, {:.3} ms median",
        step.mean_ms, step.std_ms, step.median_ms
    );
    println!("(the `textrec bench` subcommand runs the same measurement at 10000 reps)");
}
