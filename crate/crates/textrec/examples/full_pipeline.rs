//! The whole pipeline through the same entry points the CLI uses:
//! write a small text corpus to disk, then prepare -> train -> evaluate,
//! leaving every artifact inspectable in a work directory.
//!
//! ```text
//! cargo run --release --example full_pipeline
//! ```

use textrec::config::RunConfig;
use textrec::pipeline::{cmd_evaluate, cmd_prepare, cmd_train, Workdir};
use textrec::synthetic::{write_planted_corpus, PlantedSpec};

fn main() {
    let root = std::env::temp_dir().join("textrec-full-pipeline");
    if root.exists() {
        std::fs::remove_dir_all(&root).expect("stale demo dir removable");
    }

    let spec = PlantedSpec {
        users_per_cluster: 15,
        items_per_block: 40,
        dim: 8,
        own_ratings: 12,
        cross_ratings: 4,
        seed: 31,
    };
    let files = write_planted_corpus(&root.join("input"), &spec).expect("corpus writes");
    println!("wrote input corpus under {}", root.join("input").display());

    let config = RunConfig {
        interactions: files.interactions,
        meta: files.meta,
        vectors: files.vectors,
        stopwords: Some(files.stopwords),
        workdir: root.join("work"),
        dim: spec.dim,
        clusters: 2,
        candidate_size: 20,
        state_size: 4,
        action_size: 2,
        batch: 16,
        buffer: 1000,
        episode_len: 10,
        hidden: vec![16, 8],
        min_steps: Some(500),
        max_steps: Some(1200),
        eval_ks: vec![5, 10],
        eval_pool: 40,
        seed: 31,
        ..RunConfig::default()
    };

    let summary = cmd_prepare(&config).expect("prepare succeeds");
    println!(
        "prepare: {} users, {} items, {} train records, {} test users",
        summary.users, summary.items, summary.train_records, summary.test_users
    );

    let summary = cmd_train(&config).expect("train succeeds");
    for (cluster, steps) in summary.trained.iter().zip(&summary.steps) {
        println!("train: cluster {cluster} ran {steps} steps");
    }

    let report = cmd_evaluate(&config).expect("evaluate succeeds");
    print!("\n{}", report.to_text());

    let workdir = Workdir::new(&config.workdir);
    println!("artifacts:");
    for path in [
        workdir.item_vectors(),
        workdir.user_vectors(),
        workdir.cluster_model(),
        workdir.train_split(),
        workdir.test_positives(),
        workdir.checkpoint(0, "actor"),
        workdir.train_log(0),
        workdir.metrics_json(),
        workdir.per_user_csv(),
    ] {
        println!("  {}", path.display());
    }
}
