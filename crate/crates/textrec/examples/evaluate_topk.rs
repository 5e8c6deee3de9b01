//! Train briefly on a planted corpus, then run the Top-k evaluation protocol:
//! per user, held-out positives plus farthest-cluster negatives form a pool
//! that the trained actor, the ItemPop baseline and a random baseline rank;
//! HR@k, F1@k and nDCG@k are averaged over users.
//!
//! ```text
//! cargo run --release --example evaluate_topk
//! ```

use std::collections::BTreeMap;

use textrec::agent::{train_cluster, AgentConfig, ClusterArtifacts};
use textrec::eval::{evaluate_all, EvalInputs, ItemPopularity};
use textrec::net::Network;
use textrec::synthetic::{PlantedData, PlantedSpec};

fn main() {
    let spec = PlantedSpec {
        users_per_cluster: 30,
        items_per_block: 60,
        dim: 8,
        own_ratings: 16,
        cross_ratings: 5,
        seed: 23,
    };
    let data = PlantedData::generate(&spec).expect("planted corpus generates");
    let config = AgentConfig {
        dim: spec.dim,
        state_size: 4,
        action_size: 3,
        candidate_size: 20,
        hidden: vec![32, 16],
        batch: 32,
        buffer: 2000,
        episode_len: 20,
        min_steps: Some(1500),
        max_steps: Some(2500),
        seed: 23,
        ..AgentConfig::default()
    };
    let artifacts = ClusterArtifacts {
        profiles: &data.profiles,
        model: &data.model,
        items: &data.items,
        catalog: &data.catalog,
    };

    let mut actors: BTreeMap<usize, Network> = BTreeMap::new();
    for cluster in 0..data.model.n_cl {
        println!("training cluster {cluster} ...");
        let outcome = train_cluster(cluster, &artifacts, &config).expect("training runs");
        actors.insert(cluster, outcome.actor);
    }

    let popularity = ItemPopularity::from_train(&data.train);
    let inputs = EvalInputs {
        actors: &actors,
        profiles: &data.profiles,
        test_positives: &data.test_positives,
        model: &data.model,
        items: &data.items,
        catalog: &data.catalog,
        popularity: &popularity,
    };
    let report = evaluate_all(&inputs, &[5, 10], 50, config.state_size, 23);
    print!("\n{}", report.to_text());
    println!(
        "({} users evaluated, {} skipped without train positives)",
        report.setup.users_evaluated, report.setup.users_skipped
    );
}
