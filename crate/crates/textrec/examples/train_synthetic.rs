//! Train one cluster's actor-critic on a planted corpus and compare the
//! learned policy against the brute-force oracle that ranks each step's
//! candidates by their true adjusted rating.
//!
//! ```text
//! cargo run --release --example train_synthetic
//! ```

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use textrec::agent::{
    act, select_action, train_cluster, AgentConfig, ClusterArtifacts,
};
use textrec::candidate::CandidateContext;
use textrec::env::{initial_state, ranking_weight, Action, Simulator};
use textrec::synthetic::{PlantedData, PlantedSpec};

fn main() {
    let spec = PlantedSpec {
        users_per_cluster: 40,
        items_per_block: 80,
        dim: 8,
        own_ratings: 20,
        cross_ratings: 6,
        seed: 5,
    };
    let data = PlantedData::generate(&spec).expect("planted corpus generates");
    let artifacts = ClusterArtifacts {
        profiles: &data.profiles,
        model: &data.model,
        items: &data.items,
        catalog: &data.catalog,
    };
    let config = AgentConfig {
        dim: spec.dim,
        state_size: 5,
        action_size: 3,
        candidate_size: 20,
        hidden: vec![32, 16],
        batch: 32,
        buffer: 4000,
        episode_len: 20,
        min_steps: Some(2000),
        max_steps: Some(4000),
        seed: 5,
        ..AgentConfig::default()
    };

    println!("training cluster 0 ({} steps max) ...", config.max_steps());
    let start = std::time::Instant::now();
    let outcome = train_cluster(0, &artifacts, &config).expect("training runs");
    println!(
        "done: {} steps in {:.1}s",
        outcome.log.len(),
        start.elapsed().as_secs_f64()
    );

    // mean reward over trailing slices of the log
    for (label, slice) in [
        ("first 500 steps", &outcome.log[..500.min(outcome.log.len())]),
        (
            "last 500 steps",
            &outcome.log[outcome.log.len().saturating_sub(500)..],
        ),
    ] {
        let mean = slice.iter().map(|r| r.reward).sum::<f64>() / slice.len() as f64;
        println!("  mean reward over {label}: {mean:+.4}");
    }

    // greedy evaluation episodes vs the oracle on identical candidate sets
    let mut rng = StdRng::seed_from_u64(99);
    let members: Vec<_> = data
        .profiles
        .iter()
        .filter(|p| p.trainable() && data.model.cluster_of(&p.user_id) == Some(0))
        .collect();
    let mut agent_total = 0.0;
    let mut oracle_total = 0.0;
    let mut steps = 0usize;
    for _ in 0..20 {
        let profile = members[rng.random_range(0..members.len())];
        let mut context = CandidateContext::new(profile, &data.model, &data.catalog);
        let simulator = Simulator::new(profile, &data.model, config.reward_config());
        let mut state = initial_state(profile, config.state_size);
        for _ in 0..config.episode_len {
            let candidates = context.build(config.candidate_size, config.alpha, &mut rng);
            let policy = act(&outcome.actor, &state, &data.items, 0.0, &mut rng);
            let action =
                select_action(&policy, &candidates, &data.items, config.action_size).unwrap();
            let (reward, next) = simulator.step(&state, &action);

            // oracle: rank the same candidates by true adjusted rating
            let mut truth: Vec<(&String, f64)> = candidates
                .ids()
                .map(|id| (id, simulator.adjusted_rating(id)))
                .collect();
            truth.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            let oracle_action = Action {
                items: truth
                    .iter()
                    .take(config.action_size)
                    .map(|(id, _)| (*id).clone())
                    .collect(),
            };
            let _ = ranking_weight(1); // weights are inside reward()
            oracle_total += simulator.reward(&oracle_action);
            agent_total += reward;
            steps += 1;
            state = next;
        }
    }
    let agent_mean = agent_total / steps as f64;
    let oracle_mean = oracle_total / steps as f64;
    println!("\ngreedy policy vs oracle over {steps} fresh steps:");
    println!("  agent  mean reward: {agent_mean:+.4}");
    println!("  oracle mean reward: {oracle_mean:+.4}");
    println!("  ratio: {:.3}", agent_mean / oracle_mean);
}
