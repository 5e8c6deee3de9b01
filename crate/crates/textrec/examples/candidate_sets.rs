//! Candidate-set construction for one user of a planted corpus.
//!
//! Shows the role mix: positives capped at an alpha share, negatives topped
//! up from the farthest cluster's positives ("supplemented"), and ordinary
//! catalog items filling the rest. The set is resampled fresh every step.
//!
//! ```text
//! cargo run --release --example candidate_sets
//! ```

use rand::rngs::StdRng;
use rand::SeedableRng;

use textrec::candidate::{CandidateContext, ItemRole};
use textrec::synthetic::{PlantedData, PlantedSpec};

fn main() {
    let spec = PlantedSpec {
        users_per_cluster: 20,
        items_per_block: 60,
        dim: 8,
        own_ratings: 12,
        cross_ratings: 3,
        seed: 11,
    };
    let data = PlantedData::generate(&spec).expect("planted corpus generates");

    let profile = data
        .profiles
        .iter()
        .find(|p| p.trainable())
        .expect("planted users have positives");
    println!(
        "user {}: {} train positives, {} negatives",
        profile.user_id,
        profile.positives.len(),
        profile.negatives.len()
    );

    let mut context = CandidateContext::new(profile, &data.model, &data.catalog);
    println!(
        "supplement pool (farthest cluster's positives minus own/negative): {} items",
        context.supplement_items().len()
    );

    let n_c = 20;
    let alpha = 0.5;
    let mut rng = StdRng::seed_from_u64(1);
    for step in 1..=3 {
        let set = context.build(n_c, alpha, &mut rng);
        let count = |role: ItemRole| set.items.iter().filter(|(_, r)| *r == role).count();
        println!(
            "\nstep {step}: |c| = {} (n_c = {n_c}, positives capped at {})",
            set.len(),
            (n_c as f64 * alpha) as usize
        );
        println!(
            "  roles: {} positive, {} negative, {} supplemented, {} ordinary",
            count(ItemRole::Positive),
            count(ItemRole::Negative),
            count(ItemRole::Supplemented),
            count(ItemRole::Ordinary)
        );
        let preview: Vec<String> = set
            .items
            .iter()
            .take(8)
            .map(|(id, role)| format!("{id}:{role:?}"))
            .collect();
        println!("  first items: {}", preview.join(" "));
    }
}
