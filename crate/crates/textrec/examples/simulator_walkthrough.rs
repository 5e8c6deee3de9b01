//! One tour through the offline simulator: rank-discounted rewards from
//! logged ratings and the sliding-window state transition.
//!
//! ```text
//! cargo run --release --example simulator_walkthrough
//! ```

use std::collections::BTreeMap;

use textrec::embedding::UserProfile;
use textrec::env::{initial_state, ranking_weight, Action, RewardConfig, Simulator};

fn main() {
    println!("ranking weights 1/log2(k+1):");
    for k in 1..=5 {
        println!("  rank {k}: {:.5}", ranking_weight(k));
    }

    // a user who loved two albums, disliked one, with one supplemented
    // negative presumed disliked (drawn from the farthest cluster)
    let ratings: BTreeMap<String, f64> = [
        ("albumA".to_string(), 5.0),
        ("albumB".to_string(), 4.0),
        ("albumC".to_string(), 2.0),
    ]
    .into();
    let profile = UserProfile {
        user_id: "u".into(),
        vec: vec![0.0],
        positives: ["albumA".to_string(), "albumB".to_string()].into(),
        negatives: ["albumC".to_string()].into(),
        positive_history: vec![
            ("albumA".into(), 5.0, 100),
            ("albumB".into(), 4.0, 200),
        ],
        ratings,
    };
    let simulator = Simulator::with_supplement(
        &profile,
        ["albumX".to_string()].into(),
        RewardConfig::default(),
    );

    println!("\nadjusted ratings (rating bound 2, supplemented penalty -0.5):");
    for item in ["albumA", "albumC", "albumX", "albumZ"] {
        println!("  {item}: {:+.2}", simulator.adjusted_rating(item));
    }

    let good = Action {
        items: vec!["albumA".into(), "albumC".into()],
    };
    let flipped = Action {
        items: vec!["albumC".into(), "albumA".into()],
    };
    println!("\nreward is rank-weighted, so ordering matters:");
    println!("  (albumA, albumC) -> {:+.5}", simulator.reward(&good));
    println!("  (albumC, albumA) -> {:+.5}", simulator.reward(&flipped));

    let mut state = initial_state(&profile, 3);
    println!("\ninitial state (newest positives first, padded): {:?}", state.items);
    for action_items in [vec!["albumZ", "albumB"], vec!["albumX", "albumY"]] {
        let action = Action {
            items: action_items.iter().map(|s| (*s).to_string()).collect(),
        };
        let (reward, next) = simulator.step(&state, &action);
        println!(
            "  action {:?} -> reward {reward:+.4}, next state {:?}",
            action.items, next.items
        );
        state = next;
    }
}
