//! Text-embedded interactive recommendation with a policy-vector actor-critic.
//!
//! The pipeline: items and users are embedded into a shared feature space by
//! averaging pre-trained word vectors over descriptions and reviews; users are
//! partitioned by k-means; per step, a small candidate set mixes the user's
//! positive and negative items with "supplemented" negatives drawn from the
//! farthest cluster's positives; a deterministic actor emits a policy vector
//! that scores candidates by dot product; an offline simulator pays
//! rank-discounted rewards from logged ratings and slides the state window.
//! One actor-critic pair is trained per cluster and evaluated with HR/F1/nDCG
//! over sampled Top-k pools.
//!
//! Start with the runnable examples:
//!
//! ```text
//! cargo run --release --example simulator_walkthrough
//! cargo run --release --example train_synthetic
//! ```
//!
//! or drive the whole pipeline through the `textrec` binary
//! (`prepare` / `train` / `evaluate` / `bench`).

pub mod agent;
pub mod candidate;
pub mod cluster;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod env;
pub mod error;
pub mod eval;
pub mod net;
pub mod pipeline;
pub mod synthetic;

mod seeding;

pub use error::{Error, Result};

pub(crate) mod linalg {
    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }
}
