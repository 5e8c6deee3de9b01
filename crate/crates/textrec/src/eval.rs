//! The Top-k test protocol: per-user pools of held-out positives plus
//! farthest-cluster negatives, ranked by the trained actor and by the
//! ItemPop / random baselines, scored with HR@k, F1@k and nDCG@k.
//!
//! Metric definitions (binary relevance):
//! - HR@k: 1 if any held-out positive appears in the top k, else 0.
//! - F1@k: harmonic mean of precision hits/k and recall hits/|positives|.
//! - nDCG@k: sum of 1/log2(rank+1) over positives in the top k, normalized
//!   by the ideal prefix sum.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::agent::{flatten_state, PolicyVector};
use crate::cluster::ClusterModel;
use crate::corpus::Dataset;
use crate::embedding::{ItemVectorTable, UserProfile};
use crate::env::initial_state;
use crate::linalg::dot;
use crate::net::Network;
use crate::seeding::derive_seed;

/// One user's ranking pool: held-out positives plus sampled negatives.
#[derive(Debug, Clone)]
pub struct EvalPool {
    pub user_id: String,
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
}

impl EvalPool {
    pub fn items(&self) -> impl Iterator<Item = &String> {
        self.positives.iter().chain(self.negatives.iter())
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Negatives come from the farthest cluster's positive pool, never from items
/// the user rated or from the held-out positives; any shortfall is filled
/// with unrated catalog items.
pub fn build_eval_pool(
    profile: &UserProfile,
    test_positives: &[String],
    model: &ClusterModel,
    catalog: &[String],
    pool_size: usize,
    rng: &mut impl Rng,
) -> EvalPool {
    assert!(!test_positives.is_empty(), "eval needs at least one positive");
    let mut excluded: BTreeSet<&str> = profile.ratings.keys().map(String::as_str).collect();
    excluded.extend(test_positives.iter().map(String::as_str));

    let needed = pool_size.saturating_sub(test_positives.len());
    let mut negatives: Vec<String> = Vec::with_capacity(needed);

    if let Some(far) = model
        .cluster_of(&profile.user_id)
        .and_then(|own| model.farthest.get(&own))
    {
        let mut far_pool: Vec<&String> = model.cluster_positive_items[*far]
            .iter()
            .filter(|item| !excluded.contains(item.as_str()))
            .collect();
        let take = needed.min(far_pool.len());
        let (prefix, _) = far_pool.partial_shuffle(rng, take);
        negatives.extend(prefix.iter().map(|s| (*s).to_owned()));
    }

    if negatives.len() < needed {
        let already: BTreeSet<&str> = negatives.iter().map(String::as_str).collect();
        let mut rest: Vec<&String> = catalog
            .iter()
            .filter(|item| !excluded.contains(item.as_str()) && !already.contains(item.as_str()))
            .collect();
        let take = (needed - negatives.len()).min(rest.len());
        let (prefix, _) = rest.partial_shuffle(rng, take);
        negatives.extend(prefix.iter().map(|s| (*s).to_owned()));
    }

    EvalPool {
        user_id: profile.user_id.clone(),
        positives: test_positives.to_vec(),
        negatives,
    }
}

/// Score every pool item against the deterministic actor's policy vector and
/// sort descending; ties break toward the smaller item id.
pub fn rank_pool(
    actor: &Network,
    profile: &UserProfile,
    pool: &EvalPool,
    items: &ItemVectorTable,
    state_size: usize,
) -> Vec<String> {
    let state = initial_state(profile, state_size);
    let policy = PolicyVector(actor.forward(&flatten_state(&state, items)));
    rank_by_policy(&policy, pool, items)
}

/// Dot-product scoring shared by evaluation and by callers that already hold
/// a policy vector.
pub fn rank_by_policy(policy: &PolicyVector, pool: &EvalPool, items: &ItemVectorTable) -> Vec<String> {
    let mut scored: Vec<(&String, f64)> = pool
        .items()
        .map(|id| {
            let score = items.get(id).map(|v| dot(policy.as_slice(), v)).unwrap_or(0.0);
            (id, score)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    scored.into_iter().map(|(id, _)| id.clone()).collect()
}

fn hits_in_top_k(ranked: &[String], positives: &BTreeSet<&str>, k: usize) -> usize {
    ranked
        .iter()
        .take(k)
        .filter(|id| positives.contains(id.as_str()))
        .count()
}

/// 1 when any positive lands in the top k.
pub fn hr_at_k(ranked: &[String], positives: &BTreeSet<&str>, k: usize) -> f64 {
    if hits_in_top_k(ranked, positives, k) > 0 {
        1.0
    } else {
        0.0
    }
}

/// Harmonic mean of precision (hits/k) and recall (hits/|positives|).
pub fn f1_at_k(ranked: &[String], positives: &BTreeSet<&str>, k: usize) -> f64 {
    if positives.is_empty() || k == 0 {
        return 0.0;
    }
    let hits = hits_in_top_k(ranked, positives, k) as f64;
    let precision = hits / k as f64;
    let recall = hits / positives.len() as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Binary-gain nDCG with the 1/log2(rank+1) discount.
pub fn ndcg_at_k(ranked: &[String], positives: &BTreeSet<&str>, k: usize) -> f64 {
    if positives.is_empty() || k == 0 {
        return 0.0;
    }
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, id)| positives.contains(id.as_str()))
        .map(|(idx, _)| 1.0 / ((idx + 2) as f64).log2())
        .sum();
    let ideal: f64 = (0..k.min(positives.len()))
        .map(|idx| 1.0 / ((idx + 2) as f64).log2())
        .sum();
    dcg / ideal
}

/// Training-set average rating per item, the ItemPop baseline's score.
#[derive(Debug, Clone, Default)]
pub struct ItemPopularity {
    averages: BTreeMap<String, f64>,
}

impl ItemPopularity {
    pub fn from_train(train: &Dataset) -> Self {
        let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for r in &train.records {
            let e = sums.entry(r.item_id.as_str()).or_default();
            e.0 += r.rating;
            e.1 += 1;
        }
        ItemPopularity {
            averages: sums
                .into_iter()
                .map(|(id, (sum, n))| (id.to_owned(), sum / n as f64))
                .collect(),
        }
    }

    pub fn average(&self, item: &str) -> Option<f64> {
        self.averages.get(item).copied()
    }
}

/// Non-personalized baseline: descending train-average rating, unrated items
/// last, ties by item id.
pub fn itempop_rank(pool: &EvalPool, popularity: &ItemPopularity) -> Vec<String> {
    let mut scored: Vec<(&String, Option<f64>)> = pool
        .items()
        .map(|id| (id, popularity.average(id)))
        .collect();
    scored.sort_by(|a, b| match (a.1, b.1) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.0.cmp(b.0)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.0.cmp(b.0),
    });
    scored.into_iter().map(|(id, _)| id.clone()).collect()
}

/// Uniformly shuffled pool.
pub fn random_rank(pool: &EvalPool, rng: &mut impl Rng) -> Vec<String> {
    let mut ids: Vec<String> = pool.items().cloned().collect();
    ids.shuffle(rng);
    ids
}

/// Mean metric values for one method at one cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsAtK {
    pub k: usize,
    pub hr: f64,
    pub f1: f64,
    pub ndcg: f64,
}

/// One user's metrics under one method at one cutoff.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerUserRow {
    pub user: String,
    pub method: String,
    pub k: usize,
    pub hr: f64,
    pub f1: f64,
    pub ndcg: f64,
}

/// Echo of the evaluation setup plus how many users actually scored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSetup {
    pub ks: Vec<usize>,
    pub pool_size: usize,
    pub seed: u64,
    pub users_evaluated: usize,
    pub users_skipped: usize,
}

/// Per-method per-k averages plus the raw per-user rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub setup: EvalSetup,
    pub methods: BTreeMap<String, Vec<MetricsAtK>>,
    pub per_user: Vec<PerUserRow>,
}

impl MetricsReport {
    pub fn method(&self, name: &str, k: usize) -> Option<&MetricsAtK> {
        self.methods.get(name)?.iter().find(|m| m.k == k)
    }

    /// Aligned-column rendering for terminals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "top-k evaluation: {} user(s), pool size {}, seed {}",
            self.setup.users_evaluated, self.setup.pool_size, self.setup.seed
        )
        .expect("write to string");
        writeln!(
            out,
            "metrics: HR@k (any hit), F1@k (precision/recall harmonic mean), nDCG@k (log2 discount)"
        )
        .expect("write to string");
        writeln!(out, "{:<10} {:>4} {:>10} {:>10} {:>10}", "method", "k", "HR", "F1", "nDCG")
            .expect("write to string");
        for (method, rows) in &self.methods {
            for m in rows {
                writeln!(
                    out,
                    "{:<10} {:>4} {:>10.4} {:>10.4} {:>10.4}",
                    method, m.k, m.hr, m.f1, m.ndcg
                )
                .expect("write to string");
            }
        }
        out
    }

    /// Plot-ready per-user rows.
    pub fn per_user_csv(&self) -> String {
        let mut out = String::from("user,method,k,hr,f1,ndcg\n");
        for row in &self.per_user {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                row.user, row.method, row.k, row.hr, row.f1, row.ndcg
            )
            .expect("write to string");
        }
        out
    }
}

/// Everything the evaluator reads.
pub struct EvalInputs<'a> {
    /// Trained deterministic actor per cluster.
    pub actors: &'a BTreeMap<usize, Network>,
    pub profiles: &'a [UserProfile],
    pub test_positives: &'a BTreeMap<String, Vec<String>>,
    pub model: &'a ClusterModel,
    pub items: &'a ItemVectorTable,
    pub catalog: &'a [String],
    pub popularity: &'a ItemPopularity,
}

/// Evaluate every eligible test user under the trained model and both
/// baselines. Per-user randomness is seeded from the user id, so results do
/// not depend on iteration order.
pub fn evaluate_all(
    inputs: &EvalInputs,
    ks: &[usize],
    pool_size: usize,
    state_size: usize,
    seed: u64,
) -> MetricsReport {
    let profiles: BTreeMap<&str, &UserProfile> = inputs
        .profiles
        .iter()
        .map(|p| (p.user_id.as_str(), p))
        .collect();

    let methods = ["model", "itempop", "random"];
    let mut sums: BTreeMap<(&str, usize), (f64, f64, f64)> = BTreeMap::new();
    let mut per_user = Vec::new();
    let mut evaluated = 0usize;
    let mut skipped = 0usize;

    for (user, test_items) in inputs.test_positives {
        let Some(profile) = profiles.get(user.as_str()) else {
            skipped += 1;
            continue;
        };
        // users without train positives carry no signal; skip them
        if !profile.trainable() {
            skipped += 1;
            continue;
        }
        let Some(cluster) = inputs.model.cluster_of(user) else {
            skipped += 1;
            continue;
        };
        let Some(actor) = inputs.actors.get(&cluster) else {
            skipped += 1;
            continue;
        };

        let mut rng = StdRng::seed_from_u64(derive_seed(seed, &format!("eval-{user}")));
        let pool = build_eval_pool(
            profile,
            test_items,
            inputs.model,
            inputs.catalog,
            pool_size,
            &mut rng,
        );
        let positive_set: BTreeSet<&str> = pool.positives.iter().map(String::as_str).collect();

        let rankings = [
            rank_pool(actor, profile, &pool, inputs.items, state_size),
            itempop_rank(&pool, inputs.popularity),
            random_rank(&pool, &mut rng),
        ];
        evaluated += 1;
        for (method, ranked) in methods.iter().zip(&rankings) {
            for &k in ks {
                let hr = hr_at_k(ranked, &positive_set, k);
                let f1 = f1_at_k(ranked, &positive_set, k);
                let ndcg = ndcg_at_k(ranked, &positive_set, k);
                let entry = sums.entry((method, k)).or_default();
                entry.0 += hr;
                entry.1 += f1;
                entry.2 += ndcg;
                per_user.push(PerUserRow {
                    user: user.clone(),
                    method: (*method).to_owned(),
                    k,
                    hr,
                    f1,
                    ndcg,
                });
            }
        }
    }

    let mut report_methods: BTreeMap<String, Vec<MetricsAtK>> = BTreeMap::new();
    for method in methods {
        let rows = ks
            .iter()
            .map(|&k| {
                let (hr, f1, ndcg) = sums.get(&(method, k)).copied().unwrap_or_default();
                let n = evaluated.max(1) as f64;
                MetricsAtK {
                    k,
                    hr: hr / n,
                    f1: f1 / n,
                    ndcg: ndcg / n,
                }
            })
            .collect();
        report_methods.insert(method.to_owned(), rows);
    }

    MetricsReport {
        setup: EvalSetup {
            ks: ks.to_vec(),
            pool_size,
            seed,
            users_evaluated: evaluated,
            users_skipped: skipped,
        },
        methods: report_methods,
        per_user,
    }
}
