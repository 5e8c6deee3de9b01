//! Per-step candidate-set construction: a bounded mix of the user's positive
//! and negative items, supplemented negatives from the farthest cluster, and
//! uniformly drawn ordinary items.

use std::collections::HashSet;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::cluster::{supplement_pool, ClusterModel};
use crate::embedding::UserProfile;

/// Why an item entered the candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItemRole {
    Positive,
    Negative,
    Supplemented,
    Ordinary,
}

/// The per-step action pool: distinct items with their sampling role.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub items: Vec<(String, ItemRole)>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.items.iter().map(|(id, _)| id)
    }
}

/// Per-user sampling pools, precomputed once per episode so that building a
/// candidate set costs O(n_c) regardless of catalog size. Pool draws are
/// seeded shuffle-prefixes done in place: `partial_shuffle` performs k swaps,
/// so repeated builds never rescan a whole pool.
pub struct CandidateContext<'a> {
    positives: Vec<String>,
    negatives: Vec<String>,
    supplement: Vec<String>,
    catalog: &'a [String],
}

impl<'a> CandidateContext<'a> {
    pub fn new(profile: &UserProfile, model: &ClusterModel, catalog: &'a [String]) -> Self {
        let supplement = supplement_pool(model, profile);
        CandidateContext {
            positives: profile.positives.iter().cloned().collect(),
            negatives: profile.negatives.iter().cloned().collect(),
            supplement: supplement.into_iter().collect(),
            catalog,
        }
    }

    pub fn supplement_items(&self) -> &[String] {
        &self.supplement
    }

    /// Sample one candidate set of up to `n_c` items. At most
    /// `floor(n_c * alpha)` positives; negatives fill half of the remainder,
    /// topping up from the supplement pool; ordinary items fill whatever is
    /// left from the catalog. Returns fewer than `n_c` items only when the
    /// whole catalog is smaller than `n_c`.
    pub fn build(&mut self, n_c: usize, alpha: f64, rng: &mut impl Rng) -> CandidateSet {
        assert!(n_c >= 1, "candidate size must be positive");
        assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");

        let mut items: Vec<(String, ItemRole)> = Vec::with_capacity(n_c);

        let pos_cap = (n_c as f64 * alpha).floor() as usize;
        let n_pos = pos_cap.min(self.positives.len());
        for id in sample_prefix(&mut self.positives, n_pos, rng) {
            items.push((id.clone(), ItemRole::Positive));
        }

        let n_neg = (n_c - n_pos) / 2;
        let from_own = n_neg.min(self.negatives.len());
        for id in sample_prefix(&mut self.negatives, from_own, rng) {
            items.push((id.clone(), ItemRole::Negative));
        }
        let shortfall = n_neg - from_own;
        if shortfall > 0 {
            let from_supplement = shortfall.min(self.supplement.len());
            for id in sample_prefix(&mut self.supplement, from_supplement, rng) {
                items.push((id.clone(), ItemRole::Supplemented));
            }
        }

        let n_ord = n_c - items.len();
        let chosen: HashSet<&str> = items.iter().map(|(id, _)| id.as_str()).collect();
        let ordinary = sample_ordinary(self.catalog, &chosen, n_ord, rng);
        if items.len() + ordinary.len() < n_c {
            warn!(
                "catalog ({} items) smaller than candidate size {n_c}; emitting {}",
                self.catalog.len(),
                items.len() + ordinary.len()
            );
        }
        for id in ordinary {
            items.push((id, ItemRole::Ordinary));
        }
        CandidateSet { items }
    }
}

/// Seeded shuffle-prefix sampling without replacement, in place: k swaps.
fn sample_prefix<'p>(pool: &'p mut [String], k: usize, rng: &mut impl Rng) -> &'p [String] {
    let k = k.min(pool.len());
    let (prefix, _) = pool.partial_shuffle(rng, k);
    prefix
}

/// Uniform sampling from `catalog` minus `exclude`, without replacement.
/// Rejection sampling keeps the cost proportional to `k` while the catalog is
/// comfortably larger than the candidate set; dense cases fall back to a
/// shuffle of the remaining items.
fn sample_ordinary(
    catalog: &[String],
    exclude: &HashSet<&str>,
    k: usize,
    rng: &mut impl Rng,
) -> Vec<String> {
    if k == 0 || catalog.is_empty() {
        return Vec::new();
    }
    let mut picked: Vec<String> = Vec::with_capacity(k);
    if catalog.len() > 2 * (k + exclude.len()) {
        let mut taken: HashSet<usize> = HashSet::with_capacity(k);
        let mut attempts = 0usize;
        let budget = 20 * k + 100;
        while picked.len() < k && attempts < budget {
            attempts += 1;
            let idx = rng.random_range(0..catalog.len());
            if taken.contains(&idx) || exclude.contains(catalog[idx].as_str()) {
                continue;
            }
            taken.insert(idx);
            picked.push(catalog[idx].clone());
        }
        if picked.len() == k {
            return picked;
        }
    }
    // dense fallback: shuffle whatever remains
    let mut remaining: Vec<String> = catalog
        .iter()
        .filter(|id| !exclude.contains(id.as_str()) && !picked.contains(id))
        .cloned()
        .collect();
    let need = (k - picked.len()).min(remaining.len());
    let (prefix, _) = remaining.partial_shuffle(rng, need);
    picked.extend_from_slice(prefix);
    picked
}

/// One-shot convenience over [`CandidateContext`]; the training loop keeps a
/// context alive instead.
pub fn build_candidate_set(
    profile: &UserProfile,
    model: &ClusterModel,
    catalog: &[String],
    n_c: usize,
    alpha: f64,
    rng: &mut impl Rng,
) -> CandidateSet {
    let mut context = CandidateContext::new(profile, model, catalog);
    context.build(n_c, alpha, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use std::collections::BTreeSet;

    fn context<'a>(
        positives: &[&str],
        negatives: &[&str],
        supplement: &[&str],
        catalog: &'a [String],
    ) -> CandidateContext<'a> {
        CandidateContext {
            positives: positives.iter().map(|s| (*s).to_owned()).collect(),
            negatives: negatives.iter().map(|s| (*s).to_owned()).collect(),
            supplement: supplement.iter().map(|s| (*s).to_owned()).collect(),
            catalog,
        }
    }

    fn catalog(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("i{i:03}")).collect()
    }

    fn count_role(set: &CandidateSet, role: ItemRole) -> usize {
        set.items.iter().filter(|(_, r)| *r == role).count()
    }

    #[test]
    fn shortfall_flows_positive_to_supplement_to_ordinary() {
        // n_c=10, alpha=0.5, |Vp|=3, |Vn|=1, supplement >= 2
        // -> 3 positives, 1 negative + 2 supplemented, 4 ordinary
        let cat = catalog(50);
        let mut ctx = context(
            &["p0", "p1", "p2"],
            &["n0"],
            &["s0", "s1", "s2"],
            &cat,
        );
        let mut rng = StdRng::seed_from_u64(5);
        let set = ctx.build(10, 0.5, &mut rng);
        assert_eq!(set.len(), 10);
        assert_eq!(count_role(&set, ItemRole::Positive), 3);
        assert_eq!(count_role(&set, ItemRole::Negative), 1);
        assert_eq!(count_role(&set, ItemRole::Supplemented), 2);
        assert_eq!(count_role(&set, ItemRole::Ordinary), 4);
    }

    #[test]
    fn positives_cap_at_alpha_share() {
        let cat = catalog(60);
        let positives: Vec<String> = (0..8).map(|i| format!("p{i}")).collect();
        let pos_refs: Vec<&str> = positives.iter().map(String::as_str).collect();
        let mut ctx = context(&pos_refs, &[], &[], &cat);
        let mut rng = StdRng::seed_from_u64(5);
        let set = ctx.build(10, 0.5, &mut rng);
        assert_eq!(count_role(&set, ItemRole::Positive), 5);
        assert_eq!(set.len(), 10);
    }

    #[test]
    fn empty_negative_pools_fill_with_ordinary() {
        let cat = catalog(40);
        let mut ctx = context(&["p0"], &[], &[], &cat);
        let mut rng = StdRng::seed_from_u64(5);
        let set = ctx.build(10, 0.5, &mut rng);
        assert_eq!(count_role(&set, ItemRole::Negative), 0);
        assert_eq!(count_role(&set, ItemRole::Supplemented), 0);
        assert_eq!(set.len(), 10);
    }

    #[test]
    fn small_catalog_returns_everything() {
        let cat = catalog(6);
        let mut ctx = context(&["i000"], &["i001"], &[], &cat);
        let mut rng = StdRng::seed_from_u64(5);
        let set = ctx.build(10, 0.5, &mut rng);
        assert_eq!(set.len(), 6);
        let ids: BTreeSet<&String> = set.ids().collect();
        assert_eq!(ids.len(), 6);
    }

    #[test]
    fn sampling_is_deterministic_under_a_seed() {
        let cat = catalog(100);
        let run = || {
            let mut ctx = context(&["i000", "i001", "i002"], &["i003"], &["i004"], &cat);
            ctx.build(20, 0.4, &mut StdRng::seed_from_u64(42))
        };
        assert_eq!(run().items, run().items);
    }

    #[test]
    fn fuzzed_invariants_hold() {
        let cat = catalog(80);
        let mut rng = StdRng::seed_from_u64(9);
        for trial in 0..500 {
            let n_pos_pool = trial % 30;
            let positives: Vec<String> = (0..n_pos_pool).map(|i| format!("i{i:03}")).collect();
            let negatives: Vec<String> = (n_pos_pool..n_pos_pool + trial % 7)
                .map(|i| format!("i{i:03}"))
                .collect();
            let supplement: Vec<String> = (40..40 + trial % 11).map(|i| format!("i{i:03}")).collect();
            let mut ctx = CandidateContext {
                positives: positives.clone(),
                negatives: negatives.clone(),
                supplement: supplement.clone(),
                catalog: &cat,
            };
            let n_c = 1 + trial % 40;
            let alpha = 0.2 + (trial % 5) as f64 * 0.15;
            let set = ctx.build(n_c, alpha, &mut rng);

            assert_eq!(set.len(), n_c.min(cat.len()));
            let distinct: BTreeSet<&String> = set.ids().collect();
            assert_eq!(distinct.len(), set.len(), "duplicates in candidate set");
            assert!(count_role(&set, ItemRole::Positive) <= (n_c as f64 * alpha) as usize);
            for (id, role) in &set.items {
                match role {
                    ItemRole::Positive => assert!(positives.contains(id)),
                    ItemRole::Negative => assert!(negatives.contains(id)),
                    ItemRole::Supplemented => assert!(supplement.contains(id)),
                    ItemRole::Ordinary => {}
                }
            }
        }
    }
}
