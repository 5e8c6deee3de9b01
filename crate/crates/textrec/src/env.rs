//! Offline environment simulator: rank-discounted rewards computed from
//! logged ratings, and the sliding-window state transition.

use std::collections::BTreeSet;

use crate::cluster::{supplement_pool, ClusterModel};
use crate::embedding::UserProfile;

/// Sentinel id used to pad short states; it resolves to the zero vector.
pub const PAD_ITEM: &str = "<pad>";

/// The agent's observation: the `n_s` most recent distinct items, newest
/// first, padded with [`PAD_ITEM`] during warm start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvState {
    pub items: Vec<String>,
    pub owner: String,
}

impl EnvState {
    pub fn window(&self) -> usize {
        self.items.len()
    }
}

/// An ordered recommendation of `n_a` distinct items, best rank first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub items: Vec<String>,
}

/// Reward parameters: the positive/negative rating bound and the flat
/// penalty paid by supplemented negatives.
#[derive(Debug, Clone, Copy)]
pub struct RewardConfig {
    pub rating_bound: f64,
    pub supplemented_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            rating_bound: 2.0,
            supplemented_penalty: -0.5,
        }
    }
}

/// Positional discount for rank `k` (1-based): `1 / log2(k + 1)`.
pub fn ranking_weight(rank: usize) -> f64 {
    assert!(rank >= 1, "ranks are 1-based");
    1.0 / ((rank + 1) as f64).log2()
}

fn adjusted_rating_with(
    profile: &UserProfile,
    supplement: &BTreeSet<String>,
    item: &str,
    cfg: &RewardConfig,
) -> f64 {
    if profile.positives.contains(item) {
        profile.ratings[item] - cfg.rating_bound
    } else if profile.negatives.contains(item) {
        profile.ratings[item] - cfg.rating_bound - 1.0
    } else if supplement.contains(item) {
        cfg.supplemented_penalty
    } else {
        0.0
    }
}

/// Per-item feedback: `y - y_b` for the user's positives, `y - y_b - 1` for
/// their negatives, the flat penalty for supplemented negatives, 0 otherwise.
pub fn adjusted_rating(
    profile: &UserProfile,
    model: &ClusterModel,
    item: &str,
    cfg: &RewardConfig,
) -> f64 {
    let supplement = supplement_pool(model, profile);
    adjusted_rating_with(profile, &supplement, item, cfg)
}

fn reward_with(
    profile: &UserProfile,
    supplement: &BTreeSet<String>,
    action: &Action,
    cfg: &RewardConfig,
) -> f64 {
    let mut total = 0.0;
    let mut weight_sum = 0.0;
    let mut min_adj = f64::INFINITY;
    let mut max_adj = f64::NEG_INFINITY;
    for (idx, item) in action.items.iter().enumerate() {
        let w = ranking_weight(idx + 1);
        let adj = adjusted_rating_with(profile, supplement, item, cfg);
        total += w * adj;
        weight_sum += w;
        min_adj = min_adj.min(adj);
        max_adj = max_adj.max(adj);
    }
    debug_assert!(
        action.items.is_empty()
            || (total >= weight_sum * min_adj - 1e-9 && total <= weight_sum * max_adj + 1e-9),
        "reward {total} escapes its bounds"
    );
    total
}

/// Rank-weighted sum of adjusted ratings over the action, best rank first.
pub fn reward(
    profile: &UserProfile,
    model: &ClusterModel,
    action: &Action,
    cfg: &RewardConfig,
) -> f64 {
    let supplement = supplement_pool(model, profile);
    reward_with(profile, &supplement, action, cfg)
}

/// Sliding window: action items not already present are prepended (order
/// kept) and the window is re-truncated to its original length.
pub fn transition(state: &EnvState, action: &Action) -> EnvState {
    let novel: Vec<&String> = action
        .items
        .iter()
        .filter(|item| !state.items.contains(item))
        .collect();
    let window = state.items.len();
    let items: Vec<String> = novel
        .into_iter()
        .cloned()
        .chain(state.items.iter().cloned())
        .take(window)
        .collect();
    debug_assert_eq!(items.len(), window);
    EnvState {
        items,
        owner: state.owner.clone(),
    }
}

/// The user's `n_s` most recent train positives, newest first, padded with
/// [`PAD_ITEM`] when the history is shorter.
pub fn initial_state(profile: &UserProfile, window: usize) -> EnvState {
    let mut items: Vec<String> = profile
        .positive_history
        .iter()
        .rev()
        .take(window)
        .map(|(item, _, _)| item.clone())
        .collect();
    items.resize(window, PAD_ITEM.to_owned());
    EnvState {
        items,
        owner: profile.user_id.clone(),
    }
}

/// Alternative warm start: `window` positives sampled without replacement,
/// selected via `--init-state random`.
pub fn initial_state_random(
    profile: &UserProfile,
    window: usize,
    rng: &mut impl rand::Rng,
) -> EnvState {
    use rand::seq::SliceRandom;
    let mut pool: Vec<String> = profile
        .positive_history
        .iter()
        .map(|(item, _, _)| item.clone())
        .collect();
    pool.shuffle(rng);
    pool.truncate(window);
    pool.resize(window, PAD_ITEM.to_owned());
    EnvState {
        items: pool,
        owner: profile.user_id.clone(),
    }
}

/// One simulator interaction: the reward for `action` and the next state.
pub fn step(
    profile: &UserProfile,
    model: &ClusterModel,
    state: &EnvState,
    action: &Action,
    cfg: &RewardConfig,
) -> (f64, EnvState) {
    let supplement = supplement_pool(model, profile);
    (
        reward_with(profile, &supplement, action, cfg),
        transition(state, action),
    )
}

/// Per-user simulator that precomputes the supplemented-negative set once;
/// the training loop calls this instead of the free functions.
pub struct Simulator<'a> {
    profile: &'a UserProfile,
    supplement: BTreeSet<String>,
    cfg: RewardConfig,
}

impl<'a> Simulator<'a> {
    pub fn new(profile: &'a UserProfile, model: &ClusterModel, cfg: RewardConfig) -> Self {
        Simulator {
            profile,
            supplement: supplement_pool(model, profile),
            cfg,
        }
    }

    /// Reuse an already-computed supplement set.
    pub fn with_supplement(
        profile: &'a UserProfile,
        supplement: BTreeSet<String>,
        cfg: RewardConfig,
    ) -> Self {
        Simulator {
            profile,
            supplement,
            cfg,
        }
    }

    pub fn adjusted_rating(&self, item: &str) -> f64 {
        adjusted_rating_with(self.profile, &self.supplement, item, &self.cfg)
    }

    pub fn reward(&self, action: &Action) -> f64 {
        reward_with(self.profile, &self.supplement, action, &self.cfg)
    }

    pub fn step(&self, state: &EnvState, action: &Action) -> (f64, EnvState) {
        (self.reward(action), transition(state, action))
    }
}
