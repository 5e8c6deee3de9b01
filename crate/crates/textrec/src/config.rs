//! The single configuration surface shared by the pipeline commands. Every
//! field maps one-to-one to a CLI flag, and every command echoes the resolved
//! configuration into the work directory.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, InitStateMode};
use crate::corpus::RatingScale;
use crate::env::RewardConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    // input files and the artifact directory
    pub interactions: PathBuf,
    pub meta: PathBuf,
    pub vectors: PathBuf,
    pub stopwords: Option<PathBuf>,
    pub workdir: PathBuf,

    // corpus handling
    pub dim: usize,
    pub rating_min: f64,
    pub rating_max: f64,
    pub rating_bound: f64,
    pub test_fraction: f64,
    pub min_interactions: usize,
    pub l2_normalize_users: bool,

    // candidate structure
    pub clusters: usize,
    pub candidate_size: usize,
    pub alpha: f64,
    pub state_size: usize,
    pub action_size: usize,

    // learner
    pub gamma: f64,
    pub tau: f64,
    pub batch: usize,
    pub buffer: usize,
    pub episode_len: usize,
    pub sigma_start: f64,
    pub sigma_end: f64,
    pub sigma_decay_steps: Option<u64>,
    pub min_steps: Option<u64>,
    pub max_steps: Option<u64>,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub hidden: Vec<usize>,
    pub init_state: InitStateMode,
    pub supplemented_penalty: f64,
    pub parallel: bool,

    // evaluation
    pub eval_ks: Vec<usize>,
    pub eval_pool: usize,

    // benchmarking
    pub bench_reps: usize,

    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            interactions: PathBuf::new(),
            meta: PathBuf::new(),
            vectors: PathBuf::new(),
            stopwords: None,
            workdir: PathBuf::from("work"),
            dim: 100,
            rating_min: 1.0,
            rating_max: 5.0,
            rating_bound: 2.0,
            test_fraction: 0.10,
            min_interactions: 0,
            l2_normalize_users: false,
            clusters: 5,
            candidate_size: 100,
            alpha: 0.5,
            state_size: 20,
            action_size: 5,
            gamma: 0.9,
            tau: 0.01,
            batch: 64,
            buffer: 100_000,
            episode_len: 50,
            sigma_start: 0.2,
            sigma_end: 0.02,
            sigma_decay_steps: None,
            min_steps: None,
            max_steps: None,
            lr_actor: 1e-4,
            lr_critic: 1e-3,
            hidden: vec![256, 128],
            init_state: InitStateMode::Recent,
            supplemented_penalty: -0.5,
            parallel: false,
            eval_ks: vec![10, 20],
            eval_pool: 100,
            bench_reps: 10_000,
            seed: 42,
        }
    }
}

impl RunConfig {
    pub fn rating_scale(&self) -> RatingScale {
        RatingScale {
            min: self.rating_min,
            max: self.rating_max,
        }
    }

    pub fn reward_config(&self) -> RewardConfig {
        RewardConfig {
            rating_bound: self.rating_bound,
            supplemented_penalty: self.supplemented_penalty,
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            dim: self.dim,
            state_size: self.state_size,
            action_size: self.action_size,
            candidate_size: self.candidate_size,
            alpha: self.alpha,
            hidden: self.hidden.clone(),
            gamma: self.gamma,
            tau: self.tau,
            batch: self.batch,
            buffer: self.buffer,
            episode_len: self.episode_len,
            sigma_start: self.sigma_start,
            sigma_end: self.sigma_end,
            sigma_decay_steps: self.sigma_decay_steps,
            min_steps: self.min_steps,
            max_steps: self.max_steps,
            lr_actor: self.lr_actor,
            lr_critic: self.lr_critic,
            init_state: self.init_state,
            rating_bound: self.rating_bound,
            supplemented_penalty: self.supplemented_penalty,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rating_min >= self.rating_max {
            return Err(Error::Config("rating scale must be nonempty".into()));
        }
        if self.rating_bound < self.rating_min || self.rating_bound >= self.rating_max {
            return Err(Error::Config(
                "rating bound must lie inside the rating scale".into(),
            ));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config("test fraction must lie in (0,1)".into()));
        }
        if self.supplemented_penalty >= 0.0 {
            return Err(Error::Config("supplemented penalty must be negative".into()));
        }
        if self.clusters == 0 {
            return Err(Error::Config("cluster count must be positive".into()));
        }
        if self.eval_ks.is_empty() || self.eval_ks.contains(&0) {
            return Err(Error::Config("eval cutoffs must be positive".into()));
        }
        if self.eval_pool == 0 {
            return Err(Error::Config("eval pool size must be positive".into()));
        }
        self.agent_config().validate()
    }
}
