//! The four pipeline commands behind the CLI: `prepare` builds embeddings,
//! clusters and the train/test split; `train` fits one actor-critic pair per
//! cluster; `evaluate` writes the Top-k metric reports; `bench` times
//! decisions and training steps on a synthetic catalog.
//!
//! Artifact layout under the work directory:
//!
//! ```text
//! workdir/
//!   vectors/items.tsv      id \t v1 v2 ... vD
//!   vectors/users.tsv      id \t v1 v2 ... vD
//!   clusters/model.tsv     centroid block, then user \t cluster lines
//!   split/train.tsv        interactions format
//!   split/test.tsv         user \t item lines, chronological per user
//!   checkpoints/cluster<l>.<role>.ckpt
//!   reports/train_cluster<l>.csv
//!   reports/metrics.{json,txt}  reports/per_user.csv  reports/bench.{json,txt}
//!   <stage>.config.json    resolved configuration echo
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::agent::{
    self, act, critic_targets, select_action, train_cluster, AgentConfig, ClusterArtifacts,
    ReplayBuffer, StepRecord, TrainOutcome, Transition,
};
use crate::candidate::CandidateContext;
use crate::cluster::{kmeans, read_cluster_model, write_cluster_model, ClusterModel};
use crate::config::RunConfig;
use crate::corpus::{
    self, load_interactions, load_stopwords, load_word_vectors, write_interactions, Dataset,
    StopwordSet,
};
use crate::embedding::{
    build_item_vectors, build_profiles, read_vector_file, write_vector_file, ItemVectorTable,
    UserProfile,
};
use crate::env::Simulator;
use crate::error::{Error, Result};
use crate::eval::{evaluate_all, EvalInputs, ItemPopularity, MetricsReport};
use crate::net::{load_checkpoint, save_checkpoint, soft_update, Network};
use crate::seeding::derive_seed;
use crate::synthetic::{PlantedData, PlantedSpec};

/// Path schema for one work directory.
pub struct Workdir {
    root: PathBuf,
}

impl Workdir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workdir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn item_vectors(&self) -> PathBuf {
        self.root.join("vectors/items.tsv")
    }

    pub fn user_vectors(&self) -> PathBuf {
        self.root.join("vectors/users.tsv")
    }

    pub fn cluster_model(&self) -> PathBuf {
        self.root.join("clusters/model.tsv")
    }

    pub fn train_split(&self) -> PathBuf {
        self.root.join("split/train.tsv")
    }

    pub fn test_positives(&self) -> PathBuf {
        self.root.join("split/test.tsv")
    }

    pub fn checkpoint(&self, cluster: usize, role: &str) -> PathBuf {
        self.root
            .join(format!("checkpoints/cluster{cluster}.{role}.ckpt"))
    }

    pub fn train_log(&self, cluster: usize) -> PathBuf {
        self.root.join(format!("reports/train_cluster{cluster}.csv"))
    }

    pub fn metrics_json(&self) -> PathBuf {
        self.root.join("reports/metrics.json")
    }

    pub fn metrics_text(&self) -> PathBuf {
        self.root.join("reports/metrics.txt")
    }

    pub fn per_user_csv(&self) -> PathBuf {
        self.root.join("reports/per_user.csv")
    }

    pub fn bench_json(&self) -> PathBuf {
        self.root.join("reports/bench.json")
    }

    pub fn bench_text(&self) -> PathBuf {
        self.root.join("reports/bench.txt")
    }

    pub fn config_echo(&self, stage: &str) -> PathBuf {
        self.root.join(format!("{stage}.config.json"))
    }

    fn ensure_layout(&self) -> Result<()> {
        for sub in ["vectors", "clusters", "split", "checkpoints", "reports"] {
            let dir = self.root.join(sub);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(())
    }
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn echo_config(workdir: &Workdir, stage: &str, config: &RunConfig) -> Result<()> {
    let json = serde_json::to_string_pretty(config).expect("config serializes");
    write_text(&workdir.config_echo(stage), &json)
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact(path))
    }
}

fn write_test_positives(path: &Path, map: &BTreeMap<String, Vec<String>>) -> Result<()> {
    let mut out = String::new();
    for (user, items) in map {
        for item in items {
            writeln!(out, "{user}\t{item}").expect("write to string");
        }
    }
    write_text(path, &out)
}

fn read_test_positives(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (user, item) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, idx + 1, "expected `user\\titem`"))?;
        map.entry(user.to_owned()).or_default().push(item.to_owned());
    }
    Ok(map)
}

/// What `prepare` produced, for logging and tests.
#[derive(Debug, Serialize)]
pub struct PrepareSummary {
    pub users: usize,
    pub items: usize,
    pub train_records: usize,
    pub test_users: usize,
    pub clusters: usize,
}

/// Load inputs, embed items and users, split chronologically, cluster users
/// and persist every artifact. Idempotent for a fixed config and seed.
pub fn cmd_prepare(config: &RunConfig) -> Result<PrepareSummary> {
    config.validate()?;
    let workdir = Workdir::new(&config.workdir);
    workdir.ensure_layout()?;

    let full = load_interactions(
        &require(config.interactions.clone())?,
        &require(config.meta.clone())?,
        config.rating_scale(),
    )?;
    let full = corpus::filter_min_interactions(&full, config.min_interactions);
    let table = load_word_vectors(&require(config.vectors.clone())?, config.dim)?;
    let stopwords = match &config.stopwords {
        Some(path) => load_stopwords(require(path.clone())?.as_path())?,
        None => StopwordSet::empty(),
    };

    let (train, test_positives) = corpus::split_train_test(
        &full,
        config.rating_bound,
        config.test_fraction,
    );
    let items = build_item_vectors(&train, &table, &stopwords);
    let profiles = build_profiles(&train, &items, config.rating_bound, config.l2_normalize_users);

    let user_vectors: Vec<(String, Vec<f64>)> = profiles
        .iter()
        .map(|p| (p.user_id.clone(), p.vec.clone()))
        .collect();
    let mut model = kmeans(&user_vectors, config.clusters, derive_seed(config.seed, "kmeans"))?;
    model.fill_positive_items(&profiles);

    write_vector_file(
        &workdir.item_vectors(),
        items.iter().map(|(id, v)| (id.as_str(), v.as_slice())),
    )?;
    write_vector_file(
        &workdir.user_vectors(),
        user_vectors.iter().map(|(id, v)| (id.as_str(), v.as_slice())),
    )?;
    write_interactions(&workdir.train_split(), &train.records)?;
    write_test_positives(&workdir.test_positives(), &test_positives)?;
    write_cluster_model(&workdir.cluster_model(), &model)?;
    echo_config(&workdir, "prepare", config)?;

    Ok(PrepareSummary {
        users: full.user_count(),
        items: full.item_count(),
        train_records: train.records.len(),
        test_users: test_positives.len(),
        clusters: model.n_cl,
    })
}

/// Artifacts reloaded from a prepared work directory.
pub struct PreparedArtifacts {
    pub items: ItemVectorTable,
    pub catalog: Vec<String>,
    pub profiles: Vec<UserProfile>,
    pub model: ClusterModel,
    pub train: Dataset,
    pub test_positives: BTreeMap<String, Vec<String>>,
}

/// Rebuild profiles and the cluster model from the persisted artifacts.
pub fn load_prepared(config: &RunConfig) -> Result<PreparedArtifacts> {
    let workdir = Workdir::new(&config.workdir);
    let mut items = ItemVectorTable::new(config.dim);
    for (id, vec) in read_vector_file(&require(workdir.item_vectors())?, config.dim)? {
        items.insert(id, vec);
    }
    let catalog: Vec<String> = items.ids().cloned().collect();

    let records = corpus::read_interactions_file(
        &require(workdir.train_split())?,
        config.rating_scale(),
    )?;
    let train = Dataset {
        users: records.iter().map(|r| r.user_id.clone()).collect(),
        items: catalog.iter().cloned().collect(),
        records,
        item_meta: BTreeMap::new(),
    };

    let profiles = build_profiles(&train, &items, config.rating_bound, config.l2_normalize_users);
    let mut model = read_cluster_model(&require(workdir.cluster_model())?)?;
    model.fill_positive_items(&profiles);
    let test_positives = read_test_positives(&require(workdir.test_positives())?)?;

    Ok(PreparedArtifacts {
        items,
        catalog,
        profiles,
        model,
        train,
        test_positives,
    })
}

fn training_log_csv(log: &[StepRecord]) -> String {
    let mut out = String::from("step,episode,reward,critic_loss,actor_objective,sigma\n");
    for r in log {
        let loss = r.critic_loss.map(|v| v.to_string()).unwrap_or_default();
        let objective = r.actor_objective.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.step, r.episode, r.reward, loss, objective, r.sigma
        )
        .expect("write to string");
    }
    out
}

/// What `train` produced per cluster.
#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub trained: Vec<usize>,
    pub skipped: Vec<usize>,
    pub steps: Vec<u64>,
}

/// Train one actor-critic pair per nonempty cluster and persist checkpoints
/// plus per-step CSV logs.
pub fn cmd_train(config: &RunConfig) -> Result<TrainSummary> {
    config.validate()?;
    let workdir = Workdir::new(&config.workdir);
    workdir.ensure_layout()?;
    let prepared = load_prepared(config)?;
    let agent_config = config.agent_config();

    let artifacts = ClusterArtifacts {
        profiles: &prepared.profiles,
        model: &prepared.model,
        items: &prepared.items,
        catalog: &prepared.catalog,
    };

    let trainable: Vec<usize> = (0..prepared.model.n_cl)
        .filter(|&cluster| {
            prepared.profiles.iter().any(|p| {
                p.trainable() && prepared.model.cluster_of(&p.user_id) == Some(cluster)
            })
        })
        .collect();
    let skipped: Vec<usize> = (0..prepared.model.n_cl)
        .filter(|c| !trainable.contains(c))
        .collect();
    for &cluster in &skipped {
        warn!("cluster {cluster} has no trainable users; skipping");
    }

    let outcomes: Vec<(usize, Result<TrainOutcome>)> = if config.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = trainable
                .iter()
                .map(|&cluster| {
                    let artifacts = &artifacts;
                    let agent_config = &agent_config;
                    scope.spawn(move || (cluster, train_cluster(cluster, artifacts, agent_config)))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("trainer panicked")).collect()
        })
    } else {
        trainable
            .iter()
            .map(|&cluster| (cluster, train_cluster(cluster, &artifacts, &agent_config)))
            .collect()
    };

    let mut summary = TrainSummary {
        trained: Vec::new(),
        skipped,
        steps: Vec::new(),
    };
    for (cluster, outcome) in outcomes {
        let outcome = outcome?;
        save_checkpoint(&workdir.checkpoint(cluster, "actor"), &outcome.actor)?;
        save_checkpoint(&workdir.checkpoint(cluster, "critic"), &outcome.critic)?;
        save_checkpoint(&workdir.checkpoint(cluster, "actor_target"), &outcome.actor_target)?;
        save_checkpoint(&workdir.checkpoint(cluster, "critic_target"), &outcome.critic_target)?;
        write_text(&workdir.train_log(cluster), &training_log_csv(&outcome.log))?;
        info!(
            "cluster {cluster}: {} steps, final reward {:.4}",
            outcome.log.len(),
            outcome.log.last().map(|r| r.reward).unwrap_or(0.0)
        );
        summary.trained.push(cluster);
        summary.steps.push(outcome.log.len() as u64);
    }
    echo_config(&workdir, "train", config)?;
    Ok(summary)
}

/// Evaluate the trained per-cluster actors plus the ItemPop and random
/// baselines; writes the JSON/text reports and the per-user CSV.
pub fn cmd_evaluate(config: &RunConfig) -> Result<MetricsReport> {
    config.validate()?;
    let workdir = Workdir::new(&config.workdir);
    workdir.ensure_layout()?;
    let prepared = load_prepared(config)?;

    let mut actors: BTreeMap<usize, Network> = BTreeMap::new();
    for cluster in 0..prepared.model.n_cl {
        let path = workdir.checkpoint(cluster, "actor");
        if path.exists() {
            actors.insert(cluster, load_checkpoint(&path)?);
        }
    }
    if actors.is_empty() {
        return Err(Error::MissingArtifact(workdir.checkpoint(0, "actor")));
    }

    let popularity = ItemPopularity::from_train(&prepared.train);
    let inputs = EvalInputs {
        actors: &actors,
        profiles: &prepared.profiles,
        test_positives: &prepared.test_positives,
        model: &prepared.model,
        items: &prepared.items,
        catalog: &prepared.catalog,
        popularity: &popularity,
    };
    let report = evaluate_all(
        &inputs,
        &config.eval_ks,
        config.eval_pool,
        config.state_size,
        config.seed,
    );

    write_text(
        &workdir.metrics_json(),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    write_text(&workdir.metrics_text(), &report.to_text())?;
    write_text(&workdir.per_user_csv(), &report.per_user_csv())?;
    echo_config(&workdir, "evaluate", config)?;
    Ok(report)
}

/// Wall-clock statistics over repeated runs of one operation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchTiming {
    pub reps: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub median_ms: f64,
}

fn summarize(samples: &mut [f64]) -> BenchTiming {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    samples.sort_by(f64::total_cmp);
    BenchTiming {
        reps: samples.len(),
        mean_ms: mean,
        std_ms: var.sqrt(),
        median_ms: samples[samples.len() / 2],
    }
}

/// Timing report: decision latency and training-step cost, measured in-memory
/// on a synthetic catalog (no disk I/O inside the timed region).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub state_size: usize,
    pub action_size: usize,
    pub dim: usize,
    pub candidate_size: usize,
    pub decision: BenchTiming,
    pub training_step: BenchTiming,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "benchmark (n_s={}, n_a={}, D={}, n_c={}); timings exclude disk I/O",
            self.state_size, self.action_size, self.dim, self.candidate_size
        )
        .expect("write to string");
        for (name, t) in [("per decision", &self.decision), ("per training step", &self.training_step)] {
            writeln!(
                out,
                "{name:<18} {:>10.4} ms mean  {:>10.4} ms std  {:>10.4} ms median  ({} reps)",
                t.mean_ms, t.std_ms, t.median_ms, t.reps
            )
            .expect("write to string");
        }
        out
    }
}

struct BenchSetup {
    items: ItemVectorTable,
    catalog: Vec<String>,
    profile: UserProfile,
    model: ClusterModel,
    agent_config: AgentConfig,
}

/// Synthetic single-user setup mirroring the timing protocol: state and
/// action of size 1, everything else from the config.
fn bench_setup(config: &RunConfig) -> Result<BenchSetup> {
    let spec = PlantedSpec {
        users_per_cluster: 8,
        items_per_block: config.candidate_size.max(150),
        dim: config.dim,
        own_ratings: 30,
        cross_ratings: 10,
        seed: config.seed,
    };
    let data = PlantedData::generate(&spec)?;
    let profile = data
        .profiles
        .iter()
        .find(|p| p.trainable())
        .expect("planted data has trainable users")
        .clone();
    let agent_config = AgentConfig {
        state_size: 1,
        action_size: 1,
        ..config.agent_config()
    };
    Ok(BenchSetup {
        items: data.items,
        catalog: data.catalog,
        profile,
        model: data.model,
        agent_config,
    })
}

/// Mean/std/median wall-clock of one decision: candidate-set construction,
/// actor forward pass, and candidate scoring.
pub fn bench_decision(config: &RunConfig, reps: usize) -> Result<BenchTiming> {
    let setup = bench_setup(config)?;
    let cfg = &setup.agent_config;
    let (dims, acts) = cfg.actor_shape();
    let actor = Network::init(&dims, &acts, derive_seed(config.seed, "bench-actor"))?;
    let mut context = CandidateContext::new(&setup.profile, &setup.model, &setup.catalog);
    let state = crate::env::initial_state(&setup.profile, cfg.state_size);
    let mut rng = StdRng::seed_from_u64(derive_seed(config.seed, "bench-decision"));

    let mut run_once = |rng: &mut StdRng| -> Result<()> {
        let candidates = context.build(cfg.candidate_size, cfg.alpha, rng);
        let policy = act(&actor, &state, &setup.items, 0.0, rng);
        select_action(&policy, &candidates, &setup.items, cfg.action_size)?;
        Ok(())
    };

    for _ in 0..50.min(reps) {
        run_once(&mut rng)?;
    }
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        run_once(&mut rng)?;
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(summarize(&mut samples))
}

/// Mean/std/median wall-clock of one training step: batch sampling, critic
/// targets, critic and actor updates, and both soft target updates.
pub fn bench_training_step(config: &RunConfig, reps: usize) -> Result<BenchTiming> {
    let setup = bench_setup(config)?;
    let cfg = &setup.agent_config;
    let (actor_dims, actor_acts) = cfg.actor_shape();
    let (critic_dims, critic_acts) = cfg.critic_shape();
    let mut actor = Network::init(&actor_dims, &actor_acts, derive_seed(config.seed, "bench-actor"))?;
    let mut critic =
        Network::init(&critic_dims, &critic_acts, derive_seed(config.seed, "bench-critic"))?;
    let mut actor_target = actor.clone();
    let mut critic_target = critic.clone();
    let mut opt_actor = crate::net::AdamOptimizer::new(&actor, cfg.lr_actor);
    let mut opt_critic = crate::net::AdamOptimizer::new(&critic, cfg.lr_critic);

    let mut context = CandidateContext::new(&setup.profile, &setup.model, &setup.catalog);
    let simulator = Simulator::new(&setup.profile, &setup.model, cfg.reward_config());
    let mut rng = StdRng::seed_from_u64(derive_seed(config.seed, "bench-train"));

    // fill the buffer with enough rollout transitions for sampling
    let mut buffer = ReplayBuffer::new(cfg.buffer.min(4 * cfg.batch).max(cfg.batch));
    let mut state = crate::env::initial_state(&setup.profile, cfg.state_size);
    while buffer.len() < buffer.capacity() {
        let candidates = context.build(cfg.candidate_size, cfg.alpha, &mut rng);
        let policy = act(&actor, &state, &setup.items, cfg.sigma_start, &mut rng);
        let action = select_action(&policy, &candidates, &setup.items, cfg.action_size)?;
        let (reward, next) = simulator.step(&state, &action);
        buffer.push(Transition {
            state: state.clone(),
            policy,
            reward,
            next_state: next.clone(),
        });
        state = next;
    }

    let mut run_once = |actor: &mut Network,
                        critic: &mut Network,
                        actor_target: &mut Network,
                        critic_target: &mut Network,
                        rng: &mut StdRng| {
        let batch = buffer.sample(cfg.batch, rng);
        let targets = critic_targets(&batch, actor_target, critic_target, cfg.gamma, &setup.items);
        agent::critic_update(&batch, critic, &targets, &mut opt_critic, &setup.items);
        agent::actor_update(&batch, actor, critic, &mut opt_actor, &setup.items);
        soft_update(critic_target, critic, cfg.tau);
        soft_update(actor_target, actor, cfg.tau);
    };

    for _ in 0..5.min(reps) {
        run_once(&mut actor, &mut critic, &mut actor_target, &mut critic_target, &mut rng);
    }
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        run_once(&mut actor, &mut critic, &mut actor_target, &mut critic_target, &mut rng);
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(summarize(&mut samples))
}

/// Run both benchmarks at `bench_reps` repetitions and persist the report.
pub fn cmd_bench(config: &RunConfig) -> Result<BenchReport> {
    config.validate()?;
    let workdir = Workdir::new(&config.workdir);
    workdir.ensure_layout()?;

    let decision = bench_decision(config, config.bench_reps)?;
    let training_step = bench_training_step(config, config.bench_reps)?;
    let report = BenchReport {
        state_size: 1,
        action_size: 1,
        dim: config.dim,
        candidate_size: config.candidate_size,
        decision,
        training_step,
    };
    write_text(
        &workdir.bench_json(),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    write_text(&workdir.bench_text(), &report.to_text())?;
    echo_config(&workdir, "bench", config)?;
    Ok(report)
}
