use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use textrec::agent::InitStateMode;
use textrec::config::RunConfig;
use textrec::pipeline;

#[derive(Parser)]
#[command(
    name = "textrec",
    about = "Text-embedded interactive recommender: prepare, train, evaluate, bench",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed items/users, split train/test, cluster users, persist artifacts
    Prepare(ConfigArgs),
    /// Train one actor-critic pair per cluster from the prepared artifacts
    Train(ConfigArgs),
    /// Rank Top-k pools with the trained actors and both baselines
    Evaluate(ConfigArgs),
    /// Time per-decision and per-training-step cost on a synthetic catalog
    Bench(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Interactions file: user \t item \t rating \t timestamp \t review
    #[arg(long)]
    interactions: Option<PathBuf>,
    /// Item metadata file: item \t description
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Pre-trained word vectors: token v1 .. vD per line
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Stopword list, one lowercase token per line
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Artifact directory shared by all stages
    #[arg(long, default_value = "work")]
    workdir: PathBuf,

    /// Feature-space dimension D
    #[arg(long, default_value_t = 100)]
    dim: usize,
    /// Smallest rating in the corpus scale
    #[arg(long, default_value_t = 1.0)]
    rating_min: f64,
    /// Largest rating in the corpus scale
    #[arg(long, default_value_t = 5.0)]
    rating_max: f64,
    /// Ratings above this bound count as positive
    #[arg(long, default_value_t = 2.0)]
    rating_bound: f64,
    /// Fraction of each user's newest positives held out for testing
    #[arg(long, default_value_t = 0.10)]
    test_fraction: f64,
    /// Drop items with fewer interactions than this (0 = keep everything)
    #[arg(long, default_value_t = 0)]
    min_interactions: usize,
    /// L2-normalize user vectors instead of using the plain mean
    #[arg(long, default_value_t = false)]
    l2_normalize_users: bool,

    /// Number of user clusters n_cl
    #[arg(long, default_value_t = 5)]
    clusters: usize,
    /// Candidate-set size n_c
    #[arg(long, default_value_t = 100)]
    candidate_size: usize,
    /// Largest share of the candidate set taken by positives
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// State window size n_s
    #[arg(long, default_value_t = 20)]
    state_size: usize,
    /// Recommendation size n_a
    #[arg(long, default_value_t = 5)]
    action_size: usize,

    /// Discount factor
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Soft target-update rate
    #[arg(long, default_value_t = 0.01)]
    tau: f64,
    /// Minibatch size N_b
    #[arg(long, default_value_t = 64)]
    batch: usize,
    /// Replay buffer capacity
    #[arg(long, default_value_t = 100_000)]
    buffer: usize,
    /// Steps per episode T
    #[arg(long, default_value_t = 50)]
    episode_len: usize,
    /// Initial exploration noise
    #[arg(long, default_value_t = 0.2)]
    sigma_start: f64,
    /// Final exploration noise
    #[arg(long, default_value_t = 0.02)]
    sigma_end: f64,
    /// Steps over which noise anneals (default: half of max steps)
    #[arg(long)]
    sigma_decay_steps: Option<u64>,
    /// Earliest step the stability stop may fire (default: buffer size)
    #[arg(long)]
    min_steps: Option<u64>,
    /// Hard training-step cap (default: 5x buffer size)
    #[arg(long)]
    max_steps: Option<u64>,
    /// Actor learning rate
    #[arg(long, default_value_t = 1e-4)]
    lr_actor: f64,
    /// Critic learning rate
    #[arg(long, default_value_t = 1e-3)]
    lr_critic: f64,
    /// Hidden layer widths, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [256, 128])]
    hidden: Vec<usize>,
    /// Episode warm start: recent | random
    #[arg(long, default_value = "recent")]
    init_state: InitStateMode,
    /// Flat reward for supplemented negatives
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    supplemented_penalty: f64,
    /// Train clusters on worker threads
    #[arg(long, default_value_t = false)]
    parallel: bool,

    /// Top-k cutoffs, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [10, 20])]
    eval_ks: Vec<usize>,
    /// Evaluation pool size (positives + sampled negatives)
    #[arg(long, default_value_t = 100)]
    eval_pool: usize,

    /// Repetitions per benchmark
    #[arg(long, default_value_t = 10_000)]
    bench_reps: usize,

    /// Master seed; every random stream derives from it
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl ConfigArgs {
    fn into_config(self) -> RunConfig {
        RunConfig {
            interactions: self.interactions.unwrap_or_default(),
            meta: self.meta.unwrap_or_default(),
            vectors: self.vectors.unwrap_or_default(),
            stopwords: self.stopwords,
            workdir: self.workdir,
            dim: self.dim,
            rating_min: self.rating_min,
            rating_max: self.rating_max,
            rating_bound: self.rating_bound,
            test_fraction: self.test_fraction,
            min_interactions: self.min_interactions,
            l2_normalize_users: self.l2_normalize_users,
            clusters: self.clusters,
            candidate_size: self.candidate_size,
            alpha: self.alpha,
            state_size: self.state_size,
            action_size: self.action_size,
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
            hidden: self.hidden,
            init_state: self.init_state,
            supplemented_penalty: self.supplemented_penalty,
            parallel: self.parallel,
            eval_ks: self.eval_ks,
            eval_pool: self.eval_pool,
            bench_reps: self.bench_reps,
            seed: self.seed,
        }
    }
}

fn run() -> textrec::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Prepare(args) => {
            let config = args.into_config();
            let summary = pipeline::cmd_prepare(&config)?;
            println!(
                "prepared {} users / {} items: {} train records, {} test users, {} clusters -> {}",
                summary.users,
                summary.items,
                summary.train_records,
                summary.test_users,
                summary.clusters,
                config.workdir.display()
            );
        }
        Command::Train(args) => {
            let config = args.into_config();
            let summary = pipeline::cmd_train(&config)?;
            for (cluster, steps) in summary.trained.iter().zip(&summary.steps) {
                println!("cluster {cluster}: trained for {steps} steps");
            }
            for cluster in &summary.skipped {
                println!("cluster {cluster}: skipped (no trainable users)");
            }
        }
        Command::Evaluate(args) => {
            let config = args.into_config();
            let report = pipeline::cmd_evaluate(&config)?;
            print!("{}", report.to_text());
        }
        Command::Bench(args) => {
            let config = args.into_config();
            let report = pipeline::cmd_bench(&config)?;
            print!("{}", report.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("textrec: {err}");
            ExitCode::FAILURE
        }
    }
}
