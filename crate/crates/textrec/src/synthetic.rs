//! Synthetic corpora with planted block structure.
//!
//! Two user populations prefer two disjoint item blocks: block-A users rate
//! block-A items 4-5 and block-B items 1-2, mirrored for block-B users. Item
//! vectors live on complementary halves of the feature space, and each user
//! carries a preference direction inside its block: the items it rated are
//! the ones closest to that direction, with the nearest half rated 5 and the
//! rest 4. The planted preference is therefore recoverable by a per-user
//! policy vector. Used by the runnable examples, the end-to-end tests and
//! the benchmark command.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::cluster::{kmeans, ClusterModel};
use crate::corpus::{split_train_test, Dataset, InteractionRecord, ItemMeta};
use crate::embedding::{build_profiles, ItemVectorTable, UserProfile};
use crate::error::{Error, Result};
use crate::seeding::derive_seed;

#[derive(Debug, Clone)]
pub struct PlantedSpec {
    pub users_per_cluster: usize,
    pub items_per_block: usize,
    /// Feature dimension; the two blocks occupy complementary halves.
    pub dim: usize,
    /// Positive (own-block) ratings per user.
    pub own_ratings: usize,
    /// Negative (cross-block) ratings per user.
    pub cross_ratings: usize,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            users_per_cluster: 100,
            items_per_block: 150,
            dim: 16,
            own_ratings: 30,
            cross_ratings: 10,
            seed: 7,
        }
    }
}

impl PlantedSpec {
    /// A small variant that keeps end-to-end pipeline tests fast.
    pub fn tiny(seed: u64) -> Self {
        PlantedSpec {
            users_per_cluster: 10,
            items_per_block: 25,
            dim: 8,
            own_ratings: 12,
            cross_ratings: 4,
            seed,
        }
    }
}

/// All in-memory artifacts derived from one planted corpus.
pub struct PlantedData {
    pub dataset: Dataset,
    pub train: Dataset,
    pub test_positives: BTreeMap<String, Vec<String>>,
    pub items: ItemVectorTable,
    pub profiles: Vec<UserProfile>,
    pub model: ClusterModel,
    pub catalog: Vec<String>,
}

fn block_of_item(index: usize, per_block: usize) -> usize {
    index / per_block
}

fn item_id(index: usize, per_block: usize) -> String {
    let block = if block_of_item(index, per_block) == 0 { 'a' } else { 'b' };
    format!("{block}{:04}", index % per_block)
}

fn block_vector(block: usize, dim: usize, rng: &mut StdRng) -> Vec<f64> {
    let half = dim / 2;
    (0..dim)
        .map(|d| {
            let own = (d < half) == (block == 0);
            if own {
                rng.random_range(0.2..1.0)
            } else {
                rng.random_range(-0.05..0.05)
            }
        })
        .collect()
}

/// Item vectors with block structure, generated directly (no text).
pub fn planted_item_vectors(spec: &PlantedSpec) -> ItemVectorTable {
    assert!(spec.dim >= 2, "dim must be at least 2");
    let mut rng = StdRng::seed_from_u64(derive_seed(spec.seed, "items"));
    let mut items = ItemVectorTable::new(spec.dim);
    for idx in 0..2 * spec.items_per_block {
        let block = block_of_item(idx, spec.items_per_block);
        items.insert(item_id(idx, spec.items_per_block), block_vector(block, spec.dim, &mut rng));
    }
    items
}

/// The full interaction log for the planted populations. Each user rates the
/// `own_ratings` own-block items best aligned with its hidden preference
/// direction (nearest half rated 5, the rest 4) plus `cross_ratings` random
/// cross-block items rated 1-2, in shuffled chronological order.
pub fn planted_dataset(spec: &PlantedSpec, items: &ItemVectorTable) -> Dataset {
    let half = spec.dim / 2;
    let mut dataset = Dataset::default();
    for idx in 0..2 * spec.items_per_block {
        let id = item_id(idx, spec.items_per_block);
        dataset.items.insert(id.clone());
        dataset.item_meta.insert(
            id.clone(),
            ItemMeta {
                item_id: id,
                description_text: String::new(),
            },
        );
    }

    for cluster in 0..2 {
        let own_range = |d: usize| (d < half) == (cluster == 0);
        for u in 0..spec.users_per_cluster {
            let user_id = format!("u{}{u:04}", if cluster == 0 { 'a' } else { 'b' });
            let mut rng =
                StdRng::seed_from_u64(derive_seed(spec.seed, &format!("user-{user_id}")));
            dataset.users.insert(user_id.clone());

            let direction: Vec<f64> = (0..spec.dim)
                .map(|d| if own_range(d) { rng.random_range(0.0..1.0) } else { 0.0 })
                .collect();

            let own_block = cluster;
            let cross_block = 1 - cluster;
            let mut scored: Vec<(usize, f64)> = (0..spec.items_per_block)
                .map(|i| {
                    let idx = own_block * spec.items_per_block + i;
                    let vec = items
                        .get(&item_id(idx, spec.items_per_block))
                        .expect("planted item exists");
                    let score: f64 = vec.iter().zip(&direction).map(|(x, w)| x * w).sum();
                    (idx, score)
                })
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1));

            let own_count = spec.own_ratings.min(scored.len());
            let mut rated: Vec<(usize, f64)> = scored[..own_count]
                .iter()
                .enumerate()
                .map(|(rank, (idx, _))| {
                    let rating = if rank < own_count / 2 { 5.0 } else { 4.0 };
                    (*idx, rating)
                })
                .collect();

            let mut cross_items: Vec<usize> = (0..spec.items_per_block)
                .map(|i| cross_block * spec.items_per_block + i)
                .collect();
            cross_items.shuffle(&mut rng);
            for &idx in cross_items.iter().take(spec.cross_ratings) {
                rated.push((idx, rng.random_range(1..=2) as f64));
            }

            rated.shuffle(&mut rng);
            for (timestamp, (idx, rating)) in rated.into_iter().enumerate() {
                dataset.records.push(InteractionRecord {
                    user_id: user_id.clone(),
                    item_id: item_id(idx, spec.items_per_block),
                    rating,
                    timestamp: timestamp as i64,
                    review_text: String::new(),
                });
            }
        }
    }
    dataset
}

impl PlantedData {
    /// Generate the corpus and run the preparation pipeline on it: split,
    /// profile embedding and two-cluster k-means.
    pub fn generate(spec: &PlantedSpec) -> Result<Self> {
        let items = planted_item_vectors(spec);
        let dataset = planted_dataset(spec, &items);
        let (train, test_positives) = split_train_test(&dataset, 2.0, 0.10);
        let profiles = build_profiles(&train, &items, 2.0, false);
        let user_vectors: Vec<(String, Vec<f64>)> = profiles
            .iter()
            .map(|p| (p.user_id.clone(), p.vec.clone()))
            .collect();
        let mut model = kmeans(&user_vectors, 2, derive_seed(spec.seed, "kmeans"))?;
        model.fill_positive_items(&profiles);
        let catalog: Vec<String> = items.ids().cloned().collect();
        Ok(PlantedData {
            dataset,
            train,
            test_positives,
            items,
            profiles,
            model,
            catalog,
        })
    }
}

/// File-set produced by [`write_planted_corpus`].
pub struct PlantedFiles {
    pub interactions: PathBuf,
    pub meta: PathBuf,
    pub vectors: PathBuf,
    pub stopwords: PathBuf,
}

/// Write a planted corpus as input files for the CLI pipeline: descriptions
/// and reviews are composed from two disjoint vocabularies whose word vectors
/// carry the block structure, so text embedding reconstructs it.
pub fn write_planted_corpus(dir: &Path, spec: &PlantedSpec) -> Result<PlantedFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = StdRng::seed_from_u64(derive_seed(spec.seed, "vocab"));

    let words_per_block = 20usize;
    let word = |block: usize, i: usize| format!("w{}{i:02}", if block == 0 { 'a' } else { 'b' });

    let mut vectors_out = String::new();
    for block in 0..2 {
        for i in 0..words_per_block {
            let v = block_vector(block, spec.dim, &mut rng);
            vectors_out.push_str(&word(block, i));
            for x in v {
                write!(vectors_out, " {x}").expect("write to string");
            }
            vectors_out.push('\n');
        }
    }
    let stopwords = ["the", "and", "with"];
    // stopword vectors are large junk values; broken filtering shifts every
    // embedding visibly
    for sw in stopwords {
        vectors_out.push_str(sw);
        for _ in 0..spec.dim {
            write!(vectors_out, " {}", 25.0).expect("write to string");
        }
        vectors_out.push('\n');
    }

    let dataset = planted_dataset(spec, &planted_item_vectors(spec));
    let phrase = |block: usize, rng: &mut StdRng, n: usize| -> String {
        let mut parts = Vec::with_capacity(n + 1);
        parts.push(stopwords[rng.random_range(0..stopwords.len())].to_owned());
        for _ in 0..n {
            parts.push(word(block, rng.random_range(0..words_per_block)));
        }
        parts.join(" ")
    };

    let mut interactions_out = String::new();
    for r in &dataset.records {
        let block = if r.item_id.starts_with('a') { 0 } else { 1 };
        writeln!(
            interactions_out,
            "{}\t{}\t{}\t{}\t{}",
            r.user_id,
            r.item_id,
            r.rating,
            r.timestamp,
            phrase(block, &mut rng, 3)
        )
        .expect("write to string");
    }

    let mut meta_out = String::new();
    for item in &dataset.items {
        let block = if item.starts_with('a') { 0 } else { 1 };
        writeln!(meta_out, "{item}\t{}", phrase(block, &mut rng, 5)).expect("write to string");
    }

    let files = PlantedFiles {
        interactions: dir.join("interactions.tsv"),
        meta: dir.join("meta.tsv"),
        vectors: dir.join("vectors.txt"),
        stopwords: dir.join("stopwords.txt"),
    };
    fs::write(&files.interactions, interactions_out).map_err(|e| Error::io(&files.interactions, e))?;
    fs::write(&files.meta, meta_out).map_err(|e| Error::io(&files.meta, e))?;
    fs::write(&files.vectors, vectors_out).map_err(|e| Error::io(&files.vectors, e))?;
    fs::write(&files.stopwords, "the\nand\nwith\n").map_err(|e| Error::io(&files.stopwords, e))?;
    Ok(files)
}
