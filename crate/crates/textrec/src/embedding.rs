//! Item and user embedding from textual information.
//!
//! An item vector is the mean of its in-vocabulary description-word vectors
//! plus the mean of its in-vocabulary review-word vectors; a user vector is
//! the mean of the item vectors the user rated positively. A side with no
//! in-vocabulary tokens contributes the zero vector.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;

use crate::corpus::{Dataset, EmbeddingTable, StopwordSet};
use crate::error::{Error, Result};

/// An item embedded into the D-dimensional feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemVector {
    pub item_id: String,
    pub vec: Vec<f64>,
}

/// A user's embedding plus the positive/negative partition of their training
/// logs. `positive_history` is ordered by (timestamp, item_id) ascending.
#[derive(Debug, Clone)]
pub struct UserProfile {
    pub user_id: String,
    pub vec: Vec<f64>,
    pub positives: BTreeSet<String>,
    pub negatives: BTreeSet<String>,
    pub positive_history: Vec<(String, f64, i64)>,
    pub ratings: BTreeMap<String, f64>,
}

impl UserProfile {
    /// Users without positive logs carry no preference signal; they keep a
    /// cluster assignment but are skipped by training and evaluation.
    pub fn trainable(&self) -> bool {
        !self.positives.is_empty()
    }
}

/// Item-id -> vector lookup shared by the agent, simulator and evaluator.
#[derive(Debug, Clone, Default)]
pub struct ItemVectorTable {
    dim: usize,
    map: BTreeMap<String, Vec<f64>>,
}

impl ItemVectorTable {
    pub fn new(dim: usize) -> Self {
        ItemVectorTable {
            dim,
            map: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, item_id: &str) -> Option<&[f64]> {
        self.map.get(item_id).map(Vec::as_slice)
    }

    pub fn insert(&mut self, item_id: impl Into<String>, vec: Vec<f64>) {
        assert_eq!(vec.len(), self.dim, "vector length must match table dim");
        self.map.insert(item_id.into(), vec);
    }

    /// Item ids in sorted order; doubles as the recommendation catalog.
    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<f64>)> {
        self.map.iter()
    }
}

/// Lowercase, split on any non-alphanumeric character, drop stopwords and
/// empty fragments.
pub fn tokenize(text: &str, stopwords: &StopwordSet) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !stopwords.contains(t))
        .map(str::to_owned)
        .collect()
}

fn mean_of_tokens(tokens: &[String], table: &EmbeddingTable) -> (Vec<f64>, usize) {
    let mut sum = vec![0.0; table.dim()];
    let mut count = 0usize;
    for token in tokens {
        if let Some(v) = table.get(token) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            count += 1;
        }
    }
    if count > 0 {
        for s in &mut sum {
            *s /= count as f64;
        }
    }
    (sum, count)
}

/// Mean of in-vocabulary description vectors plus mean of in-vocabulary
/// review vectors. Out-of-vocabulary tokens are skipped entirely (they do not
/// count toward either denominator).
pub fn embed_item(
    item_id: &str,
    description_tokens: &[String],
    review_tokens: &[String],
    table: &EmbeddingTable,
) -> ItemVector {
    let (desc_mean, n_desc) = mean_of_tokens(description_tokens, table);
    let (review_mean, n_review) = mean_of_tokens(review_tokens, table);
    if n_desc == 0 && n_review == 0 {
        warn!("item {item_id}: no in-vocabulary tokens, embedding is the zero vector");
    }
    let vec = desc_mean
        .into_iter()
        .zip(review_mean)
        .map(|(d, r)| d + r)
        .collect();
    ItemVector {
        item_id: item_id.to_owned(),
        vec,
    }
}

/// Partition a user's rated items: rating > `rating_bound` is positive,
/// anything else negative.
pub fn classify_logs(
    records: impl IntoIterator<Item = (String, f64)>,
    rating_bound: f64,
) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut positives = BTreeSet::new();
    let mut negatives = BTreeSet::new();
    for (item, rating) in records {
        if rating > rating_bound {
            positives.insert(item);
        } else {
            negatives.insert(item);
        }
    }
    (positives, negatives)
}

/// Mean of the user's positive item vectors; zero vector when there are none.
pub fn embed_user(positive_item_vectors: &[&[f64]], dim: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dim];
    if positive_item_vectors.is_empty() {
        return sum;
    }
    for v in positive_item_vectors {
        for (s, x) in sum.iter_mut().zip(*v) {
            *s += x;
        }
    }
    let n = positive_item_vectors.len() as f64;
    for s in &mut sum {
        *s /= n;
    }
    sum
}

/// Embed every catalog item from its description and the train-split reviews
/// mentioning it.
pub fn build_item_vectors(
    train: &Dataset,
    table: &EmbeddingTable,
    stopwords: &StopwordSet,
) -> ItemVectorTable {
    let mut review_tokens: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for r in &train.records {
        if !r.review_text.is_empty() {
            review_tokens
                .entry(r.item_id.as_str())
                .or_default()
                .extend(tokenize(&r.review_text, stopwords));
        }
    }

    let mut out = ItemVectorTable::new(table.dim());
    for item_id in &train.items {
        let desc = train
            .item_meta
            .get(item_id)
            .map(|m| tokenize(&m.description_text, stopwords))
            .unwrap_or_default();
        let reviews = review_tokens.remove(item_id.as_str()).unwrap_or_default();
        let iv = embed_item(item_id, &desc, &reviews, table);
        out.insert(item_id.clone(), iv.vec);
    }
    out
}

/// Build per-user profiles from the train split: positive/negative partition,
/// chronological positive history, and the mean-of-positives user vector.
pub fn build_profiles(
    train: &Dataset,
    items: &ItemVectorTable,
    rating_bound: f64,
    l2_normalize: bool,
) -> Vec<UserProfile> {
    let mut per_user: BTreeMap<&str, Vec<(&str, f64, i64)>> = BTreeMap::new();
    for r in &train.records {
        per_user
            .entry(r.user_id.as_str())
            .or_default()
            .push((r.item_id.as_str(), r.rating, r.timestamp));
    }

    let mut profiles = Vec::with_capacity(train.users.len());
    for user_id in &train.users {
        let recs = per_user.remove(user_id.as_str()).unwrap_or_default();
        let (positives, negatives) = classify_logs(
            recs.iter().map(|(i, y, _)| ((*i).to_owned(), *y)),
            rating_bound,
        );
        let mut positive_history: Vec<(String, f64, i64)> = recs
            .iter()
            .filter(|(_, y, _)| *y > rating_bound)
            .map(|(i, y, t)| ((*i).to_owned(), *y, *t))
            .collect();
        positive_history.sort_by(|a, b| a.2.cmp(&b.2).then_with(|| a.0.cmp(&b.0)));

        let pos_vecs: Vec<&[f64]> = positives.iter().filter_map(|i| items.get(i)).collect();
        let mut vec = embed_user(&pos_vecs, items.dim());
        if l2_normalize {
            let norm = vec.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for x in &mut vec {
                    *x /= norm;
                }
            }
        }
        profiles.push(UserProfile {
            user_id: user_id.clone(),
            vec,
            positives,
            negatives,
            positive_history,
            ratings: recs.iter().map(|(i, y, _)| ((*i).to_owned(), *y)).collect(),
        });
    }
    profiles
}

/// Persist vectors as `id \t v1 v2 ... vD` lines (the re-embedding cache).
pub fn write_vector_file<'a>(
    path: &Path,
    rows: impl Iterator<Item = (&'a str, &'a [f64])>,
) -> Result<()> {
    let mut out = String::new();
    for (id, vec) in rows {
        out.push_str(id);
        out.push('\t');
        for (i, x) in vec.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{x}").expect("write to string");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a vector file written by [`write_vector_file`].
pub fn read_vector_file(path: &Path, dim: usize) -> Result<Vec<(String, Vec<f64>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, idx + 1, "expected `id\\tvalues`"))?;
        let vec: Vec<f64> = rest
            .split_whitespace()
            .map(|p| {
                p.parse()
                    .map_err(|_| Error::parse(path, idx + 1, format!("bad float `{p}`")))
            })
            .collect::<Result<_>>()?;
        if vec.len() != dim {
            return Err(Error::VectorDim {
                token: id.to_owned(),
                expected: dim,
                found: vec.len(),
            });
        }
        rows.push((id.to_owned(), vec));
    }
    Ok(rows)
}
