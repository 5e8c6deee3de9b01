//! Interaction-log, item-metadata, word-vector and stopword ingestion, plus
//! the chronological train/test split.
//!
//! File formats (all plain text, UTF-8):
//! - interactions: `user_id \t item_id \t rating \t timestamp \t review_text`
//!   per line; literal tabs in the review are escaped as `\t`.
//! - item metadata: `item_id \t description_text`.
//! - word vectors: `token v1 v2 ... vD`, space-separated.
//! - stopwords: one lowercase token per line.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// One logged user-item interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionRecord {
    pub user_id: String,
    pub item_id: String,
    pub rating: f64,
    pub timestamp: i64,
    pub review_text: String,
}

/// Catalog-side text for one item.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemMeta {
    pub item_id: String,
    pub description_text: String,
}

/// Inclusive rating bounds declared for a corpus, e.g. 1..=5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

impl Default for RatingScale {
    fn default() -> Self {
        RatingScale { min: 1.0, max: 5.0 }
    }
}

impl RatingScale {
    pub fn contains(&self, rating: f64) -> bool {
        rating >= self.min && rating <= self.max
    }
}

/// The loaded corpus: user/item id sets, interaction records and item text.
///
/// Uses ordered collections throughout so identical input files always
/// produce identical iteration order downstream.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub users: BTreeSet<String>,
    pub items: BTreeSet<String>,
    pub records: Vec<InteractionRecord>,
    pub item_meta: BTreeMap<String, ItemMeta>,
}

impl Dataset {
    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    /// Records of one user, in stored order.
    pub fn records_of<'a>(
        &'a self,
        user_id: &'a str,
    ) -> impl Iterator<Item = &'a InteractionRecord> + 'a {
        self.records.iter().filter(move |r| r.user_id == user_id)
    }
}

/// Token -> D-dimensional vector lookup loaded from a word-vector file.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            entries: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim, "vector length must match table dim");
        self.entries.insert(token.into(), vector);
    }
}

/// Lowercase tokens removed before embedding.
#[derive(Debug, Clone, Default)]
pub struct StopwordSet {
    words: HashSet<String>,
}

impl StopwordSet {
    pub fn empty() -> Self {
        StopwordSet::default()
    }

    pub fn from_words<I: IntoIterator<Item = S>, S: Into<String>>(words: I) -> Self {
        StopwordSet {
            words: words.into_iter().map(|w| w.into().to_lowercase()).collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_owned).collect())
}

/// Escape tabs/backslashes so a review fits in one tab-separated field.
pub fn escape_field(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            _ => out.push(ch),
        }
    }
    out
}

pub fn unescape_field(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(ch) = chars.next() {
        if ch == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some('\\') => out.push('\\'),
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(ch);
        }
    }
    out
}

/// Parse an interactions file into records, deduplicating (user, item) pairs
/// by keeping the latest timestamp (later line wins ties).
pub fn read_interactions_file(records_path: &Path, scale: RatingScale) -> Result<Vec<InteractionRecord>> {
    let mut records: Vec<InteractionRecord> = Vec::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();

    for (idx, line) in read_lines(records_path)?.iter().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(5, '\t').collect();
        if fields.len() < 4 {
            return Err(Error::parse(
                records_path,
                line_no,
                format!("expected 5 tab-separated fields, got {}", fields.len()),
            ));
        }
        let rating: f64 = fields[2].parse().map_err(|_| {
            Error::parse(records_path, line_no, format!("bad rating `{}`", fields[2]))
        })?;
        if !scale.contains(rating) {
            return Err(Error::parse(
                records_path,
                line_no,
                format!(
                    "rating {} outside declared scale {}..{}",
                    rating, scale.min, scale.max
                ),
            ));
        }
        let timestamp: i64 = fields[3].parse().map_err(|_| {
            Error::parse(
                records_path,
                line_no,
                format!("bad timestamp `{}`", fields[3]),
            )
        })?;
        if timestamp < 0 {
            return Err(Error::parse(records_path, line_no, "negative timestamp"));
        }
        let record = InteractionRecord {
            user_id: fields[0].to_owned(),
            item_id: fields[1].to_owned(),
            rating,
            timestamp,
            review_text: unescape_field(fields.get(4).copied().unwrap_or_default()),
        };
        let key = (record.user_id.clone(), record.item_id.clone());
        match seen.get(&key) {
            Some(&pos) => {
                if record.timestamp >= records[pos].timestamp {
                    records[pos] = record;
                }
            }
            None => {
                seen.insert(key, records.len());
                records.push(record);
            }
        }
    }
    Ok(records)
}

/// Load interaction logs and item metadata.
///
/// Duplicate (user, item) pairs keep the record with the latest timestamp
/// (later line wins ties). Item ids appearing only in the metadata file stay
/// in the catalog.
pub fn load_interactions(
    records_path: &Path,
    meta_path: &Path,
    scale: RatingScale,
) -> Result<Dataset> {
    let mut dataset = Dataset {
        records: read_interactions_file(records_path, scale)?,
        ..Dataset::default()
    };
    for record in &dataset.records {
        dataset.users.insert(record.user_id.clone());
        dataset.items.insert(record.item_id.clone());
    }

    for (idx, line) in read_lines(meta_path)?.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (item_id, description) = match line.split_once('\t') {
            Some((id, text)) => (id.to_owned(), unescape_field(text)),
            None => (line.clone(), String::new()),
        };
        if item_id.is_empty() {
            return Err(Error::parse(meta_path, idx + 1, "empty item id"));
        }
        dataset.items.insert(item_id.clone());
        dataset.item_meta.insert(
            item_id.clone(),
            ItemMeta {
                item_id,
                description_text: description,
            },
        );
    }

    if dataset.users.is_empty() || dataset.items.is_empty() {
        return Err(Error::parse(
            records_path,
            0,
            "corpus must contain at least one user and one item",
        ));
    }
    Ok(dataset)
}

/// Write interactions in the loader's format (used to persist the train split).
pub fn write_interactions(path: &Path, records: &[InteractionRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.user_id,
            r.item_id,
            r.rating,
            r.timestamp,
            escape_field(&r.review_text)
        )
        .expect("write to string");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Write item metadata in the loader's format.
pub fn write_item_meta(path: &Path, meta: &BTreeMap<String, ItemMeta>) -> Result<()> {
    let mut out = String::new();
    for m in meta.values() {
        writeln!(out, "{}\t{}", m.item_id, escape_field(&m.description_text))
            .expect("write to string");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Load a GloVe-style word-vector file: `token v1 v2 ... vD` per line.
/// Tokens are lowercased. Every vector must have exactly `dim` components.
pub fn load_word_vectors(path: &Path, dim: usize) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new(dim);
    for (idx, line) in read_lines(path)?.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = match parts.next() {
            Some(t) => t.to_lowercase(),
            None => continue,
        };
        let values: Vec<f64> = parts
            .map(|p| {
                p.parse().map_err(|_| {
                    Error::parse(path, idx + 1, format!("bad float `{p}` for token `{token}`"))
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::VectorDim {
                token,
                expected: dim,
                found: values.len(),
            });
        }
        table.entries.insert(token, values);
    }
    Ok(table)
}

/// Load a stopword list, one token per line. An empty file is an error.
pub fn load_stopwords(path: &Path) -> Result<StopwordSet> {
    let words: HashSet<String> = read_lines(path)?
        .iter()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect();
    if words.is_empty() {
        return Err(Error::parse(path, 0, "stopword file is empty"));
    }
    Ok(StopwordSet { words })
}

/// Drop items with fewer than `min` interactions, then any user left with no
/// records. `min <= 1` is a no-op.
pub fn filter_min_interactions(dataset: &Dataset, min: usize) -> Dataset {
    if min <= 1 {
        return dataset.clone();
    }
    let mut per_item: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &dataset.records {
        *per_item.entry(r.item_id.as_str()).or_default() += 1;
    }
    let keep: BTreeSet<String> = per_item
        .iter()
        .filter(|(_, &n)| n >= min)
        .map(|(id, _)| (*id).to_owned())
        .collect();
    let records: Vec<InteractionRecord> = dataset
        .records
        .iter()
        .filter(|r| keep.contains(&r.item_id))
        .cloned()
        .collect();
    let users: BTreeSet<String> = records.iter().map(|r| r.user_id.clone()).collect();
    Dataset {
        users,
        items: keep.clone(),
        records,
        item_meta: dataset
            .item_meta
            .iter()
            .filter(|(id, _)| keep.contains(*id))
            .map(|(id, m)| (id.clone(), m.clone()))
            .collect(),
    }
}

/// Chronological split: per user, records rated above `rating_bound` are
/// sorted by (timestamp, item_id) and the last `ceil(test_fraction * count)`
/// become that user's ordered test positives, removed from the train set.
/// Negative records always stay in train. Users without positives are absent
/// from the test map.
pub fn split_train_test(
    dataset: &Dataset,
    rating_bound: f64,
    test_fraction: f64,
) -> (Dataset, BTreeMap<String, Vec<String>>) {
    assert!(
        test_fraction > 0.0 && test_fraction < 1.0,
        "test_fraction must lie in (0,1)"
    );

    let mut positives: BTreeMap<&str, Vec<&InteractionRecord>> = BTreeMap::new();
    for r in &dataset.records {
        if r.rating > rating_bound {
            positives.entry(r.user_id.as_str()).or_default().push(r);
        }
    }

    let mut held_out: HashSet<(String, String)> = HashSet::new();
    let mut test_positives: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (user, mut recs) in positives {
        recs.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| a.item_id.cmp(&b.item_id))
        });
        let n_test = ((test_fraction * recs.len() as f64).ceil() as usize).min(recs.len());
        let test_items: Vec<String> = recs[recs.len() - n_test..]
            .iter()
            .map(|r| r.item_id.clone())
            .collect();
        for item in &test_items {
            held_out.insert((user.to_owned(), item.clone()));
        }
        test_positives.insert(user.to_owned(), test_items);
    }

    let train_records: Vec<InteractionRecord> = dataset
        .records
        .iter()
        .filter(|r| !held_out.contains(&(r.user_id.clone(), r.item_id.clone())))
        .cloned()
        .collect();

    let train = Dataset {
        users: dataset.users.clone(),
        items: dataset.items.clone(),
        records: train_records,
        item_meta: dataset.item_meta.clone(),
    };
    (train, test_positives)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn load(records: &str, meta: &str) -> Result<Dataset> {
        let rf = write_tmp(records);
        let mf = write_tmp(meta);
        load_interactions(rf.path(), mf.path(), RatingScale::default())
    }

    #[test]
    fn parses_three_line_file() {
        let ds = load(
            "u1\ti1\t5\t10\tgreat item\nu1\ti2\t2\t11\t\nu2\ti1\t4\t12\tok\n",
            "i1\tfirst item\ni2\tsecond item\n",
        )
        .unwrap();
        assert_eq!(ds.user_count(), 2);
        assert_eq!(ds.item_count(), 2);
        assert_eq!(ds.records.len(), 3);
        assert_eq!(ds.item_meta["i1"].description_text, "first item");
    }

    #[test]
    fn duplicate_pair_keeps_latest_timestamp() {
        let ds = load(
            "u1\ti1\t5\t5\told\nu1\ti1\t3\t9\tnew\n",
            "i1\tdesc\n",
        )
        .unwrap();
        assert_eq!(ds.records.len(), 1);
        assert_eq!(ds.records[0].timestamp, 9);
        assert_eq!(ds.records[0].rating, 3.0);
    }

    #[test]
    fn rating_outside_scale_errors_with_line() {
        let err = load("u1\ti1\t5\t1\tok\nu1\ti2\t6\t2\tbad\n", "i1\tx\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "should name line 2: {msg}");
        assert!(msg.contains("outside declared scale"));
    }

    #[test]
    fn malformed_line_errors_with_line_number() {
        let err = load("u1\ti1\t5\t1\tok\nnot-enough-fields\n", "i1\tx\n").unwrap_err();
        assert!(err.to_string().contains(":2:"));
    }

    #[test]
    fn review_tab_escape_round_trips() {
        let original = "line with\ttab and \\ slash\nnewline";
        assert_eq!(unescape_field(&escape_field(original)), original);
        let ds = load(
            &format!("u1\ti1\t5\t1\t{}\n", escape_field(original)),
            "i1\tx\n",
        )
        .unwrap();
        assert_eq!(ds.records[0].review_text, original);
    }

    #[test]
    fn word_vectors_parse() {
        let f = write_tmp("cat 1.0 2.0\ndog 0.0 1.0\n");
        let table = load_word_vectors(f.path(), 2).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.get("cat"), Some(&[1.0, 2.0][..]));
    }

    #[test]
    fn empty_vector_file_is_valid() {
        let f = write_tmp("");
        let table = load_word_vectors(f.path(), 2).unwrap();
        assert!(table.is_empty());
        assert_eq!(table.dim(), 2);
    }

    #[test]
    fn short_vector_names_token() {
        let f = write_tmp("cat 1.0\n");
        let err = load_word_vectors(f.path(), 2).unwrap_err();
        assert!(err.to_string().contains("cat"));
    }

    #[test]
    fn stopwords_reject_empty_file() {
        let f = write_tmp("\n\n");
        assert!(load_stopwords(f.path()).is_err());
        let f = write_tmp("the\nand\n");
        let sw = load_stopwords(f.path()).unwrap();
        assert!(sw.contains("the"));
        assert_eq!(sw.len(), 2);
    }

    fn user_with_positives(n: usize) -> Dataset {
        let mut ds = Dataset::default();
        ds.users.insert("u".into());
        for i in 0..n {
            let id = format!("i{i:02}");
            ds.items.insert(id.clone());
            ds.records.push(InteractionRecord {
                user_id: "u".into(),
                item_id: id,
                rating: 5.0,
                timestamp: i as i64,
                review_text: String::new(),
            });
        }
        ds
    }

    #[test]
    fn split_takes_ceil_fraction_of_positives() {
        // 20 positives at 10% -> last 2 held out.
        let ds = user_with_positives(20);
        let (train, test) = split_train_test(&ds, 2.0, 0.10);
        assert_eq!(test["u"], vec!["i18".to_string(), "i19".to_string()]);
        assert_eq!(train.records.len(), 18);
    }

    #[test]
    fn split_single_positive_goes_to_test() {
        let ds = user_with_positives(1);
        let (train, test) = split_train_test(&ds, 2.0, 0.10);
        assert_eq!(test["u"], vec!["i00".to_string()]);
        assert!(train.records.is_empty());
    }

    #[test]
    fn split_excludes_users_without_positives() {
        let mut ds = user_with_positives(3);
        ds.users.insert("neg".into());
        ds.records.push(InteractionRecord {
            user_id: "neg".into(),
            item_id: "i00".into(),
            rating: 1.0,
            timestamp: 0,
            review_text: String::new(),
        });
        let (train, test) = split_train_test(&ds, 2.0, 0.10);
        assert!(!test.contains_key("neg"));
        assert!(train.records.iter().any(|r| r.user_id == "neg"));
    }

    #[test]
    fn split_round_trips_positive_pairs() {
        let mut ds = user_with_positives(13);
        ds.records[4].rating = 1.0; // one negative in the middle
        let (train, test) = split_train_test(&ds, 2.0, 0.25);

        let mut train_pos: Vec<(String, String)> = train
            .records
            .iter()
            .filter(|r| r.rating > 2.0)
            .map(|r| (r.user_id.clone(), r.item_id.clone()))
            .collect();
        for (u, items) in &test {
            for i in items {
                train_pos.push((u.clone(), i.clone()));
            }
        }
        train_pos.sort();
        let mut all_pos: Vec<(String, String)> = ds
            .records
            .iter()
            .filter(|r| r.rating > 2.0)
            .map(|r| (r.user_id.clone(), r.item_id.clone()))
            .collect();
        all_pos.sort();
        assert_eq!(train_pos, all_pos);

        // test positives are the newest ones
        let max_train_ts = train
            .records
            .iter()
            .filter(|r| r.rating > 2.0)
            .map(|r| r.timestamp)
            .max()
            .unwrap();
        for item in &test["u"] {
            let ts = ds
                .records
                .iter()
                .find(|r| &r.item_id == item)
                .unwrap()
                .timestamp;
            assert!(ts >= max_train_ts);
        }
    }

    #[test]
    fn min_interaction_filter_drops_sparse_items() {
        let mut ds = user_with_positives(3);
        ds.users.insert("u2".into());
        ds.records.push(InteractionRecord {
            user_id: "u2".into(),
            item_id: "i00".into(),
            rating: 4.0,
            timestamp: 9,
            review_text: String::new(),
        });
        let filtered = filter_min_interactions(&ds, 2);
        assert_eq!(filtered.items.len(), 1);
        assert!(filtered.items.contains("i00"));
        assert_eq!(filtered.records.len(), 2);
    }
}
