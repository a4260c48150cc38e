//! Interaction log parsing, filtering, dense indexing and user splits.

mod bundle;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

pub use bundle::{read_bundle, write_bundle, SEQUENCES_MAGIC};

/// Minimum interactions a user or item needs to survive filtering.
pub const MIN_INTERACTIONS: usize = 5;

/// Item index reserved for padding. No real item ever maps to it.
pub const PAD: usize = 0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionRecord {
    pub user_id: String,
    pub item_id: String,
    pub timestamp: i64,
}

#[derive(Clone, Debug)]
pub struct LogFormat {
    pub delimiter: char,
    pub user_col: usize,
    pub item_col: usize,
    pub timestamp_col: usize,
    pub skip_header: bool,
}

impl Default for LogFormat {
    fn default() -> Self {
        Self {
            delimiter: ',',
            user_col: 0,
            item_col: 1,
            timestamp_col: 2,
            skip_header: false,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParseReport {
    pub records: Vec<InteractionRecord>,
    pub rejects: usize,
    /// 1-based line numbers of the first rejected lines (capped).
    pub rejected_lines: Vec<usize>,
}

const MAX_REPORTED_REJECTS: usize = 100;

pub fn parse_log(path: &Path, format: &LogFormat) -> Result<ParseReport> {
    let file = File::open(path).with_path(path)?;
    parse_reader(BufReader::new(file), format).with_path(path)
}

pub fn parse_reader<R: BufRead>(reader: R, format: &LogFormat) -> std::io::Result<ParseReport> {
    let mut report = ParseReport::default();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if n == 0 && format.skip_header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line, format) {
            Some(rec) => report.records.push(rec),
            None => {
                report.rejects += 1;
                if report.rejected_lines.len() < MAX_REPORTED_REJECTS {
                    report.rejected_lines.push(n + 1);
                }
            }
        }
    }
    Ok(report)
}

fn parse_line(line: &str, format: &LogFormat) -> Option<InteractionRecord> {
    let fields: Vec<&str> = line.split(format.delimiter).map(str::trim).collect();
    let user = *fields.get(format.user_col)?;
    let item = *fields.get(format.item_col)?;
    let ts = fields.get(format.timestamp_col)?.parse::<i64>().ok()?;
    if user.is_empty() || item.is_empty() {
        return None;
    }
    Some(InteractionRecord {
        user_id: user.to_owned(),
        item_id: item.to_owned(),
        timestamp: ts,
    })
}

/// One user's interactions in chronological order, using dense item indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserSequence {
    pub user: usize,
    pub items: Vec<usize>,
    pub timestamps: Vec<i64>,
}

impl UserSequence {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Bidirectional map between raw string ids and dense indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    raw: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Vocabulary whose index 0 is reserved (items).
    pub fn with_padding() -> Self {
        Self {
            raw: vec![String::new()],
            index: HashMap::new(),
        }
    }

    fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.raw.len();
        self.raw.push(id.to_owned());
        self.index.insert(id.to_owned(), i);
        i
    }

    pub(crate) fn from_raw(raw: Vec<String>, padded: bool) -> Self {
        let index = raw
            .iter()
            .enumerate()
            .skip(usize::from(padded))
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Self { raw, index }
    }

    /// Number of slots, including the padding slot if present.
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, raw_id: &str) -> Option<usize> {
        self.index.get(raw_id).copied()
    }

    pub fn raw(&self, index: usize) -> Option<&str> {
        self.raw.get(index).map(String::as_str).filter(|s| !s.is_empty())
    }

    pub(crate) fn raw_ids(&self) -> &[String] {
        &self.raw
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

/// A prepared dataset: filtered sequences plus vocabularies and the split.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Indexed by dense user index.
    pub sequences: Vec<UserSequence>,
    pub items: Vocab,
    pub users: Vocab,
    pub split: DatasetSplit,
}

impl Dataset {
    /// Number of item slots including padding.
    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn select(&self, users: &[usize]) -> Vec<&UserSequence> {
        users.iter().map(|&u| &self.sequences[u]).collect()
    }

    pub fn train_sequences(&self) -> Vec<&UserSequence> {
        self.select(&self.split.train)
    }
}

/// Removes illegal timestamps, then iteratively drops users and items with
/// fewer than [`MIN_INTERACTIONS`] interactions until nothing changes.
/// Survivors are indexed by first appearance (items from 1, users from 0) and
/// each user's records are stably sorted by timestamp.
pub fn filter_and_index(records: &[InteractionRecord]) -> Result<(Vec<UserSequence>, Vocab, Vocab)> {
    let mut keep: Vec<&InteractionRecord> = records.iter().filter(|r| r.timestamp > 0).collect();
    loop {
        let mut user_counts: HashMap<&str, usize> = HashMap::new();
        let mut item_counts: HashMap<&str, usize> = HashMap::new();
        for r in &keep {
            *user_counts.entry(&r.user_id).or_default() += 1;
            *item_counts.entry(&r.item_id).or_default() += 1;
        }
        let before = keep.len();
        keep.retain(|r| {
            user_counts[r.user_id.as_str()] >= MIN_INTERACTIONS
                && item_counts[r.item_id.as_str()] >= MIN_INTERACTIONS
        });
        if keep.len() == before {
            break;
        }
    }
    if keep.is_empty() {
        return Err(Error::DatasetTooSparse(format!(
            "no interactions left after requiring {MIN_INTERACTIONS} per user and item"
        )));
    }

    let mut items = Vocab::with_padding();
    let mut users = Vocab::default();
    let mut sequences: Vec<UserSequence> = Vec::new();
    for r in keep {
        let item = items.intern(&r.item_id);
        let user = users.intern(&r.user_id);
        if user == sequences.len() {
            sequences.push(UserSequence {
                user,
                items: Vec::new(),
                timestamps: Vec::new(),
            });
        }
        sequences[user].items.push(item);
        sequences[user].timestamps.push(r.timestamp);
    }
    for seq in &mut sequences {
        let mut order: Vec<usize> = (0..seq.len()).collect();
        order.sort_by_key(|&i| seq.timestamps[i]);
        seq.items = order.iter().map(|&i| seq.items[i]).collect();
        seq.timestamps = order.iter().map(|&i| seq.timestamps[i]).collect();
    }
    Ok((sequences, items, users))
}

/// Partition sizes for `n` users: train = ⌈0.8n⌉, valid = ⌊0.1n⌋, test = rest.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (8 * n).div_ceil(10);
    let valid = n / 10;
    (train, valid, n - train - valid)
}

/// Deterministic shuffled 8:1:1 partition of users, rounding toward train.
pub fn split_users(sequences: &[UserSequence], seed: u64) -> Result<DatasetSplit> {
    if sequences.len() < 10 {
        return Err(Error::DatasetTooSparse(format!(
            "need at least 10 users to split, have {}",
            sequences.len()
        )));
    }
    let mut users: Vec<usize> = sequences.iter().map(|s| s.user).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    users.shuffle(&mut rng);
    let (n_train, n_valid, _) = split_sizes(users.len());
    let mut train = users[..n_train].to_vec();
    let mut valid = users[n_train..n_train + n_valid].to_vec();
    let mut test = users[n_train + n_valid..].to_vec();
    train.sort_unstable();
    valid.sort_unstable();
    test.sort_unstable();
    Ok(DatasetSplit {
        seed,
        train,
        valid,
        test,
    })
}

/// `filter_and_index` followed by `split_users`.
pub fn prepare(records: &[InteractionRecord], seed: u64) -> Result<Dataset> {
    let (sequences, items, users) = filter_and_index(records)?;
    let split = split_users(&sequences, seed)?;
    Ok(Dataset {
        sequences,
        items,
        users,
        split,
    })
}
