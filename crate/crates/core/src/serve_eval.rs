//! Exact top-N retrieval from a user's interests and Recall/NDCG/HitRate.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gce::global_embeddings;
use crate::ingest::{UserSequence, PAD};
use crate::interests::InterestMatrix;
use crate::recent::make_window;
use crate::scalar::{dot, Scalar};
use crate::sparse::CsrMatrix;
use crate::tensor::Mat;
use crate::train::{encode, ModelConfig, ModelParams};

/// Cutoffs reported by default.
pub const DEFAULT_CUTOFFS: [usize; 2] = [20, 50];

/// Interests of a user given the first `prefix_len` interactions.
pub fn infer_interests<T: Scalar>(
    seq: &UserSequence,
    prefix_len: usize,
    params: &ModelParams<T>,
    e_global: &Mat<T>,
    cfg: &ModelConfig,
) -> Result<InterestMatrix<T>> {
    let window = make_window(seq, prefix_len, cfg.dims.l_rec)?;
    Ok(encode(&window, &params.encoder, cfg, e_global, None)?.interests)
}

/// Score of every item: the best inner product over interests.
pub fn item_scores<T: Scalar>(interests: &Mat<T>, e_global: &Mat<T>) -> Vec<T> {
    (0..e_global.rows())
        .map(|x| {
            let row = e_global.row(x);
            (0..interests.rows())
                .map(|k| dot(interests.row(k), row))
                .fold(T::neg_infinity(), |a, b| if b > a { b } else { a })
        })
        .collect()
}

/// Top `n` items by score, descending, ties by smaller index. Padding and
/// `exclude` never appear.
pub fn top_n_by_scores<T: Scalar>(scores: &[T], n: usize, exclude: &HashSet<usize>) -> Vec<usize> {
    let mut cands: Vec<usize> = (0..scores.len()).filter(|&x| x != PAD && !exclude.contains(&x)).collect();
    let cmp = |a: &usize, b: &usize| scores[*b].partial_cmp(&scores[*a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(b));
    let n = n.min(cands.len());
    if n == 0 {
        return Vec::new();
    }
    if n < cands.len() {
        cands.select_nth_unstable_by(n - 1, cmp);
        cands.truncate(n);
    }
    cands.sort_by(cmp);
    cands
}

/// Exact retrieval: `score(x) = max_k e_x · interest_k`.
pub fn top_n<T: Scalar>(interests: &Mat<T>, e_global: &Mat<T>, n: usize, exclude: &HashSet<usize>) -> Vec<usize> {
    top_n_by_scores(&item_scores(interests, e_global), n, exclude)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub recall: f64,
    pub ndcg: f64,
    pub hit_rate: f64,
}

/// Binary-relevance metrics of one ranked list; IDCG runs over
/// `min(n, |G|)` slots.
pub fn metrics(recommended: &[usize], ground_truth: &HashSet<usize>, n: usize) -> Metrics {
    assert!(!ground_truth.is_empty(), "empty ground truth");
    let mut hits = 0usize;
    let mut dcg = 0.0;
    for (r, item) in recommended.iter().take(n).enumerate() {
        if ground_truth.contains(item) {
            hits += 1;
            dcg += 1.0 / ((r + 2) as f64).log2();
        }
    }
    let idcg: f64 = (0..n.min(ground_truth.len())).map(|r| 1.0 / ((r + 2) as f64).log2()).sum();
    Metrics {
        recall: hits as f64 / ground_truth.len() as f64,
        ndcg: if idcg > 0.0 { dcg / idcg } else { 0.0 },
        hit_rate: if hits > 0 { 1.0 } else { 0.0 },
    }
}

/// Prefix length (floor of 80%) and ground-truth set, or `None` when the
/// user cannot be evaluated.
pub fn holdout(seq: &UserSequence) -> Option<(usize, HashSet<usize>)> {
    let prefix = seq.len() * 8 / 10;
    if prefix < 1 || prefix >= seq.len() {
        return None;
    }
    Some((prefix, seq.items[prefix..].iter().copied().collect()))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Users with a nonempty prefix and ground truth.
    pub users: usize,
    /// Mean metrics keyed by cutoff.
    pub at: BTreeMap<usize, Metrics>,
}

impl MetricsReport {
    pub fn get(&self, n: usize) -> Metrics {
        self.at.get(&n).copied().unwrap_or_default()
    }

    pub fn recall(&self, n: usize) -> f64 {
        self.get(n).recall
    }

    /// `R@20=0.1234 N@20=... H@20=...` for every cutoff.
    pub fn summary(&self) -> String {
        self.at
            .iter()
            .map(|(n, m)| format!("R@{n}={:.4} N@{n}={:.4} H@{n}={:.4}", m.recall, m.ndcg, m.hit_rate))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Anything that ranks candidate items for a user prefix.
pub trait Ranker: Sync {
    fn rank(&self, seq: &UserSequence, prefix_len: usize, n: usize, exclude: &HashSet<usize>) -> Result<Vec<usize>>;
}

/// Evaluates a ranker over users; per-user work runs in parallel and the
/// mean is summed in user order.
pub fn evaluate_ranker<R: Ranker + ?Sized>(users: &[&UserSequence], ranker: &R, cutoffs: &[usize]) -> Result<MetricsReport> {
    let max_n = cutoffs.iter().copied().max().unwrap_or(0);
    let per_user: Vec<Option<Vec<Metrics>>> = users
        .par_iter()
        .map(|seq| {
            let Some((prefix, truth)) = holdout(seq) else {
                return Ok(None);
            };
            let exclude: HashSet<usize> = seq.items[..prefix].iter().copied().collect();
            let ranked = ranker.rank(seq, prefix, max_n, &exclude)?;
            Ok(Some(cutoffs.iter().map(|&n| metrics(&ranked, &truth, n)).collect()))
        })
        .collect::<Result<_>>()?;

    let mut sums = vec![Metrics::default(); cutoffs.len()];
    let mut count = 0usize;
    for ms in per_user.into_iter().flatten() {
        count += 1;
        for (s, m) in sums.iter_mut().zip(ms) {
            s.recall += m.recall;
            s.ndcg += m.ndcg;
            s.hit_rate += m.hit_rate;
        }
    }
    let denom = count.max(1) as f64;
    let at = cutoffs
        .iter()
        .zip(sums)
        .map(|(&n, s)| {
            (
                n,
                Metrics {
                    recall: s.recall / denom,
                    ndcg: s.ndcg / denom,
                    hit_rate: s.hit_rate / denom,
                },
            )
        })
        .collect();
    Ok(MetricsReport { users: count, at })
}

/// The trained model with precomputed global embeddings.
pub struct ModelRanker<'a, T> {
    pub params: &'a ModelParams<T>,
    pub e_global: Mat<T>,
    pub cfg: ModelConfig,
}

impl<'a, T: Scalar> ModelRanker<'a, T> {
    pub fn new(params: &'a ModelParams<T>, a_norm: &CsrMatrix<T>, cfg: ModelConfig) -> Self {
        Self {
            params,
            e_global: global_embeddings(a_norm, &params.item_table),
            cfg,
        }
    }
}

impl<T: Scalar> Ranker for ModelRanker<'_, T> {
    fn rank(&self, seq: &UserSequence, prefix_len: usize, n: usize, exclude: &HashSet<usize>) -> Result<Vec<usize>> {
        let im = infer_interests(seq, prefix_len, self.params, &self.e_global, &self.cfg)?;
        Ok(top_n(&im.vectors, &self.e_global, n, exclude))
    }
}

pub fn evaluate<T: Scalar>(
    users: &[&UserSequence],
    params: &ModelParams<T>,
    a_norm: &CsrMatrix<T>,
    cfg: &ModelConfig,
    cutoffs: &[usize],
) -> Result<MetricsReport> {
    evaluate_ranker(users, &ModelRanker::new(params, a_norm, *cfg), cutoffs)
}

/// Ranks by interaction count in the given sequences.
pub struct PopularityRanker {
    counts: Vec<f64>,
}

impl PopularityRanker {
    pub fn new<'a>(num_items: usize, sequences: impl IntoIterator<Item = &'a UserSequence>) -> Self {
        let mut counts = vec![0.0; num_items];
        for s in sequences {
            for &i in &s.items {
                counts[i] += 1.0;
            }
        }
        Self { counts }
    }
}

impl Ranker for PopularityRanker {
    fn rank(&self, _: &UserSequence, _: usize, n: usize, exclude: &HashSet<usize>) -> Result<Vec<usize>> {
        Ok(top_n_by_scores(&self.counts, n, exclude))
    }
}

/// Uniformly random ranking, seeded per user.
pub struct RandomRanker {
    pub num_items: usize,
    pub seed: u64,
}

impl Ranker for RandomRanker {
    fn rank(&self, seq: &UserSequence, _: usize, n: usize, exclude: &HashSet<usize>) -> Result<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (seq.user as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut cands: Vec<usize> = (1..self.num_items).filter(|x| !exclude.contains(x)).collect();
        let (picked, _) = cands.partial_shuffle(&mut rng, n);
        Ok(picked.to_vec())
    }
}
