//! Training example stream: sampled target positions and negatives.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::NegativeSampling;
use crate::error::{Error, Result};
use crate::ingest::{UserSequence, PAD};
use crate::recent::make_window;

use super::pipeline::TrainingExample;

/// Draws `count` distinct negatives from items `1..num_items` excluding
/// `target`, uniformly without replacement.
pub fn uniform_negatives<R: Rng + ?Sized>(rng: &mut R, num_items: usize, target: usize, count: usize) -> Vec<usize> {
    debug_assert!(target != PAD && target < num_items);
    // candidates 1..num_items minus target, mapped from 0..num_items-2
    let pool = num_items - 2;
    sample(rng, pool, count)
        .into_iter()
        .map(|x| {
            let item = x + 1;
            if item >= target {
                item + 1
            } else {
                item
            }
        })
        .collect()
}

/// Log-uniform (Zipfian) proposal over popularity ranks.
#[derive(Clone, Debug)]
pub struct LogUniform {
    /// Items in descending popularity, ties by index.
    by_rank: Vec<usize>,
}

impl LogUniform {
    pub fn from_sequences<'a>(num_items: usize, sequences: impl IntoIterator<Item = &'a UserSequence>) -> Self {
        let mut counts = vec![0u64; num_items];
        for seq in sequences {
            for &i in &seq.items {
                counts[i] += 1;
            }
        }
        let mut by_rank: Vec<usize> = (1..num_items).collect();
        by_rank.sort_by(|&x, &y| counts[y].cmp(&counts[x]).then(x.cmp(&y)));
        Self { by_rank }
    }

    /// `P(r) = ln((r + 2) / (r + 1)) / ln(n + 1)` for rank `r` in `0..n`.
    fn draw_rank<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let n = self.by_rank.len() as f64;
        let u: f64 = rng.gen();
        let r = ((n + 1.0).powf(u) - 1.0).floor() as usize;
        r.min(self.by_rank.len() - 1)
    }

    pub fn negatives<R: Rng + ?Sized>(&self, rng: &mut R, target: usize, count: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(count);
        let mut seen = std::collections::HashSet::with_capacity(count + 1);
        seen.insert(target);
        // rejection sampling; fall back to uniform fill when the pool is nearly exhausted
        let mut attempts = 0;
        while out.len() < count && attempts < 64 * (count + 1) {
            let item = self.by_rank[self.draw_rank(rng)];
            if seen.insert(item) {
                out.push(item);
            }
            attempts += 1;
        }
        if out.len() < count {
            let mut rest: Vec<usize> = self.by_rank.iter().copied().filter(|i| !seen.contains(i)).collect();
            rest.shuffle(rng);
            out.extend(rest.into_iter().take(count - out.len()));
        }
        out
    }
}

/// Endless stream of examples. Users are visited in a shuffled order that is
/// reshuffled after every pass; each visit draws one target position
/// uniformly from 2..=N (1-based) and uses the items before it as the window.
pub struct ExampleSampler<'a> {
    sequences: Vec<&'a UserSequence>,
    num_items: usize,
    l_rec: usize,
    neg_samples: usize,
    log_uniform: Option<LogUniform>,
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl<'a> ExampleSampler<'a> {
    pub fn new(
        sequences: Vec<&'a UserSequence>,
        num_items: usize,
        l_rec: usize,
        neg_samples: usize,
        sampling: NegativeSampling,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let sequences: Vec<&UserSequence> = sequences.into_iter().filter(|s| s.len() >= 2).collect();
        if sequences.is_empty() {
            return Err(Error::DatasetTooSparse("no training user has two or more interactions".into()));
        }
        if num_items < 2 || neg_samples > num_items - 2 {
            return Err(Error::Config {
                key: "neg_samples".into(),
                reason: format!("{neg_samples} negatives requested but only {} non-target items exist", num_items.saturating_sub(2)),
            });
        }
        let log_uniform = match sampling {
            NegativeSampling::Uniform => None,
            NegativeSampling::LogUniform => Some(LogUniform::from_sequences(num_items, sequences.iter().copied())),
        };
        let order = (0..sequences.len()).collect();
        Ok(Self {
            sequences,
            num_items,
            l_rec,
            neg_samples,
            log_uniform,
            order,
            cursor: usize::MAX,
            rng,
        })
    }

    fn next_user(&mut self) -> &'a UserSequence {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let seq = self.sequences[self.order[self.cursor]];
        self.cursor += 1;
        seq
    }

    pub fn next_example(&mut self) -> TrainingExample {
        let seq = self.next_user();
        // 1-based target position p in 2..=N sits at index p-1
        let p = self.rng.gen_range(2..=seq.len());
        let target = seq.items[p - 1];
        let window = make_window(seq, p - 1, self.l_rec).expect("p >= 2 gives a nonempty window");
        let negatives = match &self.log_uniform {
            None => uniform_negatives(&mut self.rng, self.num_items, target, self.neg_samples),
            Some(lu) => lu.negatives(&mut self.rng, target, self.neg_samples),
        };
        TrainingExample {
            user: seq.user,
            window,
            target,
            negatives,
        }
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<TrainingExample> {
        (0..size).map(|_| self.next_example()).collect()
    }
}

impl Iterator for ExampleSampler<'_> {
    type Item = TrainingExample;

    fn next(&mut self) -> Option<TrainingExample> {
        Some(self.next_example())
    }
}
