//! Recent window, pairwise interval matrix and interval-aware attention.

use crate::error::{Error, Result};
use crate::ingest::{UserSequence, PAD};
use crate::scalar::{axpy, dot, masked_softmax_inplace, softmax_backward, Scalar};
use crate::tensor::Mat;

/// Fixed-length, left-padded history preceding a target position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecentWindow {
    pub items: Vec<usize>,
    pub timestamps: Vec<i64>,
    pub mask: Vec<bool>,
}

impl RecentWindow {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn real_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Index of the first real slot (real slots form a suffix).
    pub fn first_real(&self) -> usize {
        self.len() - self.real_count()
    }
}

/// The up-to-`l_rec` items strictly before `end_pos`, left-padded with
/// [`PAD`]. Pad slots copy the earliest real timestamp.
pub fn make_window(seq: &UserSequence, end_pos: usize, l_rec: usize) -> Result<RecentWindow> {
    if end_pos == 0 {
        return Err(Error::EmptyWindow);
    }
    if end_pos > seq.len() {
        return Err(Error::InvalidArgument(format!(
            "end position {end_pos} beyond sequence of length {}",
            seq.len()
        )));
    }
    let start = end_pos.saturating_sub(l_rec);
    let real = end_pos - start;
    let pad = l_rec - real;
    let earliest = seq.timestamps[start];
    let mut items = vec![PAD; pad];
    let mut timestamps = vec![earliest; pad];
    let mut mask = vec![false; pad];
    items.extend_from_slice(&seq.items[start..end_pos]);
    timestamps.extend_from_slice(&seq.timestamps[start..end_pos]);
    mask.extend(std::iter::repeat(true).take(real));
    Ok(RecentWindow {
        items,
        timestamps,
        mask,
    })
}

/// Pairwise clamped intervals in time units.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalMatrix {
    n: usize,
    l_time: usize,
    values: Vec<f64>,
}

impl IntervalMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn l_time(&self) -> usize {
        self.l_time
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Integer lookup bucket in `0..=l_time`.
    pub fn bucket(&self, i: usize, j: usize) -> usize {
        (self.get(i, j).floor() as usize).min(self.l_time)
    }
}

pub fn interval_matrix(window: &RecentWindow, l_time: usize, time_unit_seconds: i64) -> IntervalMatrix {
    let n = window.len();
    let cap = l_time as f64;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = if i == j {
                0.0
            } else if window.mask[i] && window.mask[j] {
                let dt = (window.timestamps[j] - window.timestamps[i]).unsigned_abs() as f64
                    / time_unit_seconds as f64;
                dt.min(cap)
            } else {
                cap
            };
        }
    }
    IntervalMatrix { n, l_time, values }
}

/// Intermediates kept for the backward pass.
#[derive(Clone, Debug)]
pub struct IntervalAttention<T> {
    /// `E_time`, one row per window slot (padding rows zero).
    pub output: Mat<T>,
    /// Attention rows `S1`; padding rows and columns are zero.
    pub scores: Mat<T>,
    buckets: Vec<usize>,
    mask: Vec<bool>,
}

/// `S1[i] = softmax_j(table[bucket(i,j)] · w1)` over real `j`, and
/// `E_time[i] = Σ_j S1[i][j] · table[bucket(i,j)]`.
pub fn interval_attention<T: Scalar>(
    intervals: &IntervalMatrix,
    mask: &[bool],
    interval_table: &Mat<T>,
    w1: &[T],
) -> IntervalAttention<T> {
    let n = intervals.len();
    let d = interval_table.cols();
    assert_eq!(interval_table.rows(), intervals.l_time() + 1, "interval table rows");
    assert_eq!(w1.len(), d, "w1 length");
    let bucket_score: Vec<T> = (0..interval_table.rows())
        .map(|b| dot(interval_table.row(b), w1))
        .collect();
    let buckets: Vec<usize> = (0..n * n).map(|x| intervals.bucket(x / n, x % n)).collect();

    let mut output = Mat::zeros(n, d);
    let mut scores = Mat::zeros(n, n);
    for i in (0..n).filter(|&i| mask[i]) {
        let row = scores.row_mut(i);
        for j in 0..n {
            row[j] = bucket_score[buckets[i * n + j]];
        }
        masked_softmax_inplace(row, |j| mask[j]);
        let out = output.row_mut(i);
        for j in (0..n).filter(|&j| mask[j]) {
            axpy(scores.get(i, j), interval_table.row(buckets[i * n + j]), out);
        }
    }
    IntervalAttention {
        output,
        scores,
        buckets,
        mask: mask.to_vec(),
    }
}

impl<T: Scalar> IntervalAttention<T> {
    /// Accumulates gradients of the interval table and `w1` given `dE_time`.
    pub fn backward(
        &self,
        d_output: &Mat<T>,
        interval_table: &Mat<T>,
        w1: &[T],
        d_table: &mut Mat<T>,
        d_w1: &mut [T],
    ) {
        let n = self.mask.len();
        let mut d_bucket_score = vec![T::zero(); interval_table.rows()];
        let mut dp = vec![T::zero(); n];
        let mut p = vec![T::zero(); n];
        for i in (0..n).filter(|&i| self.mask[i]) {
            let g = d_output.row(i);
            let real: Vec<usize> = (0..n).filter(|&j| self.mask[j]).collect();
            for (slot, &j) in real.iter().enumerate() {
                let b = self.buckets[i * n + j];
                let s = self.scores.get(i, j);
                dp[slot] = dot(g, interval_table.row(b));
                p[slot] = s;
                axpy(s, g, d_table.row_mut(b));
            }
            let ds = softmax_backward(&p[..real.len()], &dp[..real.len()]);
            for (slot, &j) in real.iter().enumerate() {
                d_bucket_score[self.buckets[i * n + j]] += ds[slot];
            }
        }
        for (b, &g) in d_bucket_score.iter().enumerate() {
            if g != T::zero() {
                axpy(g, w1, d_table.row_mut(b));
                axpy(g, interval_table.row(b), d_w1);
            }
        }
    }
}
