//! End-to-end forward and reverse-mode backward for one training example.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::aggregate::{aggregate_backward, aggregate_layers, hybrid_embeddings, AggregateConfig, Aggregation, Dropout};
use crate::config::HyperParams;
use crate::error::{Error, Result};
use crate::ingest::PAD;
use crate::interests::{extract_interests, extract_interests_backward, select_training_interest, InterestMatrix};
use crate::recent::{interval_attention, interval_matrix, IntervalAttention, RecentWindow};
use crate::scalar::{axpy, dot, log_sum_exp, Scalar};
use crate::sparse::CsrMatrix;
use crate::tensor::Mat;

use super::params::{EncoderParams, ModelDims, ModelParams};

/// Static configuration of the forward pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub dims: ModelDims,
    pub time_unit_seconds: i64,
    pub residual: bool,
    /// Attention-probability dropout; only applied when a dropout RNG is
    /// passed to the forward pass.
    pub dropout: f64,
}

impl ModelConfig {
    pub fn from_hyper(hp: &HyperParams, num_items: usize) -> Self {
        Self {
            dims: ModelDims::from_hyper(hp, num_items),
            time_unit_seconds: hp.time_unit_seconds,
            residual: hp.residual,
            dropout: hp.dropout,
        }
    }

    fn aggregate(&self) -> AggregateConfig {
        AggregateConfig {
            heads: self.dims.heads,
            residual: self.residual,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingExample {
    pub user: usize,
    pub window: RecentWindow,
    pub target: usize,
    pub negatives: Vec<usize>,
}

/// Read access to rows of `E_global`.
pub trait GlobalRows<T> {
    fn global_row(&self, item: usize) -> &[T];
}

impl<T: Scalar> GlobalRows<T> for Mat<T> {
    fn global_row(&self, item: usize) -> &[T] {
        self.row(item)
    }
}

/// A subset of `E_global` rows computed on demand from `A · E_item`.
#[derive(Clone, Debug)]
pub struct GatheredRows<T> {
    index: HashMap<usize, usize>,
    rows: Mat<T>,
}

impl<T: Scalar> GatheredRows<T> {
    pub fn gather(a_norm: &CsrMatrix<T>, item_table: &Mat<T>, items: impl IntoIterator<Item = usize>) -> Self {
        let wanted: BTreeSet<usize> = items.into_iter().collect();
        let mut rows = Mat::zeros(wanted.len(), item_table.cols());
        let mut index = HashMap::with_capacity(wanted.len());
        for (slot, &item) in wanted.iter().enumerate() {
            a_norm.row_times_dense(item, item_table, rows.row_mut(slot));
            index.insert(item, slot);
        }
        Self { index, rows }
    }

    /// Rows needed by a set of examples.
    pub fn for_examples<'a>(
        a_norm: &CsrMatrix<T>,
        item_table: &Mat<T>,
        examples: impl IntoIterator<Item = &'a TrainingExample>,
    ) -> Self {
        let mut items = Vec::new();
        for ex in examples {
            items.extend(ex.window.items.iter().copied().filter(|&i| i != PAD));
            items.push(ex.target);
            items.extend_from_slice(&ex.negatives);
        }
        Self::gather(a_norm, item_table, items)
    }
}

impl<T: Scalar> GlobalRows<T> for GatheredRows<T> {
    fn global_row(&self, item: usize) -> &[T] {
        let slot = *self
            .index
            .get(&item)
            .unwrap_or_else(|| panic!("global row {item} was not gathered"));
        self.rows.row(slot)
    }
}

/// Forward trace of the sequence encoder (everything up to the interests).
#[derive(Clone, Debug)]
pub struct Encoding<T> {
    pub mask: Vec<bool>,
    pub items: Vec<usize>,
    pub global_rows: Mat<T>,
    pub interval: IntervalAttention<T>,
    pub hybrid: Mat<T>,
    pub aggregation: Aggregation<T>,
    pub interests: InterestMatrix<T>,
}

/// Window → global rows, interval attention, hybrid, aggregation, interests.
pub fn encode<T: Scalar, G: GlobalRows<T> + ?Sized>(
    window: &RecentWindow,
    params: &EncoderParams<T>,
    cfg: &ModelConfig,
    globals: &G,
    dropout: Option<&mut Dropout<'_>>,
) -> Result<Encoding<T>> {
    let d = cfg.dims.d;
    let n = window.len();
    let mut global_rows = Mat::zeros(n, d);
    for i in (0..n).filter(|&i| window.mask[i]) {
        global_rows.row_mut(i).copy_from_slice(globals.global_row(window.items[i]));
    }
    let intervals = interval_matrix(window, cfg.dims.l_time, cfg.time_unit_seconds);
    let interval = interval_attention(&intervals, &window.mask, &params.interval_table, params.w1.as_slice());
    let hybrid = hybrid_embeddings(&global_rows, &interval.output, &window.mask);
    let aggregation = aggregate_layers(
        &hybrid,
        &global_rows,
        &window.mask,
        &params.layers,
        cfg.aggregate(),
        dropout,
    )?;
    let interests = extract_interests(&aggregation.items, &params.w2, &params.w3, &window.mask);
    Ok(Encoding {
        mask: window.mask.clone(),
        items: window.items.clone(),
        global_rows,
        interval,
        hybrid,
        aggregation,
        interests,
    })
}

/// Forward trace of the sampled-softmax loss.
#[derive(Clone, Debug)]
pub struct LossTrace<T> {
    pub encoding: Encoding<T>,
    /// Interest chosen by the target (argmax).
    pub selected: usize,
    /// Logits `[o·e_target, o·e_neg_1, ...]`.
    pub logits: Vec<T>,
    pub loss: T,
    /// Target then negative global rows.
    candidates: Vec<(usize, Vec<T>)>,
}

/// `−log softmax(o·e_target | o·e_target, o·e_neg…)` with the interest `o`
/// selected by argmax against the target's global embedding.
pub fn forward_loss<T: Scalar, G: GlobalRows<T> + ?Sized>(
    ex: &TrainingExample,
    params: &EncoderParams<T>,
    cfg: &ModelConfig,
    globals: &G,
    dropout: Option<&mut Dropout<'_>>,
) -> Result<LossTrace<T>> {
    let encoding = encode(&ex.window, params, cfg, globals, dropout)?;
    let target_row = globals.global_row(ex.target).to_vec();
    let (selected, o) = select_training_interest(&encoding.interests.vectors, &target_row);
    let mut candidates = Vec::with_capacity(1 + ex.negatives.len());
    candidates.push((ex.target, target_row));
    for &neg in &ex.negatives {
        candidates.push((neg, globals.global_row(neg).to_vec()));
    }
    let logits: Vec<T> = candidates.iter().map(|(_, row)| dot(&o, row)).collect();
    let loss = log_sum_exp(&logits) - logits[0];
    Ok(LossTrace {
        encoding,
        selected,
        logits,
        loss,
        candidates,
    })
}

/// Gradients of a batch before the item-table adjoint is applied.
#[derive(Clone, Debug)]
pub struct GradAccumulator<T> {
    pub encoder: EncoderParams<T>,
    /// `∂loss/∂E_global`, sparse by item.
    pub global: BTreeMap<usize, Vec<T>>,
    pub loss_sum: T,
    pub examples: usize,
}

impl<T: Scalar> GradAccumulator<T> {
    pub fn new(dims: &ModelDims) -> Self {
        Self {
            encoder: EncoderParams::zeros(dims),
            global: BTreeMap::new(),
            loss_sum: T::zero(),
            examples: 0,
        }
    }

    fn add_global(&mut self, item: usize, g: &[T]) {
        let d = g.len();
        axpy(T::one(), g, self.global.entry(item).or_insert_with(|| vec![T::zero(); d]));
    }

    /// Adds another accumulator (in call order, for reproducible sums).
    pub fn merge(&mut self, other: Self) {
        self.encoder.add_assign(&other.encoder);
        for (item, g) in other.global {
            self.add_global(item, &g);
        }
        self.loss_sum += other.loss_sum;
        self.examples += other.examples;
    }

    /// Full parameter gradient: scales by `scale`, applies `Aᵀ` to the
    /// global-row gradients to reach the item table, and zeroes the padding
    /// row.
    pub fn finalize(self, a_norm: &CsrMatrix<T>, num_items: usize, scale: T) -> Result<ModelParams<T>> {
        let d = self.encoder.interval_table.cols();
        let mut item_table = Mat::zeros(num_items, d);
        for (item, g) in &self.global {
            a_norm.scatter_row_transpose(*item, g, &mut item_table);
        }
        item_table.row_mut(PAD).iter_mut().for_each(|v| *v = T::zero());
        let mut grads = ModelParams {
            item_table,
            encoder: self.encoder,
        };
        for (name, m) in grads.tensors_mut() {
            m.scale(scale);
            if !m.is_finite() {
                return Err(Error::NonFiniteGradient(name));
            }
        }
        Ok(grads)
    }
}

/// Reverse pass for one example, accumulated into `acc`.
pub fn backward<T: Scalar>(trace: &LossTrace<T>, params: &EncoderParams<T>, cfg: &ModelConfig, acc: &mut GradAccumulator<T>) {
    let enc = &trace.encoding;
    let d = cfg.dims.d;

    // sampled softmax
    let lse = log_sum_exp(&trace.logits);
    let mut d_logits: Vec<T> = trace.logits.iter().map(|&z| (z - lse).exp()).collect();
    d_logits[0] -= T::one();
    let o = enc.interests.vectors.row(trace.selected).to_vec();
    let mut d_o = vec![T::zero(); d];
    for ((item, row), &g) in trace.candidates.iter().zip(&d_logits) {
        axpy(g, row, &mut d_o);
        let contrib: Vec<T> = o.iter().map(|&v| v * g).collect();
        acc.add_global(*item, &contrib);
    }

    // only the selected interest receives gradient
    let mut d_interests = Mat::zeros(enc.interests.k(), d);
    d_interests.row_mut(trace.selected).copy_from_slice(&d_o);
    let d_eu = extract_interests_backward(
        &enc.interests,
        &enc.aggregation.items,
        &params.w2,
        &params.w3,
        &d_interests,
        &mut acc.encoder.w2,
        &mut acc.encoder.w3,
    );

    let agg = aggregate_backward(&enc.aggregation, &params.layers, cfg.aggregate(), &d_eu, &mut acc.encoder.layers);

    // hybrid = global + E_time
    enc.interval.backward(
        &agg.hybrid,
        &params.interval_table,
        params.w1.as_slice(),
        &mut acc.encoder.interval_table,
        acc.encoder.w1.as_mut_slice(),
    );
    for i in (0..enc.mask.len()).filter(|&i| enc.mask[i]) {
        let mut g = agg.global_rows.row(i).to_vec();
        axpy(T::one(), agg.hybrid.row(i), &mut g);
        acc.add_global(enc.items[i], &g);
    }
    acc.loss_sum += trace.loss;
    acc.examples += 1;
}

/// Loss of one example without dropout.
pub fn loss<T: Scalar>(ex: &TrainingExample, params: &ModelParams<T>, a_norm: &CsrMatrix<T>, cfg: &ModelConfig) -> Result<T> {
    let globals = GatheredRows::for_examples(a_norm, &params.item_table, [ex]);
    Ok(forward_loss(ex, &params.encoder, cfg, &globals, None)?.loss)
}

/// Exact gradients of one example's loss (dropout off) for every tensor.
pub fn gradients<T: Scalar>(
    ex: &TrainingExample,
    params: &ModelParams<T>,
    a_norm: &CsrMatrix<T>,
    cfg: &ModelConfig,
) -> Result<(T, ModelParams<T>)> {
    let globals = GatheredRows::for_examples(a_norm, &params.item_table, [ex]);
    let trace = forward_loss(ex, &params.encoder, cfg, &globals, None)?;
    let mut acc = GradAccumulator::new(&cfg.dims);
    backward(&trace, &params.encoder, cfg, &mut acc);
    let loss = trace.loss;
    Ok((loss, acc.finalize(a_norm, cfg.dims.num_items, T::one())?))
}
