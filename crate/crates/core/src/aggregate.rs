//! Hybrid embeddings and the attention-based aggregation over the chain of
//! window items plus one virtual center node.
//!
//! At every layer each real item `i` attends (as query `q_i`) over the four
//! tokens `[q_{i-1}, center, q_i, g_i]`, where `g_i` is the item's global
//! context row and the left neighbor of the first real item is the zero
//! vector. The center then attends over `[center, q_1 .. q_L]` using the
//! freshly updated item states. Padding slots never appear as tokens.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, masked_softmax_inplace, softmax_backward, Scalar};
use crate::tensor::Mat;

/// Query, key, value and output projections (`d × d`, row-vector convention).
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams<T> {
    pub wq: Mat<T>,
    pub wk: Mat<T>,
    pub wv: Mat<T>,
    pub wo: Mat<T>,
}

impl<T: Scalar> AttentionParams<T> {
    pub fn zeros(d: usize) -> Self {
        Self {
            wq: Mat::zeros(d, d),
            wk: Mat::zeros(d, d),
            wv: Mat::zeros(d, d),
            wo: Mat::zeros(d, d),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            wq: Mat::identity(d),
            wk: Mat::identity(d),
            wv: Mat::identity(d),
            wo: Mat::identity(d),
        }
    }

    pub fn uniform<R: Rng + ?Sized>(d: usize, scale: f64, rng: &mut R) -> Self {
        Self {
            wq: Mat::uniform(d, d, scale, rng),
            wk: Mat::uniform(d, d, scale, rng),
            wv: Mat::uniform(d, d, scale, rng),
            wo: Mat::uniform(d, d, scale, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.wq.rows()
    }

    pub fn matrices(&self) -> [(&'static str, &Mat<T>); 4] {
        [("q", &self.wq), ("k", &self.wk), ("v", &self.wv), ("o", &self.wo)]
    }

    pub fn matrices_mut(&mut self) -> [(&'static str, &mut Mat<T>); 4] {
        [
            ("q", &mut self.wq),
            ("k", &mut self.wk),
            ("v", &mut self.wv),
            ("o", &mut self.wo),
        ]
    }
}

/// Parameters of one aggregation layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T> {
    pub item: AttentionParams<T>,
    pub center: AttentionParams<T>,
}

impl<T: Scalar> LayerParams<T> {
    pub fn zeros(d: usize) -> Self {
        Self {
            item: AttentionParams::zeros(d),
            center: AttentionParams::zeros(d),
        }
    }
}

/// Inverted dropout on attention probabilities.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut ChaCha8Rng,
}

/// One attention query: the source row used as query and the token rows it
/// attends over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub src: usize,
    pub keys: Vec<usize>,
}

/// Intermediates of [`multi_head_attention`].
#[derive(Clone, Debug)]
pub struct AttentionTrace<T> {
    keys: Mat<T>,
    values: Mat<T>,
    queries: Mat<T>,
    /// Per query: `heads × keys` probabilities, head-major.
    probs: Vec<Vec<T>>,
    /// Dropout multipliers with the layout of `probs`; empty when disabled.
    multipliers: Vec<Vec<T>>,
    concat: Mat<T>,
    heads: usize,
}

impl<T: Scalar> AttentionTrace<T> {
    /// Attention distribution of query `q`, head `h` (before dropout).
    pub fn probs(&self, q: usize, h: usize) -> &[T] {
        let m = self.probs[q].len() / self.heads;
        &self.probs[q][h * m..(h + 1) * m]
    }

    pub fn num_queries(&self) -> usize {
        self.probs.len()
    }

    pub fn heads(&self) -> usize {
        self.heads
    }
}

/// Scaled dot-product multi-head attention. Tokens and queries are rows of
/// `x`; returns one `d`-row per query.
pub fn multi_head_attention<T: Scalar>(
    p: &AttentionParams<T>,
    x: &Mat<T>,
    queries: &[Query],
    heads: usize,
    mut dropout: Option<&mut Dropout<'_>>,
) -> (Mat<T>, AttentionTrace<T>) {
    let d = p.dim();
    assert_eq!(x.cols(), d);
    assert_eq!(d % heads, 0, "d must be divisible by heads");
    let dh = d / heads;
    let scale = T::one() / T::of_usize(dh).sqrt();

    let mut used = vec![false; x.rows()];
    for q in queries {
        q.keys.iter().for_each(|&k| used[k] = true);
    }
    let mut keys = Mat::zeros(x.rows(), d);
    let mut values = Mat::zeros(x.rows(), d);
    for r in (0..x.rows()).filter(|&r| used[r]) {
        p.wk.vec_mul_into(x.row(r), keys.row_mut(r));
        p.wv.vec_mul_into(x.row(r), values.row_mut(r));
    }

    let nq = queries.len();
    let mut qproj = Mat::zeros(nq, d);
    let mut concat = Mat::zeros(nq, d);
    let mut probs = Vec::with_capacity(nq);
    let mut multipliers = Vec::new();
    let keep_scale = dropout
        .as_ref()
        .map(|dr| T::of(1.0 / (1.0 - dr.rate)))
        .unwrap_or_else(T::one);
    for (qi, q) in queries.iter().enumerate() {
        p.wq.vec_mul_into(x.row(q.src), qproj.row_mut(qi));
        let m = q.keys.len();
        let mut pr = vec![T::zero(); heads * m];
        let mut mult = Vec::new();
        for h in 0..heads {
            let span = h * dh..(h + 1) * dh;
            let qh = &qproj.row(qi)[span.clone()];
            let ph = &mut pr[h * m..(h + 1) * m];
            for (j, &k) in q.keys.iter().enumerate() {
                ph[j] = dot(qh, &keys.row(k)[span.clone()]) * scale;
            }
            masked_softmax_inplace(ph, |_| true);
        }
        if let Some(dr) = dropout.as_deref_mut() {
            mult = (0..heads * m)
                .map(|_| {
                    if dr.rng.gen::<f64>() < dr.rate {
                        T::zero()
                    } else {
                        keep_scale
                    }
                })
                .collect();
        }
        let out = concat.row_mut(qi);
        for h in 0..heads {
            let span = h * dh..(h + 1) * dh;
            for (j, &k) in q.keys.iter().enumerate() {
                let mut w = pr[h * m + j];
                if !mult.is_empty() {
                    w *= mult[h * m + j];
                }
                axpy(w, &values.row(k)[span.clone()], &mut out[span.clone()]);
            }
        }
        probs.push(pr);
        if dropout.is_some() {
            multipliers.push(mult);
        }
    }
    let out = concat.matmul(&p.wo);
    let trace = AttentionTrace {
        keys,
        values,
        queries: qproj,
        probs,
        multipliers,
        concat,
        heads,
    };
    (out, trace)
}

/// Backward of [`multi_head_attention`]: accumulates parameter gradients
/// into `grads` and returns the gradient with respect to `x`.
pub fn multi_head_attention_backward<T: Scalar>(
    p: &AttentionParams<T>,
    x: &Mat<T>,
    queries: &[Query],
    trace: &AttentionTrace<T>,
    d_out: &Mat<T>,
    grads: &mut AttentionParams<T>,
) -> Mat<T> {
    let d = p.dim();
    let heads = trace.heads;
    let dh = d / heads;
    let scale = T::one() / T::of_usize(dh).sqrt();
    let mut d_keys = Mat::zeros(x.rows(), d);
    let mut d_values = Mat::zeros(x.rows(), d);
    let mut dx = Mat::zeros(x.rows(), d);
    let mut d_concat = vec![T::zero(); d];
    let mut dq = vec![T::zero(); d];

    for (qi, q) in queries.iter().enumerate() {
        let g = d_out.row(qi);
        grads.wo.add_outer(trace.concat.row(qi), g);
        d_concat.iter_mut().for_each(|v| *v = T::zero());
        p.wo.mul_vec_acc(g, &mut d_concat);

        let m = q.keys.len();
        let pr = &trace.probs[qi];
        let mult = trace.multipliers.get(qi).filter(|v| !v.is_empty());
        dq.iter_mut().for_each(|v| *v = T::zero());
        let mut dp = vec![T::zero(); m];
        for h in 0..heads {
            let span = h * dh..(h + 1) * dh;
            let dz = &d_concat[span.clone()];
            for (j, &k) in q.keys.iter().enumerate() {
                let keep = mult.map_or(T::one(), |mv| mv[h * m + j]);
                dp[j] = dot(dz, &trace.values.row(k)[span.clone()]) * keep;
                axpy(pr[h * m + j] * keep, dz, &mut d_values.row_mut(k)[span.clone()]);
            }
            let ds = softmax_backward(&pr[h * m..(h + 1) * m], &dp);
            let qh = &trace.queries.row(qi)[span.clone()];
            for (j, &k) in q.keys.iter().enumerate() {
                let s = ds[j] * scale;
                axpy(s, &trace.keys.row(k)[span.clone()], &mut dq[span.clone()]);
                axpy(s, qh, &mut d_keys.row_mut(k)[span.clone()]);
            }
        }
        grads.wq.add_outer(x.row(q.src), &dq);
        p.wq.mul_vec_acc(&dq, dx.row_mut(q.src));
    }
    for r in 0..x.rows() {
        let (dk, dv) = (d_keys.row(r), d_values.row(r));
        if dk.iter().chain(dv).all(|&v| v == T::zero()) {
            continue;
        }
        grads.wk.add_outer(x.row(r), dk);
        grads.wv.add_outer(x.row(r), dv);
        let out = dx.row_mut(r);
        p.wk.mul_vec_acc(dk, out);
        p.wv.mul_vec_acc(dv, out);
    }
    dx
}

/// `E_time + E_global` on real slots; padding rows are zero.
pub fn hybrid_embeddings<T: Scalar>(global_rows: &Mat<T>, e_time: &Mat<T>, mask: &[bool]) -> Mat<T> {
    assert_eq!(global_rows.shape(), e_time.shape());
    let mut out = Mat::zeros(global_rows.rows(), global_rows.cols());
    for i in (0..mask.len()).filter(|&i| mask[i]) {
        let row = out.row_mut(i);
        for ((o, &g), &t) in row.iter_mut().zip(global_rows.row(i)).zip(e_time.row(i)) {
            *o = g + t;
        }
    }
    out
}

/// Masked mean of the hybrid rows.
pub fn init_center<T: Scalar>(hybrid: &Mat<T>, mask: &[bool]) -> Result<Vec<T>> {
    let n = mask.iter().filter(|&&m| m).count();
    if n == 0 {
        return Err(Error::EmptyWindow);
    }
    let mut c = vec![T::zero(); hybrid.cols()];
    for i in (0..mask.len()).filter(|&i| mask[i]) {
        axpy(T::one(), hybrid.row(i), &mut c);
    }
    let inv = T::one() / T::of_usize(n);
    c.iter_mut().for_each(|v| *v *= inv);
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregateConfig {
    pub heads: usize,
    pub residual: bool,
}

#[derive(Clone, Debug)]
struct LayerTrace<T> {
    item_tokens: Mat<T>,
    item_queries: Vec<Query>,
    item: AttentionTrace<T>,
    center_tokens: Mat<T>,
    center_queries: Vec<Query>,
    center: AttentionTrace<T>,
}

/// Output of [`aggregate_layers`] together with its backward trace.
#[derive(Clone, Debug)]
pub struct Aggregation<T> {
    /// Final item states `E^u`, one row per window slot.
    pub items: Mat<T>,
    /// Final center state.
    pub center: Vec<T>,
    mask: Vec<bool>,
    layers: Vec<LayerTrace<T>>,
}

impl<T: Scalar> Aggregation<T> {
    /// Item-update attention trace of layer `l` (one query per real slot).
    pub fn item_attention(&self, l: usize) -> &AttentionTrace<T> {
        &self.layers[l].item
    }

    pub fn center_attention(&self, l: usize) -> &AttentionTrace<T> {
        &self.layers[l].center
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }
}

fn first_real(mask: &[bool]) -> usize {
    mask.iter().position(|&m| m).unwrap_or(mask.len())
}

pub fn aggregate_layers<T: Scalar>(
    hybrid: &Mat<T>,
    global_rows: &Mat<T>,
    mask: &[bool],
    layers: &[LayerParams<T>],
    cfg: AggregateConfig,
    mut dropout: Option<&mut Dropout<'_>>,
) -> Result<Aggregation<T>> {
    if layers.is_empty() {
        return Err(Error::InvalidArgument("L_layer must be at least 1".into()));
    }
    let n = mask.len();
    let d = hybrid.cols();
    let first = first_real(mask);
    debug_assert!(mask[first..].iter().all(|&m| m), "real slots must form a suffix");
    let mut center = init_center(hybrid, mask)?;
    let mut q = hybrid.clone();
    let mut traces = Vec::with_capacity(layers.len());

    let item_queries: Vec<Query> = (first..n)
        .map(|i| Query {
            src: 2 + i,
            keys: vec![if i > first { 2 + i - 1 } else { 0 }, 1, 2 + i, 2 + n + i],
        })
        .collect();
    let center_queries = vec![Query {
        src: 0,
        keys: (0..=n - first).collect(),
    }];

    for lp in layers {
        // rows: [zero, center, q_0..q_{n-1}, g_0..g_{n-1}]
        let mut tokens = Mat::zeros(2 + 2 * n, d);
        tokens.row_mut(1).copy_from_slice(&center);
        for i in first..n {
            tokens.row_mut(2 + i).copy_from_slice(q.row(i));
            tokens.row_mut(2 + n + i).copy_from_slice(global_rows.row(i));
        }
        let (y, item_trace) =
            multi_head_attention(&lp.item, &tokens, &item_queries, cfg.heads, dropout.as_deref_mut());
        let mut q_next = Mat::zeros(n, d);
        for (r, i) in (first..n).enumerate() {
            let row = q_next.row_mut(i);
            row.copy_from_slice(y.row(r));
            if cfg.residual {
                axpy(T::one(), q.row(i), row);
            }
        }

        let mut ctokens = Mat::zeros(1 + n - first, d);
        ctokens.row_mut(0).copy_from_slice(&center);
        for i in first..n {
            ctokens.row_mut(1 + i - first).copy_from_slice(q_next.row(i));
        }
        let (c, center_trace) =
            multi_head_attention(&lp.center, &ctokens, &center_queries, cfg.heads, dropout.as_deref_mut());
        let mut c_next = c.row(0).to_vec();
        if cfg.residual {
            axpy(T::one(), &center, &mut c_next);
        }

        traces.push(LayerTrace {
            item_tokens: tokens,
            item_queries: item_queries.clone(),
            item: item_trace,
            center_tokens: ctokens,
            center_queries: center_queries.clone(),
            center: center_trace,
        });
        q = q_next;
        center = c_next;
    }
    Ok(Aggregation {
        items: q,
        center,
        mask: mask.to_vec(),
        layers: traces,
    })
}

/// Gradients flowing out of the aggregation into its inputs.
pub struct AggregateGrads<T> {
    pub hybrid: Mat<T>,
    pub global_rows: Mat<T>,
}

/// Backward of [`aggregate_layers`] given `dE^u` (the final center is not
/// consumed downstream, so its gradient is zero).
pub fn aggregate_backward<T: Scalar>(
    agg: &Aggregation<T>,
    layers: &[LayerParams<T>],
    cfg: AggregateConfig,
    d_items: &Mat<T>,
    grads: &mut [LayerParams<T>],
) -> AggregateGrads<T> {
    let mask = &agg.mask;
    let n = mask.len();
    let d = d_items.cols();
    let first = first_real(mask);
    let n_real = n - first;

    let mut dq = d_items.clone();
    let mut dc = vec![T::zero(); d];
    let mut d_global = Mat::zeros(n, d);

    for (l, (lp, tr)) in layers.iter().zip(&agg.layers).enumerate().rev() {
        let mut dq_prev = Mat::zeros(n, d);
        let mut dc_prev = vec![T::zero(); d];

        // center update
        if dc.iter().any(|&v| v != T::zero()) {
            if cfg.residual {
                axpy(T::one(), &dc, &mut dc_prev);
            }
            let d_out = Mat::from_vec(1, d, dc.clone());
            let dy = multi_head_attention_backward(
                &lp.center,
                &tr.center_tokens,
                &tr.center_queries,
                &tr.center,
                &d_out,
                &mut grads[l].center,
            );
            axpy(T::one(), dy.row(0), &mut dc_prev);
            for i in first..n {
                axpy(T::one(), dy.row(1 + i - first), dq.row_mut(i));
            }
        }

        // item update
        let mut d_out = Mat::zeros(n_real, d);
        for i in first..n {
            d_out.row_mut(i - first).copy_from_slice(dq.row(i));
            if cfg.residual {
                axpy(T::one(), dq.row(i), dq_prev.row_mut(i));
            }
        }
        let dx = multi_head_attention_backward(
            &lp.item,
            &tr.item_tokens,
            &tr.item_queries,
            &tr.item,
            &d_out,
            &mut grads[l].item,
        );
        axpy(T::one(), dx.row(1), &mut dc_prev);
        for i in first..n {
            axpy(T::one(), dx.row(2 + i), dq_prev.row_mut(i));
            axpy(T::one(), dx.row(2 + n + i), d_global.row_mut(i));
        }
        dq = dq_prev;
        dc = dc_prev;
    }

    // q^(0) = hybrid, center^(0) = masked mean of hybrid
    let inv = T::one() / T::of_usize(n_real);
    for i in first..n {
        axpy(inv, &dc, dq.row_mut(i));
    }
    AggregateGrads {
        hybrid: dq,
        global_rows: d_global,
    }
}
