use rand::Rng;

use crate::aggregate::{AttentionParams, LayerParams};
use crate::config::HyperParams;
use crate::tensor::Mat;
use crate::Scalar;

/// Shape parameters of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDims {
    /// Item slots including the padding slot.
    pub num_items: usize,
    pub d: usize,
    pub k: usize,
    pub l_rec: usize,
    pub l_time: usize,
    pub heads: usize,
    pub l_layer: usize,
}

impl ModelDims {
    pub fn from_hyper(hp: &HyperParams, num_items: usize) -> Self {
        Self {
            num_items,
            d: hp.d,
            k: hp.k,
            l_rec: hp.l_rec,
            l_time: hp.l_time,
            heads: hp.h,
            l_layer: hp.l_layer,
        }
    }
}

/// Everything except the item table: interval embeddings, `W1`, `W2`, `W3`
/// and the per-layer attention projections.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams<T> {
    /// `(L_time + 1) × d`.
    pub interval_table: Mat<T>,
    /// `d × 1`.
    pub w1: Mat<T>,
    /// `4d × d`.
    pub w2: Mat<T>,
    /// `K × 4d`.
    pub w3: Mat<T>,
    pub layers: Vec<LayerParams<T>>,
}

impl<T: Scalar> EncoderParams<T> {
    pub fn zeros(dims: &ModelDims) -> Self {
        let d = dims.d;
        Self {
            interval_table: Mat::zeros(dims.l_time + 1, d),
            w1: Mat::zeros(d, 1),
            w2: Mat::zeros(4 * d, d),
            w3: Mat::zeros(dims.k, 4 * d),
            layers: (0..dims.l_layer).map(|_| LayerParams::zeros(d)).collect(),
        }
    }

    pub fn uniform<R: Rng + ?Sized>(dims: &ModelDims, scale: f64, rng: &mut R) -> Self {
        let d = dims.d;
        Self {
            interval_table: Mat::uniform(dims.l_time + 1, d, scale, rng),
            w1: Mat::uniform(d, 1, scale, rng),
            w2: Mat::uniform(4 * d, d, scale, rng),
            w3: Mat::uniform(dims.k, 4 * d, scale, rng),
            layers: (0..dims.l_layer)
                .map(|_| LayerParams {
                    item: AttentionParams::uniform(d, scale, rng),
                    center: AttentionParams::uniform(d, scale, rng),
                })
                .collect(),
        }
    }

    pub fn tensors(&self) -> Vec<(String, &Mat<T>)> {
        let mut out = vec![
            ("interval_table".to_owned(), &self.interval_table),
            ("w1".to_owned(), &self.w1),
            ("w2".to_owned(), &self.w2),
            ("w3".to_owned(), &self.w3),
        ];
        for (l, layer) in self.layers.iter().enumerate() {
            for (role, p) in [("item", &layer.item), ("center", &layer.center)] {
                for (name, m) in p.matrices() {
                    out.push((format!("layer{l}.{role}.{name}"), m));
                }
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Mat<T>)> {
        let mut out = vec![
            ("interval_table".to_owned(), &mut self.interval_table),
            ("w1".to_owned(), &mut self.w1),
            ("w2".to_owned(), &mut self.w2),
            ("w3".to_owned(), &mut self.w3),
        ];
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let LayerParams { item, center } = layer;
            for (role, p) in [("item", item), ("center", center)] {
                for (name, m) in p.matrices_mut() {
                    out.push((format!("layer{l}.{role}.{name}"), m));
                }
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }
}

/// All trainable tensors. Row 0 of `item_table` is the frozen padding row.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub item_table: Mat<T>,
    pub encoder: EncoderParams<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(dims: &ModelDims) -> Self {
        Self {
            item_table: Mat::zeros(dims.num_items, dims.d),
            encoder: EncoderParams::zeros(dims),
        }
    }

    /// Every tensor drawn from `U(-scale, scale)`; padding row zeroed.
    pub fn uniform<R: Rng + ?Sized>(dims: &ModelDims, scale: f64, rng: &mut R) -> Self {
        let mut item_table = Mat::uniform(dims.num_items, dims.d, scale, rng);
        item_table.row_mut(0).iter_mut().for_each(|v| *v = T::zero());
        Self {
            item_table,
            encoder: EncoderParams::uniform(dims, scale, rng),
        }
    }

    /// Default initialization: `U(-1/√d, 1/√d)`.
    pub fn init<R: Rng + ?Sized>(dims: &ModelDims, rng: &mut R) -> Self {
        Self::uniform(dims, 1.0 / (dims.d as f64).sqrt(), rng)
    }

    pub fn tensors(&self) -> Vec<(String, &Mat<T>)> {
        let mut out = vec![("item_table".to_owned(), &self.item_table)];
        out.extend(self.encoder.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Mat<T>)> {
        let mut out = vec![("item_table".to_owned(), &mut self.item_table)];
        out.extend(self.encoder.tensors_mut());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let e = &self.encoder;
        let cast_attn = |p: &AttentionParams<T>| AttentionParams {
            wq: p.wq.cast(),
            wk: p.wk.cast(),
            wv: p.wv.cast(),
            wo: p.wo.cast(),
        };
        ModelParams {
            item_table: self.item_table.cast(),
            encoder: EncoderParams {
                interval_table: e.interval_table.cast(),
                w1: e.w1.cast(),
                w2: e.w2.cast(),
                w3: e.w3.cast(),
                layers: e
                    .layers
                    .iter()
                    .map(|l| LayerParams {
                        item: cast_attn(&l.item),
                        center: cast_attn(&l.center),
                    })
                    .collect(),
            },
        }
    }
}
