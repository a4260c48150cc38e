//! Multi-interest extraction by self-attention over the personalized
//! sequence matrix, and target-driven interest selection.

use crate::scalar::{axpy, dot, masked_softmax_inplace, softmax_backward, Scalar};
use crate::tensor::Mat;

/// `K` interest vectors plus the attention that produced them.
#[derive(Clone, Debug)]
pub struct InterestMatrix<T> {
    /// `K × d`.
    pub vectors: Mat<T>,
    /// `K × L_rec`; padding columns are zero.
    pub attention: Mat<T>,
    /// `tanh(W2 · e_i)` per slot (`L_rec × 4d`), kept for backward.
    hidden: Mat<T>,
    mask: Vec<bool>,
}

impl<T: Scalar> InterestMatrix<T> {
    pub fn k(&self) -> usize {
        self.vectors.rows()
    }
}

/// `S2 = softmax_positions(W3 · tanh(W2 · E_uᵀ))`, `interests = S2 · E_u`.
///
/// `w2` is `4d × d`, `w3` is `K × 4d`.
pub fn extract_interests<T: Scalar>(e_u: &Mat<T>, w2: &Mat<T>, w3: &Mat<T>, mask: &[bool]) -> InterestMatrix<T> {
    let (n, d) = e_u.shape();
    let hdim = w2.rows();
    assert_eq!(w2.cols(), d, "W2 must be 4d x d");
    assert_eq!(w3.cols(), hdim, "W3 must be K x 4d");
    let k = w3.rows();

    let mut hidden = Mat::zeros(n, hdim);
    for i in (0..n).filter(|&i| mask[i]) {
        let h = hidden.row_mut(i);
        w2.mul_vec_acc(e_u.row(i), h);
        h.iter_mut().for_each(|v| *v = v.tanh());
    }
    let mut attention = Mat::zeros(k, n);
    for r in 0..k {
        let row = attention.row_mut(r);
        for i in (0..n).filter(|&i| mask[i]) {
            row[i] = dot(w3.row(r), hidden.row(i));
        }
        masked_softmax_inplace(row, |i| mask[i]);
    }
    let vectors = attention.matmul(e_u);
    InterestMatrix {
        vectors,
        attention,
        hidden,
        mask: mask.to_vec(),
    }
}

/// Accumulates `dW2`, `dW3` and returns `dE_u` given `d(interests)`.
pub fn extract_interests_backward<T: Scalar>(
    im: &InterestMatrix<T>,
    e_u: &Mat<T>,
    w2: &Mat<T>,
    w3: &Mat<T>,
    d_vectors: &Mat<T>,
    d_w2: &mut Mat<T>,
    d_w3: &mut Mat<T>,
) -> Mat<T> {
    let (n, d) = e_u.shape();
    let k = im.k();
    let real: Vec<usize> = (0..n).filter(|&i| im.mask[i]).collect();
    let mut d_e = Mat::zeros(n, d);
    let mut d_hidden = Mat::zeros(n, w2.rows());
    let mut dp = vec![T::zero(); real.len()];
    let mut p = vec![T::zero(); real.len()];
    for r in 0..k {
        let g = d_vectors.row(r);
        if g.iter().all(|&v| v == T::zero()) {
            continue;
        }
        for (slot, &i) in real.iter().enumerate() {
            let s = im.attention.get(r, i);
            p[slot] = s;
            dp[slot] = dot(g, e_u.row(i));
            axpy(s, g, d_e.row_mut(i));
        }
        let ds = softmax_backward(&p, &dp);
        for (slot, &i) in real.iter().enumerate() {
            d_w3.row_mut(r).iter_mut().zip(im.hidden.row(i)).for_each(|(a, &h)| *a += ds[slot] * h);
            axpy(ds[slot], w3.row(r), d_hidden.row_mut(i));
        }
    }
    for &i in &real {
        let pre: Vec<T> = d_hidden
            .row(i)
            .iter()
            .zip(im.hidden.row(i))
            .map(|(&g, &h)| g * (T::one() - h * h))
            .collect();
        if pre.iter().all(|&v| v == T::zero()) {
            continue;
        }
        d_w2.add_outer(&pre, e_u.row(i));
        let back = w2.vec_mul(&pre);
        axpy(T::one(), &back, d_e.row_mut(i));
    }
    d_e
}

/// Index of the interest with the largest inner product with the target
/// embedding; ties go to the smallest index.
pub fn select_training_interest<T: Scalar>(interests: &Mat<T>, target: &[T]) -> (usize, Vec<T>) {
    let mut best = 0;
    let mut best_score = T::neg_infinity();
    for k in 0..interests.rows() {
        let s = dot(interests.row(k), target);
        if s > best_score {
            best = k;
            best_score = s;
        }
    }
    (best, interests.row(best).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_item_single_interest() {
        let e = Mat::from_vec(2, 2, vec![0.0, 0.0, 0.3, -0.4]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w2 = Mat::<f64>::uniform(8, 2, 1.0, &mut rng);
        let w3 = Mat::<f64>::uniform(1, 8, 1.0, &mut rng);
        let im = extract_interests(&e, &w2, &w3, &[false, true]);
        assert_eq!(im.vectors.row(0), e.row(1));
        assert_eq!(im.attention.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn zero_input_uniform_attention() {
        let e = Mat::<f64>::zeros(4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w2 = Mat::uniform(8, 2, 1.0, &mut rng);
        let w3 = Mat::uniform(3, 8, 1.0, &mut rng);
        let im = extract_interests(&e, &w2, &w3, &[false, true, true, true]);
        for r in 0..3 {
            assert_eq!(im.attention.get(r, 0), 0.0);
            for i in 1..4 {
                assert!((im.attention.get(r, i) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        assert!(im.vectors.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (n, d, k) = (5, 8, 3);
        let mask = [false, true, true, true, true];
        let mut e = Mat::<f64>::uniform(n, d, 1.0, &mut rng);
        e.row_mut(0).iter_mut().for_each(|v| *v = 0.0);
        let w2 = Mat::uniform(4 * d, d, 0.5, &mut rng);
        let w3 = Mat::uniform(k, 4 * d, 0.5, &mut rng);
        let im = extract_interests(&e, &w2, &w3, &mask);
        // literal matrix form: W3 · tanh(W2 · Eᵀ), then masked row softmax
        let pre = w2.matmul(&e.transpose());
        let th = Mat::from_fn(pre.rows(), pre.cols(), |r, c| pre.get(r, c).tanh());
        let logits = w3.matmul(&th);
        for r in 0..k {
            let mx = (1..n).map(|c| logits.get(r, c)).fold(f64::MIN, f64::max);
            let z: f64 = (1..n).map(|c| (logits.get(r, c) - mx).exp()).sum();
            for c in 0..d {
                let want: f64 = (1..n).map(|i| (logits.get(r, i) - mx).exp() / z * e.get(i, c)).sum();
                assert!((im.vectors.get(r, c) - want).abs() <= 1e-6);
            }
            assert!((im.attention.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn selection_examples() {
        let one = Mat::from_vec(1, 2, vec![-5.0, 1.0]);
        assert_eq!(select_training_interest(&one, &[1.0, 0.0]).0, 0);
        let pm = Mat::from_vec(2, 2, vec![-1.0, 0.5, 1.0, -0.5]);
        assert_eq!(select_training_interest(&pm, &[1.0, -0.5]).0, 1);
        let ties = Mat::from_vec(3, 1, vec![2.0, 2.0, 1.0]);
        assert_eq!(select_training_interest(&ties, &[1.0]).0, 0);
    }

    #[test]
    fn selection_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let m = Mat::<f64>::uniform(4, 6, 1.0, &mut rng);
            let t: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let scores: Vec<f64> = (0..4).map(|k| (0..6).map(|c| m.get(k, c) * t[c]).sum()).collect();
            let mut want = 0;
            for k in 1..4 {
                if scores[k] > scores[want] {
                    want = k;
                }
            }
            assert_eq!(select_training_interest(&m, &t).0, want);
        }
    }

    proptest! {
        #[test]
        fn selection_invariant_under_positive_scaling(
            data in prop::collection::vec(-1.0f64..1.0, 12),
            target in prop::collection::vec(-1.0f64..1.0, 3),
            c in 0.01f64..100.0,
        ) {
            let m = Mat::from_vec(4, 3, data);
            let scaled: Vec<f64> = target.iter().map(|t| t * c).collect();
            prop_assert_eq!(select_training_interest(&m, &target).0, select_training_interest(&m, &scaled).0);
        }
    }
}
