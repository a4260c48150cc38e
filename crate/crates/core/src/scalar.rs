//! Floating-point abstraction shared by every numeric routine in the crate.
//!
//! Training runs in `f32`; oracles, gradient checks and determinism tests run
//! in `f64`. Everything downstream is written once against [`Scalar`].

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for literals and hyperparameters.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize is representable in every Scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numerically stable in-place softmax. Entries whose `keep` flag is false
/// get probability zero; an all-false row yields all zeros.
pub fn masked_softmax_inplace<T: Scalar>(xs: &mut [T], keep: impl Fn(usize) -> bool) {
    let mut max = T::neg_infinity();
    for (i, &x) in xs.iter().enumerate() {
        if keep(i) && x > max {
            max = x;
        }
    }
    if max == T::neg_infinity() {
        xs.iter_mut().for_each(|x| *x = T::zero());
        return;
    }
    let mut total = T::zero();
    for (i, x) in xs.iter_mut().enumerate() {
        if keep(i) {
            *x = (*x - max).exp();
            total += *x;
        } else {
            *x = T::zero();
        }
    }
    xs.iter_mut().for_each(|x| *x /= total);
}

pub fn softmax_inplace<T: Scalar>(xs: &mut [T]) {
    masked_softmax_inplace(xs, |_| true)
}

/// Backward pass of softmax: given probabilities `p` and upstream `dp`,
/// returns `p ⊙ (dp − ⟨p, dp⟩)`.
pub fn softmax_backward<T: Scalar>(p: &[T], dp: &[T]) -> Vec<T> {
    let inner: T = p.iter().zip(dp).map(|(&a, &b)| a * b).sum();
    p.iter().zip(dp).map(|(&a, &b)| a * (b - inner)).collect()
}

pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<T>().ln()
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
