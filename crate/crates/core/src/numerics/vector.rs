//! Slice arithmetic on dense vectors.

use super::Real;

#[inline]
pub fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

#[inline]
pub fn norm_sq<T: Real>(x: &[T]) -> T {
    dot(x, x)
}

#[inline]
pub fn norm<T: Real>(x: &[T]) -> T {
    norm_sq(x).sqrt()
}

pub fn dist_sq<T: Real>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| {
        let d = a - b;
        acc + d * d
    })
}

pub fn dist<T: Real>(x: &[T], y: &[T]) -> T {
    dist_sq(x, y).sqrt()
}

pub fn sub<T: Real>(x: &[T], y: &[T]) -> Vec<T> {
    x.iter().zip(y).map(|(&a, &b)| a - b).collect()
}

pub fn add<T: Real>(x: &[T], y: &[T]) -> Vec<T> {
    x.iter().zip(y).map(|(&a, &b)| a + b).collect()
}

pub fn scale<T: Real>(x: &[T], alpha: T) -> Vec<T> {
    x.iter().map(|&a| a * alpha).collect()
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `(1 - w) * x + w * y`
pub fn lerp<T: Real>(x: &[T], y: &[T], w: T) -> Vec<T> {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| (T::one() - w) * a + w * b)
        .collect()
}

pub fn all_finite<T: Real>(x: &[T]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Sum with a fixed binary-tree topology so the result does not depend on
/// how the inputs were produced.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const LEAF: usize = 8;
    if xs.len() <= LEAF {
        return xs.iter().fold(T::zero(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Concatenates a sequence of equally sized blocks into one flat vector.
pub fn flatten<T: Real>(blocks: &[Vec<T>]) -> Vec<T> {
    blocks.iter().flat_map(|b| b.iter().copied()).collect()
}

/// Splits a flat vector into `count` blocks of `width`.
pub fn unflatten<T: Real>(flat: &[T], width: usize) -> Vec<Vec<T>> {
    flat.chunks(width).map(|c| c.to_vec()).collect()
}
