//! Scalar abstraction and small dense linear algebra used by the simulator
//! and controller.
//!
//! Simulation, control, and gradient code are generic over [`Real`] so that
//! the training pipelines run in `f32` while gradient verification can run
//! the identical code path in `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the numerical kernels are generic over.
pub trait Real:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Convert a constant given as `f64`. Lossy for `f32` in the usual
    /// round-to-nearest sense, exact for `f64`.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite constant")
    }

    /// Widen to `f64` for logging and cross-precision comparisons.
    fn to_f64_lossless(self) -> f64;
}

impl Real for f32 {
    fn to_f64_lossless(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn to_f64_lossless(self) -> f64 {
        self
    }
}

/// Three-component vector stored as a plain array.
pub type V3<T> = [T; 3];

pub fn v3<T: Real>(x: T, y: T, z: T) -> V3<T> {
    [x, y, z]
}

pub fn v3_zero<T: Real>() -> V3<T> {
    [T::zero(); 3]
}

pub fn add<T: Real>(a: V3<T>, b: V3<T>) -> V3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub<T: Real>(a: V3<T>, b: V3<T>) -> V3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale<T: Real>(a: V3<T>, s: T) -> V3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn axpy<T: Real>(acc: &mut V3<T>, s: T, a: V3<T>) {
    acc[0] += s * a[0];
    acc[1] += s * a[1];
    acc[2] += s * a[2];
}

pub fn dot3<T: Real>(a: V3<T>, b: V3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3<T: Real>(a: V3<T>) -> T {
    dot3(a, a).sqrt()
}

/// `a / |a|`; caller guarantees `|a| > 0`.
pub fn normalize3<T: Real>(a: V3<T>) -> V3<T> {
    let n = norm3(a);
    scale(a, T::one() / n)
}

/// Dense dot product with four-way accumulation.
///
/// The split accumulators let LLVM vectorize the reduction while keeping the
/// summation order fixed, which the bit-reproducibility contract relies on.
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = i * 4;
        acc[0] = acc[0] + a[k] * b[k];
        acc[1] = acc[1] + a[k + 1] * b[k + 1];
        acc[2] = acc[2] + a[k + 2] * b[k + 2];
        acc[3] = acc[3] + a[k + 3] * b[k + 3];
    }
    let mut tail = T::zero();
    for k in chunks * 4..a.len() {
        tail = tail + a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `acc += s * a`, elementwise.
pub fn axpy_slice<T: Real>(acc: &mut [T], s: T, a: &[T]) {
    debug_assert_eq!(acc.len(), a.len());
    for (y, &x) in acc.iter_mut().zip(a) {
        *y += s * x;
    }
}

/// Sum of squares accumulated in `f64` regardless of `T`, in slice order.
pub fn sum_squares_f64<T: Real>(a: &[T]) -> f64 {
    let mut acc = 0.0f64;
    for &x in a {
        let x = x.to_f64_lossless();
        acc += x * x;
    }
    acc
}
