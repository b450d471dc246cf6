//! Scalar abstraction shared by every solver.
//!
//! All numerical code is written against [`Scalar`], which `f32` and `f64`
//! implement. Tolerances and constants are stored as `f64` in configuration
//! structs and converted once at the call site with [`Scalar::of`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable by the solvers: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Never fails for finite inputs.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `base`, widened to a few ulps of one for types where `base` is below
/// rounding noise.
pub(crate) fn sum_tolerance<T: Scalar>(base: f64) -> T {
    T::of(base).max(T::epsilon() * T::of(64.0))
}

/// Sup-norm of the entrywise difference of two equally sized slices.
pub(crate) fn sup_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

pub(crate) fn max_abs<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}
