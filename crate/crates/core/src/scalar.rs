//! Floating-point scalar abstraction shared by every module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// A real scalar the set arithmetic can run on (`f32` or `f64`).
///
/// The associated tolerances are scaled to the precision of the type:
/// `merge_eps` is the largest gap that normalization closes, and
/// `default_tol` is the convergence threshold of the sculpting iteration.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    fn merge_eps() -> Self;

    fn default_tol() -> Self;

    /// Converts an `f64` constant into this type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }
}

impl Scalar for f64 {
    #[inline]
    fn merge_eps() -> Self {
        1e-12
    }

    #[inline]
    fn default_tol() -> Self {
        1e-10
    }
}

impl Scalar for f32 {
    #[inline]
    fn merge_eps() -> Self {
        1e-6
    }

    #[inline]
    fn default_tol() -> Self {
        1e-5
    }
}
