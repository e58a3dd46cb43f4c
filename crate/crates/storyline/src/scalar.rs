//! Floating-point scalar abstraction.
//!
//! All likelihood and weight arithmetic in this crate is generic over a
//! [`Real`] scalar so the same code runs in `f32` or `f64`. The concrete
//! aliases at the crate root fix `f64`, which is what the CLI uses and what
//! the documented tolerances assume.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` constant into the working scalar type.
#[inline]
pub fn real<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("f64 converts to any Real")
}

/// Converts an integer count into the working scalar type.
#[inline]
pub fn real_of_count<R: Real>(n: u64) -> R {
    R::from_u64(n).expect("u64 converts to any Real")
}
