use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar for every numeric kernel in this crate: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + std::fmt::Debug
    + std::fmt::Display
    + std::fmt::LowerExp
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + std::fmt::Debug
        + std::fmt::Display
        + std::fmt::LowerExp
        + Send
        + Sync
        + 'static
{
}

/// Shorthand for embedding an `f64` literal into the generic scalar type.
#[inline]
pub(crate) fn lit<F: Real>(x: f64) -> F {
    F::from(x).expect("literal representable in scalar type")
}
