//! Shared numerical kernels: adaptive quadrature with integrable endpoint
//! singularities, bracketed root finding, counter-based random streams, and
//! a cubic Hermite interpolation cache for expensive monotone functions.

mod interp;
mod quad;
mod rng;
mod root;

pub use interp::MonotoneCubicCache;
pub use quad::{
    integrate, integrate_on, integrate_on_parts, integrate_singular, integrate_singular_parts,
    SingularQuadratureSpec,
};
pub use rng::{CounterRng, RngStream};
pub use root::find_root;

/// Neumaier compensated summation; accurate to a few ulps independent of length.
pub fn compensated_sum<F: crate::Real>(values: impl IntoIterator<Item = F>) -> F {
    let mut sum = F::zero();
    let mut comp = F::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp = comp + ((sum - t) + v);
        } else {
            comp = comp + ((v - t) + sum);
        }
        sum = t;
    }
    sum + comp
}
