//! Age dynamics of subdiffusive continuous-time random walks.
//!
//! A walker that last jumped a time `a` ago ("age" `a`) jumps at rate
//! `beta(a)`; each jump resets the age to zero. With heavy-tailed rates,
//! `a*beta(a) -> mu` in `(0,1)`, the age distribution never reaches a
//! steady state but becomes self-similar: rescaled ages `b = a/(1+t)`
//! converge to the arcsine (Dynkin-Lamperti) profile. This crate provides
//!
//! * [`rates`] — jump-rate models `beta`, their integral `B`, survival laws;
//! * [`numerics`] — singular quadrature, root finding, counter-based RNG;
//! * [`equilibria`] — the limit profile, the moving pseudo-equilibrium and
//!   its normalizer and drift defect;
//! * [`montecarlo`] — an event-driven walker-population simulator;
//! * [`pde`] — conservative upwind solvers for the renewal equation in
//!   natural and rescaled variables;
//! * [`metrics`] — L1 distances and relative entropies against the
//!   attractors;
//! * [`bounds`] — closed-form theoretical decay bounds for overlays;
//! * [`fitting`] — multi-start nonlinear least squares for decay rates.
//!
//! All numeric kernels are generic over the scalar type through the
//! [`Real`] trait; concrete `f64`/`f32` aliases live at the crate root.

pub mod bounds;
pub mod equilibria;
mod error;
pub mod fitting;
pub mod metrics;
pub mod montecarlo;
pub mod numerics;
pub mod pde;
pub mod rates;
mod real;

pub use error::{Error, Result};
pub use real::Real;

pub(crate) use real::lit;

/// `f64` jump-rate model.
pub type JumpRateModel64 = rates::JumpRateModel<f64>;
/// `f32` jump-rate model.
pub type JumpRateModel32 = rates::JumpRateModel<f32>;
/// `f64` equilibrium evaluator.
pub type EquilibriumHandle64 = equilibria::EquilibriumHandle<f64>;
/// `f32` equilibrium evaluator.
pub type EquilibriumHandle32 = equilibria::EquilibriumHandle<f32>;
/// `f64` walker population.
pub type WalkerPopulation64 = montecarlo::WalkerPopulation<f64>;
/// `f64` grid density profile.
pub type DensityProfile64 = pde::DensityProfile<f64>;
/// `f32` grid density profile.
pub type DensityProfile32 = pde::DensityProfile<f32>;
/// `f64` decay-rate fit result.
pub type FitResult64 = fitting::FitResult<f64>;
