//! Attractor profiles for the rescaled age distribution.
//!
//! The limit profile (arcsine / Dynkin-Lamperti law) is
//! `W_inf(b) = c_inf b^{-mu} (1-b)^{mu-1}` with `c_inf = sin(pi mu)/pi`.
//! The moving pseudo-equilibrium is
//! `W(tau, b) = C(tau) e^{-B(e^tau b)} (1-b)^{mu-1}`, normalized to unit
//! mass by `C(tau)`; it solves the rescaled equation up to a drift defect
//! `delta(tau) -> 0` and converges to `W_inf` in L1.
//!
//! Everything is evaluated through the scaled factor
//! `e^{mu tau - B(e^tau b)}`, which stays O(1) uniformly in `tau` (the raw
//! `e^{-B}` underflows once `mu tau` is large).

use crate::numerics::{integrate_singular_parts, SingularQuadratureSpec};
use crate::rates::{JumpRateModel, RateKind};
use crate::{lit, Error, Real, Result};
use std::collections::HashMap;
use std::sync::RwLock;

/// Spacing of the memoized `c(tau)` grid.
const C_GRID_STEP: f64 = 0.05;

/// Cached evaluator for `W_inf`, `W(tau, .)`, `C(tau)`, `delta(tau)` and the
/// natural-variable profiles `N`, `N_inf`.
///
/// Immutable after construction except the `c(tau)` memo, which admits
/// concurrent readers and idempotent fills.
pub struct EquilibriumHandle<F: Real> {
    model: JumpRateModel<F>,
    c_infinity: F,
    quad_tol: F,
    max_subdivisions: usize,
    left_exponent: F,
    c_cache: RwLock<HashMap<i64, (F, F)>>,
}

impl<F: Real> EquilibriumHandle<F> {
    /// Builds the handle and verifies the analytic normalizer
    /// `c_inf = sin(pi mu)/pi` against quadrature (aborts on mismatch
    /// beyond 1e-8; skipped at `mu = 1` where the limit profile degenerates).
    pub fn new(model: JumpRateModel<F>) -> Result<Self> {
        Self::with_tolerance(model, lit(1e-12), 4000)
    }

    pub fn with_tolerance(
        model: JumpRateModel<F>,
        quad_tol: F,
        max_subdivisions: usize,
    ) -> Result<Self> {
        let mu = model.mu();
        let pi = lit::<F>(std::f64::consts::PI);
        let c_infinity = (pi * mu).sin() / pi;
        let left_exponent = if mu < F::one() { -mu } else { lit(-0.5) };

        let handle = EquilibriumHandle {
            model,
            c_infinity,
            quad_tol,
            max_subdivisions,
            left_exponent,
            c_cache: RwLock::new(HashMap::new()),
        };

        if mu < F::one() {
            let spec = handle.spec(handle.quad_tol.max(lit(1e-12)));
            let beta_integral = integrate_singular_parts(
                |b: F, omb: F| b.powf(-mu) * omb.powf(mu - F::one()),
                &spec,
            )?;
            let by_quadrature = F::one() / beta_integral;
            if (by_quadrature - c_infinity).abs() > lit(1e-8) {
                return Err(Error::Invariant(format!(
                    "normalizer mismatch: analytic c_inf {} vs quadrature {}",
                    c_infinity, by_quadrature
                )));
            }
        }
        Ok(handle)
    }

    fn spec(&self, tol: F) -> SingularQuadratureSpec<F> {
        SingularQuadratureSpec {
            left_exponent: self.left_exponent,
            right_exponent: self.model.mu() - F::one(),
            abs_tol: tol,
            max_subdivisions: self.max_subdivisions,
        }
    }

    pub fn model(&self) -> &JumpRateModel<F> {
        &self.model
    }

    pub fn mu(&self) -> F {
        self.model.mu()
    }

    /// `c_inf = sin(pi mu)/pi`, the normalizer of the limit profile.
    pub fn c_infinity(&self) -> F {
        self.c_infinity
    }

    /// The limit (arcsine) profile `W_inf(b) = c_inf b^{-mu}(1-b)^{mu-1}`.
    pub fn w_infinity(&self, b: F) -> Result<F> {
        if self.mu() >= F::one() {
            return Err(Error::domain(
                "limit profile degenerates to a point mass at mu = 1",
            ));
        }
        if !(b > F::zero() && b < F::one()) {
            return Err(Error::domain(format!(
                "W_inf is defined on the open interval (0,1); got b = {b}"
            )));
        }
        let mu = self.mu();
        Ok(self.c_infinity * b.powf(-mu) * (F::one() - b).powf(mu - F::one()))
    }

    /// `mu tau - B(e^tau b)`, the stable log of the unnormalized profile.
    #[inline]
    fn scaled_log_factor(&self, tau: F, b: F) -> F {
        let mu = self.mu();
        match self.model.kind() {
            // mu tau - mu ln(1 + e^tau b) = -mu ln(e^-tau + b)
            RateKind::Reference => -mu * ((-tau).exp() + b).ln(),
            _ => mu * tau - self.model.big_b_unchecked(tau.exp() * b),
        }
    }

    /// `1/c(tau) = int_0^1 e^{mu tau - B(e^tau b)} (1-b)^{mu-1} db`, by
    /// singular quadrature. This is the exact (non-memoized) path.
    fn inverse_c_by_quadrature(&self, tau: F) -> Result<F> {
        let mu = self.mu();
        let spec = self.spec(self.quad_tol);
        integrate_singular_parts(
            |b: F, omb: F| self.scaled_log_factor(tau, b).exp() * omb.powf(mu - F::one()),
            &spec,
        )
    }

    /// Node value of the memo: `(c(tau_k), C(tau_k) delta(tau_k))`. The
    /// second entry is the exact slope `d ln c / d tau = C'/C - mu`, so the
    /// between-node Hermite interpolation carries its full O(h^4) accuracy.
    fn c_node(&self, k: i64) -> Result<(F, F)> {
        if let Some(&v) = self.c_cache.read().expect("c cache poisoned").get(&k) {
            return Ok(v);
        }
        let tau = lit::<F>(C_GRID_STEP * k as f64);
        let c = F::one() / self.inverse_c_by_quadrature(tau)?;
        // C delta = c . (e^{mu tau} delta): both factors O(1), no overflow
        let c_delta = self.scaled_delta_numerator(tau)? * c;
        self.c_cache
            .write()
            .expect("c cache poisoned")
            .entry(k)
            .or_insert((c, c_delta));
        Ok((c, c_delta))
    }

    /// `c(tau) = e^{-mu tau} C(tau)`: O(1), decreasing to `c_inf` in the
    /// reference case. Exact on the memo grid (spacing 0.05); between nodes,
    /// cubic Hermite interpolation of `ln c` with exact slopes `C delta`.
    pub fn c_tau(&self, tau: F) -> Result<F> {
        if !tau.is_finite() || tau < F::zero() {
            return Err(Error::domain(format!("c(tau) requires tau >= 0, got {tau}")));
        }
        let step = lit::<F>(C_GRID_STEP);
        let pos = tau / step;
        let k_near = pos.round();
        if (tau - k_near * step).abs() <= lit(1e-9) {
            return Ok(self.c_node(k_near.to_i64().unwrap_or(0).max(0))?.0);
        }
        let k0 = pos.floor().to_i64().unwrap_or(0).max(0);
        let t = pos - F::from(k0).unwrap();
        let (c0, s0) = self.c_node(k0)?;
        let (c1, s1) = self.c_node(k0 + 1)?;
        let (y0, y1) = (c0.ln(), c1.ln());
        // slopes per grid unit
        let (d0, d1) = (s0 * step, s1 * step);
        let t2 = t * t;
        let t3 = t2 * t;
        let two = lit::<F>(2.0);
        let three = lit::<F>(3.0);
        let v = (two * t3 - three * t2 + F::one()) * y0
            + (t3 - two * t2 + t) * d0
            + (-two * t3 + three * t2) * y1
            + (t3 - t2) * d1;
        Ok(v.exp())
    }

    /// The normalizer `C(tau) = e^{mu tau} c(tau)` of the pseudo-equilibrium.
    pub fn normalizer_c(&self, tau: F) -> Result<F> {
        Ok((self.mu() * tau).exp() * self.c_tau(tau)?)
    }

    /// The pseudo-equilibrium density `W(tau, b)` on `[0, 1)`.
    pub fn pseudo_equilibrium(&self, tau: F, b: F) -> Result<F> {
        if !tau.is_finite() || tau < F::zero() {
            return Err(Error::domain(format!("W requires tau >= 0, got {tau}")));
        }
        if !(b >= F::zero() && b < F::one()) {
            return Err(Error::domain(format!(
                "W(tau, .) is defined on [0, 1); got b = {b}"
            )));
        }
        Ok(self.pseudo_equilibrium_parts(tau, b, F::one() - b)?)
    }

    /// `W(tau, b)` with the distance `1 - b` supplied exactly by the caller.
    ///
    /// Quadratures that substitute away the endpoint singularity know `1-b`
    /// to full precision while the rounded `b` alone does not; this entry
    /// point keeps the `(1-b)^{mu-1}` factor exact near `b = 1`.
    pub fn pseudo_equilibrium_parts(&self, tau: F, b: F, one_minus_b: F) -> Result<F> {
        let mu = self.mu();
        let c = self.c_tau(tau)?;
        Ok(c * self.scaled_log_factor(tau, b).exp() * one_minus_b.powf(mu - F::one()))
    }

    /// Drift defect `delta(tau) = C'(tau)/C(tau)^2 - mu/C(tau)`, computed by
    /// quadrature of `int [b e^tau beta(e^tau b) - mu] W(tau, b) db / C(tau)`.
    ///
    /// Writing `W/C = e^{-mu tau} . e^{mu tau - B}(1-b)^{mu-1}` keeps the
    /// integrand O(1) uniformly in `tau`, so absolute accuracy stays at the
    /// quadrature tolerance even when `delta` itself is tiny.
    pub fn delta(&self, tau: F) -> Result<F> {
        if !tau.is_finite() || tau < F::zero() {
            return Err(Error::domain(format!("delta requires tau >= 0, got {tau}")));
        }
        let mu = self.mu();
        Ok(self.scaled_delta_numerator(tau)? * (-mu * tau).exp())
    }

    /// `e^{mu tau} delta(tau)`: the drift integral against the scaled
    /// profile, O(e^{-(1-mu) tau}) and underflow-free.
    fn scaled_delta_numerator(&self, tau: F) -> Result<F> {
        let mu = self.mu();
        let e_tau = tau.exp();
        let spec = self.spec(self.quad_tol);
        integrate_singular_parts(
            |b: F, omb: F| {
                let bracket = b * e_tau * self.model.beta_unchecked(e_tau * b) - mu;
                bracket * self.scaled_log_factor(tau, b).exp() * omb.powf(mu - F::one())
            },
            &spec,
        )
    }

    /// Closed form of `delta` for the reference model:
    /// `-e^{-tau}/(1 + e^{-tau})`. Cross-check path for the quadrature.
    pub fn reference_delta_closed_form(tau: F) -> F {
        let e = (-tau).exp();
        -e / (F::one() + e)
    }

    /// Natural-variable profiles at `(t, a)`: the pseudo-equilibrium image
    /// `N(t,a) = e^{-tau} W(tau, a/(1+t))` and the limit
    /// `N_inf(t,a) = c_inf a^{-mu} (1+t-a)^{mu-1}`, both zero for `a >= 1+t`.
    pub fn natural_profiles(&self, t: F, a: F) -> Result<(F, F)> {
        if !t.is_finite() || t < F::zero() || !a.is_finite() || a < F::zero() {
            return Err(Error::domain("natural profiles require t >= 0 and a >= 0"));
        }
        let one = F::one();
        let horizon = one + t;
        if a >= horizon {
            return Ok((F::zero(), F::zero()));
        }
        let tau = t.ln_1p();
        let b = a / horizon;
        let n = self.pseudo_equilibrium(tau, b)? / horizon;
        let mu = self.mu();
        let n_inf = if mu < one {
            self.c_infinity * a.powf(-mu) * (horizon - a).powf(mu - one)
        } else {
            F::zero()
        };
        Ok((n, n_inf))
    }

    /// `||W(tau,.) - W_inf||_L1` by singular quadrature.
    pub fn l1_w_to_w_infinity(&self, tau: F) -> Result<F> {
        let mu = self.mu();
        if mu >= F::one() {
            return Err(Error::domain(
                "W_inf degenerates at mu = 1; the distance is not defined",
            ));
        }
        let c = F::one() / self.inverse_c_by_quadrature(tau)?;
        let spec = self.spec(self.quad_tol);
        integrate_singular_parts(
            |b: F, omb: F| {
                let one = F::one();
                let w = c * self.scaled_log_factor(tau, b).exp() * omb.powf(mu - one);
                let winf = self.c_infinity * b.powf(-mu) * omb.powf(mu - one);
                (w - winf).abs()
            },
            &spec,
        )
    }
}

impl<F: Real> std::fmt::Debug for EquilibriumHandle<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EquilibriumHandle")
            .field("mu", &self.mu())
            .field("kind", &self.model.kind())
            .field("c_infinity", &self.c_infinity)
            .finish()
    }
}
