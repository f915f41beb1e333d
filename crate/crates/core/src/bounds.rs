//! Closed-form theoretical decay bounds, evaluated for overlay against
//! measured distance series.
//!
//! `ThmRef` carries its exact bracketed constants; the other families are
//! stated up to a multiplicative constant `K`, which stays a user-set
//! overlay parameter (default 1) — acceptance works on measured exponents,
//! never on unspecified constants.

use crate::{lit, Error, Real, Result};

/// Which theorem family the bound comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    /// Reference-model entropy bound with explicit constants (two branches,
    /// `mu != 1/2` and `mu = 1/2`).
    ThmRef,
    /// Perturbed-rate entropy bound; case table over `(mu, alpha)`.
    ThmGeneral,
    /// Decay of `||W - W_inf||_1`: `K(e^{(mu-1) tau} + e^{-alpha tau})`.
    WtoWinf,
    /// Lower bound `e^{-mu tau}` forced by the never-jumped atom of
    /// point-mass initial data (exact, no constant).
    LowerDirac,
    /// Natural-variable bound of the reference case, expressed in
    /// `tau = ln(1+t)`.
    NaturalVars,
    /// The marginal `mu = 1` case: algebraic decay `K/(1+tau)`.
    MuOne,
}

/// A fully parameterized bound ready for evaluation.
#[derive(Debug, Clone, Copy)]
pub struct BoundSpec<F> {
    pub theorem: Theorem,
    pub mu: F,
    pub alpha: Option<F>,
    /// Initial entropy `H(0)` for `ThmRef` (the universal bound is 2).
    pub h0: F,
    /// Overlay constant for the up-to-a-constant families.
    pub k: F,
}

const HALF_TOL: f64 = 1e-12;

impl<F: Real> BoundSpec<F> {
    fn build(theorem: Theorem, mu: F, alpha: Option<F>) -> Result<Self> {
        let spec = BoundSpec {
            theorem,
            mu,
            alpha,
            h0: lit(2.0),
            k: F::one(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Reference-model entropy bound with explicit constants.
    pub fn thm_ref(mu: F) -> Result<Self> {
        Self::build(Theorem::ThmRef, mu, None)
    }

    /// Perturbed-rate entropy bound for tail exponent `alpha`.
    pub fn general(mu: F, alpha: F) -> Result<Self> {
        Self::build(Theorem::ThmGeneral, mu, Some(alpha))
    }

    /// `||W - W_inf||_1` bound; `alpha = None` is the reference case.
    pub fn w_to_w_inf(mu: F, alpha: Option<F>) -> Result<Self> {
        Self::build(Theorem::WtoWinf, mu, alpha)
    }

    /// Atom-forced lower bound for point-mass initial data.
    pub fn lower_dirac(mu: F) -> Result<Self> {
        Self::build(Theorem::LowerDirac, mu, None)
    }

    /// Natural-variable reference bound in `tau = ln(1+t)`.
    pub fn natural_vars(mu: F) -> Result<Self> {
        Self::build(Theorem::NaturalVars, mu, None)
    }

    /// Algebraic bound of the marginal `mu = 1` case.
    pub fn mu_one() -> Result<Self> {
        Self::build(Theorem::MuOne, F::one(), None)
    }

    pub fn with_h0(mut self, h0: F) -> Result<Self> {
        self.h0 = h0;
        self.validate()?;
        Ok(self)
    }

    pub fn with_k(mut self, k: F) -> Result<Self> {
        self.k = k;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = self.mu > F::zero() && self.mu < F::one();
        match self.theorem {
            Theorem::ThmRef | Theorem::LowerDirac | Theorem::NaturalVars => {
                if !in_unit {
                    return Err(Error::parameter(format!(
                        "{:?} requires 0 < mu < 1, got {}",
                        self.theorem, self.mu
                    )));
                }
            }
            Theorem::ThmGeneral => {
                if !in_unit {
                    return Err(Error::parameter("ThmGeneral requires 0 < mu < 1"));
                }
                match self.alpha {
                    Some(a) if a > F::zero() => {}
                    _ => return Err(Error::parameter("ThmGeneral requires alpha > 0")),
                }
            }
            Theorem::WtoWinf => {
                if !in_unit {
                    return Err(Error::parameter("WtoWinf requires 0 < mu < 1"));
                }
                if let Some(a) = self.alpha {
                    if a <= F::zero() {
                        return Err(Error::parameter("WtoWinf alpha must be positive"));
                    }
                }
            }
            Theorem::MuOne => {
                if (self.mu - F::one()).abs() > lit(HALF_TOL) {
                    return Err(Error::parameter("MuOne is the mu = 1 case"));
                }
            }
        }
        if self.h0 <= F::zero() || self.k <= F::zero() {
            return Err(Error::parameter("h0 and k must be positive"));
        }
        Ok(())
    }

    fn is_half(&self) -> bool {
        (self.mu - lit(0.5)).abs() <= lit(HALF_TOL)
    }

    /// The bound value at `tau`; `mu = 1/2` branch dispatch is automatic.
    pub fn eval(&self, tau: F) -> Result<F> {
        self.validate()?;
        if !tau.is_finite() || tau < F::zero() {
            return Err(Error::domain(format!("bounds need tau >= 0, got {tau}")));
        }
        let one = F::one();
        let mu = self.mu;
        let k = self.k;
        let e_m = |rate: F| (-rate * tau).exp();
        Ok(match self.theorem {
            Theorem::ThmRef => {
                // p = 2/(1 + e^{-tau}), the Gronwall weight of the
                // time-dependent contraction rate mu/(1+e^{-tau})
                let p = lit::<F>(2.0) / (one + (-tau).exp());
                if self.is_half() {
                    e_m(lit(0.5)) * p * (self.h0 + lit::<F>(8.0) * tau)
                } else {
                    let pm = p.powf(mu);
                    let coeff = lit::<F>(8.0) / (lit::<F>(2.0) * mu - one);
                    e_m(mu) * (self.h0 * pm - coeff * pm) + e_m(one - mu) * coeff * pm
                }
            }
            Theorem::ThmGeneral => {
                let alpha = self.alpha.expect("validated");
                let close = |x: F, y: F| (x - y).abs() <= lit(HALF_TOL);
                if self.is_half() {
                    if close(alpha, lit(0.5)) {
                        k * (one + tau * tau) * e_m(lit(0.5))
                    } else if alpha < lit(0.5) {
                        k * (e_m(alpha) + e_m(lit(0.5)))
                    } else {
                        k * e_m(lit(0.5))
                    }
                } else if alpha > one - mu {
                    k * (e_m(one - mu) + e_m(mu))
                } else if close(alpha, one - mu) {
                    k * (tau * e_m(one - mu) + e_m(mu))
                } else if close(alpha, mu) {
                    // alpha = mu < 1 - mu
                    k * (one + tau) * e_m(mu)
                } else {
                    k * (e_m(alpha) + e_m(mu))
                }
            }
            Theorem::WtoWinf => {
                let tail = self.alpha.map(e_m).unwrap_or(F::zero());
                k * (e_m(one - mu) + tail)
            }
            Theorem::LowerDirac => e_m(mu),
            Theorem::NaturalVars => {
                if self.is_half() {
                    k * (one + tau) * e_m(lit(0.5))
                } else {
                    k * (e_m(mu) + e_m(one - mu))
                }
            }
            Theorem::MuOne => k / (one + tau),
        })
    }

    /// The asymptotically dominant decay exponent and whether a polynomial
    /// (`tau`-power) correction multiplies it. `MuOne` decays algebraically:
    /// exponent 0 with correction.
    pub fn dominant_rate(&self) -> (F, bool) {
        let one = F::one();
        let mu = self.mu;
        let close = |x: F, y: F| (x - y).abs() <= lit(HALF_TOL);
        match self.theorem {
            Theorem::ThmRef => (mu.min(one - mu), self.is_half()),
            Theorem::ThmGeneral => {
                let alpha = self.alpha.expect("validated");
                if self.is_half() {
                    if close(alpha, lit(0.5)) {
                        (lit(0.5), true)
                    } else if alpha < lit(0.5) {
                        (alpha, false)
                    } else {
                        (lit(0.5), false)
                    }
                } else if alpha > one - mu {
                    (mu.min(one - mu), false)
                } else if close(alpha, one - mu) {
                    if mu < one - mu {
                        (mu, false)
                    } else {
                        (one - mu, true)
                    }
                } else if close(alpha, mu) {
                    (mu, true)
                } else {
                    (alpha.min(mu), false)
                }
            }
            Theorem::WtoWinf => {
                let base = one - mu;
                match self.alpha {
                    Some(a) => (base.min(a), false),
                    None => (base, false),
                }
            }
            Theorem::LowerDirac => (mu, false),
            Theorem::NaturalVars => (mu.min(one - mu), self.is_half()),
            Theorem::MuOne => (F::zero(), true),
        }
    }
}
