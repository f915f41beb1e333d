//! Jump-rate models.
//!
//! A model supplies the age-dependent jump rate `beta(a)`, its cumulative
//! integral `B(a) = int_0^a beta`, and the conditional survival probability
//! `exp(-(B(a0+s) - B(a0)))`. The reference model is `beta(a) = mu/(1+a)`;
//! perturbed models add an integrable tail `g`, and custom models supply an
//! arbitrary positive rate with a declared subdiffusion exponent `mu`.

use crate::numerics::{integrate, MonotoneCubicCache};
use crate::{lit, Error, Real, Result};
use std::sync::Arc;

/// Shared positive scalar function handle.
pub type ScalarFn<F> = Arc<dyn Fn(F) -> F + Send + Sync>;

/// Largest age tabulated by the `B` cache; beyond it `B` extends with the
/// asymptotic slope `mu` in `ln(1+a)`.
const CACHE_A_MAX: f64 = 1e14;
const CACHE_SEGMENTS: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    Reference,
    Perturbed,
    Custom,
}

/// Built-in perturbations `g` selectable from experiment configs.
#[derive(Debug, Clone, Copy)]
pub enum PerturbationCatalog<F> {
    /// `g(a) = (1+a)^{-(1+alpha)}`; tail integral `(1+a)^{-alpha}/alpha`.
    PowerTail { alpha: F },
    /// Half-cosine bump of the given height supported on `[0, support]`.
    CompactBump { height: F, support: F },
}

impl<F: Real> PerturbationCatalog<F> {
    /// Returns `(g, alpha, tail_k)` with `int_a^inf |g| <= tail_k/(1+a)^alpha`.
    pub fn build(&self) -> Result<(ScalarFn<F>, F, F)> {
        match *self {
            PerturbationCatalog::PowerTail { alpha } => {
                if alpha <= F::zero() {
                    return Err(Error::parameter("power_tail exponent must be positive"));
                }
                let g: ScalarFn<F> =
                    Arc::new(move |a: F| (F::one() + a).powf(-(F::one() + alpha)));
                Ok((g, alpha, F::one() / alpha))
            }
            PerturbationCatalog::CompactBump { height, support } => {
                if height <= F::zero() || support <= F::zero() {
                    return Err(Error::parameter(
                        "compact_bump height and support must be positive",
                    ));
                }
                let pi = lit::<F>(std::f64::consts::PI);
                let g: ScalarFn<F> = Arc::new(move |a: F| {
                    if a <= support {
                        height * lit::<F>(0.5) * (F::one() + (pi * a / support).cos())
                    } else {
                        F::zero()
                    }
                });
                let l1 = height * support * lit(0.5);
                Ok((g, F::one(), l1 * (F::one() + support)))
            }
        }
    }
}

enum Form<F: Real> {
    Reference,
    Perturbed {
        g: ScalarFn<F>,
        alpha: F,
        tail_k: F,
        b_cache: MonotoneCubicCache<F>,
    },
    Custom {
        beta_fn: ScalarFn<F>,
        b_cache: MonotoneCubicCache<F>,
    },
}

/// An age-dependent jump-rate model with subdiffusion exponent `mu`.
///
/// Immutable after construction (the `B` cache for non-reference kinds is
/// built eagerly), so models are freely shared across threads.
pub struct JumpRateModel<F: Real> {
    mu: F,
    form: Arc<Form<F>>,
}

impl<F: Real> Clone for JumpRateModel<F> {
    fn clone(&self) -> Self {
        JumpRateModel {
            mu: self.mu,
            form: Arc::clone(&self.form),
        }
    }
}

impl<F: Real> std::fmt::Debug for JumpRateModel<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JumpRateModel")
            .field("kind", &self.kind())
            .field("mu", &self.mu)
            .finish()
    }
}

fn check_mu<F: Real>(mu: F) -> Result<()> {
    if !(mu > F::zero() && mu <= F::one()) {
        return Err(Error::parameter(format!(
            "mu must lie in (0, 1], got {mu}"
        )));
    }
    Ok(())
}

impl<F: Real> JumpRateModel<F> {
    /// The reference model `beta(a) = mu/(1+a)`. `mu = 1` is accepted for
    /// the marginal non-self-similar case.
    pub fn reference(mu: F) -> Result<Self> {
        check_mu(mu)?;
        Ok(JumpRateModel {
            mu,
            form: Arc::new(Form::Reference),
        })
    }

    /// `beta(a) = mu/(1+a) + g(a)` with declared tail bound
    /// `int_a^inf |g| <= tail_k/(1+a)^alpha`.
    pub fn perturbed(mu: F, g: ScalarFn<F>, alpha: F, tail_k: F) -> Result<Self> {
        check_mu(mu)?;
        if alpha <= F::zero() || tail_k <= F::zero() {
            return Err(Error::parameter("perturbation needs alpha > 0 and K > 0"));
        }
        let g_b = Arc::clone(&g);
        let beta = move |a: F| mu / (F::one() + a) + g_b(a);
        sampled_positivity_check(&beta)?;
        let b_cache = build_b_cache(&beta, mu)?;
        Ok(JumpRateModel {
            mu,
            form: Arc::new(Form::Perturbed {
                g,
                alpha,
                tail_k,
                b_cache,
            }),
        })
    }

    /// Perturbed model from the built-in catalog.
    pub fn perturbed_catalog(mu: F, catalog: PerturbationCatalog<F>) -> Result<Self> {
        let (g, alpha, tail_k) = catalog.build()?;
        Self::perturbed(mu, g, alpha, tail_k)
    }

    /// Arbitrary user rate with declared exponent `mu`.
    pub fn custom(mu: F, beta_fn: ScalarFn<F>) -> Result<Self> {
        check_mu(mu)?;
        let b = Arc::clone(&beta_fn);
        sampled_positivity_check(&move |a| b(a))?;
        let b2 = Arc::clone(&beta_fn);
        let b_cache = build_b_cache(&move |a| b2(a), mu)?;
        Ok(JumpRateModel {
            mu,
            form: Arc::new(Form::Custom { beta_fn, b_cache }),
        })
    }

    pub fn kind(&self) -> RateKind {
        match *self.form {
            Form::Reference => RateKind::Reference,
            Form::Perturbed { .. } => RateKind::Perturbed,
            Form::Custom { .. } => RateKind::Custom,
        }
    }

    pub fn mu(&self) -> F {
        self.mu
    }

    /// Declared perturbation tail parameters `(alpha, K)`, if any.
    pub fn tail_parameters(&self) -> Option<(F, F)> {
        match *self.form {
            Form::Perturbed { alpha, tail_k, .. } => Some((alpha, tail_k)),
            _ => None,
        }
    }

    /// The jump rate at age `a`.
    pub fn beta(&self, a: F) -> Result<F> {
        if !a.is_finite() || a < F::zero() {
            return Err(Error::domain(format!("beta requires finite a >= 0, got {a}")));
        }
        Ok(self.beta_unchecked(a))
    }

    #[inline]
    pub(crate) fn beta_unchecked(&self, a: F) -> F {
        match &*self.form {
            Form::Reference => self.mu / (F::one() + a),
            Form::Perturbed { g, .. } => self.mu / (F::one() + a) + g(a),
            Form::Custom { beta_fn, .. } => beta_fn(a),
        }
    }

    /// `B(a) = int_0^a beta(s) ds`, nondecreasing, `B(0) = 0`.
    ///
    /// Closed form for the reference kind; for other kinds an eagerly built
    /// cubic cache in `ln(1+a)` (node data from adaptive quadrature).
    pub fn big_b(&self, a: F) -> Result<F> {
        if !a.is_finite() || a < F::zero() {
            return Err(Error::domain(format!("B requires finite a >= 0, got {a}")));
        }
        Ok(self.big_b_unchecked(a))
    }

    #[inline]
    pub(crate) fn big_b_unchecked(&self, a: F) -> F {
        match &*self.form {
            Form::Reference => self.mu * a.ln_1p(),
            Form::Perturbed { b_cache, .. } | Form::Custom { b_cache, .. } => {
                b_cache.eval(a.ln_1p())
            }
        }
    }

    /// Direct adaptive-quadrature evaluation of `B(a)`, bypassing the cache.
    /// Cross-check path: slower but cache-free.
    pub fn big_b_quadrature(&self, a: F, abs_tol: F) -> Result<F> {
        if !a.is_finite() || a < F::zero() {
            return Err(Error::domain(format!("B requires finite a >= 0, got {a}")));
        }
        if a == F::zero() {
            return Ok(F::zero());
        }
        // integrate in x = ln(1+s): d B = beta(e^x - 1) e^x dx
        integrate(
            |x: F| self.beta_unchecked(x.exp_m1()) * x.exp(),
            F::zero(),
            a.ln_1p(),
            abs_tol,
            4000,
        )
    }

    /// Smallest `a` with `B(a) = y` (for inverse-transform sampling).
    pub fn inverse_big_b(&self, y: F) -> Result<F> {
        if !y.is_finite() || y < F::zero() {
            return Err(Error::domain(format!("inverse B requires y >= 0, got {y}")));
        }
        match &*self.form {
            Form::Reference => Ok((y / self.mu).exp_m1()),
            Form::Perturbed { b_cache, .. } | Form::Custom { b_cache, .. } => {
                Ok(b_cache.inverse(y).exp_m1())
            }
        }
    }

    /// Probability that a walker of age `age0` survives a further time `s`
    /// without jumping: `exp(-(B(age0+s) - B(age0)))`.
    pub fn survival(&self, age0: F, s: F) -> Result<F> {
        if !age0.is_finite() || age0 < F::zero() || !s.is_finite() || s < F::zero() {
            return Err(Error::domain(
                "survival requires finite age0 >= 0 and s >= 0",
            ));
        }
        Ok(self.survival_unchecked(age0, s))
    }

    #[inline]
    pub(crate) fn survival_unchecked(&self, age0: F, s: F) -> F {
        match &*self.form {
            // ((1+age0)/(1+age0+s))^mu, evaluated in log space
            Form::Reference => (self.mu * (age0.ln_1p() - (age0 + s).ln_1p())).exp(),
            _ => (-(self.big_b_unchecked(age0 + s) - self.big_b_unchecked(age0))).exp(),
        }
    }

    /// `int_0^inf |g|` for perturbed models, by quadrature.
    pub fn g_l1_norm(&self, abs_tol: F) -> Result<Option<F>> {
        match &*self.form {
            Form::Perturbed { g, .. } => {
                let v = integrate(
                    |x: F| g(x.exp_m1()).abs() * x.exp(),
                    F::zero(),
                    lit::<F>(CACHE_A_MAX).ln_1p(),
                    abs_tol,
                    4000,
                )?;
                Ok(Some(v))
            }
            _ => Ok(None),
        }
    }

    /// Best-effort numerical check of the standing hypotheses; reports, never rejects.
    pub fn validate(&self) -> HypothesisReport<F> {
        let mut checks = Vec::new();
        let grid = log_grid::<F>(1e-6, 1e12, 241);

        // positivity and boundedness on a sampled grid
        {
            let mut min_beta = F::infinity();
            let mut max_beta = F::zero();
            let mut ok = true;
            for &a in std::iter::once(&F::zero()).chain(grid.iter()) {
                let b = self.beta_unchecked(a);
                if !b.is_finite() || b <= F::zero() {
                    ok = false;
                }
                min_beta = min_beta.min(b);
                max_beta = max_beta.max(b);
            }
            checks.push(HypothesisCheck {
                name: "beta_positive_bounded",
                passed: ok && max_beta.is_finite(),
                worst: min_beta,
                detail: format!("min beta {min_beta:e}, max beta {max_beta:e} on sampled grid"),
            });
        }

        // H1 limit: a*beta(a) -> mu, probed at a = 1e10
        {
            let a = lit::<F>(1e10);
            let dev = (a * self.beta_unchecked(a) - self.mu).abs();
            checks.push(HypothesisCheck {
                name: "h1_limit_a_beta",
                passed: dev < lit(0.01),
                worst: dev,
                detail: format!("|a beta(a) - mu| = {dev:e} at a = 1e10"),
            });
        }

        // H1 monotonicity (sampled); reference is exactly non-increasing
        {
            let mut worst_rise = F::zero();
            let mut prev = self.beta_unchecked(F::zero());
            for &a in &grid {
                let b = self.beta_unchecked(a);
                worst_rise = worst_rise.max(b - prev);
                prev = b;
            }
            checks.push(HypothesisCheck {
                name: "h1_nonincreasing",
                passed: worst_rise <= lit(1e-12),
                worst: worst_rise,
                detail: format!("largest sampled increase {worst_rise:e}"),
            });
        }

        // weakened H1: a * inf_{[0,a]} beta -> mu (informative for custom kinds)
        {
            let mut inf_so_far = self.beta_unchecked(F::zero());
            let mut dev_at_end = F::zero();
            for &a in &grid {
                inf_so_far = inf_so_far.min(self.beta_unchecked(a));
                dev_at_end = (a * inf_so_far - self.mu).abs();
            }
            checks.push(HypothesisCheck {
                name: "h1_underline_beta_limit",
                passed: dev_at_end < lit(0.01),
                worst: dev_at_end,
                detail: format!("|a underline-beta(a) - mu| = {dev_at_end:e} at grid end"),
            });
        }

        // reference form exactness
        if self.kind() == RateKind::Reference {
            let mut worst = F::zero();
            for &a in &grid {
                worst = worst.max(((F::one() + a) * self.beta_unchecked(a) - self.mu).abs());
            }
            checks.push(HypothesisCheck {
                name: "reference_exact_form",
                passed: worst <= lit(1e-14),
                worst,
                detail: format!("max |(1+a) beta - mu| = {worst:e}"),
            });
        }

        // H2 tail bound for perturbed kinds
        if let Form::Perturbed {
            g, alpha, tail_k, ..
        } = &*self.form
        {
            let mut worst_excess = F::neg_infinity();
            let mut ok = true;
            let upper = lit::<F>(1e12);
            for &a in log_grid::<F>(1e-3, 1e8, 23).iter() {
                let tail = integrate(
                    |x: F| g(x.exp_m1()).abs() * x.exp(),
                    a.ln_1p(),
                    upper.ln_1p(),
                    lit(1e-11),
                    4000,
                )
                .unwrap_or(F::infinity());
                let bound = *tail_k / (F::one() + a).powf(*alpha);
                let excess = tail - bound;
                worst_excess = worst_excess.max(excess);
                if excess > lit::<F>(1e-9) * bound.max(F::one()) {
                    ok = false;
                }
            }
            checks.push(HypothesisCheck {
                name: "h2_tail_bound",
                passed: ok,
                worst: worst_excess,
                detail: format!(
                    "max (int_a |g| - K/(1+a)^alpha) = {worst_excess:e} on sampled grid"
                ),
            });
        }

        HypothesisReport {
            kind: self.kind(),
            mu: self.mu,
            checks,
        }
    }
}

fn sampled_positivity_check<F: Real>(beta: &impl Fn(F) -> F) -> Result<()> {
    for &a in std::iter::once(&F::zero()).chain(log_grid::<F>(1e-6, 1e12, 61).iter()) {
        let b = beta(a);
        if !b.is_finite() || b <= F::zero() {
            return Err(Error::parameter(format!(
                "jump rate must be positive and finite; beta({a:e}) = {b:e}"
            )));
        }
    }
    Ok(())
}

fn build_b_cache<F: Real>(beta: &impl Fn(F) -> F, mu: F) -> Result<MonotoneCubicCache<F>> {
    let x_max = lit::<F>(CACHE_A_MAX).ln_1p();
    MonotoneCubicCache::from_derivative(
        |x: F| beta(x.exp_m1()) * x.exp(),
        F::zero(),
        x_max,
        CACHE_SEGMENTS,
        mu,
    )
}

fn log_grid<F: Real>(lo: f64, hi: f64, n: usize) -> Vec<F> {
    let l0 = lo.ln();
    let l1 = hi.ln();
    (0..n)
        .map(|i| lit::<F>((l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp()))
        .collect()
}

#[derive(Debug, Clone)]
pub struct HypothesisCheck<F> {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed deviation (meaning depends on the check).
    pub worst: F,
    pub detail: String,
}

/// Outcome of the best-effort hypothesis validation.
#[derive(Debug, Clone)]
pub struct HypothesisReport<F> {
    pub kind: RateKind,
    pub mu: F,
    pub checks: Vec<HypothesisCheck<F>>,
}

impl<F: Real> HypothesisReport<F> {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = format!("hypothesis report: kind {:?}, mu {}\n", self.kind, self.mu);
        for c in &self.checks {
            s.push_str(&format!(
                "  [{}] {}: {}\n",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn power_tail_model(mu: f64, alpha: f64) -> JumpRateModel<f64> {
        JumpRateModel::perturbed_catalog(mu, PerturbationCatalog::PowerTail { alpha }).unwrap()
    }

    #[test]
    fn reference_beta_values() {
        let m = JumpRateModel::reference(0.5).unwrap();
        assert_abs_diff_eq!(m.beta(0.0).unwrap(), 0.5);
        let m = JumpRateModel::reference(0.4).unwrap();
        assert_abs_diff_eq!(m.beta(3.0).unwrap(), 0.1);
    }

    #[test]
    fn perturbed_beta_by_direct_substitution() {
        // mu/(1+a) + (1+a)^{-2} at a=1: 0.25 + 0.25
        let m = power_tail_model(0.5, 1.0);
        assert_abs_diff_eq!(m.beta(1.0).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn beta_rejects_bad_ages() {
        let m = JumpRateModel::reference(0.5).unwrap();
        assert!(m.beta(-1.0).is_err());
        assert!(m.beta(f64::NAN).is_err());
        assert!(m.beta(f64::INFINITY).is_err());
    }

    #[test]
    fn big_b_reference_closed_form() {
        let m = JumpRateModel::reference(0.5).unwrap();
        assert_eq!(m.big_b(0.0).unwrap(), 0.0);
        // ln(1+a) = 2 at a = e^2 - 1, so B = mu * 2 = 1
        let a = (2f64).exp() - 1.0;
        assert_abs_diff_eq!(m.big_b(a).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn big_b_perturbed_matches_antiderivative() {
        // B(1) = 0.5 ln 2 + int_0^1 (1+s)^{-2} ds = 0.5 ln 2 + 0.5
        let m = power_tail_model(0.5, 1.0);
        let exact = 0.5 * 2f64.ln() + 0.5;
        assert_abs_diff_eq!(m.big_b(1.0).unwrap(), exact, epsilon = 1e-10);
        // cross-checked by the cache-free quadrature path
        let q = m.big_b_quadrature(1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(q, exact, epsilon = 1e-11);
    }

    #[test]
    fn big_b_quadrature_agrees_with_reference_closed_form_on_log_grid() {
        let m = JumpRateModel::reference(0.3).unwrap();
        for &a in &[1e-6, 1e-3, 0.1, 1.0, 10.0, 1e3, 1e6, 1e9] {
            let closed = m.big_b(a).unwrap();
            let quad = m.big_b_quadrature(a, 1e-12).unwrap();
            assert_abs_diff_eq!(closed, quad, epsilon = 1e-10);
        }
    }

    #[test]
    fn big_b_cache_accuracy_on_log_grid() {
        let m = power_tail_model(0.3, 0.9);
        for &a in &[1e-4, 0.5, 3.0, 1e2, 1e5, 1e9, 1e12] {
            let cached = m.big_b(a).unwrap();
            let quad = m.big_b_quadrature(a, 1e-12).unwrap();
            assert_abs_diff_eq!(cached, quad, epsilon = 2e-10);
        }
    }

    #[test]
    fn survival_examples() {
        let m = JumpRateModel::reference(0.5).unwrap();
        assert_eq!(m.survival(0.7, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(m.survival(0.0, 3.0).unwrap(), 0.5, epsilon = 1e-15);
        let m1 = JumpRateModel::reference(1.0).unwrap();
        assert_abs_diff_eq!(m1.survival(1.0, 2.0).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn survival_semigroup_property() {
        let models = [
            JumpRateModel::reference(0.4).unwrap(),
            power_tail_model(0.6, 0.5),
        ];
        let s = crate::numerics::RngStream::new(11, 0);
        for m in &models {
            for k in 0..200 {
                let a0 = 10.0 * s.open01_at::<f64>(3 * k);
                let u = 50.0 * s.open01_at::<f64>(3 * k + 1);
                let v = 50.0 * s.open01_at::<f64>(3 * k + 2);
                let together = m.survival(a0, u + v).unwrap();
                let split = m.survival(a0, u).unwrap() * m.survival(a0 + u, v).unwrap();
                assert_abs_diff_eq!(together, split, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn survival_monotone_in_elapsed_time() {
        let m = power_tail_model(0.5, 1.0);
        let mut prev = 1.0;
        for k in 0..100 {
            let s = k as f64 * 0.5;
            let v = m.survival(2.0, s).unwrap();
            assert!(v <= prev + 1e-15, "survival must be nonincreasing");
            assert!(v > 0.0 && v <= 1.0);
            prev = v;
        }
    }

    #[test]
    fn inverse_big_b_round_trip() {
        for m in [
            JumpRateModel::reference(0.7).unwrap(),
            power_tail_model(0.3, 0.2),
        ] {
            for &a in &[0.0, 0.3, 2.0, 57.0, 1e4, 1e8] {
                let y = m.big_b(a).unwrap();
                let back = m.inverse_big_b(y).unwrap();
                assert_abs_diff_eq!((1.0 + back) / (1.0 + a), 1.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn hypothesis_report_reference_passes() {
        let m = JumpRateModel::reference(0.5).unwrap();
        let report = m.validate();
        assert!(report.all_passed(), "{}", report.render());
    }

    #[test]
    fn hypothesis_report_power_tail_passes() {
        let m = power_tail_model(0.3, 0.9);
        let report = m.validate();
        assert!(report.all_passed(), "{}", report.render());
    }

    #[test]
    fn hypothesis_report_flags_wrong_mu() {
        // custom rate is 0.5/(1+a) but declares mu = 0.2: the H1 limit check must fail
        let beta: ScalarFn<f64> = Arc::new(|a: f64| 0.5 / (1.0 + a));
        let m = JumpRateModel::custom(0.2, beta).unwrap();
        let report = m.validate();
        assert!(!report.all_passed());
        let limit = report
            .checks
            .iter()
            .find(|c| c.name == "h1_limit_a_beta")
            .unwrap();
        assert!(!limit.passed);
    }

    #[test]
    fn compact_bump_tail_bound_holds() {
        let m = JumpRateModel::perturbed_catalog(
            0.5,
            PerturbationCatalog::CompactBump {
                height: 0.2,
                support: 2.0,
            },
        )
        .unwrap();
        let report = m.validate();
        assert!(report.all_passed(), "{}", report.render());
    }

    #[test]
    fn nonpositive_rate_rejected_at_construction() {
        let g: ScalarFn<f64> = Arc::new(|a: f64| -2.0 / (1.0 + a));
        assert!(JumpRateModel::perturbed(0.5, g, 1.0, 10.0).is_err());
    }

    #[test]
    fn mu_range_enforced() {
        assert!(JumpRateModel::<f64>::reference(0.0).is_err());
        assert!(JumpRateModel::<f64>::reference(1.2).is_err());
        assert!(JumpRateModel::<f64>::reference(1.0).is_ok());
    }
}
