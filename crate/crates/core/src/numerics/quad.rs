//! Adaptive Gauss-Kronrod quadrature with power-substitution
//! desingularization of integrable endpoint singularities.

use crate::{lit, Error, Real, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// 15-point Kronrod abscissae (positive half, QUADPACK values).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

/// 15-point Kronrod weights.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Embedded 7-point Gauss weights.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod panel: (integral, error estimate, integral of |f|).
fn gk15<F: Real>(f: &impl Fn(F) -> F, a: F, b: F) -> (F, F, F) {
    let center = (a + b) * lit(0.5);
    let half = (b - a) * lit(0.5);

    let fc = f(center);
    let mut kronrod = fc * lit(WGK[7]);
    let mut gauss = fc * lit(WG[3]);
    let mut resabs = fc.abs() * lit(WGK[7]);
    // odd-indexed abscissae carry the embedded Gauss weights
    for j in 0..7 {
        let x = half * lit::<F>(XGK[j]);
        let f1 = f(center - x);
        let f2 = f(center + x);
        let sum = f1 + f2;
        kronrod = kronrod + lit::<F>(WGK[j]) * sum;
        resabs = resabs + lit::<F>(WGK[j]) * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss = gauss + lit::<F>(WG[j / 2]) * sum;
        }
    }

    let integral = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (integral, err, resabs * half.abs())
}

struct Panel<F> {
    a: F,
    b: F,
    value: F,
    err: F,
}

impl<F: Real> PartialEq for Panel<F> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<F: Real> Eq for Panel<F> {}
impl<F: Real> PartialOrd for Panel<F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<F: Real> Ord for Panel<F> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// Splits the worst panel until the summed error estimate drops below
/// `abs_tol` or `max_subdivisions` splits have been spent. Panel error
/// estimates are floored at the representation-noise level
/// (`50 eps int|f|`, as in QUADPACK) so roundoff in the integrand cannot
/// drive unbounded refinement; noise-floored panels are never split.
pub fn integrate<F: Real>(
    f: impl Fn(F) -> F,
    a: F,
    b: F,
    abs_tol: F,
    max_subdivisions: usize,
) -> Result<F> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integration bounds must be finite"));
    }
    if a == b {
        return Ok(F::zero());
    }
    if abs_tol <= F::zero() {
        return Err(Error::parameter("abs_tol must be positive"));
    }

    let noise = lit::<F>(50.0) * F::epsilon();
    let min_width = (b - a).abs() * F::epsilon() * lit(1e3);

    // (panel, is_final): final panels sit at the representation-noise floor
    // or floating-point resolution and are never split again
    let eval_panel = |pa: F, pb: F| -> (Panel<F>, bool) {
        let (v, e, res) = gk15(&f, pa, pb);
        let floor = noise * res;
        if !v.is_finite() {
            return (
                Panel {
                    a: pa,
                    b: pb,
                    value: v,
                    err: F::infinity(),
                },
                (pb - pa).abs() <= min_width,
            );
        }
        let at_noise = e <= floor;
        (
            Panel {
                a: pa,
                b: pb,
                value: v,
                err: if at_noise { floor } else { e },
            },
            at_noise || (pb - pa).abs() <= min_width,
        )
    };

    let mut finals: Vec<Panel<F>> = Vec::new();
    let mut final_err = F::zero();
    let mut active: BinaryHeap<Panel<F>> = BinaryHeap::new();
    let mut active_err = F::zero();

    let place = |panel: Panel<F>,
                     is_final: bool,
                     finals: &mut Vec<Panel<F>>,
                     final_err: &mut F,
                     active: &mut BinaryHeap<Panel<F>>,
                     active_err: &mut F| {
        if is_final {
            *final_err = *final_err + panel.err;
            finals.push(panel);
        } else {
            *active_err = *active_err + panel.err;
            active.push(panel);
        }
    };

    let (p0, d0) = eval_panel(a, b);
    place(p0, d0, &mut finals, &mut final_err, &mut active, &mut active_err);

    let mut splits = 0usize;
    while final_err + active_err > abs_tol && splits < max_subdivisions {
        let worst = match active.pop() {
            Some(p) => p,
            None => break, // everything at the noise floor
        };
        active_err = active_err - worst.err;
        let mid = (worst.a + worst.b) * lit(0.5);
        if mid <= worst.a || mid >= worst.b {
            final_err = final_err + worst.err;
            finals.push(worst);
            continue;
        }
        let (pl, dl) = eval_panel(worst.a, mid);
        let (pr, dr) = eval_panel(mid, worst.b);
        place(pl, dl, &mut finals, &mut final_err, &mut active, &mut active_err);
        place(pr, dr, &mut finals, &mut final_err, &mut active, &mut active_err);
        splits += 1;
    }

    let total_err = final_err + active_err;
    let value = super::compensated_sum(
        finals
            .iter()
            .map(|p| p.value)
            .chain(active.iter().map(|p| p.value)),
    );
    if !value.is_finite() || total_err > abs_tol {
        return Err(Error::Numeric {
            context: "adaptive quadrature did not reach tolerance".into(),
            estimate: value.to_f64().unwrap_or(f64::NAN),
            achieved: total_err.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(value)
}

/// Declares the endpoint behavior of an integrand on `(0, 1)`:
/// `f(x) ~ x^left_exponent` near 0 and `f(x) ~ (1-x)^right_exponent` near 1.
/// Exponents must lie in `(-1, 0]` (integrable singularity or none).
#[derive(Debug, Clone, Copy)]
pub struct SingularQuadratureSpec<F> {
    pub left_exponent: F,
    pub right_exponent: F,
    pub abs_tol: F,
    pub max_subdivisions: usize,
}

impl<F: Real> SingularQuadratureSpec<F> {
    pub fn new(left_exponent: F, right_exponent: F, abs_tol: F) -> Result<Self> {
        let spec = Self {
            left_exponent,
            right_exponent,
            abs_tol,
            max_subdivisions: 2000,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |e: F| e > -F::one() && e <= F::zero();
        if !ok(self.left_exponent) || !ok(self.right_exponent) {
            return Err(Error::parameter(format!(
                "singular exponents must lie in (-1, 0], got ({}, {})",
                self.left_exponent, self.right_exponent
            )));
        }
        if self.abs_tol <= F::zero() {
            return Err(Error::parameter("abs_tol must be positive"));
        }
        Ok(())
    }
}

/// Integrates `f` over `(0, 1)` where `f(x, one_minus_x)` receives the
/// distance to the right endpoint as an exact second argument.
///
/// This is the precision-preserving core: after the substitution
/// `x = 1 - v^g` near 1, the quantity `1 - x = v^g` is known exactly while
/// the rounded `x` alone cannot represent it, so integrands carrying
/// `(1-x)^q` factors must take it from the second argument.
///
/// The interval is split at 1/2; each half is desingularized by the power
/// substitution `x = u^{1/(1+p)}` (mirrored on the right), after which the
/// transformed integrand is bounded and adaptive panels converge normally.
pub fn integrate_singular_parts<F: Real>(
    f: impl Fn(F, F) -> F,
    spec: &SingularQuadratureSpec<F>,
) -> Result<F> {
    spec.validate()?;
    let one = F::one();
    let half = lit::<F>(0.5);
    let half_tol = spec.abs_tol * half;
    let half_sub = (spec.max_subdivisions / 2).max(8);

    // left half: x = u^gl, dx = gl u^{gl-1} du, u in (0, 1/2^{1+p}]
    let gl = one / (one + spec.left_exponent);
    let ul = half.powf(one + spec.left_exponent);
    let left = integrate(
        |u: F| {
            let x = u.powf(gl);
            f(x, one - x) * gl * u.powf(gl - one)
        },
        F::zero(),
        ul,
        half_tol,
        half_sub,
    )?;

    // right half: 1 - x = v^gr exactly
    let gr = one / (one + spec.right_exponent);
    let vr = half.powf(one + spec.right_exponent);
    let right = integrate(
        |v: F| {
            let omx = v.powf(gr);
            f(one - omx, omx) * gr * v.powf(gr - one)
        },
        F::zero(),
        vr,
        half_tol,
        half_sub,
    )?;

    Ok(left + right)
}

/// Integrates `f` over `(0, 1)` with integrable endpoint singularities
/// declared in `spec`.
///
/// Plain single-argument interface. Near `x = 1` an integrand that
/// recomputes `1 - x` from the rounded argument cannot see distances below
/// machine epsilon, so the last `~1e-6` of the interval is handled by
/// extrapolating the smooth factor `f(x) (1-x)^{-q}` to the endpoint and
/// integrating the declared power law analytically. Integrands built from
/// `1-x` internally should prefer [`integrate_singular_parts`], which has
/// no such floor.
pub fn integrate_singular<F: Real>(
    f: impl Fn(F) -> F,
    spec: &SingularQuadratureSpec<F>,
) -> Result<F> {
    spec.validate()?;
    let one = F::one();
    let half = lit::<F>(0.5);
    let q = spec.right_exponent;
    let half_tol = spec.abs_tol * half;
    let half_sub = (spec.max_subdivisions / 2).max(8);

    // left half: x = u^gl; x small is computed without cancellation
    let gl = one / (one + spec.left_exponent);
    let ul = half.powf(one + spec.left_exponent);
    let left = integrate(
        |u: F| f(u.powf(gl)) * gl * u.powf(gl - one),
        F::zero(),
        ul,
        half_tol,
        half_sub,
    )?;

    if q == F::zero() {
        let right = integrate(f, half, one, half_tol, half_sub)?;
        return Ok(left + right);
    }

    // right half: transformed panels down to distance s0, then the declared
    // power law times an extrapolated smooth factor over [1-s0, 1)
    let s0 = F::epsilon().powf(lit(0.4));
    let gr = one / (one + q);
    let vr = half.powf(one + q);
    let v0 = s0.powf(one / gr);
    let middle = integrate(
        |v: F| {
            let omx = v.powf(gr);
            f(one - omx) * gr * v.powf(gr - one)
        },
        v0,
        vr,
        half_tol,
        half_sub,
    )?;

    // f(1-s) = phi(s) s^q with phi smooth; linear extrapolation of phi
    let phi_s0 = f(one - s0) * s0.powf(-q);
    let sh = s0 * half;
    let phi_sh = f(one - sh) * sh.powf(-q);
    let slope = (phi_s0 - phi_sh) / sh;
    let phi_0 = phi_s0 - slope * s0;
    let tail = phi_0 * s0.powf(one + q) / (one + q)
        + slope * s0.powf(lit::<F>(2.0) + q) / (lit::<F>(2.0) + q);

    Ok(left + middle + tail)
}

/// Integrates `f(x, hi_minus_x)` over `[lo, hi]` with declared singular
/// behavior at the interval's own endpoints: `f ~ (x-lo)^p` near `lo` and
/// `f ~ (hi-x)^q` near `hi`. The distance `hi - x` is passed exactly.
pub fn integrate_on_parts<F: Real>(
    f: impl Fn(F, F) -> F,
    lo: F,
    hi: F,
    spec: &SingularQuadratureSpec<F>,
) -> Result<F> {
    if hi <= lo {
        return if hi == lo {
            Ok(F::zero())
        } else {
            Err(Error::parameter("integration interval requires lo <= hi"))
        };
    }
    let width = hi - lo;
    let scaled = SingularQuadratureSpec {
        abs_tol: spec.abs_tol / width,
        ..*spec
    };
    let v = integrate_singular_parts(|x: F, omx: F| f(lo + width * x, width * omx), &scaled)?;
    Ok(v * width)
}

/// Single-argument variant of [`integrate_on_parts`].
pub fn integrate_on<F: Real>(
    f: impl Fn(F) -> F,
    lo: F,
    hi: F,
    spec: &SingularQuadratureSpec<F>,
) -> Result<F> {
    integrate_on_parts(|x, _| f(x), lo, hi, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn spec(l: f64, r: f64) -> SingularQuadratureSpec<f64> {
        SingularQuadratureSpec::new(l, r, 1e-12).unwrap()
    }

    #[test]
    fn constant_is_exact() {
        let v = integrate_singular(|_| 1.0, &spec(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn arcsine_kernel_gives_pi() {
        // Beta(1/2, 1/2) = pi
        let v = integrate_singular_parts(
            |b: f64, omb: f64| b.powf(-0.5) * omb.powf(-0.5),
            &spec(-0.5, -0.5),
        )
        .unwrap();
        assert_abs_diff_eq!(v, PI, epsilon = 1e-11);
    }

    #[test]
    fn asymmetric_beta_matches_reflection_formula() {
        // Beta(0.7, 0.3) = pi / sin(0.3 pi) ~= 3.8832
        let v = integrate_singular_parts(
            |b: f64, omb: f64| b.powf(-0.3) * omb.powf(-0.7),
            &spec(-0.3, -0.7),
        )
        .unwrap();
        assert_abs_diff_eq!(v, PI / (0.3 * PI).sin(), epsilon = 1e-11);
        assert_abs_diff_eq!(v, 3.8832220774509327, epsilon = 1e-10);
    }

    #[test]
    fn single_argument_interface_handles_the_same_kernels() {
        // the plain interface sees rounded arguments near 1; accuracy is
        // capped by representation noise but must stay robust and close
        for (l, r) in [(-0.5, -0.5), (-0.3, -0.7), (-0.8, -0.2)] {
            let s = SingularQuadratureSpec::new(l, r, 1e-9).unwrap();
            let v = integrate_singular(|b: f64| b.powf(l) * (1.0 - b).powf(r), &s).unwrap();
            let exact = PI / ((-l) * PI).sin(); // Beta(1+l, 1+r) with l+r = -1
            assert_abs_diff_eq!(v, exact, epsilon = 1e-8);
        }
    }

    #[test]
    fn beta_identity_across_mu_range() {
        for k in 1..=9 {
            let mu = k as f64 / 10.0;
            let v = integrate_singular_parts(
                |b: f64, omb: f64| b.powf(-mu) * omb.powf(mu - 1.0),
                &spec(-mu, mu - 1.0),
            )
            .unwrap();
            assert_abs_diff_eq!(v, PI / (PI * mu).sin(), epsilon = 1e-10);
        }
    }

    #[test]
    fn plain_panels_handle_smooth_integrands() {
        let v = integrate(|x: f64| x.exp(), 0.0, 1.0, 1e-13, 100).unwrap();
        assert_abs_diff_eq!(v, 1.0f64.exp() - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shifted_interval_with_interior_layer() {
        // narrow Gaussian bump: forces genuine adaptivity
        let v = integrate(
            |x: f64| (-((x - 0.7) / 1e-3).powi(2)).exp(),
            0.0,
            1.0,
            1e-13,
            2000,
        )
        .unwrap();
        assert_abs_diff_eq!(v, 1e-3 * PI.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn tolerance_failure_reports_estimate() {
        let r = integrate(|x: f64| (1e7 * x).sin().abs(), 0.0, 1.0, 1e-14, 4);
        match r {
            Err(Error::Numeric { achieved, .. }) => assert!(achieved > 1e-14),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn integrate_on_subinterval() {
        // cell average of (1-x)^{-1/2} over [0.9, 1.0]
        let s = SingularQuadratureSpec::new(0.0, -0.5, 1e-12).unwrap();
        let v = integrate_on_parts(|_, omx: f64| omx.powf(-0.5), 0.9, 1.0, &s).unwrap();
        assert_abs_diff_eq!(v, 2.0 * 0.1f64.sqrt(), epsilon = 1e-11);
    }

    #[test]
    fn rejects_nonintegrable_exponent() {
        assert!(SingularQuadratureSpec::new(-1.0, 0.0, 1e-10).is_err());
        assert!(SingularQuadratureSpec::new(-0.5, 0.1, 1e-10).is_err());
    }

    #[test]
    fn works_in_f32() {
        let s = SingularQuadratureSpec::<f32>::new(-0.5, -0.5, 1e-4).unwrap();
        let v =
            integrate_singular_parts(|b: f32, omb: f32| b.powf(-0.5) * omb.powf(-0.5), &s).unwrap();
        assert!((v - std::f32::consts::PI).abs() < 1e-3);
    }
}
