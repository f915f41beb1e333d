//! Monotone piecewise-cubic Hermite interpolation on a uniform grid,
//! built from an exact derivative function by per-segment quadrature.
//! Used to cache cumulative integrals (e.g. `B(a)`) that sit inside hot
//! sampling and stepping loops.

use crate::{lit, Real, Result};

#[derive(Debug, Clone)]
pub struct MonotoneCubicCache<F> {
    x0: F,
    h: F,
    ys: Vec<F>,
    ds: Vec<F>,
    tail_slope: F,
}

impl<F: Real> MonotoneCubicCache<F> {
    /// Tabulates `y(x) = y0 + int_{x0}^{x} deriv` on `n_segments` equal
    /// segments of `[x0, x_max]`; `deriv` must be nonnegative (monotone y).
    /// Beyond `x_max` the cache extends linearly with slope `tail_slope`.
    ///
    /// Node values come from one 15-point Gauss-Kronrod panel per segment,
    /// accumulated with compensated summation; node derivatives are exact.
    pub fn from_derivative(
        deriv: impl Fn(F) -> F,
        x0: F,
        x_max: F,
        n_segments: usize,
        tail_slope: F,
    ) -> Result<Self> {
        if !(x_max > x0) || n_segments == 0 {
            return Err(crate::Error::parameter(
                "cubic cache requires x_max > x0 and at least one segment",
            ));
        }
        let n = n_segments;
        let h = (x_max - x0) / F::from(n).unwrap();
        let mut ys = Vec::with_capacity(n + 1);
        let mut ds = Vec::with_capacity(n + 1);
        ys.push(F::zero());
        ds.push(deriv(x0));

        let mut acc = F::zero();
        let mut comp = F::zero();
        for i in 0..n {
            let a = x0 + h * F::from(i).unwrap();
            let b = a + h;
            let (seg, _) = gk15_panel(&deriv, a, b);
            // Neumaier step
            let t = acc + seg;
            if acc.abs() >= seg.abs() {
                comp = comp + ((acc - t) + seg);
            } else {
                comp = comp + ((seg - t) + acc);
            }
            acc = t;
            ys.push(acc + comp);
            ds.push(deriv(b));
        }

        // monotone safeguard: clamp node derivatives against secant slopes
        let mut cache = MonotoneCubicCache {
            x0,
            h,
            ys,
            ds,
            tail_slope,
        };
        cache.apply_monotone_limiter();
        Ok(cache)
    }

    fn apply_monotone_limiter(&mut self) {
        let n = self.ys.len() - 1;
        let three = lit::<F>(3.0);
        for i in 0..=n {
            let left = if i > 0 {
                Some((self.ys[i] - self.ys[i - 1]) / self.h)
            } else {
                None
            };
            let right = if i < n {
                Some((self.ys[i + 1] - self.ys[i]) / self.h)
            } else {
                None
            };
            let cap = match (left, right) {
                (Some(l), Some(r)) => l.min(r),
                (Some(l), None) => l,
                (None, Some(r)) => r,
                (None, None) => F::zero(),
            };
            let cap = cap.max(F::zero()) * three;
            if self.ds[i] > cap {
                self.ds[i] = cap;
            }
            if self.ds[i] < F::zero() {
                self.ds[i] = F::zero();
            }
        }
    }

    pub fn x_max(&self) -> F {
        self.x0 + self.h * F::from(self.ys.len() - 1).unwrap()
    }

    pub fn y_max(&self) -> F {
        *self.ys.last().unwrap()
    }

    #[inline]
    fn segment_of(&self, x: F) -> usize {
        let idx = ((x - self.x0) / self.h).to_usize().unwrap_or(0);
        idx.min(self.ys.len() - 2)
    }

    /// Interpolated value at `x`, with linear extension outside the table.
    pub fn eval(&self, x: F) -> F {
        if x <= self.x0 {
            return self.ys[0] + self.ds[0] * (x - self.x0);
        }
        let xm = self.x_max();
        if x >= xm {
            return self.y_max() + self.tail_slope * (x - xm);
        }
        let i = self.segment_of(x);
        let xi = self.x0 + self.h * F::from(i).unwrap();
        let t = (x - xi) / self.h;
        hermite(self.ys[i], self.ys[i + 1], self.ds[i], self.ds[i + 1], self.h, t)
    }

    /// Inverse of the (monotone) interpolant: smallest `x` with `eval(x) = y`.
    pub fn inverse(&self, y: F) -> F {
        if y <= self.ys[0] {
            return if self.ds[0] > F::zero() {
                self.x0 + (y - self.ys[0]) / self.ds[0]
            } else {
                self.x0
            };
        }
        let ym = self.y_max();
        if y >= ym {
            return self.x_max() + (y - ym) / self.tail_slope;
        }
        // locate segment by binary search on node values
        let i = match self.ys.binary_search_by(|v| v.partial_cmp(&y).unwrap()) {
            Ok(k) => return self.x0 + self.h * F::from(k).unwrap(),
            Err(k) => k - 1,
        };
        let (ya, yb) = (self.ys[i], self.ys[i + 1]);
        let (da, db) = (self.ds[i], self.ds[i + 1]);
        // solve the monotone cubic in t by safeguarded Newton
        let mut lo = F::zero();
        let mut hi = F::one();
        let mut t = if yb > ya { (y - ya) / (yb - ya) } else { lit(0.5) };
        for _ in 0..64 {
            let val = hermite(ya, yb, da, db, self.h, t) - y;
            if val == F::zero() {
                break;
            }
            if val > F::zero() {
                hi = t;
            } else {
                lo = t;
            }
            let slope = hermite_deriv(ya, yb, da, db, self.h, t);
            let mut next = if slope > F::zero() { t - val / slope } else { lit(0.5) };
            if !(next > lo && next < hi) {
                next = (lo + hi) * lit(0.5);
            }
            if (hi - lo) < lit(1e-16) {
                t = (lo + hi) * lit(0.5);
                break;
            }
            t = next;
        }
        self.x0 + self.h * (F::from(i).unwrap() + t)
    }
}

#[inline]
fn hermite<F: Real>(ya: F, yb: F, da: F, db: F, h: F, t: F) -> F {
    let one = F::one();
    let two = lit::<F>(2.0);
    let three = lit::<F>(3.0);
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = two * t3 - three * t2 + one;
    let h10 = t3 - two * t2 + t;
    let h01 = -two * t3 + three * t2;
    let h11 = t3 - t2;
    h00 * ya + h10 * h * da + h01 * yb + h11 * h * db
}

#[inline]
fn hermite_deriv<F: Real>(ya: F, yb: F, da: F, db: F, h: F, t: F) -> F {
    // derivative with respect to t
    let one = F::one();
    let two = lit::<F>(2.0);
    let three = lit::<F>(3.0);
    let four = lit::<F>(4.0);
    let six = lit::<F>(6.0);
    let t2 = t * t;
    (six * t2 - six * t) * (ya - yb) + (three * t2 - four * t + one) * h * da
        + (three * t2 - two * t) * h * db
}

/// One 15-point Gauss-Kronrod panel (value, error estimate); duplicated in
/// miniature here so the cache builder does not pay the adaptive machinery.
fn gk15_panel<F: Real>(f: &impl Fn(F) -> F, a: F, b: F) -> (F, F) {
    const XGK: [f64; 8] = [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144838258730,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.0,
    ];
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
    const WG: [f64; 4] = [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ];
    let center = (a + b) * lit(0.5);
    let half = (b - a) * lit(0.5);
    let fc = f(center);
    let mut kron = fc * lit(WGK[7]);
    let mut gauss = fc * lit(WG[3]);
    for j in 0..7 {
        let x = half * lit::<F>(XGK[j]);
        let s = f(center - x) + f(center + x);
        kron = kron + lit::<F>(WGK[j]) * s;
        if j % 2 == 1 {
            gauss = gauss + lit::<F>(WG[j / 2]) * s;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}
