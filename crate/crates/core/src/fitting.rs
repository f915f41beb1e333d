//! Decay-rate extraction from measured distance series.
//!
//! The model is `f(tau) = A e^{-lambda tau} + B e^{-(1-lambda) tau} + C`
//! with `lambda in (0,1)`. The objective is multimodal in `lambda` near
//! `lambda = 1/2` (the two exponentials collide), so the fit multi-starts
//! on a lambda grid of step 0.02, solving the linear subproblem in
//! `(A, B, C)` exactly at each start, then polishes the best starts with
//! damped Gauss-Newton.

use crate::equilibria::EquilibriumHandle;
use crate::montecarlo::{self, FirstJumpLaw, InitialCondition, McRunConfig};
use crate::pde::{self, PdeInitial, PdeRunConfig};
use crate::rates::JumpRateModel;
use crate::{lit, Error, Real, Result};
use rayon::prelude::*;

/// Provenance of a measured series; decides the default `C` pinning
/// (Monte-Carlo runs have a statistical floor, deterministic solves do not).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesSource {
    MonteCarlo,
    Pde,
    External,
}

/// An ordered `(tau, value)` series to fit.
#[derive(Debug, Clone)]
pub struct DecaySeries<F> {
    taus: Vec<F>,
    values: Vec<F>,
    pub source: SeriesSource,
    pub mu_nominal: F,
    pub fit_window: Option<(F, F)>,
}

impl<F: Real> DecaySeries<F> {
    pub fn new(
        taus: Vec<F>,
        values: Vec<F>,
        source: SeriesSource,
        mu_nominal: F,
    ) -> Result<Self> {
        if taus.len() != values.len() {
            return Err(Error::parameter("taus and values must have equal length"));
        }
        if taus.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::parameter("taus must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < F::zero()) {
            return Err(Error::parameter("series values must be finite and >= 0"));
        }
        Ok(DecaySeries {
            taus,
            values,
            source,
            mu_nominal,
            fit_window: None,
        })
    }

    pub fn with_window(mut self, lo: F, hi: F) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::parameter("fit window must have positive length"));
        }
        self.fit_window = Some((lo, hi));
        Ok(self)
    }

    pub fn taus(&self) -> &[F] {
        &self.taus
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    fn windowed(&self) -> (Vec<F>, Vec<F>) {
        match self.fit_window {
            None => (self.taus.clone(), self.values.clone()),
            Some((lo, hi)) => {
                let mut t = Vec::new();
                let mut v = Vec::new();
                for (tau, val) in self.taus.iter().zip(&self.values) {
                    if *tau >= lo && *tau <= hi {
                        t.push(*tau);
                        v.push(*val);
                    }
                }
                (t, v)
            }
        }
    }
}

/// Parameter pinning for the fit.
#[derive(Debug, Clone, Copy, Default)]
pub struct FitPinning<F> {
    pub c: Option<F>,
}

impl<F: Real> FitPinning<F> {
    pub fn free() -> Self {
        FitPinning { c: None }
    }

    pub fn pin_c(value: F) -> Self {
        FitPinning { c: Some(value) }
    }

    /// Default policy: `C` is fit for Monte-Carlo sources (statistical
    /// plateau) and pinned to 0 for deterministic PDE sources.
    pub fn for_source(source: SeriesSource) -> Self {
        match source {
            SeriesSource::Pde => FitPinning { c: Some(F::zero()) },
            _ => FitPinning { c: None },
        }
    }
}

/// Per-parameter standard errors (zero for pinned parameters).
#[derive(Debug, Clone, Copy)]
pub struct FitStdErrors<F> {
    pub lambda: F,
    pub a: F,
    pub b: F,
    pub c: F,
}

/// Result of a decay fit.
#[derive(Debug, Clone)]
pub struct FitResult<F> {
    pub lambda: F,
    pub a: F,
    pub b: F,
    pub c: F,
    pub std_errors: FitStdErrors<F>,
    pub residual_rms: F,
    /// Set when the two exponentials are indistinguishable
    /// (`lambda ~ 1/2`): `A` and `B` cannot be estimated independently.
    pub degenerate: bool,
    pub fixed_params: Vec<&'static str>,
    pub window: (F, F),
    pub n_points: usize,
}

impl<F: Real> FitResult<F> {
    pub fn predict(&self, tau: F) -> F {
        self.a * (-self.lambda * tau).exp()
            + self.b * (-(F::one() - self.lambda) * tau).exp()
            + self.c
    }
}

/// Solves a small dense linear system by Gaussian elimination with partial
/// pivoting; returns (solution, min |pivot|, max |pivot|).
fn solve_dense<F: Real>(mut a: Vec<Vec<F>>, mut rhs: Vec<F>) -> Option<(Vec<F>, F, F)> {
    let n = rhs.len();
    let mut min_piv = F::infinity();
    let mut max_piv = F::zero();
    for col in 0..n {
        let (best, best_val) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .fold((col, F::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if !(best_val > F::zero()) || !best_val.is_finite() {
            return None;
        }
        a.swap(col, best);
        rhs.swap(col, best);
        min_piv = min_piv.min(best_val);
        max_piv = max_piv.max(best_val);
        for r in (col + 1)..n {
            let factor = a[r][col] / a[col][col];
            for c in col..n {
                let v = a[col][c];
                a[r][c] = a[r][c] - factor * v;
            }
            let v = rhs[col];
            rhs[r] = rhs[r] - factor * v;
        }
    }
    let mut x = vec![F::zero(); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in (row + 1)..n {
            acc = acc - a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((x, min_piv, max_piv))
}

struct Objective<'a, F> {
    taus: &'a [F],
    values: &'a [F],
    pin_c: Option<F>,
}

impl<F: Real> Objective<'_, F> {
    fn n_params(&self) -> usize {
        if self.pin_c.is_some() {
            3
        } else {
            4
        }
    }

    /// Parameter layout: [lambda, A, B, (C)].
    fn residuals(&self, p: &[F]) -> Vec<F> {
        let c = self.pin_c.unwrap_or_else(|| p[3]);
        self.taus
            .iter()
            .zip(self.values)
            .map(|(&tau, &y)| {
                p[1] * (-p[0] * tau).exp() + p[2] * (-(F::one() - p[0]) * tau).exp() + c - y
            })
            .collect()
    }

    fn ssr(&self, p: &[F]) -> F {
        crate::numerics::compensated_sum(self.residuals(p).iter().map(|r| *r * *r))
    }

    fn jacobian(&self, p: &[F]) -> Vec<Vec<F>> {
        let one = F::one();
        self.taus
            .iter()
            .map(|&tau| {
                let e1 = (-p[0] * tau).exp();
                let e2 = (-(one - p[0]) * tau).exp();
                let mut row = vec![
                    -p[1] * tau * e1 + p[2] * tau * e2, // d/d lambda
                    e1,                                 // d/d A
                    e2,                                 // d/d B
                ];
                if self.pin_c.is_none() {
                    row.push(one); // d/d C
                }
                row
            })
            .collect()
    }

    /// Exact linear least squares in (A, B, [C]) at fixed lambda.
    fn linear_solve_at(&self, lambda: F) -> Option<Vec<F>> {
        let one = F::one();
        let cols = if self.pin_c.is_none() { 3 } else { 2 };
        let design: Vec<Vec<F>> = self
            .taus
            .iter()
            .map(|&tau| {
                let mut row = vec![(-lambda * tau).exp(), (-(one - lambda) * tau).exp()];
                if cols == 3 {
                    row.push(one);
                }
                row
            })
            .collect();
        let mut ata = vec![vec![F::zero(); cols]; cols];
        let mut aty = vec![F::zero(); cols];
        for (row, (&y, &c0)) in design
            .iter()
            .zip(self.values.iter().zip(self.pin_c.iter().cycle().chain(std::iter::repeat(&F::zero()))))
        {
            let _ = c0;
            let y_eff = y - self.pin_c.unwrap_or(F::zero());
            for i in 0..cols {
                for j in 0..cols {
                    ata[i][j] = ata[i][j] + row[i] * row[j];
                }
                aty[i] = aty[i] + row[i] * y_eff;
            }
        }
        let (sol, _, _) = solve_dense(ata, aty)?;
        let mut p = vec![lambda, sol[0], sol[1]];
        if cols == 3 {
            p.push(sol[2]);
        }
        Some(p)
    }

    /// Damped Gauss-Newton (Levenberg style) from a start vector.
    fn refine(&self, mut p: Vec<F>) -> (Vec<F>, F) {
        let np = self.n_params();
        let mut ssr = self.ssr(&p);
        let mut nu = lit::<F>(1e-6);
        let lam_lo = lit::<F>(1e-4);
        let lam_hi = F::one() - lit::<F>(1e-4);
        for _ in 0..200 {
            let jac = self.jacobian(&p);
            let res = self.residuals(&p);
            let mut jtj = vec![vec![F::zero(); np]; np];
            let mut jtr = vec![F::zero(); np];
            for (row, &r) in jac.iter().zip(&res) {
                for i in 0..np {
                    for j in 0..np {
                        jtj[i][j] = jtj[i][j] + row[i] * row[j];
                    }
                    jtr[i] = jtr[i] + row[i] * r;
                }
            }
            let grad_norm = jtr.iter().fold(F::zero(), |m, g| m.max(g.abs()));
            if grad_norm < lit(1e-10) {
                break;
            }
            let mut improved = false;
            for _ in 0..25 {
                let mut damped = jtj.clone();
                for i in 0..np {
                    damped[i][i] = damped[i][i] * (F::one() + nu);
                }
                let neg_jtr: Vec<F> = jtr.iter().map(|&g| -g).collect();
                if let Some((step, _, _)) = solve_dense(damped, neg_jtr) {
                    let cand: Vec<F> = p.iter().zip(&step).map(|(&a, &s)| a + s).collect();
                    if cand[0] >= lam_lo && cand[0] <= lam_hi {
                        let cand_ssr = self.ssr(&cand);
                        if cand_ssr < ssr {
                            p = cand;
                            ssr = cand_ssr;
                            nu = (nu * lit(0.33)).max(lit(1e-12));
                            improved = true;
                            break;
                        }
                    }
                }
                nu = nu * lit(10.0);
                if nu > lit(1e12) {
                    break;
                }
            }
            if !improved {
                break;
            }
        }
        (p, ssr)
    }
}

/// Fits the two-exponential decay model to a series.
///
/// Needs at least 8 strictly positive values inside the fit window. The
/// `lambda <-> 1-lambda, A <-> B` relabeling leaves the model invariant;
/// the reported branch is the one with `lambda` nearest `mu_nominal`
/// (ties keep `lambda <= 1/2`).
pub fn fit_decay<F: Real>(series: &DecaySeries<F>, pinning: FitPinning<F>) -> Result<FitResult<F>> {
    let (taus, values) = series.windowed();
    let m = taus.len();
    if m < 8 {
        return Err(Error::parameter(format!(
            "fit needs at least 8 points in the window, got {m}"
        )));
    }
    if values.iter().any(|v| !(*v > F::zero())) {
        return Err(Error::parameter("fit needs strictly positive values"));
    }
    let obj = Objective {
        taus: &taus,
        values: &values,
        pin_c: pinning.c,
    };

    // multi-start over the lambda grid
    let mut starts: Vec<(F, Vec<F>)> = Vec::new();
    let mut k = 1usize;
    loop {
        let lambda = lit::<F>(0.02) * F::from(k).unwrap();
        if lambda >= F::one() {
            break;
        }
        if let Some(p) = obj.linear_solve_at(lambda) {
            starts.push((obj.ssr(&p), p));
        }
        k += 1;
    }
    if starts.is_empty() {
        return Err(Error::Numeric {
            context: "no usable fit start on the lambda grid".into(),
            estimate: f64::NAN,
            achieved: f64::NAN,
        });
    }
    starts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut best: Option<(Vec<F>, F)> = None;
    for (_, start) in starts.into_iter().take(5) {
        let (p, ssr) = obj.refine(start);
        if best.as_ref().map_or(true, |(_, s)| ssr < *s) {
            best = Some((p, ssr));
        }
    }
    let (mut p, ssr) = best.expect("at least one start refined");

    // canonical branch: lambda nearest mu_nominal (tie: lambda <= 1/2)
    {
        let lam = p[0];
        let alt = F::one() - lam;
        let d_cur = (lam - series.mu_nominal).abs();
        let d_alt = (alt - series.mu_nominal).abs();
        let swap = d_alt < d_cur || (d_alt == d_cur && alt < lam);
        if swap {
            p[0] = alt;
            p.swap(1, 2);
        }
    }

    // covariance from the Jacobian at the optimum
    let np = obj.n_params();
    let dof = m.saturating_sub(np).max(1);
    let sigma2 = ssr / F::from(dof).unwrap();
    let jac = obj.jacobian(&p);
    let mut jtj = vec![vec![F::zero(); np]; np];
    for row in &jac {
        for i in 0..np {
            for j in 0..np {
                jtj[i][j] = jtj[i][j] + row[i] * row[j];
            }
        }
    }
    let mut diag_cov = vec![F::zero(); np];
    let mut ill_conditioned = false;
    for i in 0..np {
        let mut e = vec![F::zero(); np];
        e[i] = F::one();
        match solve_dense(jtj.clone(), e) {
            Some((col, min_piv, max_piv)) => {
                diag_cov[i] = col[i].max(F::zero());
                if min_piv <= F::zero() || max_piv / min_piv > lit(1e12) {
                    ill_conditioned = true;
                }
            }
            None => ill_conditioned = true,
        }
    }
    let se = |i: usize| (sigma2 * diag_cov[i]).sqrt();
    let half = lit::<F>(0.5);
    let degenerate = (p[0] - half).abs() < lit(0.02) || ill_conditioned;

    let (c, se_c, fixed) = match pinning.c {
        Some(cv) => (cv, F::zero(), vec!["C"]),
        None => (p[3], se(3), vec![]),
    };
    let window = series
        .fit_window
        .unwrap_or((taus[0], taus[m - 1]));
    Ok(FitResult {
        lambda: p[0],
        a: p[1],
        b: p[2],
        c,
        std_errors: FitStdErrors {
            lambda: se(0),
            a: se(1),
            b: se(2),
            c: se_c,
        },
        residual_rms: (ssr / F::from(m).unwrap()).sqrt(),
        degenerate,
        fixed_params: fixed,
        window,
        n_points: m,
    })
}

/// Detects the binning discontinuity caused by the never-jumped atom
/// entering the last histogram bin: the first index whose second difference
/// jumps above 5x the local scale. Returns the proposed window end (the
/// `tau` just before the jump).
pub fn propose_window_end<F: Real>(series: &DecaySeries<F>) -> Option<F> {
    let y = &series.values;
    let m = y.len();
    if m < 16 {
        return None;
    }
    let d2: Vec<F> = (1..m - 1)
        .map(|i| (y[i + 1] - y[i] * lit(2.0) + y[i - 1]).abs())
        .collect();
    let lookback = 10usize;
    for i in lookback..d2.len() {
        let mut window: Vec<F> = d2[i - lookback..i].to_vec();
        window.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let scale = window[lookback / 2].max(lit(1e-12));
        if d2[i] > scale * lit(5.0) {
            return Some(series.taus[i]); // d2[i] involves points i, i+1, i+2
        }
    }
    None
}

/// Engine used by a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepEngine {
    MonteCarlo,
    Pde,
}

/// Run configuration shared by every point of a `mu`-sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig<F: Real> {
    pub engine: SweepEngine,
    pub n_walkers: usize,
    pub n_cells: usize,
    pub n_bins: usize,
    pub seed: u64,
    pub tau_max: F,
    pub snapshot_dtau: F,
    /// Apply [`propose_window_end`] automatically (the published protocol
    /// for small `mu`, where the atom discontinuity contaminates the tail).
    pub auto_window: bool,
}

impl<F: Real> Default for SweepConfig<F> {
    fn default() -> Self {
        SweepConfig {
            engine: SweepEngine::MonteCarlo,
            n_walkers: 20_000,
            n_cells: 2048,
            n_bins: 128,
            seed: 1,
            tau_max: lit(8.0),
            snapshot_dtau: lit(0.1),
            auto_window: true,
        }
    }
}

/// One sweep point: per-point failures are recorded, the sweep continues.
#[derive(Debug, Clone)]
pub struct SweepPoint<F> {
    pub mu: F,
    pub fit: std::result::Result<FitResult<F>, Error>,
}

/// Measures the decay series of `||w - W||_1` for each `mu` (point-mass
/// initial data, one independent stream per point) and fits the decay rate.
/// Points run in parallel.
pub fn sweep_mu<F: Real>(mus: &[F], cfg: &SweepConfig<F>) -> Vec<SweepPoint<F>> {
    mus.par_iter()
        .enumerate()
        .map(|(idx, &mu)| SweepPoint {
            mu,
            fit: sweep_point(mu, idx as u64, cfg),
        })
        .collect()
}

fn sweep_point<F: Real>(mu: F, stream: u64, cfg: &SweepConfig<F>) -> Result<FitResult<F>> {
    if !(mu > F::zero() && mu < F::one()) {
        return Err(Error::parameter(format!("sweep needs mu in (0,1), got {mu}")));
    }
    let model = JumpRateModel::reference(mu)?;
    let handle = EquilibriumHandle::new(model.clone())?;
    let (taus, values, source) = match cfg.engine {
        SweepEngine::MonteCarlo => {
            let run = montecarlo::run_series(
                &McRunConfig {
                    model,
                    n_walkers: cfg.n_walkers,
                    seed: cfg.seed,
                    stream,
                    tau_max: cfg.tau_max,
                    snapshot_dtau: cfg.snapshot_dtau,
                    n_bins: cfg.n_bins,
                    initial: InitialCondition::DiracAtZero,
                    first_jump_law: FirstJumpLaw::Conditional,
                },
                &handle,
            )?;
            let taus: Vec<F> = run.rows.iter().map(|r| r.tau).collect();
            let values: Vec<F> = run.rows.iter().map(|r| r.l1_w_pseudo).collect();
            (taus, values, SeriesSource::MonteCarlo)
        }
        SweepEngine::Pde => {
            let rows = pde::run_series(
                &PdeRunConfig {
                    model,
                    n_cells: cfg.n_cells,
                    tau_max: cfg.tau_max,
                    snapshot_dtau: cfg.snapshot_dtau,
                    initial: PdeInitial::DiracCell0,
                },
                &handle,
            )?;
            let taus: Vec<F> = rows.iter().map(|r| r.tau).collect();
            let values: Vec<F> = rows.iter().map(|r| r.l1_w_pseudo).collect();
            (taus, values, SeriesSource::Pde)
        }
    };
    let mut series = DecaySeries::new(taus, values, source, mu)?;
    if cfg.auto_window {
        if let Some(end) = propose_window_end(&series) {
            let lo = series.taus[0];
            series = series.with_window(lo, end)?;
        }
    }
    fit_decay(&series, FitPinning::for_source(source))
}
