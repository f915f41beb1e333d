//! Acceptance suite: one test per criterion, each printing a PASS line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Every tolerance is pinned here; nothing is deferred to calibration.

use ctrw_age::bounds::BoundSpec;
use ctrw_age::equilibria::EquilibriumHandle;
use ctrw_age::fitting::{
    fit_decay, propose_window_end, sweep_mu, DecaySeries, FitPinning, SeriesSource, SweepConfig,
    SweepEngine,
};
use ctrw_age::metrics::statistical_floor;
use ctrw_age::montecarlo::{self, FirstJumpLaw, InitialCondition, McRunConfig};
use ctrw_age::numerics::{integrate_singular_parts, SingularQuadratureSpec};
use ctrw_age::pde::{self, DensityProfile, PdeInitial, PdeRunConfig, Variables};
use ctrw_age::rates::{JumpRateModel, PerturbationCatalog};
use std::f64::consts::PI;
use std::time::Instant;

fn reference_handle(mu: f64) -> EquilibriumHandle<f64> {
    EquilibriumHandle::new(JumpRateModel::reference(mu).unwrap()).unwrap()
}

fn mc_config(mu: f64, stream: u64, tau_max: f64, initial: InitialCondition<f64>) -> McRunConfig<f64> {
    McRunConfig {
        model: JumpRateModel::reference(mu).unwrap(),
        n_walkers: 20_000,
        seed: 20_26,
        stream,
        tau_max,
        snapshot_dtau: 0.1,
        n_bins: 128,
        initial,
        first_jump_law: FirstJumpLaw::Conditional,
    }
}

/// Least-squares slope of `ln(values)` against `taus`.
fn log_slope(taus: &[f64], values: &[f64]) -> f64 {
    let n = taus.len() as f64;
    let sx: f64 = taus.iter().sum();
    let sy: f64 = values.iter().map(|v| v.ln()).sum();
    let sxx: f64 = taus.iter().map(|t| t * t).sum();
    let sxy: f64 = taus.iter().zip(values).map(|(t, v)| t * v.ln()).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[test]
fn criterion_01_quadrature_normalizer_matches_analytic() {
    let start = Instant::now();
    for k in 1..=9 {
        let mu = k as f64 / 10.0;
        let spec = SingularQuadratureSpec::new(-mu, mu - 1.0, 1e-12).unwrap();
        let beta_integral = integrate_singular_parts(
            |b: f64, omb: f64| b.powf(-mu) * omb.powf(mu - 1.0),
            &spec,
        )
        .unwrap();
        let numeric = 1.0 / beta_integral;
        let analytic = (PI * mu).sin() / PI;
        assert!(
            (numeric - analytic).abs() <= 1e-10,
            "mu={mu}: c_inf quadrature {numeric} vs analytic {analytic}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
    println!("[criterion 01] PASS - c_inf matches sin(pi mu)/pi to 1e-10 for mu in 0.1..0.9 ({elapsed:?})");
}

#[test]
fn criterion_02_delta_closed_form_and_scaled_normalizer_bounds() {
    let taus = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0];
    for mu in [0.3, 0.5, 0.7] {
        let h = reference_handle(mu);
        for &tau in &taus {
            let quadrature = h.delta(tau).unwrap();
            let closed = -(-tau).exp() / (1.0 + (-tau).exp());
            assert!(
                (quadrature - closed).abs() <= 1e-8,
                "mu={mu} tau={tau}: delta {quadrature} vs closed form {closed}"
            );
            let c = h.c_tau(tau).unwrap();
            assert!(
                c >= h.c_infinity() - 1e-10 && c <= 2.0 * (1.0 + mu) + 1e-10,
                "mu={mu} tau={tau}: c(tau)={c} outside [c_inf, 2(1+mu)]"
            );
        }
    }
    println!("[criterion 02] PASS - delta quadrature matches -e^-tau/(1+e^-tau) to 1e-8; c(tau) in [c_inf, 2(1+mu)]");
}

#[test]
fn criterion_03_never_jumped_fraction_matches_survival_law() {
    let times = [1.0f64, 10.0, 100.0, 1000.0];
    for (i, mu) in [0.2, 0.5, 0.9].into_iter().enumerate() {
        let start = Instant::now();
        let model = JumpRateModel::reference(mu).unwrap();
        let n = 20_000usize;
        let mut pop = montecarlo::WalkerPopulation::new(
            n,
            &InitialCondition::DiracAtZero,
            &model,
            ctrw_age::numerics::RngStream::new(7, i as u64),
        )
        .unwrap();
        for &t in &times {
            pop.advance_to(t).unwrap();
            let expect = (1.0 + t).powf(-mu);
            let sigma = (expect * (1.0 - expect) / n as f64).sqrt();
            let got = pop.never_jumped_fraction();
            assert!(
                (got - expect).abs() <= 4.0 * sigma,
                "mu={mu} t={t}: never-jumped {got} vs (1+t)^-mu = {expect} (4 sigma = {})",
                4.0 * sigma
            );
        }
        let elapsed = start.elapsed();
        assert!(elapsed.as_secs_f64() < 30.0, "mu={mu} took {elapsed:?}, budget 30 s");
    }
    println!("[criterion 03] PASS - never-jumped fraction = (1+t)^-mu within 4 sigma at t in {{1,10,100,1000}}, mu in {{0.2,0.5,0.9}}");
}

#[test]
fn criterion_04_measured_distance_lies_under_theoretical_bound() {
    let floor = 2.0 * statistical_floor::<f64>(128, 20_000);
    for mu in [0.4, 0.8] {
        let h = reference_handle(mu);
        let bound = BoundSpec::thm_ref(mu).unwrap(); // h0 defaults to the universal 2
        for (stream, initial) in [
            (0u64, InitialCondition::DiracAtZero),
            (1u64, InitialCondition::UniformUnit),
        ] {
            let start = Instant::now();
            let run =
                montecarlo::run_series(&mc_config(mu, stream, 8.0, initial.clone()), &h).unwrap();
            for row in &run.rows {
                let cap = bound.eval(row.tau).unwrap() + floor;
                assert!(
                    row.l1_w_pseudo <= cap,
                    "mu={mu} {initial:?} tau={}: measured {} > bound {}",
                    row.tau,
                    row.l1_w_pseudo,
                    cap
                );
            }
            let elapsed = start.elapsed();
            assert!(elapsed.as_secs_f64() < 120.0, "budget 2 min, took {elapsed:?}");
        }
    }
    println!("[criterion 04] PASS - ||w - W||_1 <= ThmRef bound (H0=2) + 2 sqrt(bins/particles) for mu in {{0.4, 0.8}}, Dirac and uniform");
}

#[test]
fn criterion_05_fit_values_reproduce_published_panels() {
    // mu = 0.9: seed-average over 5 replicas, free C
    let start = Instant::now();
    let mu = 0.9;
    let h = reference_handle(mu);
    let mut mean_values: Vec<f64> = Vec::new();
    let mut taus: Vec<f64> = Vec::new();
    let replicas = 5u64;
    for r in 0..replicas {
        let run = montecarlo::run_series(
            &mc_config(mu, r, 8.0, InitialCondition::DiracAtZero),
            &h,
        )
        .unwrap();
        if mean_values.is_empty() {
            taus = run.rows.iter().map(|x| x.tau).collect();
            mean_values = vec![0.0; taus.len()];
        }
        for (acc, row) in mean_values.iter_mut().zip(&run.rows) {
            *acc += row.l1_w_pseudo / replicas as f64;
        }
    }
    let series = DecaySeries::new(taus, mean_values, SeriesSource::MonteCarlo, mu).unwrap();
    let fit = fit_decay(&series, FitPinning::free()).unwrap();
    assert!(
        (0.85..=0.95).contains(&fit.lambda),
        "mu=0.9: lambda {} outside [0.85, 0.95]",
        fit.lambda
    );
    assert!(
        (0.06..=0.14).contains(&fit.c),
        "mu=0.9: C {} outside [0.06, 0.14]",
        fit.c
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 180.0, "mu=0.9 budget 3 min, took {elapsed:?}");

    // mu = 0.2: window before the binning discontinuity, C pinned at the
    // published fitted value 0.08
    let start = Instant::now();
    let mu = 0.2;
    let h = reference_handle(mu);
    let run = montecarlo::run_series(&mc_config(mu, 0, 8.0, InitialCondition::DiracAtZero), &h)
        .unwrap();
    let taus: Vec<f64> = run.rows.iter().map(|x| x.tau).collect();
    let values: Vec<f64> = run.rows.iter().map(|x| x.l1_w_pseudo).collect();
    let mut series = DecaySeries::new(taus, values, SeriesSource::MonteCarlo, mu).unwrap();
    let end = propose_window_end(&series).expect("atom discontinuity must be detected");
    assert!(
        (4.0..=6.5).contains(&end),
        "discontinuity detected at tau={end}, expected near ln(128) ~ 4.85"
    );
    series = series.with_window(0.0, end).unwrap();
    let fit = fit_decay(&series, FitPinning::pin_c(0.08)).unwrap();
    assert!(
        (0.17..=0.27).contains(&fit.lambda),
        "mu=0.2 windowed fit: lambda {} outside [0.17, 0.27]",
        fit.lambda
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 180.0, "mu=0.2 budget 3 min, took {elapsed:?}");
    println!("[criterion 05] PASS - mu=0.9 replica-averaged fit lambda in [0.85,0.95], C in [0.06,0.14]; mu=0.2 windowed fit lambda in [0.17,0.27]");
}

#[test]
fn criterion_06_mu_sweep_recovers_the_diagonal() {
    let start = Instant::now();
    let mus: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let cfg = SweepConfig {
        engine: SweepEngine::MonteCarlo,
        seed: 11,
        ..SweepConfig::default()
    };
    let points = sweep_mu(&mus, &cfg);
    for p in &points {
        let fit = p.fit.as_ref().unwrap_or_else(|e| panic!("mu={}: {e}", p.mu));
        assert!(
            (fit.lambda - p.mu).abs() <= 0.05,
            "mu={}: fitted lambda {} deviates more than 0.05",
            p.mu,
            fit.lambda
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1200.0, "budget 20 min, took {elapsed:?}");
    println!("[criterion 06] PASS - fitted lambda within +-0.05 of mu across mu = 0.1..0.9 ({elapsed:?})");
}

#[test]
fn criterion_07_pseudo_equilibrium_is_the_better_attractor_for_large_mu() {
    // mu = 0.9: for tau >= 4, w is closer to W than to W_inf
    let h = reference_handle(0.9);
    let run = montecarlo::run_series(&mc_config(0.9, 2, 8.0, InitialCondition::DiracAtZero), &h)
        .unwrap();
    let late: Vec<_> = run.rows.iter().filter(|r| r.tau >= 4.0).collect();
    let wins = late
        .iter()
        .filter(|r| r.l1_w_pseudo < r.l1_w_limit.unwrap())
        .count();
    assert!(
        wins as f64 >= 0.9 * late.len() as f64,
        "mu=0.9: w closer to W at only {wins}/{} late snapshots",
        late.len()
    );

    // mu = 0.5: W and W_inf are closer to each other than w is to W
    let h = reference_handle(0.5);
    let run = montecarlo::run_series(&mc_config(0.5, 3, 8.0, InitialCondition::DiracAtZero), &h)
        .unwrap();
    let wins = run
        .rows
        .iter()
        .filter(|r| r.l1_pseudo_limit.unwrap() < r.l1_w_pseudo)
        .count();
    assert!(
        wins as f64 >= 0.9 * run.rows.len() as f64,
        "mu=0.5: ||W - W_inf|| < ||w - W|| at only {wins}/{} snapshots",
        run.rows.len()
    );
    println!("[criterion 07] PASS - attractor ordering: W wins for mu=0.9 beyond tau=4; ||W-W_inf|| smallest for mu=0.5");
}

#[test]
fn criterion_08_conservation_grid_order_and_cross_validation() {
    // (a) mass drift over a full run
    let model = JumpRateModel::reference(0.5).unwrap();
    let mut p: DensityProfile<f64> =
        DensityProfile::dirac_in_first_cell(4096, Variables::Rescaled).unwrap();
    pde::advance_rescaled_to(&mut p, &model, 8.0).unwrap();
    let drift = (p.mass() - 1.0).abs();
    assert!(drift <= 1e-12, "mass drift {drift:e} exceeds 1e-12");

    // (b) first-order convergence at tau = 5: halving the cell width must
    // shrink the error against a fine reference by >= 1.8. The boundary
    // layer of W at b ~ e^-5 spans ~14 cells at n = 2048, so the asymptotic
    // regime starts there
    let fine_n = 16384usize;
    let mut fine = DensityProfile::uniform_unit(fine_n, Variables::Rescaled).unwrap();
    pde::advance_rescaled_to(&mut fine, &model, 5.0).unwrap();
    let mut errs = Vec::new();
    for n in [2048usize, 4096] {
        let mut coarse = DensityProfile::uniform_unit(n, Variables::Rescaled).unwrap();
        pde::advance_rescaled_to(&mut coarse, &model, 5.0).unwrap();
        let gap = pde::two_solution_gap(&coarse, &fine.restrict(n).unwrap()).unwrap();
        errs.push(gap);
    }
    let ratio = errs[0] / errs[1];
    assert!(
        ratio >= 1.8,
        "grid-halving error ratio {ratio} < 1.8 (errors {errs:?})"
    );

    // (c) PDE vs Monte-Carlo on matched 128-bin grids
    let h = reference_handle(0.5);
    let run = montecarlo::run_series(&mc_config(0.5, 4, 5.0, InitialCondition::UniformUnit), &h)
        .unwrap();
    let budget = 3.0 * statistical_floor::<f64>(128, 20_000);
    for &tau in &[2.0f64, 5.0] {
        let mut w = DensityProfile::uniform_unit(4096, Variables::Rescaled).unwrap();
        pde::advance_rescaled_to(&mut w, &model, tau).unwrap();
        let w128 = w.restrict(128).unwrap();
        let hist = run
            .histograms
            .iter()
            .find(|h| (h.tau() - tau).abs() < 1e-9)
            .expect("snapshot at tau");
        let gap = pde::two_solution_gap(&w128, &hist.to_profile()).unwrap();
        assert!(
            gap <= budget,
            "tau={tau}: ||w_pde - w_mc||_1 = {gap} > 3 sqrt(bins/particles) = {budget}"
        );
    }
    println!("[criterion 08] PASS - mass drift <= 1e-12; grid-halving ratio {ratio:.2} >= 1.8; PDE-vs-MC gap under {budget:.3}");
}

#[test]
fn criterion_09_two_solution_contraction() {
    let model = JumpRateModel::reference(0.5).unwrap();
    let n = 2048usize;
    let mut dirac = DensityProfile::dirac_in_first_cell(n, Variables::Rescaled).unwrap();
    let mut uniform = DensityProfile::uniform_unit(n, Variables::Rescaled).unwrap();
    let mut taus = Vec::new();
    let mut gaps = Vec::new();
    let mut prev = pde::two_solution_gap(&dirac, &uniform).unwrap();
    taus.push(0.0);
    gaps.push(prev);
    for k in 1..=80 {
        let tau = 0.1 * k as f64;
        pde::advance_rescaled_to(&mut dirac, &model, tau).unwrap();
        pde::advance_rescaled_to(&mut uniform, &model, tau).unwrap();
        let gap = pde::two_solution_gap(&dirac, &uniform).unwrap();
        assert!(
            gap <= prev + 1e-6,
            "tau={tau}: gap increased {prev} -> {gap}"
        );
        taus.push(tau);
        gaps.push(gap);
        prev = gap;
    }
    let series = DecaySeries::new(taus, gaps, SeriesSource::Pde, 0.5)
        .unwrap()
        .with_window(2.0, 8.0)
        .unwrap();
    let fit = fit_decay(&series, FitPinning::pin_c(0.0)).unwrap();
    assert!(
        (0.45..=0.55).contains(&fit.lambda),
        "contraction exponent {} outside [0.45, 0.55]",
        fit.lambda
    );
    println!("[criterion 09] PASS - two-solution gap monotone (tol 1e-6), fitted contraction exponent {:.3}", fit.lambda);
}

#[test]
fn criterion_10_pseudo_to_limit_rate_is_one_minus_mu() {
    for mu in [0.3, 0.7] {
        let h = reference_handle(mu);
        let taus: Vec<f64> = (16..=56).map(|k| 0.25 * k as f64).collect(); // [4, 14]
        let vals: Vec<f64> = taus
            .iter()
            .map(|&tau| h.l1_w_to_w_infinity(tau).unwrap())
            .collect();
        let exponent = -log_slope(&taus, &vals);
        assert!(
            (exponent - (1.0 - mu)).abs() <= 0.05,
            "mu={mu}: ||W - W_inf|| decay exponent {exponent} vs 1-mu = {}",
            1.0 - mu
        );
    }
    println!("[criterion 10] PASS - ||W - W_inf||_1 decays with exponent 1-mu (+-0.05) for mu in {{0.3, 0.7}}");
}

#[test]
fn criterion_11_perturbed_rates_follow_the_case_table() {
    // g(a) = (1+a)^{-(1+alpha)}: dominant decay exponent of ||w - W||_1
    // must match the theorem table within +-0.07
    for (mu, alpha, tau_max) in [(0.3, 0.2, 16.0), (0.3, 0.9, 12.0)] {
        let model =
            JumpRateModel::perturbed_catalog(mu, PerturbationCatalog::PowerTail { alpha })
                .unwrap();
        let handle = EquilibriumHandle::new(model.clone()).unwrap();
        let predicted = BoundSpec::general(mu, alpha).unwrap().dominant_rate().0;
        let rows = pde::run_series(
            &PdeRunConfig {
                model,
                n_cells: 2048,
                tau_max,
                snapshot_dtau: 0.25,
                initial: PdeInitial::DiracCell0,
            },
            &handle,
        )
        .unwrap();
        let late: Vec<_> = rows
            .iter()
            .filter(|r| r.tau >= tau_max * 0.55)
            .collect();
        let taus: Vec<f64> = late.iter().map(|r| r.tau).collect();
        let vals: Vec<f64> = late.iter().map(|r| r.l1_w_pseudo).collect();
        let measured = -log_slope(&taus, &vals);
        assert!(
            (measured - predicted).abs() <= 0.07,
            "mu={mu} alpha={alpha}: measured exponent {measured} vs predicted {predicted}"
        );
    }
    println!("[criterion 11] PASS - perturbed-rate decay exponents match the case table within +-0.07 for (mu,alpha) = (0.3,0.2), (0.3,0.9)");
}

#[test]
fn criterion_12_mu_one_marginal_case() {
    // C(tau) delta(tau) closed form
    let h = reference_handle(1.0);
    for &tau in &[0.0f64, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let c_delta = h.normalizer_c(tau).unwrap() * h.delta(tau).unwrap();
        let exact = -tau.exp() / ((1.0 + tau.exp()) * (1.0 + tau.exp()).ln());
        assert!(
            (c_delta - exact).abs() <= 1e-8,
            "tau={tau}: C delta {c_delta} vs {exact}"
        );
    }

    // PDE distance to W fits K/(1+tau) on tau in [2, 10]
    let model = JumpRateModel::reference(1.0).unwrap();
    let rows = pde::run_series(
        &PdeRunConfig {
            model,
            n_cells: 2048,
            tau_max: 10.0,
            snapshot_dtau: 0.1,
            initial: PdeInitial::UniformUnit,
        },
        &h,
    )
    .unwrap();
    let window: Vec<_> = rows.iter().filter(|r| r.tau >= 2.0).collect();
    let xs: Vec<f64> = window.iter().map(|r| 1.0 / (1.0 + r.tau)).collect();
    let ys: Vec<f64> = window.iter().map(|r| r.l1_w_pseudo).collect();
    let k_star: f64 =
        xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
    let rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - k_star * x).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    assert!(
        rms < 0.02,
        "mu=1: residual RMS {rms} of the K/(1+tau) fit exceeds 0.02 (K* = {k_star})"
    );
    println!("[criterion 12] PASS - mu=1: C delta closed form to 1e-8; ||w-W||_1 ~ K/(1+tau) with RMS {rms:.4} (K* = {k_star:.3})");
}
