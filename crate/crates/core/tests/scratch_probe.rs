use ctrw_age::equilibria::EquilibriumHandle;
use ctrw_age::pde::{self, PdeInitial, PdeRunConfig};
use ctrw_age::rates::JumpRateModel;

#[test]
fn probe_mu_one_resolved() {
    let model = JumpRateModel::reference(1.0).unwrap();
    let h = EquilibriumHandle::new(model.clone()).unwrap();
    let rows = pde::run_series(
        &PdeRunConfig { model, n_cells: 32768, tau_max: 10.0, snapshot_dtau: 0.25, initial: PdeInitial::UniformUnit },
        &h,
    )
    .unwrap();
    let win: Vec<_> = rows.iter().filter(|r| r.tau >= 2.0).collect();
    let xs: Vec<f64> = win.iter().map(|r| 1.0 / (1.0 + r.tau)).collect();
    let ys: Vec<f64> = win.iter().map(|r| r.l1_w_pseudo).collect();
    let k: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
    let rms = (xs.iter().zip(&ys).map(|(x, y)| (y - k * x).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
    for r in win.iter().step_by(4) {
        println!("tau={:5.2}  l1={:.5}  l1*(1+tau)={:.5}", r.tau, r.l1_w_pseudo, r.l1_w_pseudo * (1.0 + r.tau));
    }
    println!("K* = {k:.4}, RMS = {rms:.4}");
    panic!("probe");
}
