//! The energy along a run and the explicit residual and gap bounds it implies.
//!
//! `cargo run -p fastkm --example lyapunov_bounds`

use fastkm::diagnostics::{explicit_bounds, SnapshotPolicy};
use fastkm::fastkm::{run_fast_km, RunOptions, ScheduleParams};
use fastkm::operators::skew_resolvent_op;
use fastkm::Vector;

fn main() -> fastkm::Result<()> {
    let t = skew_resolvent_op(10, 0.1)?;
    let x0 = Vector::from_element(10, 1.0);
    let z = Vector::zeros(10);
    let opts = RunOptions::default()
        .with_snapshots(SnapshotPolicy::None)
        .with_reference(&z);
    let (alpha, eta, sigma) = (4.0, 0.5, 4.0);
    let p = ScheduleParams::from_eta(alpha, eta, sigma)?;
    let tr = run_fast_km(&t, &x0, &x0, &p, 5000, &opts)?;

    let e1 = tr.records()[0].energy.expect("energy needs a reference");
    println!("E_1 = {e1:.4e}");
    println!("{:>5} {:>11} {:>11} {:>11} {:>11} {:>11}", "k", "energy", "res^2", "bound", "gap", "bound");
    for k in [1, 10, 100, 1000, 4999] {
        let r = &tr.records()[k];
        let b = explicit_bounds(e1, eta, alpha, k as f64 - 1.0 + sigma)?;
        println!(
            "{k:>5} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e}",
            r.energy.unwrap(),
            r.residual * r.residual,
            b.residual_sq,
            r.gap.unwrap(),
            b.gap
        );
    }
    Ok(())
}
