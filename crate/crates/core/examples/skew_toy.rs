//! Fast-KM against plain KM on the resolvent of a skew-symmetric operator.
//!
//! `cargo run -p fastkm --example skew_toy`

use fastkm::diagnostics::{rate_slope, SnapshotPolicy};
use fastkm::fastkm::{run_fast_km, run_km, RunOptions, ScheduleParams};
use fastkm::operators::skew_resolvent_op;
use fastkm::Vector;

fn main() -> fastkm::Result<()> {
    let t = skew_resolvent_op(10, 0.1)?;
    let x0 = Vector::from_element(10, 1.0);
    let z = Vector::zeros(10);
    let opts = RunOptions::default()
        .with_snapshots(SnapshotPolicy::None)
        .with_reference(&z);
    let n = 10_000;

    let km = run_km(&t, &x0, 0.5, n, &opts)?;
    let p = ScheduleParams::from_eta(4.0, 0.5, 4.0)?;
    let fast = run_fast_km(&t, &x0, &x0, &p, n, &opts)?;

    println!("{:>6} {:>12} {:>12}", "k", "KM 0.5", "Fast-KM");
    for k in [1, 10, 100, 1000, n - 1] {
        println!(
            "{k:>6} {:>12.3e} {:>12.3e}",
            km.records()[k].residual,
            fast.records()[k].residual
        );
    }
    let ks: Vec<f64> = (0..n).map(|k| k as f64).collect();
    for (name, tr) in [("KM", &km), ("Fast-KM", &fast)] {
        let s = rate_slope(&ks, &tr.residuals(), (100.0, 1000.0))?;
        println!("{name}: log-log residual slope {s:.2}");
    }
    Ok(())
}
