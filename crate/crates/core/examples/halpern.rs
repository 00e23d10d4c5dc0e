//! With `theta = 1` the momentum iteration is an anchored (Halpern) iteration.
//!
//! `cargo run -p fastkm --example halpern`

use fastkm::diagnostics::SnapshotPolicy;
use fastkm::fastkm::{run_anchored_halpern, run_fast_km, HalpernForm, RunOptions, ScheduleParams};
use fastkm::operators::skew_resolvent_op;
use fastkm::Vector;

fn main() -> fastkm::Result<()> {
    let t = skew_resolvent_op(10, 0.1)?;
    let x0 = Vector::from_element(10, 1.0);
    let opts = RunOptions::default().with_snapshots(SnapshotPolicy::All);
    for (alpha, sigma) in [(2.0, 1.0), (3.0, 2.0), (5.0, 17.0)] {
        let p = ScheduleParams::new(alpha, 1.0, sigma)?;
        let a = run_fast_km(&t, &x0, &x0, &p, 500, &opts)?;
        let h = HalpernForm::from_initial(&t, &x0, &x0, alpha, sigma)?;
        let b = run_anchored_halpern(&t, &h, &x0, 500, &opts)?;
        println!(
            "alpha = {alpha}, sigma = {sigma}: |anchor| = {:.4}, sup distance {:.2e}",
            h.anchor.norm(),
            a.sup_distance(&b)?
        );
    }
    Ok(())
}
