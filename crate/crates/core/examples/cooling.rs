//! Growing `alpha` during the run.
//!
//! `cargo run -p fastkm --example cooling`

use fastkm::diagnostics::SnapshotPolicy;
use fastkm::fastkm::{run_fast_km, Cooling, CoolingMode, RunOptions, ScheduleParams};
use fastkm::operators::skew_resolvent_op;
use fastkm::Vector;

fn main() -> fastkm::Result<()> {
    let t = skew_resolvent_op(10, 0.1)?;
    let x0 = Vector::from_element(10, 1.0);
    let opts = RunOptions::default().with_snapshots(SnapshotPolicy::None);
    let n = 4000;
    let base = ScheduleParams::from_eta(4.0, 0.5, 4.0)?;
    let plain = run_fast_km(&t, &x0, &x0, &base, n, &opts)?;
    println!("fixed alpha = 4: final residual {:.3e}", plain.residuals()[n - 1]);
    for mode in [CoolingMode::Linear, CoolingMode::Log] {
        let p = base.clone().with_cooling(Cooling {
            mode,
            alpha_max: 40.0,
            maxit: n,
        })?;
        let tr = run_fast_km(&t, &x0, &x0, &p, n, &opts)?;
        println!(
            "{mode:?}: alpha(100) = {:.1}, alpha(2000) = {:.1}, final residual {:.3e}",
            p.alpha_at(100),
            p.alpha_at(2000),
            tr.residuals()[n - 1]
        );
    }
    Ok(())
}
