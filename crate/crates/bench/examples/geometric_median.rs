//! Geometric median of random points by graph Douglas-Rachford, with the
//! spread of the node estimates.
//!
//! `cargo run -p fastkm-bench --example geometric_median`

use fastkm::diagnostics::SnapshotPolicy;
use fastkm::fastkm::{RunOptions, ScheduleParams};
use fastkm::precond::{build_graph_drs, run_fast_ppp_observed, PppOptions, ResolventSystem};
use fastkm::Vector;
use fastkm_bench::problems::gen_median;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let med = gen_median(20, 10, 0)?;
    let sys = build_graph_drs(med.spec.clone())?;
    let w0 = Vector::zeros(sys.reduced_dim());
    let p = ScheduleParams::from_eta(4.0, 0.9, 4.0)?;
    let opts: PppOptions = RunOptions::default().with_snapshots(SnapshotPolicy::None).into();
    let mut last = None;
    run_fast_ppp_observed(&sys, &p, &w0, &w0, 5000, &opts, |st| {
        if [10, 100, 1000, 4999].contains(&st.k) {
            println!(
                "k = {:>4}: residual {:.3e}, variance {:.3e}",
                st.k,
                st.record.residual,
                st.record.variance.unwrap_or(f64::NAN)
            );
        }
        last = st.resolved.shadows.mean().ok();
    })?;
    let x = last.expect("at least one step");
    println!(
        "sum of distances {:.6}, subgradient residual {:.2e}",
        med.objective(&x),
        med.optimality_residual(&x)
    );
    Ok(())
}
