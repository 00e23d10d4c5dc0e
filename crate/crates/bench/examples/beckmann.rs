//! Preconditioned primal-dual iteration for Beckmann transport on a grid:
//! relaxed and cooled Fast-PDHG against plain KM.
//!
//! `cargo run --release -p fastkm-bench --example beckmann`

use fastkm::diagnostics::SnapshotPolicy;
use fastkm::fastkm::{Cooling, CoolingMode, RunOptions, ScheduleParams};
use fastkm::precond::{build_pdhg, run_fast_ppp, run_km_ppp, PppOptions, ResolventSystem};
use fastkm::Vector;
use fastkm_bench::problems::{gen_beckmann, Marginals};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prob = gen_beckmann(20, Marginals::TwoPoints, 1e-3, 100.0)?;
    let sys = build_pdhg(prob.pdhg())?;
    let c = sys.step_condition();
    println!("tau1 tau2 ||Div||^2 = {:.3} (satisfied: {})", c.product, c.satisfied);

    let u0 = Vector::zeros(sys.reduced_dim());
    let opts: PppOptions = RunOptions::default().with_snapshots(SnapshotPolicy::None).into();
    let n = 20_000;
    let km = run_km_ppp(&sys, &u0, 0.9, n, &opts)?;
    let p = ScheduleParams::from_eta(4.0, 0.9, 4.0)?
        .with_step(1.9)?
        .with_cooling(Cooling {
            mode: CoolingMode::Linear,
            alpha_max: 400.0,
            maxit: n,
        })?;
    let fast = run_fast_ppp(&sys, &p, &u0, &u0, n, &opts)?;

    for (name, tr) in [("KM 0.9", &km), ("Fast", &fast)] {
        let (s, _) = sys.split(&sys.resolve(tr.final_iterate().unwrap()).next);
        println!(
            "{name:>6}: M-residual {:.3e}, cost {:.6}, infeasibility {:.2e}",
            tr.residuals()[n - 1],
            prob.objective(&s),
            prob.infeasibility(&s)
        );
    }
    Ok(())
}
