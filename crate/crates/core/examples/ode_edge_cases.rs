//! RK4 on the second-order dynamics against the closed forms for the plane
//! rotation at the two boundary values of `theta`.
//!
//! `cargo run -p fastkm --example ode_edge_cases`

use fastkm::dynamics::{edge_case_spec, integrate_rk4_sampled, rotation_closed_form, EdgeMode};

fn main() -> fastkm::Result<()> {
    for mode in [EdgeMode::ThetaOne, EdgeMode::ThetaAlphaMinusOne] {
        let spec = edge_case_spec(mode, 1.0, 1.0, 1.0)?;
        let traj = integrate_rk4_sampled(&spec, 100.0, 1e-3, 1000)?;
        let mut worst = 0.0f64;
        for s in &traj.samples {
            let exact = rotation_closed_form(mode, 1.0, 1.0, s.t)?;
            worst = worst.max((&s.x - &exact).norm() / exact.norm());
        }
        let last = traj.last().expect("nonempty trajectory");
        println!(
            "{mode:?}: max relative error {worst:.2e}, t |Qx| at t = {} is {:.4}",
            last.t,
            last.t * last.qx_norm
        );
    }
    Ok(())
}
