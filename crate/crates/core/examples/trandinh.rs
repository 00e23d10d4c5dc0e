//! Tran-Dinh's accelerated method for a cocoercive operator is Fast-KM on a
//! forward step.
//!
//! `cargo run -p fastkm --example trandinh`

use fastkm::diagnostics::SnapshotPolicy;
use fastkm::fastkm::{run_fast_km, run_trandinh_direct, trandinh_map, RunOptions, TranDinhParams};
use fastkm::operators::{DenseMap, LinearMap};
use fastkm::Vector;
use nalgebra::DMatrix;

fn main() -> fastkm::Result<()> {
    // G = A^T A with ||A||^2 = L, which is 1/L-cocoercive
    let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.0, 1.0, 0.3, 0.2, 0.0, 0.8]);
    let g_mat = DenseMap::new(a.transpose() * &a);
    let lipschitz = g_mat.matrix().symmetric_eigenvalues().max();
    let g = |x: &Vector| g_mat.apply(x);

    let x_m1 = Vector::from_column_slice(&[1.0, -2.0, 0.5]);
    let x0 = Vector::from_column_slice(&[0.5, 1.0, -1.0]);
    let opts = RunOptions::default().with_snapshots(SnapshotPolicy::All);
    for omega in [0.5, 1.0, 3.0] {
        let tp = TranDinhParams {
            omega,
            gamma_bar: 1.5,
            lipschitz,
        };
        let m = trandinh_map(&tp)?;
        let direct = run_trandinh_direct(g, &tp, &x_m1, &x0, 300, &opts)?;
        let fast = run_fast_km(&m.operator(g, 3), &x_m1, &x0, &m.params, 300, &opts)?;
        println!(
            "omega = {omega}: alpha = {}, theta = {}, sigma = {}, sup distance {:.2e}, final residual {:.2e}",
            m.params.alpha,
            m.params.theta,
            m.params.sigma,
            direct.sup_distance(&fast)?,
            fast.records().last().map_or(f64::NAN, |r| r.residual),
        );
    }
    Ok(())
}
