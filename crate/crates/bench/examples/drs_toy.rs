//! Douglas-Rachford for `min 1e-3 ||x||_1 + dist(x, B((1,1), 1))^2 / 2`,
//! both as a two-operator splitting and as the graph splitting on two nodes.
//!
//! `cargo run -p fastkm-bench --example drs_toy`

use fastkm::diagnostics::SnapshotPolicy;
use fastkm::fastkm::{RunOptions, ScheduleParams};
use fastkm::precond::{build_graph_drs, run_fast_ppp, run_fast_ppp_observed, PppOptions};
use fastkm::Vector;
use fastkm_bench::problems::{l1_ball_graph_spec, l1_ball_toy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let toy = l1_ball_toy();
    let w0 = Vector::zeros(2);
    let p = ScheduleParams::from_eta(4.0, 0.9, 4.0)?;
    let opts: PppOptions = RunOptions::default()
        .with_snapshots(SnapshotPolicy::None)
        .with_reference(&toy.w_star)
        .into();
    run_fast_ppp_observed(&toy.system, &p, &w0, &w0, 3001, &opts, |st| {
        if [0, 10, 100, 1000, 3000].contains(&st.k) {
            let b = st.resolved.shadows.blocks();
            println!(
                "k = {:>4}: residual {:.3e}, shadows ({:.6}, {:.6}) and ({:.6}, {:.6})",
                st.k, st.record.residual, b[0][0], b[0][1], b[1][0], b[1][1]
            );
        }
    })?;
    println!("solution x* = ({:.6}, {:.6})", toy.x_star[0], toy.x_star[1]);

    let graph = build_graph_drs(l1_ball_graph_spec()?)?;
    let start = Vector::from_column_slice(&[2.0, -1.0]);
    let opts: PppOptions = RunOptions::default().with_snapshots(SnapshotPolicy::All).into();
    let a = run_fast_ppp(&toy.system, &p, &start, &start, 200, &opts)?;
    let b = run_fast_ppp(&graph, &p, &start, &start, 200, &opts)?;
    println!(
        "graph splitting with {} nodes reproduces the two-operator run to {:.1e}",
        graph.nodes(),
        a.sup_distance(&b)?
    );
    Ok(())
}
