//! Continuous-time experiments on the plane rotation, written as CSV.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use fastkm::dynamics::{
    edge_case_spec, integrate_rk4_sampled, integrate_tikhonov_flow, rotation_closed_form,
    tikhonov_anchor, BetaSchedule, DynamicsSpec, EdgeMode, Trajectory,
};
use fastkm::operators::DenseMap;
use fastkm::Vector;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsMode {
    /// `alpha = 3`, `theta = 1`, with the closed form as a column.
    ThetaOne,
    /// `alpha = 3`, `theta = 2`, with the closed form as a column.
    ThetaAlphaMinusOne,
    /// `alpha = 3`, `eta = 1/2`, `beta = 1`.
    Interior,
    /// `alpha = 3`, `beta = t` saturating the growth condition; also
    /// integrates the first-order Tikhonov flow.
    Tikhonov,
}

/// Constants of the closed-form solutions used by the edge modes.
pub const EDGE_C1: f64 = 1.0;
pub const EDGE_C2: f64 = 1.0;

pub const T0: f64 = 1.0;

pub fn rotation() -> Arc<DenseMap> {
    Arc::new(DenseMap::rotation())
}

/// Interior run from `x(1) = (1, 0)` at rest.
pub fn interior_spec() -> DynamicsSpec {
    DynamicsSpec {
        q: rotation(),
        alpha: 3.0,
        eta: 0.5,
        beta: BetaSchedule::Constant(1.0),
        t0: T0,
        x0: Vector::from_column_slice(&[1.0, 0.0]),
        v0: Vector::zeros(2),
    }
}

/// `beta(t) = t^{alpha - 2}` from `x(1) = (1, 0)` at rest.
pub fn tikhonov_spec(alpha: f64, eta: f64) -> DynamicsSpec {
    DynamicsSpec {
        q: rotation(),
        alpha,
        eta,
        beta: BetaSchedule::Power { beta0: 1.0, eps: 0.0 },
        t0: T0,
        x0: Vector::from_column_slice(&[1.0, 0.0]),
        v0: Vector::zeros(2),
    }
}

/// Integrates `mode` on `[1, t_end]` and writes every `stride`-th sample.
pub fn run_dynamics(mode: DynamicsMode, t_end: f64, h: f64, stride: usize, out: &Path) -> Result<usize> {
    let stride = stride.max(1);
    let (traj, extra): (Trajectory, Option<Trajectory>) = match mode {
        DynamicsMode::ThetaOne | DynamicsMode::ThetaAlphaMinusOne => {
            let edge = edge_mode(mode);
            let spec = edge_case_spec(edge, EDGE_C1, EDGE_C2, T0)?;
            (integrate_rk4_sampled(&spec, t_end, h, stride)?, None)
        }
        DynamicsMode::Interior => (integrate_rk4_sampled(&interior_spec(), t_end, h, stride)?, None),
        DynamicsMode::Tikhonov => {
            let spec = tikhonov_spec(3.0, 0.5);
            let anchor = tikhonov_anchor(&spec)?;
            let flow = integrate_tikhonov_flow(spec.q.as_ref(), spec.alpha, 1.0, T0, &anchor, &spec.x0, t_end, h)?;
            let last = flow.samples.len() - 1;
            let thinned = Trajectory {
                samples: flow
                    .samples
                    .into_iter()
                    .enumerate()
                    .filter(|(j, _)| j % stride == 0 || *j == last)
                    .map(|(_, s)| s)
                    .collect(),
            };
            (integrate_rk4_sampled(&spec, t_end, h, stride)?, Some(thinned))
        }
    };

    let file = File::create(out).map_err(|e| BenchError::io(out, e))?;
    let csv_err = |source| BenchError::Csv {
        path: out.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let last = match mode {
        DynamicsMode::ThetaOne | DynamicsMode::ThetaAlphaMinusOne => "closed_form_error",
        DynamicsMode::Tikhonov => "tikhonov_distance",
        DynamicsMode::Interior => "",
    };
    let mut header = vec!["t", "x1", "x2", "v1", "v2", "qx_norm", "t_qx_norm"];
    if !last.is_empty() {
        header.push(last);
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, s) in traj.samples.iter().enumerate() {
        let mut row = vec![
            format!("{:e}", s.t),
            format!("{:e}", s.x[0]),
            format!("{:e}", s.x[1]),
            format!("{:e}", s.v[0]),
            format!("{:e}", s.v[1]),
            format!("{:e}", s.qx_norm),
            format!("{:e}", s.t * s.qx_norm),
        ];
        match mode {
            DynamicsMode::ThetaOne | DynamicsMode::ThetaAlphaMinusOne => {
                let exact = rotation_closed_form(edge_mode(mode), EDGE_C1, EDGE_C2, s.t)?;
                row.push(format!("{:e}", (&s.x - exact).norm()));
            }
            DynamicsMode::Tikhonov => {
                let other = extra.as_ref().and_then(|e| e.samples.get(i));
                row.push(other.map(|o| format!("{:e}", (&s.x - &o.x).norm())).unwrap_or_default());
            }
            DynamicsMode::Interior => {}
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| BenchError::io(out, e))?;
    Ok(traj.samples.len())
}

fn edge_mode(mode: DynamicsMode) -> EdgeMode {
    match mode {
        DynamicsMode::ThetaAlphaMinusOne => EdgeMode::ThetaAlphaMinusOne,
        _ => EdgeMode::ThetaOne,
    }
}
