//! Grids over `(alpha, sigma, eta)` for Fast-KM, run serially or on the rayon pool.

use rayon::prelude::*;

use crate::config::{RunConfig, SolverSpec};
use crate::error::{BenchError, Result};
use crate::experiment::{run_experiment, RunOutput};

/// Parses `start:stop:count` (inclusive, evenly spaced) or a comma list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| BenchError::Config(format!("grid {text:?}: {what}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("not a number: {s:?}")));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, count] => {
            let (a, b) = (num(start)?, num(stop)?);
            let n: usize = count
                .trim()
                .parse()
                .map_err(|_| bad(&format!("count must be a positive integer, got {count:?}")))?;
            match n {
                0 => Err(bad("count must be positive")),
                1 => Ok(vec![a]),
                _ => Ok((0..n)
                    .map(|i| {
                        let v = a + (b - a) * i as f64 / (n - 1) as f64;
                        // 0.1:0.9:9 should give 0.3, not 0.30000000000000004
                        (v * 1e12).round() / 1e12
                    })
                    .collect()),
            }
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(bad("expected start:stop:count or a comma-separated list")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub alphas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub etas: Vec<f64>,
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.alphas.len() * self.sigmas.len() * self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points in `alpha`-major order.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for &a in &self.alphas {
            for &s in &self.sigmas {
                for &e in &self.etas {
                    out.push((a, s, e));
                }
            }
        }
        out
    }
}

pub fn sweep_label(base: &str, alpha: f64, sigma: f64, eta: f64) -> String {
    format!("{base}_a{alpha}_s{sigma}_e{eta}")
}

/// One Fast-KM config per grid point; the base solver supplies the budget and
/// the relaxation step.
pub fn expand(base: &RunConfig, grid: &SweepGrid) -> Result<Vec<RunConfig>> {
    let (iterations, step) = match base.solver {
        SolverSpec::FastKm { iterations, step, .. } => (iterations, step),
        SolverSpec::FastKmCooled { iterations, step, .. } => (iterations, step),
        SolverSpec::Km { iterations, .. } | SolverSpec::Ohm { iterations } => (iterations, 1.0),
    };
    grid.points()
        .into_iter()
        .map(|(alpha, sigma, eta)| {
            let mut cfg = base.clone();
            cfg.label = sweep_label(&base.label, alpha, sigma, eta);
            cfg.solver = SolverSpec::FastKm {
                alpha,
                eta: Some(eta),
                theta: None,
                sigma,
                step,
                iterations,
            };
            cfg.check()?;
            Ok(cfg)
        })
        .collect()
}

/// Runs every grid point. Each run is independent and single-threaded, so the
/// parallel and serial modes write identical files.
pub fn run_sweep(base: &RunConfig, grid: &SweepGrid, parallel: bool) -> Result<Vec<RunOutput>> {
    let configs = expand(base, grid)?;
    if parallel {
        configs.par_iter().map(run_experiment).collect()
    } else {
        configs.iter().map(run_experiment).collect()
    }
}
