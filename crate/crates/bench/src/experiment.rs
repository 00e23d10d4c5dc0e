//! Building problem instances from a config, running the solver and writing
//! the trace CSV with its JSON sidecar.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fastkm::diagnostics::{IterationTrace, SnapshotPolicy, TraceRecord};
use fastkm::fastkm::{run_fast_km, run_km, RunOptions, ScheduleParams};
use fastkm::operators::SkewResolvent;
use fastkm::precond::{
    build_graph_drs, build_pdhg, run_fast_ppp, run_km_ppp, GraphDrsSystem, PdhgSystem,
    PppOptions, ResolventSystem,
};
use fastkm::Vector;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{ProblemSpec, ReferenceSpec, RunConfig, SolverSpec, OT_STEP_PRODUCT};
use crate::error::{BenchError, Result};
use crate::problems::{gen_beckmann, gen_median, l1_ball_toy, skew_toy, BeckmannProblem, L1BallToy, MedianProblem};

pub const CSV_HEADER: [&str; 6] = ["k", "residual", "residual_times_k", "gap", "energy", "variance"];

/// Name of the random generator behind every seeded instance.
pub const GENERATOR: &str = "ChaCha8Rng";

/// A built problem, ready to iterate.
pub enum Instance {
    Skew(SkewResolvent),
    L1Ball(L1BallToy),
    Beckmann(BeckmannProblem, PdhgSystem),
    Median(MedianProblem, GraphDrsSystem),
}

pub fn build_instance(problem: &ProblemSpec, seed: u64) -> Result<Instance> {
    Ok(match *problem {
        ProblemSpec::SkewToy { d, tau } => Instance::Skew(skew_toy(d, tau)?),
        ProblemSpec::L1BallToy {} => Instance::L1Ball(l1_ball_toy()),
        ProblemSpec::BeckmannOt {
            p,
            marginals,
            tau1,
            tau2,
        } => {
            let prob = gen_beckmann(p, marginals, tau1, tau2.unwrap_or(OT_STEP_PRODUCT / tau1))?;
            let sys = build_pdhg(prob.pdhg())?;
            Instance::Beckmann(prob, sys)
        }
        ProblemSpec::GeometricMedian { n, d, seed: s, ref z } => {
            let mut prob = gen_median(n, d, s.unwrap_or(seed))?;
            if let Some(rows) = z {
                prob.spec.z = coupling_matrix(rows, n)?;
            }
            let sys = build_graph_drs(prob.spec.clone())?;
            Instance::Median(prob, sys)
        }
    })
}

fn coupling_matrix(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    let cols = n.saturating_sub(1);
    if rows.len() != n || rows.iter().any(|r| r.len() != cols) {
        return Err(BenchError::Config(format!("problem.z must be {n} rows of {cols} entries")));
    }
    Ok(DMatrix::from_fn(n, cols, |i, j| rows[i][j]))
}

impl Instance {
    pub fn dim(&self) -> usize {
        match self {
            Instance::Skew(op) => fastkm::operators::FixedPointMap::dim(op),
            Instance::L1Ball(t) => t.system.reduced_dim(),
            Instance::Beckmann(_, s) => s.reduced_dim(),
            Instance::Median(_, s) => s.reduced_dim(),
        }
    }

    /// Starting point: all ones for the skew toy, zero elsewhere. The momentum
    /// solvers use it for both `x^{-1}` and `x^0`.
    pub fn initial(&self) -> Vector {
        match self {
            Instance::Skew(_) => Vector::from_element(self.dim(), 1.0),
            _ => Vector::zeros(self.dim()),
        }
    }

    pub fn known_solution(&self) -> Option<Vector> {
        match self {
            Instance::Skew(_) => Some(Vector::zeros(self.dim())),
            Instance::L1Ball(t) => Some(t.w_star.clone()),
            _ => None,
        }
    }

    /// Plain KM from the initial point for `n` iterations; returns the last iterate.
    pub fn km_reference(&self, theta: f64, n: usize) -> Result<Vector> {
        let opts: PppOptions = RunOptions::default().with_snapshots(SnapshotPolicy::None).into();
        let x0 = self.initial();
        let trace = match self {
            Instance::Skew(op) => run_km(op, &x0, theta, n, &opts.run)?,
            Instance::L1Ball(t) => run_km_ppp(&t.system, &x0, theta, n, &opts)?,
            Instance::Beckmann(_, s) => run_km_ppp(s, &x0, theta, n, &opts)?,
            Instance::Median(_, s) => run_km_ppp(s, &x0, theta, n, &opts)?,
        };
        Ok(trace.final_iterate().cloned().unwrap_or(x0))
    }

    pub fn solve(&self, solver: &SolverSpec, schedule: Option<&ScheduleParams>, opts: &PppOptions<'_>) -> Result<IterationTrace> {
        let n = solver.iterations();
        let x0 = self.initial();
        let trace = match (self, solver, schedule) {
            (Instance::Skew(op), SolverSpec::Km { theta, .. }, _) => run_km(op, &x0, *theta, n, &opts.run)?,
            (Instance::Skew(op), _, Some(p)) => run_fast_km(op, &x0, &x0, p, n, &opts.run)?,
            (Instance::L1Ball(t), _, _) => solve_system(&t.system, solver, schedule, &x0, opts)?,
            (Instance::Beckmann(_, s), _, _) => solve_system(s, solver, schedule, &x0, opts)?,
            (Instance::Median(_, s), _, _) => solve_system(s, solver, schedule, &x0, opts)?,
            (Instance::Skew(_), _, None) => {
                return Err(BenchError::Config("solver: momentum solver without a schedule".into()))
            }
        };
        Ok(trace)
    }
}

fn solve_system<S: ResolventSystem>(
    sys: &S,
    solver: &SolverSpec,
    schedule: Option<&ScheduleParams>,
    x0: &Vector,
    opts: &PppOptions<'_>,
) -> Result<IterationTrace> {
    let n = solver.iterations();
    Ok(match (solver, schedule) {
        (SolverSpec::Km { theta, .. }, _) => run_km_ppp(sys, x0, *theta, n, opts)?,
        (_, Some(p)) => run_fast_ppp(sys, p, x0, x0, n, opts)?,
        (_, None) => return Err(BenchError::Config("solver: momentum solver without a schedule".into())),
    })
}

/// Everything in the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config: RunConfig,
    pub seed: u64,
    pub generator: String,
    pub problem: String,
    pub solver: String,
    pub params: Option<ScheduleParams>,
    /// `alpha(k)` for every iteration of a cooled run.
    pub alpha_schedule: Option<Vec<f64>>,
    pub reference: String,
    pub warnings: Vec<String>,
    pub records: usize,
}

pub struct RunOutput {
    pub csv: PathBuf,
    pub meta: PathBuf,
    pub metadata: Metadata,
    pub trace: IterationTrace,
}

/// Builds, runs and writes one configuration.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.check()?;
    let instance = build_instance(&cfg.problem, cfg.seed)?;
    let schedule = cfg.solver.schedule()?;

    let (reference, note) = match &cfg.reference {
        ReferenceSpec::None => (None, "none".to_string()),
        ReferenceSpec::Auto => match instance.known_solution() {
            Some(z) => (Some(z), "closed form".to_string()),
            None => (None, "none".to_string()),
        },
        ReferenceSpec::Km { theta, iterations } => (
            Some(instance.km_reference(*theta, *iterations)?),
            format!("KM theta={theta} after {iterations} iterations"),
        ),
    };

    let mut run = RunOptions::default()
        .with_snapshots(SnapshotPolicy::None)
        .with_label(cfg.label.clone());
    run.reference = reference.as_ref();
    run.reference_note = Some(note.clone());
    let opts = PppOptions {
        run,
        shadows: SnapshotPolicy::None,
    };
    let trace = instance.solve(&cfg.solver, schedule.as_ref(), &opts)?;

    let alpha_schedule = schedule
        .as_ref()
        .filter(|p| p.cooling.is_some())
        .map(|p| (0..cfg.solver.iterations()).map(|k| p.alpha_at(k)).collect());
    let metadata = Metadata {
        config: cfg.clone(),
        seed: cfg.seed,
        generator: GENERATOR.into(),
        problem: cfg.problem.kind().into(),
        solver: cfg.solver.kind().into(),
        params: schedule,
        alpha_schedule,
        reference: note,
        warnings: trace.meta.warnings.clone(),
        records: trace.len(),
    };

    std::fs::create_dir_all(&cfg.output).map_err(|e| BenchError::io(&cfg.output, e))?;
    let csv = cfg.output.join(format!("{}.csv", cfg.label));
    let meta = cfg.output.join(format!("{}.json", cfg.label));
    write_trace_csv_file(&csv, trace.records(), cfg.thin)?;
    write_json_file(&meta, &metadata)?;
    Ok(RunOutput {
        csv,
        meta,
        metadata,
        trace,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Writes the trace table; every `thin`-th record plus the last one.
pub fn write_trace_csv<W: Write>(out: W, records: &[TraceRecord], thin: usize) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let thin = thin.max(1);
    let last = records.len().saturating_sub(1);
    for (i, r) in records.iter().enumerate() {
        if i % thin != 0 && i != last {
            continue;
        }
        w.write_record([
            r.k.to_string(),
            format!("{:e}", r.residual),
            format!("{:e}", r.k as f64 * r.residual),
            opt(r.gap),
            opt(r.energy),
            opt(r.variance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv_file(path: &Path, records: &[TraceRecord], thin: usize) -> Result<()> {
    let file = File::create(path).map_err(|e| BenchError::io(path, e))?;
    write_trace_csv(BufWriter::new(file), records, thin).map_err(|source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| BenchError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| BenchError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    w.write_all(b"\n").map_err(|e| BenchError::io(path, e))?;
    w.flush().map_err(|e| BenchError::io(path, e))
}

/// One parsed CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct CsvRow {
    pub k: usize,
    pub residual: f64,
    pub residual_times_k: f64,
    pub gap: Option<f64>,
    pub energy: Option<f64>,
    pub variance: Option<f64>,
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let csv_err = |source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(BenchError::Config(format!(
            "{}: unexpected header {:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>()
        )));
    }
    r.deserialize().collect::<Result<Vec<CsvRow>, _>>().map_err(csv_err)
}

pub fn read_metadata(path: &Path) -> Result<Metadata> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| BenchError::Json {
        path: path.to_path_buf(),
        source,
    })
}
