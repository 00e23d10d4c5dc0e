//! Long-format aggregation of trace CSVs for plotting.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::error::{BenchError, Result};
use crate::experiment::{read_metadata, read_trace_csv};

pub const LONG_HEADER: [&str; 9] = ["run", "problem", "solver", "alpha", "sigma", "eta", "k", "metric", "value"];

/// Trace CSVs directly inside `dir`, sorted by file name.
pub fn trace_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| BenchError::io(dir, e))? {
        let path = entry.map_err(|e| BenchError::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// One row per `(run, k, metric)` with a value. Parameters come from the
/// sidecar when one exists next to the CSV.
pub fn aggregate(inputs: &[PathBuf], out: &Path) -> Result<usize> {
    let file = File::create(out).map_err(|e| BenchError::io(out, e))?;
    let csv_err = |source| BenchError::Csv {
        path: out.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(LONG_HEADER).map_err(csv_err)?;
    let mut rows = 0;
    for path in inputs {
        let run = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let sidecar = path.with_extension("json");
        let (problem, solver, alpha, sigma, eta) = if sidecar.exists() {
            let meta = read_metadata(&sidecar)?;
            let p = meta.params.as_ref();
            let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            (
                meta.problem.clone(),
                meta.solver.clone(),
                fmt(p.map(|p| p.alpha)),
                fmt(p.map(|p| p.sigma)),
                fmt(p.and_then(|p| p.eta_effective())),
            )
        } else {
            Default::default()
        };
        for r in read_trace_csv(path)? {
            let metrics = [
                ("residual", Some(r.residual)),
                ("residual_times_k", Some(r.residual_times_k)),
                ("gap", r.gap),
                ("energy", r.energy),
                ("variance", r.variance),
            ];
            for (name, value) in metrics {
                let Some(v) = value else { continue };
                w.write_record([
                    run.as_str(),
                    &problem,
                    &solver,
                    &alpha,
                    &sigma,
                    &eta,
                    &r.k.to_string(),
                    name,
                    &format!("{v:e}"),
                ])
                .map_err(csv_err)?;
                rows += 1;
            }
        }
    }
    w.flush().map_err(|e| BenchError::io(out, e))?;
    Ok(rows)
}
