//! Degenerate preconditioned proximal point systems.
//!
//! A [`ResolventSystem`] evaluates the preconditioned resolvent on the reduced
//! variable (`u = (x, y)` for PDHG, `w` for DRS and Graph-DRS) and hands back
//! the shadow points computed along the way. The fast and plain iterations in
//! this module never materialize the lifted variable.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::diagnostics::{
    gap_function_in, lyapunov_energy, EnergyWindow, InnerProduct, IterationTrace, SnapshotPolicy,
    TraceRecord,
};
use crate::error::{check_len, Error, Result};
use crate::fastkm::{energy_state, fast_km_update, schedule_coeffs, RunOptions, ScheduleParams};
use crate::operators::{estimate_operator_norm, BlockVector, LinearMap, Prox, Vector};

/// Output of one resolvent evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub next: Vector,
    pub shadows: BlockVector,
}

/// A preconditioned resolvent on reduced coordinates, together with the
/// inner product that makes it firmly nonexpansive.
pub trait ResolventSystem: InnerProduct + Send + Sync {
    fn reduced_dim(&self) -> usize;

    fn resolve(&self, w: &Vector) -> Resolved;

    /// `||a - b||_M^2`.
    fn seminorm_sq(&self, a: &Vector, b: &Vector) -> f64 {
        self.norm_sq(&(a - b))
    }

    /// Smallest nonzero eigenvalue of the graph Laplacian, for Graph-DRS.
    fn lambda1(&self) -> Option<f64> {
        None
    }

    fn known_solution(&self) -> Option<&BlockVector> {
        None
    }

    fn warnings(&self) -> Vec<String> {
        Vec::new()
    }
}

/// `(1/N) sum_i ||x_i - mean||^2`.
pub fn variance(points: &BlockVector) -> Result<f64> {
    let mean = points.mean()?;
    let n = points.len() as f64;
    Ok(points
        .blocks()
        .iter()
        .map(|b| (b - &mean).norm_squared())
        .sum::<f64>()
        / n)
}

fn check_step(name: &'static str, tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {tau}")))
    }
}

// ---------------------------------------------------------------------------
// Moreau identity
// ---------------------------------------------------------------------------

/// `prox_{tau g*}(y) = y - tau prox_{g/tau}(y/tau)`.
pub fn moreau_prox_conjugate(prox_g: &dyn Prox, y: &Vector, tau: f64) -> Result<Vector> {
    check_step("tau", tau)?;
    Ok(y - prox_g.prox(&(y / tau), 1.0 / tau) * tau)
}

/// The prox of the convex conjugate, through the Moreau identity.
pub struct Conjugate<P>(pub P);

impl<P: Prox> Prox for Conjugate<P> {
    fn prox(&self, y: &Vector, tau: f64) -> Vector {
        assert!(tau > 0.0, "conjugate prox needs a positive step, got {tau}");
        y - self.0.prox(&(y / tau), 1.0 / tau) * tau
    }
}

// ---------------------------------------------------------------------------
// PDHG
// ---------------------------------------------------------------------------

/// `min_x f(x) + g(Lx)` in saddle form, with the two step sizes.
#[derive(Clone)]
pub struct PdhgProblem {
    pub prox_f: Arc<dyn Prox>,
    pub prox_gstar: Arc<dyn Prox>,
    pub op: Arc<dyn LinearMap>,
    pub tau1: f64,
    pub tau2: f64,
}

/// Outcome of the `tau1 tau2 ||L||^2 < 1` check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCondition {
    pub norm_estimate: f64,
    pub product: f64,
    pub satisfied: bool,
}

pub struct PdhgSystem {
    problem: PdhgProblem,
    nx: usize,
    ny: usize,
    condition: StepCondition,
}

/// Power iterations used for the step-size check.
const NORM_ITERS: usize = 300;

pub fn build_pdhg(problem: PdhgProblem) -> Result<PdhgSystem> {
    check_step("tau1", problem.tau1)?;
    check_step("tau2", problem.tau2)?;
    let nx = problem.op.input_dim();
    let ny = problem.op.output_dim();
    let norm_estimate = estimate_operator_norm(problem.op.as_ref(), NORM_ITERS, 0)?;
    let product = problem.tau1 * problem.tau2 * norm_estimate * norm_estimate;
    let condition = StepCondition {
        norm_estimate,
        product,
        satisfied: product < 1.0,
    };
    if !condition.satisfied {
        log::warn!("PDHG step condition violated: tau1 tau2 ||L||^2 ~ {product}");
    }
    Ok(PdhgSystem {
        problem,
        nx,
        ny,
        condition,
    })
}

impl PdhgSystem {
    pub fn step_condition(&self) -> StepCondition {
        self.condition
    }

    pub fn problem(&self) -> &PdhgProblem {
        &self.problem
    }

    pub fn primal_dim(&self) -> usize {
        self.nx
    }

    pub fn dual_dim(&self) -> usize {
        self.ny
    }

    /// Splits `u` into `(x, y)`.
    pub fn split(&self, u: &Vector) -> (Vector, Vector) {
        (
            u.rows(0, self.nx).into_owned(),
            u.rows(self.nx, self.ny).into_owned(),
        )
    }

    pub fn join(&self, x: &Vector, y: &Vector) -> Vector {
        let mut u = Vector::zeros(self.nx + self.ny);
        u.rows_mut(0, self.nx).copy_from(x);
        u.rows_mut(self.nx, self.ny).copy_from(y);
        u
    }
}

impl InnerProduct for PdhgSystem {
    /// `<a, M b>` with `M = [[I/tau1, -L^T], [-L, I/tau2]]`.
    fn inner(&self, a: &Vector, b: &Vector) -> f64 {
        let (ax, ay) = self.split(a);
        let (bx, by) = self.split(b);
        let l = &self.problem.op;
        ax.dot(&bx) / self.problem.tau1 - l.apply(&ax).dot(&by) - l.apply(&bx).dot(&ay)
            + ay.dot(&by) / self.problem.tau2
    }
}

impl ResolventSystem for PdhgSystem {
    fn reduced_dim(&self) -> usize {
        self.nx + self.ny
    }

    fn resolve(&self, u: &Vector) -> Resolved {
        let p = &self.problem;
        let (x, y) = self.split(u);
        let xp = p.prox_f.prox(&(&x - p.op.apply_adjoint(&y) * p.tau1), p.tau1);
        let bar = &xp * 2.0 - &x;
        let yp = p.prox_gstar.prox(&(&y + p.op.apply(&bar) * p.tau2), p.tau2);
        Resolved {
            next: self.join(&xp, &yp),
            shadows: BlockVector::new(vec![xp, yp]),
        }
    }

    fn warnings(&self) -> Vec<String> {
        if self.condition.satisfied {
            Vec::new()
        } else {
            vec![format!(
                "step condition tau1 tau2 ||L||^2 < 1 violated (estimate {})",
                self.condition.product
            )]
        }
    }
}

// ---------------------------------------------------------------------------
// Douglas-Rachford
// ---------------------------------------------------------------------------

pub type Resolvent = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// DRS on the reduced variable `w`: `x1 = J1(w)`, `x2 = J2(2 x1 - w)`,
/// `J(w) = w + x2 - x1`.
pub struct DrsSystem {
    j1: Resolvent,
    j2: Resolvent,
    dim: usize,
}

pub fn build_drs(j1: Resolvent, j2: Resolvent, dim: usize) -> DrsSystem {
    DrsSystem { j1, j2, dim }
}

impl InnerProduct for DrsSystem {
    fn inner(&self, a: &Vector, b: &Vector) -> f64 {
        a.dot(b)
    }
}

impl ResolventSystem for DrsSystem {
    fn reduced_dim(&self) -> usize {
        self.dim
    }

    fn resolve(&self, w: &Vector) -> Resolved {
        let x1 = (self.j1)(w);
        let x2 = (self.j2)(&(&x1 * 2.0 - w));
        let next = w + (&x2 - &x1);
        Resolved {
            next,
            shadows: BlockVector::new(vec![x1, x2]),
        }
    }
}

// ---------------------------------------------------------------------------
// Graph-DRS
// ---------------------------------------------------------------------------

/// Path-graph incidence: `Z[j][j] = 1`, `Z[j+1][j] = -1`.
pub fn path_graph_z(n: usize) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::param("N", format!("need at least 2 nodes, got {n}")));
    }
    let mut z = DMatrix::zeros(n, n - 1);
    for j in 0..n - 1 {
        z[(j, j)] = 1.0;
        z[(j + 1, j)] = -1.0;
    }
    Ok(z)
}

#[derive(Clone)]
pub struct GraphDrsSpec {
    pub proxes: Vec<Arc<dyn Prox>>,
    pub z: DMatrix<f64>,
    /// Extra coupling; the zero matrix gives the sparsest method.
    pub zhat: DMatrix<f64>,
    pub tau: f64,
    /// Dimension of each node variable.
    pub dim: usize,
}

pub struct GraphDrsSystem {
    spec: GraphDrsSpec,
    coupling: DMatrix<f64>,
    diag: Vec<f64>,
    lambda1: f64,
}

const RANK_TOL: f64 = 1e-10;

pub fn build_graph_drs(spec: GraphDrsSpec) -> Result<GraphDrsSystem> {
    let n = spec.proxes.len();
    if n < 2 {
        return Err(Error::Construction(format!("need at least 2 operators, got {n}")));
    }
    check_step("tau", spec.tau)?;
    if spec.z.shape() != (n, n - 1) {
        return Err(Error::Construction(format!(
            "Z must be {n}x{}, got {}x{}",
            n - 1,
            spec.z.nrows(),
            spec.z.ncols()
        )));
    }
    if spec.zhat.nrows() != n {
        return Err(Error::Construction(format!(
            "Zhat must have {n} rows, got {}",
            spec.zhat.nrows()
        )));
    }
    let ones = DMatrix::from_element(n, 1, 1.0);
    let scale = spec.z.abs().max().max(1.0);
    if (spec.z.transpose() * &ones).abs().max() > RANK_TOL * scale * n as f64 {
        return Err(Error::Construction("Z^T 1 must vanish".into()));
    }
    if spec.zhat.ncols() > 0
        && (spec.zhat.transpose() * &ones).abs().max()
            > RANK_TOL * spec.zhat.abs().max().max(1.0) * n as f64
    {
        return Err(Error::Construction("Zhat^T 1 must vanish".into()));
    }
    let sv = spec.z.clone().singular_values();
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > RANK_TOL * smax).count();
    if rank != n - 1 {
        return Err(Error::Construction(format!(
            "Z must have rank {}, got {rank}",
            n - 1
        )));
    }

    let lap = &spec.z * spec.z.transpose();
    let coupling = &lap + &spec.zhat * spec.zhat.transpose();
    let diag: Vec<f64> = (0..n).map(|i| coupling[(i, i)]).collect();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Construction(format!("d_{i} must be positive, got {}", diag[i])));
    }
    let eig = SymmetricEigen::new(lap).eigenvalues;
    let emax = eig.iter().cloned().fold(0.0, f64::max);
    let lambda1 = eig
        .iter()
        .cloned()
        .filter(|&e| e > RANK_TOL * emax)
        .fold(f64::INFINITY, f64::min);

    Ok(GraphDrsSystem {
        spec,
        coupling,
        diag,
        lambda1,
    })
}

impl GraphDrsSystem {
    pub fn nodes(&self) -> usize {
        self.spec.proxes.len()
    }

    pub fn node_dim(&self) -> usize {
        self.spec.dim
    }

    pub fn spec(&self) -> &GraphDrsSpec {
        &self.spec
    }

    /// `(L + Lhat)_{ii}`.
    pub fn degrees(&self) -> &[f64] {
        &self.diag
    }

    /// Reduced variable in which every edge block equals `block`.
    pub fn broadcast(&self, block: &Vector) -> Vector {
        let m = self.nodes() - 1;
        let d = self.spec.dim;
        let mut w = Vector::zeros(m * d);
        for j in 0..m {
            w.rows_mut(j * d, d).copy_from(block);
        }
        w
    }
}

impl InnerProduct for GraphDrsSystem {
    fn inner(&self, a: &Vector, b: &Vector) -> f64 {
        a.dot(b)
    }
}

impl ResolventSystem for GraphDrsSystem {
    fn reduced_dim(&self) -> usize {
        (self.nodes() - 1) * self.spec.dim
    }

    fn resolve(&self, w: &Vector) -> Resolved {
        let n = self.nodes();
        let d = self.spec.dim;
        let z = &self.spec.z;
        let block = |j: usize| w.rows(j * d, d);
        let mut xs: Vec<Vector> = Vec::with_capacity(n);
        for i in 0..n {
            let di = self.diag[i];
            let mut acc = Vector::zeros(d);
            for j in 0..n - 1 {
                let zij = z[(i, j)];
                if zij != 0.0 {
                    acc.axpy(zij / di, &block(j), 1.0);
                }
            }
            for (h, xh) in xs.iter().enumerate() {
                let c = self.coupling[(h, i)];
                if c != 0.0 {
                    acc.axpy(-2.0 * c / di, xh, 1.0);
                }
            }
            xs.push(self.spec.proxes[i].prox(&acc, self.spec.tau / di));
        }
        let mut next = w.clone();
        for j in 0..n - 1 {
            let mut out = next.rows_mut(j * d, d);
            for (i, xi) in xs.iter().enumerate() {
                let zij = z[(i, j)];
                if zij != 0.0 {
                    out.axpy(-zij, xi, 1.0);
                }
            }
        }
        Resolved {
            next,
            shadows: BlockVector::new(xs),
        }
    }

    fn lambda1(&self) -> Option<f64> {
        Some(self.lambda1)
    }
}

// ---------------------------------------------------------------------------
// Iterations
// ---------------------------------------------------------------------------

/// What an observer sees after the resolvent has been evaluated at `w^k`.
pub struct PppStep<'a> {
    pub k: usize,
    pub w: &'a Vector,
    pub resolved: &'a Resolved,
    pub record: &'a TraceRecord,
}

/// Options specific to splitting runs.
#[derive(Clone, Default)]
pub struct PppOptions<'a> {
    pub run: RunOptions<'a>,
    pub shadows: SnapshotPolicy,
}

impl<'a> From<RunOptions<'a>> for PppOptions<'a> {
    fn from(run: RunOptions<'a>) -> Self {
        Self {
            run,
            shadows: SnapshotPolicy::default(),
        }
    }
}

/// Borrows a possibly unsized system as a `dyn InnerProduct`.
struct Metric<'a, S: ?Sized>(&'a S);

impl<S: ResolventSystem + ?Sized> InnerProduct for Metric<'_, S> {
    fn inner(&self, a: &Vector, b: &Vector) -> f64 {
        self.0.inner(a, b)
    }
}

fn record_for<S: ResolventSystem + ?Sized>(
    sys: &S,
    k: usize,
    w: &Vector,
    res: &Resolved,
    reference: Option<&Vector>,
) -> Result<TraceRecord> {
    let residual = sys.seminorm_sq(w, &res.next).max(0.0).sqrt();
    let gap = match reference {
        Some(z) => Some(gap_function_in(&Metric(sys), w, &res.next, z)?),
        None => None,
    };
    let variance = match sys.lambda1() {
        Some(_) => Some(variance(&res.shadows)?),
        None => None,
    };
    Ok(TraceRecord {
        k,
        residual,
        gap,
        energy: None,
        variance,
    })
}

fn new_trace<S: ResolventSystem + ?Sized>(sys: &S, opts: &PppOptions<'_>) -> IterationTrace {
    let mut trace = IterationTrace::new(opts.run.snapshots, opts.shadows);
    trace.meta.label = opts.run.label.clone();
    trace.meta.reference_note = opts.run.reference_note.clone();
    trace.meta.warnings = sys.warnings();
    trace
}

/// Fast-KM on `I + s(J - I)` in the reduced variable.
///
/// Record `k` carries the M-residual `||w^k - J(w^k)||_M`, the M-gap function
/// of `J` at `w^k`, the energy `E_{k+1}` of the averaged operator in the
/// M-geometry, and (Graph-DRS) the variance of the shadows read off at `w^k`.
pub fn run_fast_ppp<S: ResolventSystem + ?Sized>(
    sys: &S,
    p: &ScheduleParams,
    w_m1: &Vector,
    w0: &Vector,
    n: usize,
    opts: &PppOptions<'_>,
) -> Result<IterationTrace> {
    run_fast_ppp_observed(sys, p, w_m1, w0, n, opts, |_| {})
}

pub fn run_fast_ppp_observed<S: ResolventSystem + ?Sized>(
    sys: &S,
    p: &ScheduleParams,
    w_m1: &Vector,
    w0: &Vector,
    n: usize,
    opts: &PppOptions<'_>,
    mut observer: impl FnMut(&PppStep<'_>),
) -> Result<IterationTrace> {
    let dim = sys.reduced_dim();
    check_len(dim, w_m1.len())?;
    check_len(dim, w0.len())?;
    if let Some(z) = opts.run.reference {
        check_len(dim, z.len())?;
    }
    let warnings = p.validate()?;
    let energy = energy_state(p, &opts.run)?;
    let s = p.step;
    let averaged = |w: &Vector, jw: &Vector| -> Vector {
        if s == 1.0 {
            jw.clone()
        } else {
            w + (jw - w) * s
        }
    };

    let mut trace = new_trace(sys, opts);
    trace.meta.params = Some(p.clone());
    trace
        .meta
        .warnings
        .extend(warnings.iter().map(|w| w.to_string()));
    let started = Instant::now();

    let mut tw_prev = averaged(w_m1, &sys.resolve(w_m1).next);
    trace.set_initial(w_m1, &tw_prev);
    let mut w = w0.clone();
    for k in 0..n {
        let res = sys.resolve(&w);
        let tw = averaged(&w, &res.next);
        let mut record = record_for(sys, k, &w, &res, opts.run.reference)?;
        if let Some(st) = &energy {
            record.energy = Some(lyapunov_energy(
                EnergyWindow {
                    z_prev: &tw_prev,
                    x_prev: &w,
                    z_cur: &tw,
                },
                st,
                k + 1,
                &Metric(sys),
            )?);
        }
        trace.push(record);
        trace.offer_snapshot(k, &w, &res.next);
        trace.offer_shadows(k, &res.shadows);
        observer(&PppStep {
            k,
            w: &w,
            resolved: &res,
            record: &record,
        });
        let next = fast_km_update(&schedule_coeffs(k, p), &w, &tw, &tw_prev);
        tw_prev = tw;
        w = next;
        if opts.run.tolerance.is_some_and(|tol| record.residual <= tol) {
            break;
        }
    }
    trace.set_final(w);
    trace.meta.wall_time = started.elapsed();
    Ok(trace)
}

/// Relaxed proximal point iteration `w <- w + theta (J(w) - w)`, `theta in (0, 2)`.
pub fn run_km_ppp<S: ResolventSystem + ?Sized>(
    sys: &S,
    w0: &Vector,
    theta: f64,
    n: usize,
    opts: &PppOptions<'_>,
) -> Result<IterationTrace> {
    run_km_ppp_observed(sys, w0, theta, n, opts, |_| {})
}

pub fn run_km_ppp_observed<S: ResolventSystem + ?Sized>(
    sys: &S,
    w0: &Vector,
    theta: f64,
    n: usize,
    opts: &PppOptions<'_>,
    mut observer: impl FnMut(&PppStep<'_>),
) -> Result<IterationTrace> {
    if !(theta > 0.0 && theta < 2.0) {
        return Err(Error::param("theta", format!("must lie in (0, 2), got {theta}")));
    }
    check_len(sys.reduced_dim(), w0.len())?;
    let mut trace = new_trace(sys, opts);
    let started = Instant::now();
    let mut w = w0.clone();
    for k in 0..n {
        let res = sys.resolve(&w);
        let record = record_for(sys, k, &w, &res, opts.run.reference)?;
        trace.push(record);
        trace.offer_snapshot(k, &w, &res.next);
        trace.offer_shadows(k, &res.shadows);
        observer(&PppStep {
            k,
            w: &w,
            resolved: &res,
            record: &record,
        });
        w = Vector::from_iterator(
            w.len(),
            w.iter().zip(res.next.iter()).map(|(&a, &b)| a + theta * (b - a)),
        );
        if opts.run.tolerance.is_some_and(|tol| record.residual <= tol) {
            break;
        }
    }
    trace.set_final(w);
    trace.meta.wall_time = started.elapsed();
    Ok(trace)
}

/// `J` of a system viewed as a plain fixed-point map.
pub struct ResolventMap<'a, S: ?Sized>(pub &'a S);

impl<S: ResolventSystem + ?Sized> crate::operators::FixedPointMap for ResolventMap<'_, S> {
    fn dim(&self) -> usize {
        self.0.reduced_dim()
    }

    fn apply(&self, w: &Vector) -> Vector {
        self.0.resolve(w).next
    }
}
