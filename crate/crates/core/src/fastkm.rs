//! The Fast-KM iteration and its relatives.
//!
//! ```text
//! x^{k+1} = x^k + theta_k (T x^k - x^k) + alpha_k (T x^k - T x^{k-1})
//! theta_k = theta / (k + sigma),  alpha_k = 1 - alpha / (k + sigma)
//! ```
//!
//! Also here: the plain Krasnoselskii-Mann baseline, the anchored (Halpern)
//! form the method takes at `theta = 1`, the cooling schedules for `alpha`,
//! and the parameter mapping that recovers Tran-Dinh's accelerated method.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    gap_function_in, lyapunov_energy, EnergyWindow, Euclidean, InnerProduct, IterationTrace,
    LyapunovState, SnapshotPolicy, TraceRecord,
};
use crate::error::{check_len, Error, Result};
use crate::operators::{averaged_map, FixedPointMap, Vector};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoolingMode {
    Linear,
    Log,
}

/// Growth schedule for `alpha`: from its initial value up to `alpha_max`,
/// reached at `k = maxit / 2` and held afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cooling {
    pub mode: CoolingMode,
    pub alpha_max: f64,
    pub maxit: usize,
}

/// Parameters of the Fast-KM schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub alpha: f64,
    pub theta: f64,
    pub sigma: f64,
    /// When set, `theta` was derived from it and is re-derived under cooling.
    pub eta: Option<f64>,
    /// Relaxation `s` of the averaged operator `I + s(T - I)`.
    pub step: f64,
    pub cooling: Option<Cooling>,
}

/// Conditions that are allowed but void part of the convergence theory.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamWarning {
    ThetaBelowOne(f64),
    ThetaAtBoundary { theta: f64, alpha: f64 },
}

impl std::fmt::Display for ParamWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamWarning::ThetaBelowOne(t) => {
                write!(f, "theta = {t} lies below 1, outside the admissible interval")
            }
            ParamWarning::ThetaAtBoundary { theta, alpha } => write!(
                f,
                "theta = {theta} sits on the boundary of [1, alpha - 1] = [1, {}]; little-o rates are not guaranteed",
                alpha - 1.0
            ),
        }
    }
}

/// `theta = (1 - eta) + eta (alpha - 1)`.
pub fn theta_from_eta(eta: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::param("eta", format!("must lie in [0, 1], got {eta}")));
    }
    if !(alpha >= 2.0) {
        return Err(Error::param("alpha", format!("must be at least 2, got {alpha}")));
    }
    Ok((1.0 - eta) + eta * (alpha - 1.0))
}

/// `alpha` at iteration `k` under a cooling schedule.
pub fn cooling_alpha(k: usize, alpha0: f64, alpha_max: f64, maxit: usize, mode: CoolingMode) -> f64 {
    let half = maxit / 2;
    if k >= half {
        return alpha_max;
    }
    let frac = match mode {
        CoolingMode::Linear => k as f64 / half as f64,
        CoolingMode::Log => (1.0 + k as f64).ln() / (1.0 + half as f64).ln(),
    };
    alpha0 + (alpha_max - alpha0) * frac.min(1.0)
}

impl ScheduleParams {
    /// Explicit `(alpha, theta, sigma)` with `s = 1` and no cooling.
    pub fn new(alpha: f64, theta: f64, sigma: f64) -> Result<Self> {
        let p = Self {
            alpha,
            theta,
            sigma,
            eta: None,
            step: 1.0,
            cooling: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// `theta` derived from `eta`.
    pub fn from_eta(alpha: f64, eta: f64, sigma: f64) -> Result<Self> {
        let theta = theta_from_eta(eta, alpha)?;
        let p = Self {
            alpha,
            theta,
            sigma,
            eta: Some(eta),
            step: 1.0,
            cooling: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_step(mut self, s: f64) -> Result<Self> {
        self.step = s;
        self.validate()?;
        Ok(self)
    }

    pub fn with_cooling(mut self, cooling: Cooling) -> Result<Self> {
        self.cooling = Some(cooling);
        self.validate()?;
        Ok(self)
    }

    /// Hard errors for parameters outside the algorithm's domain; warnings for
    /// admissible values without rate guarantees.
    pub fn validate(&self) -> Result<Vec<ParamWarning>> {
        if !(self.alpha >= 2.0) || !self.alpha.is_finite() {
            return Err(Error::param("alpha", format!("must be at least 2, got {}", self.alpha)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::param("sigma", format!("must be positive, got {}", self.sigma)));
        }
        if !(self.theta > 0.0) || !self.theta.is_finite() {
            return Err(Error::param("theta", format!("must be positive, got {}", self.theta)));
        }
        if !(self.step > 0.0 && self.step <= 2.0) {
            return Err(Error::param("s", format!("must lie in (0, 2], got {}", self.step)));
        }
        if let Some(eta) = self.eta {
            let expected = theta_from_eta(eta, self.alpha)?;
            if expected != self.theta {
                return Err(Error::param(
                    "theta",
                    format!("inconsistent with eta = {eta}: expected {expected}, got {}", self.theta),
                ));
            }
        }
        if self.theta > self.alpha - 1.0 && self.alpha > 2.0 || self.theta > 1.0 && self.alpha == 2.0 {
            return Err(Error::param(
                "theta",
                format!("must not exceed alpha - 1 = {}, got {}", self.alpha - 1.0, self.theta),
            ));
        }
        if let Some(c) = self.cooling {
            if !(c.alpha_max >= self.alpha) {
                return Err(Error::param(
                    "alpha_max",
                    format!("must be at least alpha = {}, got {}", self.alpha, c.alpha_max),
                ));
            }
            if c.maxit < 2 {
                return Err(Error::param("maxit", format!("must be at least 2, got {}", c.maxit)));
            }
        }
        let mut warnings = Vec::new();
        if self.theta < 1.0 {
            warnings.push(ParamWarning::ThetaBelowOne(self.theta));
        } else if self.theta == 1.0 || self.theta == self.alpha - 1.0 {
            warnings.push(ParamWarning::ThetaAtBoundary {
                theta: self.theta,
                alpha: self.alpha,
            });
        }
        Ok(warnings)
    }

    /// Effective `alpha` at iteration `k`.
    pub fn alpha_at(&self, k: usize) -> f64 {
        match self.cooling {
            None => self.alpha,
            Some(c) => cooling_alpha(k, self.alpha, c.alpha_max, c.maxit, c.mode),
        }
    }

    /// Effective `theta` at iteration `k`; recomputed from `eta` under cooling.
    pub fn theta_at(&self, k: usize) -> f64 {
        match (self.cooling, self.eta) {
            (Some(_), Some(eta)) => (1.0 - eta) + eta * (self.alpha_at(k) - 1.0),
            _ => self.theta,
        }
    }

    /// `eta` as given, or recovered from `theta` when `alpha > 2`.
    pub fn eta_effective(&self) -> Option<f64> {
        self.eta.or_else(|| {
            (self.alpha > 2.0)
                .then(|| (self.theta - 1.0) / (self.alpha - 2.0))
                .filter(|e| (0.0..=1.0).contains(e))
        })
    }
}

/// Per-iteration coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoeffs {
    pub theta_k: f64,
    pub alpha_k: f64,
    pub t_k: f64,
}

pub fn schedule_coeffs(k: usize, p: &ScheduleParams) -> StepCoeffs {
    let kf = k as f64;
    StepCoeffs {
        theta_k: p.theta_at(k) / (kf + p.sigma),
        alpha_k: 1.0 - p.alpha_at(k) / (kf + p.sigma),
        t_k: kf - 1.0 + p.sigma,
    }
}

/// One Fast-KM update, element by element so that a fixed point maps to
/// itself bit for bit.
pub fn fast_km_update(c: &StepCoeffs, x: &Vector, tx: &Vector, tx_prev: &Vector) -> Vector {
    Vector::from_iterator(
        x.len(),
        x.iter()
            .zip(tx.iter())
            .zip(tx_prev.iter())
            .map(|((&xi, &ti), &pi)| xi + c.theta_k * (ti - xi) + c.alpha_k * (ti - pi)),
    )
}

// ---------------------------------------------------------------------------
// Run options
// ---------------------------------------------------------------------------

/// Optional diagnostics attached to a run.
#[derive(Clone, Default)]
pub struct RunOptions<'a> {
    pub snapshots: SnapshotPolicy,
    /// Fixed point used for the gap function and the energy.
    pub reference: Option<&'a Vector>,
    pub reference_note: Option<String>,
    /// Energy parameter; defaults to `alpha - 1`.
    pub lambda: Option<f64>,
    /// Inner product for residuals, gaps and energies; defaults to Euclidean.
    pub metric: Option<&'a dyn InnerProduct>,
    /// Stop once the residual drops below this value.
    pub tolerance: Option<f64>,
    pub label: String,
}

impl<'a> RunOptions<'a> {
    pub fn with_reference(mut self, z: &'a Vector) -> Self {
        self.reference = Some(z);
        self
    }

    pub fn with_snapshots(mut self, policy: SnapshotPolicy) -> Self {
        self.snapshots = policy;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub(crate) fn metric(&self) -> &dyn InnerProduct {
        self.metric.unwrap_or(&Euclidean)
    }
}

/// What an observer sees after the operator has been evaluated at `x^k`.
pub struct StepView<'a> {
    pub k: usize,
    pub x: &'a Vector,
    pub tx: &'a Vector,
    pub record: &'a TraceRecord,
}

/// Energy setup for a run, if the run carries enough information for it.
pub(crate) fn energy_state(p: &ScheduleParams, opts: &RunOptions<'_>) -> Result<Option<LyapunovState>> {
    let (Some(z), None) = (opts.reference, p.cooling) else {
        return Ok(None);
    };
    let Some(eta) = p.eta_effective() else {
        return Ok(None);
    };
    let lambda = opts.lambda.unwrap_or(p.alpha - 1.0);
    LyapunovState::new(lambda, eta, p.alpha, p.sigma, z.clone()).map(Some)
}

// ---------------------------------------------------------------------------
// Fast-KM
// ---------------------------------------------------------------------------

/// Runs `n` Fast-KM iterations from `(x^{-1}, x^0)`.
///
/// Record `k` of the trace describes `x^k`: its residual, the gap at `x^k`
/// and the energy `E_{k+1}`. The operator is evaluated exactly `n + 1` times.
pub fn run_fast_km<T: FixedPointMap + ?Sized>(
    op: &T,
    x_m1: &Vector,
    x0: &Vector,
    p: &ScheduleParams,
    n: usize,
    opts: &RunOptions<'_>,
) -> Result<IterationTrace> {
    run_fast_km_observed(op, x_m1, x0, p, n, opts, |_| {})
}

/// [`run_fast_km`] with a callback invoked at every step.
pub fn run_fast_km_observed<T: FixedPointMap + ?Sized>(
    op: &T,
    x_m1: &Vector,
    x0: &Vector,
    p: &ScheduleParams,
    n: usize,
    opts: &RunOptions<'_>,
    observer: impl FnMut(&StepView<'_>),
) -> Result<IterationTrace> {
    if p.step != 1.0 {
        let averaged = averaged_map(op, p.step)?;
        return fast_km_loop(&averaged, x_m1, x0, p, n, opts, observer);
    }
    fast_km_loop(op, x_m1, x0, p, n, opts, observer)
}

fn fast_km_loop<T: FixedPointMap + ?Sized>(
    op: &T,
    x_m1: &Vector,
    x0: &Vector,
    p: &ScheduleParams,
    n: usize,
    opts: &RunOptions<'_>,
    mut observer: impl FnMut(&StepView<'_>),
) -> Result<IterationTrace> {
    let dim = op.dim();
    check_len(dim, x_m1.len())?;
    check_len(dim, x0.len())?;
    if let Some(z) = opts.reference {
        check_len(dim, z.len())?;
    }
    let warnings = p.validate()?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let energy = energy_state(p, opts)?;
    let metric = opts.metric();

    let mut trace = IterationTrace::new(opts.snapshots, SnapshotPolicy::None);
    trace.meta.label = opts.label.clone();
    trace.meta.params = Some(p.clone());
    trace.meta.reference_note = opts.reference_note.clone();
    trace.meta.warnings = warnings.iter().map(|w| w.to_string()).collect();
    let started = Instant::now();

    let mut tx_prev = op.apply(x_m1);
    trace.set_initial(x_m1, &tx_prev);
    let mut x = x0.clone();
    for k in 0..n {
        let tx = op.apply(&x);
        let q = &x - &tx;
        let residual = metric.norm_sq(&q).max(0.0).sqrt();
        let gap = match opts.reference {
            Some(z) => Some(gap_function_in(metric, &x, &tx, z)?),
            None => None,
        };
        let energy = match &energy {
            Some(st) => Some(lyapunov_energy(
                EnergyWindow {
                    z_prev: &tx_prev,
                    x_prev: &x,
                    z_cur: &tx,
                },
                st,
                k + 1,
                metric,
            )?),
            None => None,
        };
        let record = TraceRecord {
            k,
            residual,
            gap,
            energy,
            variance: None,
        };
        trace.push(record);
        trace.offer_snapshot(k, &x, &tx);
        observer(&StepView {
            k,
            x: &x,
            tx: &tx,
            record: &record,
        });
        let next = fast_km_update(&schedule_coeffs(k, p), &x, &tx, &tx_prev);
        tx_prev = tx;
        x = next;
        if opts.tolerance.is_some_and(|tol| residual <= tol) {
            break;
        }
    }
    trace.set_final(x);
    trace.meta.wall_time = started.elapsed();
    Ok(trace)
}

// ---------------------------------------------------------------------------
// Plain KM
// ---------------------------------------------------------------------------

/// Krasnoselskii-Mann: `x^{k+1} = x^k + theta (T x^k - x^k)` with `theta in (0, 1)`.
pub fn run_km<T: FixedPointMap + ?Sized>(
    op: &T,
    x0: &Vector,
    theta: f64,
    n: usize,
    opts: &RunOptions<'_>,
) -> Result<IterationTrace> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::param("theta", format!("must lie in (0, 1), got {theta}")));
    }
    km_loop(op, x0, theta, n, opts, |_| {})
}

/// KM loop with the relaxation range left to the caller.
pub(crate) fn km_loop<T: FixedPointMap + ?Sized>(
    op: &T,
    x0: &Vector,
    theta: f64,
    n: usize,
    opts: &RunOptions<'_>,
    mut observer: impl FnMut(&StepView<'_>),
) -> Result<IterationTrace> {
    check_len(op.dim(), x0.len())?;
    if let Some(z) = opts.reference {
        check_len(op.dim(), z.len())?;
    }
    let metric = opts.metric();
    let mut trace = IterationTrace::new(opts.snapshots, SnapshotPolicy::None);
    trace.meta.label = opts.label.clone();
    trace.meta.reference_note = opts.reference_note.clone();
    let started = Instant::now();

    let mut x = x0.clone();
    for k in 0..n {
        let tx = op.apply(&x);
        let residual = metric.norm_sq(&(&x - &tx)).max(0.0).sqrt();
        let gap = match opts.reference {
            Some(z) => Some(gap_function_in(metric, &x, &tx, z)?),
            None => None,
        };
        let record = TraceRecord {
            k,
            residual,
            gap,
            energy: None,
            variance: None,
        };
        trace.push(record);
        trace.offer_snapshot(k, &x, &tx);
        observer(&StepView {
            k,
            x: &x,
            tx: &tx,
            record: &record,
        });
        x = Vector::from_iterator(
            x.len(),
            x.iter().zip(tx.iter()).map(|(&xi, &ti)| xi + theta * (ti - xi)),
        );
        if opts.tolerance.is_some_and(|tol| residual <= tol) {
            break;
        }
    }
    trace.set_final(x);
    trace.meta.wall_time = started.elapsed();
    Ok(trace)
}

// ---------------------------------------------------------------------------
// Anchored form
// ---------------------------------------------------------------------------

/// Fast-KM with `theta = 1` written as `x^{k+1} = eps_k v + (1 - eps_k) T x^k`
/// with `eps_k = (alpha - 1)/(k + sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalpernForm {
    pub anchor: Vector,
    pub alpha: f64,
    pub sigma: f64,
}

impl HalpernForm {
    pub fn new(anchor: Vector, alpha: f64, sigma: f64) -> Result<Self> {
        if !(alpha >= 2.0) {
            return Err(Error::param("alpha", format!("must be at least 2, got {alpha}")));
        }
        if !(sigma > 0.0) {
            return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
        }
        Ok(Self { anchor, alpha, sigma })
    }

    /// The anchor matching a momentum run started at `(x^{-1}, x^0)`:
    /// `v = (t_0/(alpha - 1)) (x^0 - T x^{-1}) + T x^{-1}` with `t_0 = sigma - 1`.
    pub fn from_initial<T: FixedPointMap + ?Sized>(
        op: &T,
        x_m1: &Vector,
        x0: &Vector,
        alpha: f64,
        sigma: f64,
    ) -> Result<Self> {
        check_len(op.dim(), x_m1.len())?;
        check_len(op.dim(), x0.len())?;
        let t_m1 = op.apply(x_m1);
        let t0 = sigma - 1.0;
        let anchor = (x0 - &t_m1) * (t0 / (alpha - 1.0)) + &t_m1;
        Self::new(anchor, alpha, sigma)
    }

    pub fn eps(&self, k: usize) -> f64 {
        (self.alpha - 1.0) / (k as f64 + self.sigma)
    }
}

/// Runs the anchored iteration for `n` steps from `x^0`.
pub fn run_anchored_halpern<T: FixedPointMap + ?Sized>(
    op: &T,
    h: &HalpernForm,
    x0: &Vector,
    n: usize,
    opts: &RunOptions<'_>,
) -> Result<IterationTrace> {
    check_len(op.dim(), x0.len())?;
    check_len(op.dim(), h.anchor.len())?;
    let metric = opts.metric();
    let mut trace = IterationTrace::new(opts.snapshots, SnapshotPolicy::None);
    trace.meta.label = opts.label.clone();
    let started = Instant::now();

    let mut x = x0.clone();
    for k in 0..n {
        let tx = op.apply(&x);
        let residual = metric.norm_sq(&(&x - &tx)).max(0.0).sqrt();
        let gap = match opts.reference {
            Some(z) => Some(gap_function_in(metric, &x, &tx, z)?),
            None => None,
        };
        trace.push(TraceRecord {
            k,
            residual,
            gap,
            energy: None,
            variance: None,
        });
        trace.offer_snapshot(k, &x, &tx);
        let eps = h.eps(k);
        x = &h.anchor * eps + tx * (1.0 - eps);
    }
    trace.set_final(x);
    trace.meta.wall_time = started.elapsed();
    Ok(trace)
}

// ---------------------------------------------------------------------------
// Tran-Dinh's method
// ---------------------------------------------------------------------------

/// Parameters of the accelerated method for a `1/L`-cocoercive operator `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranDinhParams {
    pub omega: f64,
    pub gamma_bar: f64,
    pub lipschitz: f64,
}

impl TranDinhParams {
    fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.5) {
            return Err(Error::param("omega", format!("must be at least 1/2, got {}", self.omega)));
        }
        if !(self.gamma_bar > 0.0 && self.gamma_bar <= 2.0) {
            return Err(Error::param(
                "gamma_bar",
                format!("must lie in (0, 2], got {}", self.gamma_bar),
            ));
        }
        if !(self.lipschitz > 0.0) {
            return Err(Error::param(
                "lipschitz",
                format!("must be positive, got {}", self.lipschitz),
            ));
        }
        Ok(())
    }

    /// `gamma_bar / L`, the step of the forward operator.
    pub fn step(&self) -> f64 {
        self.gamma_bar / self.lipschitz
    }
}

/// Fast-KM parameters and the forward-step operator equivalent to the method.
#[derive(Debug, Clone, PartialEq)]
pub struct TranDinhMapping {
    pub params: ScheduleParams,
    pub step: f64,
    pub warnings: Vec<ParamWarning>,
}

impl TranDinhMapping {
    /// `T = I - (gamma_bar / L) G`.
    pub fn operator<G: Fn(&Vector) -> Vector>(&self, g: G, dim: usize) -> ForwardStep<G> {
        ForwardStep {
            g,
            dim,
            step: self.step,
        }
    }
}

/// `x - step G(x)`.
pub struct ForwardStep<G> {
    g: G,
    dim: usize,
    step: f64,
}

impl<G: Fn(&Vector) -> Vector> FixedPointMap for ForwardStep<G> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &Vector) -> Vector {
        x - (self.g)(x) * self.step
    }
}

/// `sigma = 2 omega + 2`, `alpha = 2 omega + 1`, `theta = omega`.
pub fn trandinh_map(tp: &TranDinhParams) -> Result<TranDinhMapping> {
    tp.validate()?;
    let params = ScheduleParams {
        alpha: 2.0 * tp.omega + 1.0,
        theta: tp.omega,
        sigma: 2.0 * tp.omega + 2.0,
        eta: None,
        step: 1.0,
        cooling: None,
    };
    let warnings = params.validate()?;
    Ok(TranDinhMapping {
        params,
        step: tp.step(),
        warnings,
    })
}

/// The method in its original form:
///
/// ```text
/// x^{k+1} = x^k + tb_k (x^k - x^{k-1}) - eb_k (G(x^k) - gb_k G(x^{k-1}))
/// tb_k = (k + 1)/(k + 2w + 2)
/// eb_k = (gamma_bar / L)(k + w + 1)/(k + 2w + 2)
/// gb_k = (gamma_bar / L) tb_k / eb_k
/// ```
///
/// Residuals are those of `I - (gamma_bar / L) G`.
pub fn run_trandinh_direct<G: Fn(&Vector) -> Vector>(
    g: G,
    tp: &TranDinhParams,
    x_m1: &Vector,
    x0: &Vector,
    n: usize,
    opts: &RunOptions<'_>,
) -> Result<IterationTrace> {
    tp.validate()?;
    check_len(x_m1.len(), x0.len())?;
    let r = tp.step();
    let w = tp.omega;
    let metric = opts.metric();
    let mut trace = IterationTrace::new(opts.snapshots, SnapshotPolicy::None);
    trace.meta.label = opts.label.clone();
    let started = Instant::now();

    let mut x_prev = x_m1.clone();
    let mut g_prev = g(x_m1);
    let mut x = x0.clone();
    for k in 0..n {
        let gx = g(&x);
        let tx = &x - &gx * r;
        let residual = metric.norm_sq(&(&gx * r)).max(0.0).sqrt();
        trace.push(TraceRecord {
            k,
            residual,
            gap: None,
            energy: None,
            variance: None,
        });
        trace.offer_snapshot(k, &x, &tx);
        let kf = k as f64;
        let tb = (kf + 1.0) / (kf + 2.0 * w + 2.0);
        let eb = r * (kf + w + 1.0) / (kf + 2.0 * w + 2.0);
        let gb = r * tb / eb;
        let next = &x + (&x - &x_prev) * tb - (&gx - &g_prev * gb) * eb;
        x_prev = std::mem::replace(&mut x, next);
        g_prev = gx;
    }
    trace.set_final(x);
    trace.meta.wall_time = started.elapsed();
    Ok(trace)
}
