//! Convergence measures: fixed-point residuals, the gap function, the
//! primal-dual gap, the discrete Lyapunov energy and its explicit
//! non-asymptotic bounds, and empirical rate slopes.
//!
//! [`IterationTrace`] is the record every solver in this crate returns.

use std::time::Duration;

use crate::error::{check_len, Error, Result};
use crate::fastkm::ScheduleParams;
use crate::operators::{BlockVector, LinearMap, Vector};

// ---------------------------------------------------------------------------
// Inner products
// ---------------------------------------------------------------------------

/// A (semi-)inner product on a coordinate space.
pub trait InnerProduct {
    fn inner(&self, a: &Vector, b: &Vector) -> f64;

    fn norm_sq(&self, a: &Vector) -> f64 {
        self.inner(a, a)
    }
}

/// The standard dot product.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Euclidean;

impl InnerProduct for Euclidean {
    fn inner(&self, a: &Vector, b: &Vector) -> f64 {
        a.dot(b)
    }
}

impl<M: InnerProduct + ?Sized> InnerProduct for &M {
    fn inner(&self, a: &Vector, b: &Vector) -> f64 {
        (**self).inner(a, b)
    }
}

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

/// Measurements taken at iterate `x^k` (or `w^k` for splitting systems).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    /// `||x^k - T(x^k)||`, in the M-seminorm for preconditioned systems.
    pub residual: f64,
    /// Gap function at `x^k` against the reference fixed point.
    pub gap: Option<f64>,
    /// Lyapunov energy `E_{k+1}`, which is the first energy that involves `x^k`.
    pub energy: Option<f64>,
    /// Dispersion of the shadow points produced while evaluating at `w^k`.
    pub variance: Option<f64>,
}

/// An iterate together with the operator value at it.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub k: usize,
    pub x: Vector,
    pub tx: Vector,
}

/// Shadow points read off while evaluating the resolvent at `w^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowSnapshot {
    pub k: usize,
    pub shadows: BlockVector,
}

/// Which iterate snapshots a run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotPolicy {
    None,
    All,
    /// Every `n`-th iterate, starting at `k = 0`.
    Every(usize),
    /// A rolling window over the most recent iterates.
    Last(usize),
}

impl Default for SnapshotPolicy {
    fn default() -> Self {
        SnapshotPolicy::Last(3)
    }
}

impl SnapshotPolicy {
    fn wants(&self, k: usize) -> bool {
        match *self {
            SnapshotPolicy::None => false,
            SnapshotPolicy::All | SnapshotPolicy::Last(_) => true,
            SnapshotPolicy::Every(n) => n > 0 && k.is_multiple_of(n),
        }
    }

    fn capacity(&self) -> Option<usize> {
        match *self {
            SnapshotPolicy::Last(n) => Some(n),
            _ => None,
        }
    }
}

/// Run metadata.
#[derive(Debug, Clone, Default)]
pub struct TraceMeta {
    pub label: String,
    pub params: Option<ScheduleParams>,
    /// How the reference point (if any) was obtained.
    pub reference_note: Option<String>,
    pub warnings: Vec<String>,
    pub wall_time: Duration,
}

/// Per-iteration record of a solver run.
///
/// Records are append-only with strictly increasing `k`.
#[derive(Debug, Clone, Default)]
pub struct IterationTrace {
    records: Vec<TraceRecord>,
    snapshots: Vec<Snapshot>,
    shadows: Vec<ShadowSnapshot>,
    snapshot_policy: Option<SnapshotPolicy>,
    shadow_policy: Option<SnapshotPolicy>,
    initial: Option<(Vector, Vector)>,
    final_iterate: Option<Vector>,
    pub meta: TraceMeta,
}

impl IterationTrace {
    pub fn new(snapshots: SnapshotPolicy, shadows: SnapshotPolicy) -> Self {
        Self {
            snapshot_policy: Some(snapshots),
            shadow_policy: Some(shadows),
            ..Default::default()
        }
    }

    pub(crate) fn push(&mut self, record: TraceRecord) {
        if let Some(last) = self.records.last() {
            assert!(record.k > last.k, "trace indices must increase");
        }
        debug_assert!(record.residual >= 0.0 || record.residual.is_nan());
        self.records.push(record);
    }

    pub(crate) fn offer_snapshot(&mut self, k: usize, x: &Vector, tx: &Vector) {
        let policy = self.snapshot_policy.unwrap_or_default();
        if !policy.wants(k) {
            return;
        }
        self.snapshots.push(Snapshot {
            k,
            x: x.clone(),
            tx: tx.clone(),
        });
        if let Some(cap) = policy.capacity() {
            if self.snapshots.len() > cap {
                self.snapshots.remove(0);
            }
        }
    }

    pub(crate) fn offer_shadows(&mut self, k: usize, shadows: &BlockVector) {
        let policy = self.shadow_policy.unwrap_or(SnapshotPolicy::None);
        if !policy.wants(k) {
            return;
        }
        self.shadows.push(ShadowSnapshot {
            k,
            shadows: shadows.clone(),
        });
        if let Some(cap) = policy.capacity() {
            if self.shadows.len() > cap {
                self.shadows.remove(0);
            }
        }
    }

    pub(crate) fn set_initial(&mut self, x_m1: &Vector, tx_m1: &Vector) {
        self.initial = Some((x_m1.clone(), tx_m1.clone()));
    }

    pub(crate) fn set_final(&mut self, x: Vector) {
        self.final_iterate = Some(x);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn snapshot(&self, k: usize) -> Option<&Snapshot> {
        self.snapshots
            .binary_search_by_key(&k, |s| s.k)
            .ok()
            .map(|i| &self.snapshots[i])
    }

    pub fn shadow_history(&self) -> &[ShadowSnapshot] {
        &self.shadows
    }

    /// `(x^{-1}, T(x^{-1}))` for momentum methods.
    pub fn initial(&self) -> Option<(&Vector, &Vector)> {
        self.initial.as_ref().map(|(x, t)| (x, t))
    }

    /// The iterate produced by the last step, `x^n`.
    pub fn final_iterate(&self) -> Option<&Vector> {
        self.final_iterate.as_ref()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.energy).collect()
    }

    /// Iterates `x^0, ..., x^{n-1}` in order; requires [`SnapshotPolicy::All`].
    pub fn iterates(&self) -> impl Iterator<Item = &Vector> {
        self.snapshots.iter().map(|s| &s.x)
    }

    /// Largest coordinate deviation between matching snapshots of two traces.
    pub fn sup_distance(&self, other: &IterationTrace) -> Result<f64> {
        let mut worst = 0.0f64;
        let mut matched = 0;
        for s in &self.snapshots {
            if let Some(o) = other.snapshot(s.k) {
                worst = worst.max(crate::operators::sup_dist(&s.x, &o.x)?);
                matched += 1;
            }
        }
        if matched == 0 && !self.snapshots.is_empty() {
            return Err(Error::InsufficientHistory(
                "traces share no snapshot indices".into(),
            ));
        }
        Ok(worst)
    }
}

// ---------------------------------------------------------------------------
// Measures
// ---------------------------------------------------------------------------

/// `||x - T(x)||`.
pub fn residual(x: &Vector, tx: &Vector) -> Result<f64> {
    check_len(x.len(), tx.len())?;
    Ok((x - tx).norm())
}

/// `<x - T(x), T(x) - z*> + 1/2 ||x - T(x)||^2`.
pub fn gap_function(x: &Vector, tx: &Vector, z_star: &Vector) -> Result<f64> {
    gap_function_in(&Euclidean, x, tx, z_star)
}

/// [`gap_function`] under an arbitrary (semi-)inner product.
pub fn gap_function_in(
    metric: &dyn InnerProduct,
    x: &Vector,
    tx: &Vector,
    z_star: &Vector,
) -> Result<f64> {
    check_len(x.len(), tx.len())?;
    check_len(x.len(), z_star.len())?;
    let q = x - tx;
    let e = tx - z_star;
    Ok(metric.inner(&q, &e) + 0.5 * metric.norm_sq(&q))
}

/// `L(x, y*) - L(x*, y)` for the Lagrangian `L(x, y) = f(x) + <Lx, y> - g*(y)`.
#[allow(clippy::too_many_arguments)]
pub fn primal_dual_gap(
    f_value: &dyn Fn(&Vector) -> f64,
    gstar_value: &dyn Fn(&Vector) -> f64,
    map: &dyn LinearMap,
    x: &Vector,
    y: &Vector,
    x_star: &Vector,
    y_star: &Vector,
) -> Result<f64> {
    check_len(map.input_dim(), x.len())?;
    check_len(map.input_dim(), x_star.len())?;
    check_len(map.output_dim(), y.len())?;
    check_len(map.output_dim(), y_star.len())?;
    let lag_x = f_value(x) + map.apply(x).dot(y_star) - gstar_value(y_star);
    let lag_y = f_value(x_star) + map.apply(x_star).dot(y) - gstar_value(y);
    Ok(lag_x - lag_y)
}

// ---------------------------------------------------------------------------
// Lyapunov energy
// ---------------------------------------------------------------------------

/// Parameters of the discrete energy `E_k^lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovState {
    pub lambda: f64,
    pub eta: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub z_star: Vector,
}

impl LyapunovState {
    pub fn new(lambda: f64, eta: f64, alpha: f64, sigma: f64, z_star: Vector) -> Result<Self> {
        if !(0.0..=alpha - 1.0).contains(&lambda) {
            return Err(Error::param(
                "lambda",
                format!("must lie in [0, alpha - 1] = [0, {}], got {lambda}", alpha - 1.0),
            ));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::param("eta", format!("must lie in [0, 1], got {eta}")));
        }
        if !(sigma > 0.0) {
            return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
        }
        Ok(Self {
            lambda,
            eta,
            alpha,
            sigma,
            z_star,
        })
    }

    /// `t_k = k - 1 + sigma`.
    pub fn t(&self, k: f64) -> f64 {
        k - 1.0 + self.sigma
    }

    /// `c = lambda (alpha - 1 - lambda)`.
    pub fn c(&self) -> f64 {
        self.lambda * (self.alpha - 1.0 - self.lambda)
    }
}

/// The three quantities that enter `E_k`: `z^{k-1} = T(x^{k-2})`, `x^{k-1}` and
/// `z^k = T(x^{k-1})`.
#[derive(Debug, Clone, Copy)]
pub struct EnergyWindow<'a> {
    pub z_prev: &'a Vector,
    pub x_prev: &'a Vector,
    pub z_cur: &'a Vector,
}

/// `E_k^lambda` for `k >= 1`:
///
/// ```text
/// E_k = d_k <Q^k, z^k - z*> + (d_k + x_k)/2 ||Q^k||^2 + c/2 ||z^{k-1} - z*||^2 + 1/2 ||v^k||^2
/// v^k = lambda (z^{k-1} - z*) + t_{k-1} (z^k - z^{k-1} + (1 - eta) Q^k)
/// ```
///
/// with `Q^k = x^{k-1} - z^k`, `d_k = eta lambda t_{k-1}` and
/// `x_k = (1 - eta) eta t_{k-1}^2`.
pub fn lyapunov_energy(
    window: EnergyWindow<'_>,
    st: &LyapunovState,
    k: usize,
    metric: &dyn InnerProduct,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InsufficientHistory(
            "the energy is defined for k >= 1".into(),
        ));
    }
    let n = st.z_star.len();
    check_len(n, window.z_prev.len())?;
    check_len(n, window.x_prev.len())?;
    check_len(n, window.z_cur.len())?;

    let t = st.t(k as f64 - 1.0);
    let delta = st.eta * st.lambda * t;
    let xi = (1.0 - st.eta) * st.eta * t * t;
    let q = window.x_prev - window.z_cur;
    let dz = window.z_cur - window.z_prev;
    let prev_err = window.z_prev - &st.z_star;
    let cur_err = window.z_cur - &st.z_star;
    let v = &prev_err * st.lambda + (dz + &q * (1.0 - st.eta)) * t;

    let q_sq = metric.norm_sq(&q);
    Ok(delta * metric.inner(&q, &cur_err)
        + 0.5 * (delta + xi) * q_sq
        + 0.5 * st.c() * metric.norm_sq(&prev_err)
        + 0.5 * metric.norm_sq(&v))
}

/// Evaluates `E_k` from the snapshots stored in a trace.
pub fn lyapunov_energy_from_trace(
    trace: &IterationTrace,
    st: &LyapunovState,
    k: usize,
    metric: &dyn InnerProduct,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InsufficientHistory(
            "the energy is defined for k >= 1".into(),
        ));
    }
    let missing = |j: isize| Error::InsufficientHistory(format!("no snapshot of x^{j} in trace"));
    let prev = trace.snapshot(k - 1).ok_or_else(|| missing(k as isize - 1))?;
    let z_prev = if k >= 2 {
        &trace.snapshot(k - 2).ok_or_else(|| missing(k as isize - 2))?.tx
    } else {
        trace.initial().ok_or_else(|| missing(-1))?.1
    };
    lyapunov_energy(
        EnergyWindow {
            z_prev,
            x_prev: &prev.x,
            z_cur: &prev.tx,
        },
        st,
        k,
        metric,
    )
}

/// Right-hand sides of the explicit bounds valid when the energy is
/// nonincreasing from `k = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplicitBounds {
    /// Bound on `||x^{k-1} - T(x^{k-1})||^2`.
    pub residual_sq: f64,
    /// Bound on the gap function at `x^{k-1}`.
    pub gap: f64,
}

/// `2 E_1 / (eta (1 - eta) t_{k-1}^2)` and `E_1 / (eta (alpha - 1) t_{k-1})`.
pub fn explicit_bounds(e1: f64, eta: f64, alpha: f64, t_km1: f64) -> Result<ExplicitBounds> {
    let residual_sq = explicit_residual_bound(e1, eta, t_km1)?;
    if !(alpha > 1.0) {
        return Err(Error::param("alpha", format!("must exceed 1, got {alpha}")));
    }
    Ok(ExplicitBounds {
        residual_sq,
        gap: e1 / (eta * (alpha - 1.0) * t_km1),
    })
}

/// `2 E_1 / (eta (1 - eta) t_{k-1}^2)`.
pub fn explicit_residual_bound(e1: f64, eta: f64, t_km1: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::param(
            "eta",
            format!("the bound degenerates unless 0 < eta < 1, got {eta}"),
        ));
    }
    if !(t_km1 > 0.0) {
        return Err(Error::param("t", format!("must be positive, got {t_km1}")));
    }
    Ok(2.0 * e1 / (eta * (1.0 - eta) * t_km1 * t_km1))
}

/// Least-squares slope of `log(value)` against `log(k)` over the points with
/// `lo <= k <= hi`.
pub fn rate_slope(ks: &[f64], values: &[f64], window: (f64, f64)) -> Result<f64> {
    if ks.len() != values.len() {
        return Err(Error::Shape {
            expected: ks.len(),
            got: values.len(),
        });
    }
    let (lo, hi) = window;
    let mut pts = Vec::new();
    for (&k, &v) in ks.iter().zip(values) {
        if k < lo || k > hi {
            continue;
        }
        if !(k > 0.0) {
            return Err(Error::param("ks", format!("indices must be positive, got {k}")));
        }
        if !(v > 0.0) {
            return Err(Error::param("values", format!("must be positive, got {v} at k = {k}")));
        }
        pts.push((k.ln(), v.ln()));
    }
    if pts.len() < 10 {
        return Err(Error::param(
            "window",
            format!("need at least 10 points, found {}", pts.len()),
        ));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
