//! The continuous-time model behind Fast-KM, for linear monotone `Q`:
//!
//! ```text
//! x'' + (alpha/t) x' + beta(t) Q x' + b(t) Q x = 0
//! b(t) = (1 - eta) beta'(t) + theta beta(t) / t
//! ```
//!
//! integrated with fixed-step RK4, plus closed-form solutions for the rotation
//! in the two edge cases of `theta` and the first-order Tikhonov flow.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::fastkm::theta_from_eta;
use crate::operators::{gaussian_vector, DenseMap, LinearMap, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSchedule {
    Constant(f64),
    /// `beta(t) = beta0 t^{alpha - 2 - eps}`.
    Power { beta0: f64, eps: f64 },
}

#[derive(Clone)]
pub struct DynamicsSpec {
    pub q: Arc<dyn LinearMap>,
    pub alpha: f64,
    pub eta: f64,
    pub beta: BetaSchedule,
    pub t0: f64,
    pub x0: Vector,
    pub v0: Vector,
}

impl DynamicsSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.q.input_dim();
        if self.q.output_dim() != n {
            return Err(Error::param("Q", "must be square"));
        }
        check_len(n, self.x0.len())?;
        check_len(n, self.v0.len())?;
        if !(self.alpha >= 2.0) {
            return Err(Error::param("alpha", format!("must be at least 2, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::param("eta", format!("must lie in [0, 1], got {}", self.eta)));
        }
        if !(self.t0 > 0.0) {
            return Err(Error::param("t0", format!("must be positive, got {}", self.t0)));
        }
        match self.beta {
            BetaSchedule::Constant(b) if !(b > 0.0) => {
                return Err(Error::param("beta", format!("must be positive, got {b}")));
            }
            BetaSchedule::Power { beta0, eps } => {
                if !(beta0 > 0.0) {
                    return Err(Error::param("beta0", format!("must be positive, got {beta0}")));
                }
                if !(0.0..=self.alpha - 2.0).contains(&eps) {
                    return Err(Error::param(
                        "eps",
                        format!("must lie in [0, alpha - 2] = [0, {}], got {eps}", self.alpha - 2.0),
                    ));
                }
            }
            _ => {}
        }
        // monotonicity spot check
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..8 {
            let x = gaussian_vector(n, &mut rng);
            let qx = self.q.apply(&x);
            if qx.dot(&x) < -1e-10 * qx.norm() * x.norm() {
                return Err(Error::param("Q", "is not monotone"));
            }
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        (1.0 - self.eta) + self.eta * (self.alpha - 1.0)
    }

    pub fn beta(&self, t: f64) -> f64 {
        match self.beta {
            BetaSchedule::Constant(b) => b,
            BetaSchedule::Power { beta0, eps } => beta0 * t.powf(self.alpha - 2.0 - eps),
        }
    }

    pub fn beta_dot(&self, t: f64) -> f64 {
        match self.beta {
            BetaSchedule::Constant(_) => 0.0,
            BetaSchedule::Power { beta0, eps } => {
                let p = self.alpha - 2.0 - eps;
                if p == 0.0 {
                    0.0
                } else {
                    beta0 * p * t.powf(p - 1.0)
                }
            }
        }
    }

    pub fn b(&self, t: f64) -> f64 {
        (1.0 - self.eta) * self.beta_dot(t) + self.theta() * self.beta(t) / t
    }
}

/// First-order form: `(x', v')` with `v = x'`.
pub fn ode_rhs(spec: &DynamicsSpec, t: f64, x: &Vector, v: &Vector) -> Result<(Vector, Vector)> {
    if !(t > 0.0) {
        return Err(Error::param("t", format!("must be positive, got {t}")));
    }
    Ok(rhs(spec, t, x, v))
}

fn rhs(spec: &DynamicsSpec, t: f64, x: &Vector, v: &Vector) -> (Vector, Vector) {
    let dv = v * (-spec.alpha / t) - spec.q.apply(v) * spec.beta(t) - spec.q.apply(x) * spec.b(t);
    (v.clone(), dv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vector,
    /// `x'(t)`.
    pub v: Vector,
    pub qx_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// The sample closest to time `t`.
    pub fn at(&self, t: f64) -> Option<&Sample> {
        self.samples
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

fn step_grid(t0: f64, t_end: f64, h: f64) -> Result<(usize, f64)> {
    if !(h > 0.0) {
        return Err(Error::param("h", format!("must be positive, got {h}")));
    }
    if !(t_end > t0) {
        return Err(Error::param("t_end", format!("must exceed t0 = {t0}, got {t_end}")));
    }
    let n = ((t_end - t0) / h - 1e-9).ceil().max(1.0) as usize;
    Ok((n, (t_end - t0) / n as f64))
}

/// Classical RK4 on `[t0, t_end]` with a step no larger than `h`; every step is
/// sampled.
pub fn integrate_rk4(spec: &DynamicsSpec, t_end: f64, h: f64) -> Result<Trajectory> {
    integrate_rk4_sampled(spec, t_end, h, 1)
}

/// [`integrate_rk4`] keeping every `stride`-th step and the final one.
pub fn integrate_rk4_sampled(
    spec: &DynamicsSpec,
    t_end: f64,
    h: f64,
    stride: usize,
) -> Result<Trajectory> {
    spec.validate()?;
    let (n, h) = step_grid(spec.t0, t_end, h)?;
    let stride = stride.max(1);
    let q = &spec.q;
    let sample = |t: f64, x: &Vector, v: &Vector| Sample {
        t,
        x: x.clone(),
        v: v.clone(),
        qx_norm: q.apply(x).norm(),
    };

    let mut x = spec.x0.clone();
    let mut v = spec.v0.clone();
    let mut out = vec![sample(spec.t0, &x, &v)];
    for i in 0..n {
        let t = spec.t0 + i as f64 * h;
        let (k1x, k1v) = rhs(spec, t, &x, &v);
        let (k2x, k2v) = rhs(spec, t + 0.5 * h, &(&x + &k1x * (0.5 * h)), &(&v + &k1v * (0.5 * h)));
        let (k3x, k3v) = rhs(spec, t + 0.5 * h, &(&x + &k2x * (0.5 * h)), &(&v + &k2v * (0.5 * h)));
        let (k4x, k4v) = rhs(spec, t + h, &(&x + &k3x * h), &(&v + &k3v * h));
        x += (k1x + (k2x + k3x) * 2.0 + k4x) * (h / 6.0);
        v += (k1v + (k2v + k3v) * 2.0 + k4v) * (h / 6.0);
        if (i + 1) % stride == 0 || i + 1 == n {
            out.push(sample(spec.t0 + (i + 1) as f64 * h, &x, &v));
        }
    }
    Ok(Trajectory { samples: out })
}

// ---------------------------------------------------------------------------
// Rotation closed forms
// ---------------------------------------------------------------------------

/// The two boundary values of `theta` for `alpha = 3`, `beta = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeMode {
    /// `theta = 1` (`eta = 0`).
    ThetaOne,
    /// `theta = alpha - 1` (`eta = 1`).
    ThetaAlphaMinusOne,
}

impl EdgeMode {
    pub fn eta(self) -> f64 {
        match self {
            EdgeMode::ThetaOne => 0.0,
            EdgeMode::ThetaAlphaMinusOne => 1.0,
        }
    }
}

fn as_vector(z: Complex64) -> Vector {
    Vector::from_column_slice(&[z.re, z.im])
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 {
        Ok(())
    } else {
        Err(Error::param("t", format!("must be positive, got {t}")))
    }
}

/// Explicit solution for the rotation `Q(a, b) = (-b, a)`, with `a + ib`
/// identified with `(a, b)`:
///
/// ```text
/// theta = 1:          x(t) = c1 (1 - it)/t^2 + c2 e^{-it}/t^2
/// theta = alpha - 1:  x(t) = c1/t^2 + c2 (1 + it) e^{-it}/t^2
/// ```
pub fn rotation_closed_form(mode: EdgeMode, c1: f64, c2: f64, t: f64) -> Result<Vector> {
    check_time(t)?;
    let i = Complex64::i();
    let e = (-i * t).exp();
    let t2 = t * t;
    let z = match mode {
        EdgeMode::ThetaOne => (c1 * (1.0 - i * t) + c2 * e) / t2,
        EdgeMode::ThetaAlphaMinusOne => (c1 + c2 * (1.0 + i * t) * e) / t2,
    };
    Ok(as_vector(z))
}

/// Time derivative of [`rotation_closed_form`].
pub fn rotation_closed_form_velocity(mode: EdgeMode, c1: f64, c2: f64, t: f64) -> Result<Vector> {
    check_time(t)?;
    let i = Complex64::i();
    let e = (-i * t).exp();
    let (t2, t3) = (t * t, t * t * t);
    let z = match mode {
        EdgeMode::ThetaOne => {
            c1 * (-i / t2 - 2.0 * (1.0 - i * t) / t3) + c2 * e * (-i / t2 - 2.0 / t3)
        }
        EdgeMode::ThetaAlphaMinusOne => {
            -2.0 * c1 / t3 + c2 * e * (1.0 / t - 2.0 * (1.0 + i * t) / t3)
        }
    };
    Ok(as_vector(z))
}

/// The initial value problem solved by [`rotation_closed_form`] from `t0`.
pub fn edge_case_spec(mode: EdgeMode, c1: f64, c2: f64, t0: f64) -> Result<DynamicsSpec> {
    let spec = DynamicsSpec {
        q: Arc::new(DenseMap::rotation()),
        alpha: 3.0,
        eta: mode.eta(),
        beta: BetaSchedule::Constant(1.0),
        t0,
        x0: rotation_closed_form(mode, c1, c2, t0)?,
        v0: rotation_closed_form_velocity(mode, c1, c2, t0)?,
    };
    debug_assert_eq!(spec.theta(), theta_from_eta(mode.eta(), 3.0).unwrap());
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Tikhonov flow
// ---------------------------------------------------------------------------

/// Anchor of the first-order flow equivalent to `spec` when `beta` saturates
/// the growth condition:
/// `v = (t0/(alpha - 1)) (x'(t0) + beta(t0) Q x(t0)) + x(t0)`.
pub fn tikhonov_anchor(spec: &DynamicsSpec) -> Result<Vector> {
    spec.validate()?;
    let t0 = spec.t0;
    let drift = &spec.v0 + spec.q.apply(&spec.x0) * spec.beta(t0);
    Ok(drift * (t0 / (spec.alpha - 1.0)) + &spec.x0)
}

/// RK4 for `x' = -beta0 t^{alpha-2} Q x - ((alpha - 1)/t)(x - anchor)`.
///
/// Samples carry `x'(t)` in the `v` field.
#[allow(clippy::too_many_arguments)]
pub fn integrate_tikhonov_flow(
    q: &dyn LinearMap,
    alpha: f64,
    beta0: f64,
    t0: f64,
    anchor: &Vector,
    x0: &Vector,
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    let n = q.input_dim();
    check_len(n, anchor.len())?;
    check_len(n, x0.len())?;
    if !(alpha > 1.0) {
        return Err(Error::param("alpha", format!("must exceed 1, got {alpha}")));
    }
    check_time(t0)?;
    let (steps, h) = step_grid(t0, t_end, h)?;
    let f = |t: f64, x: &Vector| -> Vector {
        q.apply(x) * (-beta0 * t.powf(alpha - 2.0)) - (x - anchor) * ((alpha - 1.0) / t)
    };
    let sample = |t: f64, x: &Vector| Sample {
        t,
        x: x.clone(),
        v: f(t, x),
        qx_norm: q.apply(x).norm(),
    };
    let mut x = x0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(sample(t0, &x));
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let k1 = f(t, &x);
        let k2 = f(t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
        let k3 = f(t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
        let k4 = f(t + h, &(&x + &k3 * h));
        x += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        out.push(sample(t0 + (i + 1) as f64 * h, &x));
    }
    Ok(Trajectory { samples: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn spec(q: Arc<dyn LinearMap>, eta: f64, beta: BetaSchedule, alpha: f64, x0: Vector, v0: Vector) -> DynamicsSpec {
        DynamicsSpec { q, alpha, eta, beta, t0: 1.0, x0, v0 }
    }

    #[test]
    fn rhs_examples() {
        let s = spec(Arc::new(DenseMap::zero(2)), 0.5, BetaSchedule::Constant(1.0), 3.0, v(&[1.0, 0.0]), v(&[2.0, -1.0]));
        let (dx, dv) = ode_rhs(&s, 2.0, &s.x0, &s.v0).unwrap();
        assert_eq!(dx, s.v0);
        assert_eq!(dv, &s.v0 * -1.5);

        let (dx, dv) = ode_rhs(&s, 2.0, &Vector::zeros(2), &Vector::zeros(2)).unwrap();
        assert_eq!((dx, dv), (Vector::zeros(2), Vector::zeros(2)));

        let r = spec(Arc::new(DenseMap::rotation()), 0.0, BetaSchedule::Constant(1.0), 3.0, v(&[1.0, 0.0]), v(&[0.0, 0.0]));
        assert_eq!(r.b(1.0), 1.0);
        let (_, dv) = ode_rhs(&r, 1.0, &r.x0, &r.v0).unwrap();
        // Q(1, 0) = (0, 1)
        assert_eq!(dv, v(&[0.0, -1.0]));
        assert!(ode_rhs(&r, 0.0, &r.x0, &r.v0).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = spec(Arc::new(DenseMap::rotation()), 0.5, BetaSchedule::Power { beta0: 1.0, eps: 1.5 }, 3.0, v(&[1.0, 0.0]), v(&[0.0, 0.0]));
        assert!(s.validate().is_err());
        s.beta = BetaSchedule::Power { beta0: 1.0, eps: 0.5 };
        assert!(s.validate().is_ok());
        s.q = Arc::new(DenseMap::diagonal(&[1.0, -1.0]));
        assert!(s.validate().is_err());
    }

    #[test]
    fn growth_condition_holds_for_power_family() {
        for eps in [0.0, 0.5, 1.0, 2.0] {
            let s = spec(Arc::new(DenseMap::rotation()), 0.5, BetaSchedule::Power { beta0: 2.0, eps }, 4.0, v(&[1.0, 0.0]), v(&[0.0, 0.0]));
            for t in [1.0, 3.0, 50.0] {
                let g = s.beta_dot(t) * t / s.beta(t);
                assert!(g >= 0.0 && g <= 4.0 - 2.0 - eps + 1e-12);
            }
        }
    }

    #[test]
    fn pure_damping_matches_closed_form() {
        let s = spec(Arc::new(DenseMap::zero(2)), 0.5, BetaSchedule::Constant(1.0), 3.0, v(&[0.0, 0.0]), v(&[1.0, -2.0]));
        let err = |h: f64| {
            let tr = integrate_rk4(&s, 10.0, h).unwrap();
            tr.samples
                .iter()
                .map(|p| {
                    let exact = &s.v0 * (1.0 / p.t).powi(3);
                    (&p.v - &exact).norm() / exact.norm()
                })
                .fold(0.0, f64::max)
        };
        assert!(err(1e-3) <= 1e-8);
        let (e1, e2) = (err(0.1), err(0.05));
        assert!(e1 / e2 >= 8.0, "{e1} {e2}");
    }

    #[test]
    fn equilibrium_is_preserved() {
        let s = spec(Arc::new(DenseMap::rotation()), 0.5, BetaSchedule::Constant(1.0), 3.0, Vector::zeros(2), Vector::zeros(2));
        let tr = integrate_rk4(&s, 20.0, 1e-2).unwrap();
        assert!(tr.samples.iter().all(|p| p.x.norm() <= 1e-14 && p.v.norm() <= 1e-14));
    }

    #[test]
    fn closed_form_examples() {
        for mode in [EdgeMode::ThetaOne, EdgeMode::ThetaAlphaMinusOne] {
            assert_eq!(rotation_closed_form(mode, 0.0, 0.0, 3.0).unwrap(), Vector::zeros(2));
            assert!(rotation_closed_form(mode, 1.0, 1.0, 0.0).is_err());
        }
        let x = rotation_closed_form(EdgeMode::ThetaOne, 1.0, 0.0, 2.0).unwrap();
        assert_abs_diff_eq!(x, v(&[0.25, -0.5]), epsilon = 1e-15);
    }

    #[test]
    fn closed_form_velocity_matches_differences() {
        let h = 1e-5;
        for mode in [EdgeMode::ThetaOne, EdgeMode::ThetaAlphaMinusOne] {
            for t in [1.0, 2.5, 7.0, 40.0] {
                let fd = (rotation_closed_form(mode, 1.0, 1.0, t + h).unwrap()
                    - rotation_closed_form(mode, 1.0, 1.0, t - h).unwrap())
                    / (2.0 * h);
                let an = rotation_closed_form_velocity(mode, 1.0, 1.0, t).unwrap();
                assert_abs_diff_eq!(fd, an, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn closed_form_solves_the_system() {
        let h = 1e-5;
        for mode in [EdgeMode::ThetaOne, EdgeMode::ThetaAlphaMinusOne] {
            let s = edge_case_spec(mode, 1.0, 1.0, 1.0).unwrap();
            for t in [1.5, 3.0, 10.0, 60.0] {
                let x = rotation_closed_form(mode, 1.0, 1.0, t).unwrap();
                let xd = rotation_closed_form_velocity(mode, 1.0, 1.0, t).unwrap();
                let xdd = (rotation_closed_form_velocity(mode, 1.0, 1.0, t + h).unwrap()
                    - rotation_closed_form_velocity(mode, 1.0, 1.0, t - h).unwrap())
                    / (2.0 * h);
                let (_, dv) = ode_rhs(&s, t, &x, &xd).unwrap();
                assert!((xdd - dv).norm() <= 1e-8);
            }
        }
    }

    #[test]
    fn tikhonov_flow_without_operator() {
        let anchor = v(&[2.0, -1.0]);
        let x0 = v(&[0.0, 1.0]);
        let tr = integrate_tikhonov_flow(&DenseMap::zero(2), 3.0, 1.0, 1.0, &anchor, &x0, 20.0, 1e-3).unwrap();
        for p in &tr.samples {
            let exact = (&x0 - &anchor) * (1.0 / p.t).powi(2);
            let got = &p.x - &anchor;
            assert!((got - &exact).norm() <= 1e-8 * exact.norm());
        }
        let z = Vector::zeros(2);
        let tr = integrate_tikhonov_flow(&DenseMap::rotation(), 3.0, 1.0, 1.0, &z, &z, 10.0, 1e-2).unwrap();
        assert!(tr.samples.iter().all(|p| p.x == z));
    }

    #[test]
    fn big_o_rate_with_growing_beta() {
        let s = spec(Arc::new(DenseMap::rotation()), 0.5, BetaSchedule::Power { beta0: 1.0, eps: 0.5 }, 4.0, v(&[1.0, 0.0]), v(&[0.0, 0.0]));
        let tr = integrate_rk4_sampled(&s, 200.0, 1e-4, 100).unwrap();
        let worst = tr.samples.iter().map(|p| p.t * s.beta(p.t) * p.qx_norm).fold(0.0, f64::max);
        let late = tr.samples.iter().filter(|p| p.t >= 100.0).map(|p| p.t * s.beta(p.t) * p.qx_norm).fold(0.0, f64::max);
        assert!(worst.is_finite() && late <= worst);
        assert!(late <= 10.0, "t beta |Qx| = {late}");
    }
}
