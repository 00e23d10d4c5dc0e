//! Vector algebra, linear maps, and the proximal building blocks used to
//! assemble test operators and splitting systems.
//!
//! Vectors are dense `f64` columns ([`nalgebra::DVector`]). Operators are
//! plain traits so that closures, matrices and stencils can all be plugged
//! into the solvers.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};

/// A point of the ambient space.
pub type Vector = DVector<f64>;

/// An ordered tuple of vectors, e.g. the shadow points `(x_1, ..., x_N)` of a
/// splitting method.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    blocks: Vec<Vector>,
}

impl BlockVector {
    pub fn new(blocks: Vec<Vector>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Vector] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn into_blocks(self) -> Vec<Vector> {
        self.blocks
    }

    /// Concatenates all blocks into one long vector.
    pub fn flatten(&self) -> Vector {
        let total = self.blocks.iter().map(|b| b.len()).sum();
        let mut out = Vec::with_capacity(total);
        for b in &self.blocks {
            out.extend(b.iter().copied());
        }
        Vector::from_vec(out)
    }

    /// Arithmetic mean of the blocks. All blocks must share one length.
    pub fn mean(&self) -> Result<Vector> {
        let first = self
            .blocks
            .first()
            .ok_or_else(|| Error::param("blocks", "mean of an empty block vector"))?;
        let mut acc = Vector::zeros(first.len());
        for b in &self.blocks {
            check_len(first.len(), b.len())?;
            acc += b;
        }
        Ok(acc / self.blocks.len() as f64)
    }
}

impl From<Vec<Vector>> for BlockVector {
    fn from(blocks: Vec<Vector>) -> Self {
        Self::new(blocks)
    }
}

/// Euclidean inner product with a shape check.
pub fn dot(a: &Vector, b: &Vector) -> Result<f64> {
    check_len(a.len(), b.len())?;
    Ok(a.dot(b))
}

pub fn norm(a: &Vector) -> f64 {
    a.dot(a).sqrt()
}

/// `max_i |a_i - b_i|`.
pub fn sup_dist(a: &Vector, b: &Vector) -> Result<f64> {
    check_len(a.len(), b.len())?;
    Ok(a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Standard normal vector drawn from a seeded ChaCha stream.
pub fn gaussian_vector(len: usize, rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_iterator(len, (0..len).map(|_| StandardNormal.sample(rng)))
}

// ---------------------------------------------------------------------------
// Linear maps
// ---------------------------------------------------------------------------

/// A bounded linear map between coordinate spaces, with its adjoint.
pub trait LinearMap: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn apply(&self, x: &Vector) -> Vector;
    fn apply_adjoint(&self, y: &Vector) -> Vector;
}

impl<L: LinearMap + ?Sized> LinearMap for &L {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn apply(&self, x: &Vector) -> Vector {
        (**self).apply(x)
    }
    fn apply_adjoint(&self, y: &Vector) -> Vector {
        (**self).apply_adjoint(y)
    }
}

impl<L: LinearMap + ?Sized> LinearMap for Box<L> {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn apply(&self, x: &Vector) -> Vector {
        (**self).apply(x)
    }
    fn apply_adjoint(&self, y: &Vector) -> Vector {
        (**self).apply_adjoint(y)
    }
}

impl<L: LinearMap + ?Sized> LinearMap for Arc<L> {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn apply(&self, x: &Vector) -> Vector {
        (**self).apply(x)
    }
    fn apply_adjoint(&self, y: &Vector) -> Vector {
        (**self).apply_adjoint(y)
    }
}

/// Matrix-backed linear map.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMap {
    matrix: DMatrix<f64>,
}

impl DenseMap {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n))
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        Self::new(DMatrix::from_diagonal(&Vector::from_column_slice(entries)))
    }

    /// The 90 degree counter-clockwise rotation of the plane, `(a, b) -> (-b, a)`.
    pub fn rotation() -> Self {
        Self::new(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]))
    }

    pub fn zero(n: usize) -> Self {
        Self::new(DMatrix::zeros(n, n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Materializes any linear map by applying it to the canonical basis.
    pub fn materialize(map: &dyn LinearMap) -> Self {
        let (m, n) = (map.output_dim(), map.input_dim());
        let mut matrix = DMatrix::zeros(m, n);
        for j in 0..n {
            let mut e = Vector::zeros(n);
            e[j] = 1.0;
            matrix.set_column(j, &map.apply(&e));
        }
        Self { matrix }
    }
}

impl LinearMap for DenseMap {
    fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }
    fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, x: &Vector) -> Vector {
        &self.matrix * x
    }
    fn apply_adjoint(&self, y: &Vector) -> Vector {
        self.matrix.tr_mul(y)
    }
}

/// Closure-backed linear map. The caller is responsible for supplying a
/// matching adjoint.
pub struct FnMap<F, G> {
    input_dim: usize,
    output_dim: usize,
    forward: F,
    adjoint: G,
}

impl<F, G> FnMap<F, G>
where
    F: Fn(&Vector) -> Vector + Send + Sync,
    G: Fn(&Vector) -> Vector + Send + Sync,
{
    pub fn new(input_dim: usize, output_dim: usize, forward: F, adjoint: G) -> Self {
        Self {
            input_dim,
            output_dim,
            forward,
            adjoint,
        }
    }
}

impl<F, G> LinearMap for FnMap<F, G>
where
    F: Fn(&Vector) -> Vector + Send + Sync,
    G: Fn(&Vector) -> Vector + Send + Sync,
{
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn apply(&self, x: &Vector) -> Vector {
        (self.forward)(x)
    }
    fn apply_adjoint(&self, y: &Vector) -> Vector {
        (self.adjoint)(y)
    }
}

/// Discrete divergence on a `p x p` grid with Neumann boundary conditions.
///
/// Nodes are ordered row-major (`idx = i * p + j`). A flux field is an
/// `n x 2` array stored row-major, so `sigma[2 * idx]` is the first and
/// `sigma[2 * idx + 1]` the second component at node `idx`. The divergence is
/// the negative adjoint of the forward-difference gradient, which is zero on
/// the last row (resp. column):
///
/// ```text
/// (Div s)_{i,j} = s^x_{i,j} [i < p-1] - s^x_{i-1,j} [i > 0]
///               + s^y_{i,j} [j < p-1] - s^y_{i,j-1} [j > 0]
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridDivergence {
    p: usize,
}

impl GridDivergence {
    pub fn new(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::param("p", format!("grid side must be >= 2, got {p}")));
        }
        Ok(Self { p })
    }

    pub fn side(&self) -> usize {
        self.p
    }

    pub fn nodes(&self) -> usize {
        self.p * self.p
    }

    /// Forward-difference gradient, the map `Grad = -Div^T`.
    pub fn gradient(&self, u: &Vector) -> Vector {
        let p = self.p;
        let mut g = Vector::zeros(2 * p * p);
        for i in 0..p {
            for j in 0..p {
                let idx = i * p + j;
                if i + 1 < p {
                    g[2 * idx] = u[idx + p] - u[idx];
                }
                if j + 1 < p {
                    g[2 * idx + 1] = u[idx + 1] - u[idx];
                }
            }
        }
        g
    }
}

impl LinearMap for GridDivergence {
    fn input_dim(&self) -> usize {
        2 * self.nodes()
    }
    fn output_dim(&self) -> usize {
        self.nodes()
    }
    fn apply(&self, sigma: &Vector) -> Vector {
        let p = self.p;
        let mut out = Vector::zeros(p * p);
        for i in 0..p {
            for j in 0..p {
                let idx = i * p + j;
                let mut v = 0.0;
                if i + 1 < p {
                    v += sigma[2 * idx];
                }
                if i > 0 {
                    v -= sigma[2 * (idx - p)];
                }
                if j + 1 < p {
                    v += sigma[2 * idx + 1];
                }
                if j > 0 {
                    v -= sigma[2 * (idx - 1) + 1];
                }
                out[idx] = v;
            }
        }
        out
    }
    fn apply_adjoint(&self, u: &Vector) -> Vector {
        -self.gradient(u)
    }
}

/// Power iteration on `L^T L`, returning `||L v||` for the final unit iterate.
///
/// The estimate approaches `||L||` from below. A zero map returns 0.
pub fn estimate_operator_norm(map: &dyn LinearMap, iters: usize, seed: u64) -> Result<f64> {
    if iters == 0 {
        return Err(Error::param("iters", "power iteration needs at least one step"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = gaussian_vector(map.input_dim(), &mut rng);
    let nv = norm(&v);
    if nv == 0.0 {
        return Ok(0.0);
    }
    v /= nv;
    for _ in 0..iters {
        let w = map.apply_adjoint(&map.apply(&v));
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        v = w / nw;
    }
    Ok(norm(&map.apply(&v)))
}

// ---------------------------------------------------------------------------
// Fixed-point maps
// ---------------------------------------------------------------------------

/// A (nonexpansive) self-map of a coordinate space whose fixed points are
/// sought.
pub trait FixedPointMap {
    fn dim(&self) -> usize;
    fn apply(&self, x: &Vector) -> Vector;
    fn known_fixed_point(&self) -> Option<Vector> {
        None
    }
}

impl<T: FixedPointMap + ?Sized> FixedPointMap for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &Vector) -> Vector {
        (**self).apply(x)
    }
    fn known_fixed_point(&self) -> Option<Vector> {
        (**self).known_fixed_point()
    }
}

impl<T: FixedPointMap + ?Sized> FixedPointMap for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &Vector) -> Vector {
        (**self).apply(x)
    }
    fn known_fixed_point(&self) -> Option<Vector> {
        (**self).known_fixed_point()
    }
}

impl<T: FixedPointMap + ?Sized> FixedPointMap for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &Vector) -> Vector {
        (**self).apply(x)
    }
    fn known_fixed_point(&self) -> Option<Vector> {
        (**self).known_fixed_point()
    }
}

/// Closure-backed fixed-point map.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
    fixed_point: Option<Vector>,
}

impl<F: Fn(&Vector) -> Vector> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self {
            dim,
            f,
            fixed_point: None,
        }
    }

    pub fn with_fixed_point(mut self, z: Vector) -> Self {
        self.fixed_point = Some(z);
        self
    }
}

impl<F: Fn(&Vector) -> Vector> FixedPointMap for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &Vector) -> Vector {
        (self.f)(x)
    }
    fn known_fixed_point(&self) -> Option<Vector> {
        self.fixed_point.clone()
    }
}

/// `T = (I + tau * S)^{-1}` for the skew matrix `S = [[0, I], [-I, 0]]`.
///
/// Uses `(I + tau S)^{-1} = (1 + tau^2)^{-1} [[I, -tau I], [tau I, I]]`.
/// The unique fixed point is the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewResolvent {
    dim: usize,
    tau: f64,
}

pub fn skew_resolvent_op(dim: usize, tau: f64) -> Result<SkewResolvent> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::param("d", format!("dimension must be even and positive, got {dim}")));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::param("tau", format!("must be positive, got {tau}")));
    }
    Ok(SkewResolvent { dim, tau })
}

impl SkewResolvent {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `(I + tau S) x`, the inverse of [`FixedPointMap::apply`].
    pub fn forward(&self, x: &Vector) -> Vector {
        let h = self.dim / 2;
        let mut out = x.clone();
        for i in 0..h {
            out[i] = x[i] + self.tau * x[i + h];
            out[i + h] = x[i + h] - self.tau * x[i];
        }
        out
    }
}

impl FixedPointMap for SkewResolvent {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &Vector) -> Vector {
        let h = self.dim / 2;
        let scale = 1.0 / (1.0 + self.tau * self.tau);
        let mut out = Vector::zeros(self.dim);
        for i in 0..h {
            let (a, b) = (x[i], x[i + h]);
            out[i] = scale * (a - self.tau * b);
            out[i + h] = scale * (self.tau * a + b);
        }
        out
    }
    fn known_fixed_point(&self) -> Option<Vector> {
        Some(Vector::zeros(self.dim))
    }
}

/// `T_s = (1 - s) I + s T`, evaluated as `x + s (T(x) - x)` so that fixed
/// points of `T` stay fixed bit for bit.
#[derive(Debug, Clone)]
pub struct Averaged<T> {
    inner: T,
    step: f64,
}

pub fn averaged_map<T: FixedPointMap>(inner: T, step: f64) -> Result<Averaged<T>> {
    if !(step > 0.0 && step <= 2.0) {
        return Err(Error::param("s", format!("step must lie in (0, 2], got {step}")));
    }
    Ok(Averaged { inner, step })
}

impl<T> Averaged<T> {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }
}

impl<T: FixedPointMap> FixedPointMap for Averaged<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, x: &Vector) -> Vector {
        if self.step == 1.0 {
            return self.inner.apply(x);
        }
        let tx = self.inner.apply(x);
        x + (tx - x) * self.step
    }
    fn known_fixed_point(&self) -> Option<Vector> {
        self.inner.known_fixed_point()
    }
}

// ---------------------------------------------------------------------------
// Proximal maps
// ---------------------------------------------------------------------------

/// A proximal map `(v, step) -> prox_{step f}(v)`.
pub trait Prox: Send + Sync {
    fn prox(&self, v: &Vector, step: f64) -> Vector;
}

impl<F> Prox for F
where
    F: Fn(&Vector, f64) -> Vector + Send + Sync,
{
    fn prox(&self, v: &Vector, step: f64) -> Vector {
        self(v, step)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::param("tau", format!("threshold must be >= 0, got {tau}")))
    }
}

/// Prox of `tau * ||.||_1`.
pub fn soft_threshold(v: &Vector, tau: f64) -> Result<Vector> {
    check_tau(tau)?;
    Ok(v.map(|x| x.signum() * (x.abs() - tau).max(0.0)))
}

/// Prox of `tau * sum_i ||row_i||` for a row-major array with rows of
/// length `width`. Rows of norm zero map to zero.
pub fn group_soft_threshold(v: &Vector, width: usize, tau: f64) -> Result<Vector> {
    check_tau(tau)?;
    if width == 0 || !v.len().is_multiple_of(width) {
        return Err(Error::Shape {
            expected: width.max(1) * (v.len() / width.max(1)),
            got: v.len(),
        });
    }
    let mut out = v.clone();
    for row in out.as_mut_slice().chunks_mut(width) {
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = if n > 0.0 { (1.0 - tau / n).max(0.0) } else { 0.0 };
        for x in row.iter_mut() {
            *x *= scale;
        }
    }
    Ok(out)
}

/// Prox of `tau/2 * dist(., C)^2` given the metric projection onto `C`:
/// `(x + tau P_C(x)) / (1 + tau)`.
pub fn prox_half_sq_dist<P>(x: &Vector, project: P, tau: f64) -> Result<Vector>
where
    P: Fn(&Vector) -> Vector,
{
    check_tau(tau)?;
    if tau == 0.0 {
        return Ok(x.clone());
    }
    let px = project(x);
    check_len(x.len(), px.len())?;
    Ok((x + px * tau) / (1.0 + tau))
}

/// Projection onto the closed Euclidean ball `B(center, radius)`.
pub fn project_ball(x: &Vector, center: &Vector, radius: f64) -> Result<Vector> {
    check_len(center.len(), x.len())?;
    if !(radius > 0.0) {
        return Err(Error::param("radius", format!("must be positive, got {radius}")));
    }
    let diff = x - center;
    let d = norm(&diff);
    if d <= radius {
        Ok(x.clone())
    } else {
        Ok(center + diff * (radius / d))
    }
}
