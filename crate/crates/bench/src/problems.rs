//! Test problems: the two toys, Beckmann minimal-flow transport on a grid and
//! the geometric median.

use std::sync::Arc;

use fastkm::operators::{
    group_soft_threshold, prox_half_sq_dist, project_ball, skew_resolvent_op, soft_threshold,
    GridDivergence, LinearMap, Prox, SkewResolvent,
};
use fastkm::diagnostics::primal_dual_gap;
use fastkm::precond::{build_drs, path_graph_z, Conjugate, DrsSystem, GraphDrsSpec, PdhgProblem};
use fastkm::{Error, Result, Vector};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use fastkm::operators::gaussian_vector;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Tolerance on the total mass of a marginal.
pub const MASS_TOL: f64 = 1e-12;

/// `(I + tau S)^{-1}` for the block skew matrix, started from the all-ones vector.
pub fn skew_toy(d: usize, tau: f64) -> Result<SkewResolvent> {
    skew_resolvent_op(d, tau)
}

/// DRS for `1e-3 ||x||_1 + 1/2 dist(x, B((1,1), 1))^2` on the plane.
pub struct L1BallToy {
    pub system: DrsSystem,
    /// The unique fixed point of the reduced DRS map.
    pub w_star: Vector,
    /// The unique minimizer.
    pub x_star: Vector,
}

pub const L1_WEIGHT: f64 = 1e-3;

/// Proxes of `1e-3 ||.||_1` and `1/2 dist(., B((1,1), 1))^2`, in that order.
pub fn l1_ball_proxes() -> [Arc<dyn Prox>; 2] {
    let center = Vector::from_element(2, 1.0);
    [
        Arc::new(|v: &Vector, t: f64| soft_threshold(v, L1_WEIGHT * t).expect("nonnegative threshold")),
        Arc::new(move |v: &Vector, t: f64| {
            prox_half_sq_dist(v, |x: &Vector| project_ball(x, &center, 1.0).expect("unit radius"), t)
                .expect("nonnegative step")
        }),
    ]
}

pub fn l1_ball_toy() -> L1BallToy {
    let [p1, p2] = l1_ball_proxes();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    L1BallToy {
        system: build_drs(
            Arc::new(move |w: &Vector| p1.prox(w, 1.0)),
            Arc::new(move |w: &Vector| p2.prox(w, 1.0)),
            2,
        ),
        w_star: Vector::from_element(2, 1.0 - r),
        x_star: Vector::from_element(2, 1.0 - r - L1_WEIGHT),
    }
}

/// The same problem as a two-node Graph-DRS.
pub fn l1_ball_graph_spec() -> Result<GraphDrsSpec> {
    Ok(GraphDrsSpec {
        proxes: l1_ball_proxes().into(),
        z: path_graph_z(2)?,
        zhat: DMatrix::zeros(2, 0),
        tau: 1.0,
        dim: 2,
    })
}

// ---------------------------------------------------------------------------
// Beckmann transport
// ---------------------------------------------------------------------------

/// Divergence with Neumann boundary on a `p x p` grid.
pub fn build_div(p: usize) -> Result<GridDivergence> {
    GridDivergence::new(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Marginals {
    /// Uniform mass on opposite `3 x 3` corner patches.
    TwoPoints,
    /// Independent uniform densities, normalized.
    Random { seed: u64 },
}

pub struct BeckmannProblem {
    pub p: usize,
    pub mu: Vector,
    pub nu: Vector,
    pub div: Arc<GridDivergence>,
    pub tau1: f64,
    pub tau2: f64,
}

pub fn check_marginals(mu: &Vector, nu: &Vector) -> Result<()> {
    if mu.len() != nu.len() {
        return Err(Error::Shape {
            expected: mu.len(),
            got: nu.len(),
        });
    }
    for (name, m) in [("mu", mu), ("nu", nu)] {
        if m.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::param(name, "entries must be nonnegative"));
        }
        let mass = m.sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::param(name, format!("total mass must be 1, got {mass}")));
        }
    }
    Ok(())
}

fn corner_patch(p: usize, i0: usize, j0: usize) -> Vector {
    let mut m = Vector::zeros(p * p);
    for i in i0..i0 + 3 {
        for j in j0..j0 + 3 {
            m[i * p + j] = 1.0 / 9.0;
        }
    }
    m
}

/// Marginals on a `p x p` grid in row-major order.
pub fn marginals(p: usize, mode: Marginals) -> Result<(Vector, Vector)> {
    match mode {
        Marginals::TwoPoints => {
            if p < 3 {
                return Err(Error::param("p", format!("two-point marginals need p >= 3, got {p}")));
            }
            Ok((corner_patch(p, 0, 0), corner_patch(p, p - 3, p - 3)))
        }
        Marginals::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || {
                let v = Vector::from_fn(p * p, |_, _| rng.random::<f64>());
                let s = v.sum();
                v / s
            };
            let mu = draw();
            let nu = draw();
            Ok((mu, nu))
        }
    }
}

/// `min ||sigma||_{2,1}` subject to `Div sigma = mu - nu`, in saddle form with
/// `f = ||.||_{2,1}`, `g = indicator of {mu - nu}` and `L = Div`.
pub fn gen_beckmann(p: usize, mode: Marginals, tau1: f64, tau2: f64) -> Result<BeckmannProblem> {
    let (mu, nu) = marginals(p, mode)?;
    BeckmannProblem::new(p, mu, nu, tau1, tau2)
}

impl BeckmannProblem {
    pub fn new(p: usize, mu: Vector, nu: Vector, tau1: f64, tau2: f64) -> Result<Self> {
        let div = build_div(p)?;
        if mu.len() != div.nodes() {
            return Err(Error::Shape {
                expected: div.nodes(),
                got: mu.len(),
            });
        }
        check_marginals(&mu, &nu)?;
        Ok(Self {
            p,
            mu,
            nu,
            div: Arc::new(div),
            tau1,
            tau2,
        })
    }

    pub fn rhs(&self) -> Vector {
        &self.mu - &self.nu
    }

    pub fn pdhg(&self) -> PdhgProblem {
        let b = self.rhs();
        let prox_g = move |_y: &Vector, _t: f64| b.clone();
        PdhgProblem {
            prox_f: Arc::new(|s: &Vector, t: f64| group_soft_threshold(s, 2, t).expect("row pairs")),
            prox_gstar: Arc::new(Conjugate(prox_g)),
            op: self.div.clone(),
            tau1: self.tau1,
            tau2: self.tau2,
        }
    }

    pub fn flux_dim(&self) -> usize {
        2 * self.div.nodes()
    }

    /// `||sigma||_{2,1}`.
    pub fn objective(&self, sigma: &Vector) -> f64 {
        sigma
            .as_slice()
            .chunks(2)
            .map(|r| (r[0] * r[0] + r[1] * r[1]).sqrt())
            .sum()
    }

    /// `||Div sigma - (mu - nu)||`.
    pub fn infeasibility(&self, sigma: &Vector) -> f64 {
        (self.div.apply(sigma) - self.rhs()).norm()
    }

    /// `L(sigma, y*) - L(sigma*, y)` for `L(s, y) = ||s||_{2,1} + <Div s - (mu - nu), y>`.
    pub fn primal_dual_gap(&self, sigma: &Vector, y: &Vector, sigma_star: &Vector, y_star: &Vector) -> Result<f64> {
        let b = self.rhs();
        primal_dual_gap(
            &|s| self.objective(s),
            &|yy| b.dot(yy),
            self.div.as_ref(),
            sigma,
            y,
            sigma_star,
            y_star,
        )
    }
}

// ---------------------------------------------------------------------------
// Geometric median
// ---------------------------------------------------------------------------

pub struct MedianProblem {
    pub points: Vec<Vector>,
    pub spec: GraphDrsSpec,
}

/// Prox of `t ||. - c||`.
fn shifted_ball_prox(c: Vector) -> Arc<dyn Prox> {
    Arc::new(move |v: &Vector, t: f64| {
        let d = v - &c;
        let n = d.norm();
        let scale = if n > 0.0 { (1.0 - t / n).max(0.0) } else { 0.0 };
        &c + d * scale
    })
}

/// `N` standard Gaussian points in `R^d`.
pub fn gen_median(n: usize, d: usize, seed: u64) -> Result<MedianProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| gaussian_vector(d, &mut rng))
        .collect();
    MedianProblem::from_points(points)
}

impl MedianProblem {
    /// Path-graph splitting with `Zhat = 0` and `tau = 1`.
    pub fn from_points(points: Vec<Vector>) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::param("N", format!("need at least 2 points, got {n}")));
        }
        let d = points[0].len();
        if let Some(bad) = points.iter().find(|x| x.len() != d) {
            return Err(Error::Shape {
                expected: d,
                got: bad.len(),
            });
        }
        let spec = GraphDrsSpec {
            proxes: points.iter().cloned().map(shifted_ball_prox).collect(),
            z: path_graph_z(n)?,
            zhat: DMatrix::zeros(n, 0),
            tau: 1.0,
            dim: d,
        };
        Ok(Self { points, spec })
    }

    /// `||sum_i (x - x_i)/||x - x_i|| ||`, skipping points that coincide with `x`.
    pub fn optimality_residual(&self, x: &Vector) -> f64 {
        let mut g = Vector::zeros(x.len());
        for p in &self.points {
            let d = x - p;
            let n = d.norm();
            if n > 0.0 {
                g += d / n;
            }
        }
        g.norm()
    }

    pub fn objective(&self, x: &Vector) -> f64 {
        self.points.iter().map(|p| (x - p).norm()).sum()
    }
}
