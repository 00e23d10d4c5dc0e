//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::time::Instant;

use fastkm::diagnostics::{explicit_bounds, InnerProduct, SnapshotPolicy};
use fastkm::dynamics::{
    edge_case_spec, integrate_rk4, integrate_rk4_sampled, integrate_tikhonov_flow,
    rotation_closed_form, tikhonov_anchor, EdgeMode,
};
use fastkm::fastkm::{
    run_anchored_halpern, run_fast_km, run_trandinh_direct, schedule_coeffs, trandinh_map,
    Cooling, CoolingMode, HalpernForm, RunOptions, ScheduleParams, TranDinhParams,
};
use fastkm::operators::{skew_resolvent_op, FixedPointMap};
use fastkm::precond::{
    build_graph_drs, build_pdhg, run_fast_ppp, run_fast_ppp_observed, run_km_ppp,
    run_km_ppp_observed, PppOptions, ResolventSystem,
};
use fastkm::Vector;
use fastkm_bench::config::{ProblemSpec, ReferenceSpec, RunConfig, SolverSpec};
use fastkm_bench::experiment::run_experiment;
use fastkm_bench::problems::{gen_beckmann, gen_median, l1_ball_graph_spec, l1_ball_toy, Marginals};
use fastkm_bench::sweep::{run_sweep, SweepGrid};
use fastkm_bench::trajectories::{interior_spec, tikhonov_spec, EDGE_C1, EDGE_C2};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn all_snapshots<'a>() -> RunOptions<'a> {
    RunOptions::default().with_snapshots(SnapshotPolicy::All)
}

fn quiet<'a>() -> RunOptions<'a> {
    RunOptions::default().with_snapshots(SnapshotPolicy::None)
}

fn halpern() -> Outcome {
    let t = skew_resolvent_op(10, 0.1).unwrap();
    let ones = Vector::from_element(10, 1.0);
    let mut worst = 0.0f64;
    for alpha in [2.0, 3.0, 5.0] {
        for sigma in [1.0, 2.0, 17.0] {
            let p = ScheduleParams::new(alpha, 1.0, sigma).unwrap();
            let a = run_fast_km(&t, &ones, &ones, &p, 500, &all_snapshots()).unwrap();
            let h = HalpernForm::from_initial(&t, &ones, &ones, alpha, sigma).unwrap();
            let b = run_anchored_halpern(&t, &h, &ones, 500, &all_snapshots()).unwrap();
            worst = worst.max(a.sup_distance(&b).unwrap());
        }
    }
    outcome(worst <= 1e-10, format!("sup distance {worst:.2e} over 9 runs"))
}

fn trandinh() -> Outcome {
    let x_m1 = Vector::from_column_slice(&[1.0, -2.0, 0.5]);
    let x0 = Vector::from_column_slice(&[0.5, 1.0, -1.0]);
    let mut worst = 0.0f64;
    for omega in [1.0, 2.0, 5.0] {
        let tp = TranDinhParams {
            omega,
            gamma_bar: 1.0,
            lipschitz: 1.0,
        };
        let g = |x: &Vector| x.clone();
        let direct = run_trandinh_direct(g, &tp, &x_m1, &x0, 300, &all_snapshots()).unwrap();
        let m = trandinh_map(&tp).unwrap();
        let fast = run_fast_km(&m.operator(g, 3), &x_m1, &x0, &m.params, 300, &all_snapshots()).unwrap();
        worst = worst.max(direct.sup_distance(&fast).unwrap());
    }
    outcome(worst <= 1e-10, format!("sup distance {worst:.2e}"))
}

fn prior_scheme() -> Outcome {
    let mut worst = 0.0f64;
    for s in [0.5, 1.0] {
        for alpha in [3.0, 4.0] {
            let p = ScheduleParams::new(alpha, alpha / 2.0, alpha + 1.0).unwrap();
            for k in 0..=100 {
                let c = schedule_coeffs(k, &p);
                // weights on x^k, x^k - x^{k-1}, T x^k, T x^k - T x^{k-1}
                let ours = [
                    1.0 - s * c.theta_k,
                    c.alpha_k * (1.0 - s),
                    s * c.theta_k,
                    s * c.alpha_k,
                ];
                let j = k as f64 + 1.0;
                let theirs = [
                    1.0 - s * alpha / (2.0 * (j + alpha)),
                    (1.0 - s) * j / (j + alpha),
                    s * alpha / (2.0 * (j + alpha)),
                    s * j / (j + alpha),
                ];
                for (a, b) in ours.iter().zip(theirs) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    outcome(worst <= 1e-14, format!("max weight difference {worst:.2e}"))
}

/// Energy decrease and the explicit bounds over the shared grid.
fn lyapunov_grid() -> (Outcome, Outcome) {
    let skew = skew_resolvent_op(10, 0.1).unwrap();
    let ones = Vector::from_element(10, 1.0);
    let z_skew = Vector::zeros(10);
    let toy = l1_ball_toy();
    let w0 = Vector::zeros(2);
    let km_ref = run_km_ppp(&toy.system, &w0, 1.0, 1_000_000, &quiet().into()).unwrap();
    let z_toy = km_ref.final_iterate().unwrap().clone();
    let ref_err = (&z_toy - &toy.w_star).norm();

    let mut worst_rise = f64::NEG_INFINITY;
    let mut rises = 0;
    let mut worst_res = 0.0f64;
    let mut worst_gap = 0.0f64;
    for alpha in [3.0, 4.0, 16.0] {
        for eta in [0.1, 0.5, 0.9] {
            let p = ScheduleParams::from_eta(alpha, eta, alpha).unwrap();
            let a = run_fast_km(&skew, &ones, &ones, &p, 10_000, &quiet().with_reference(&z_skew)).unwrap();
            let b = run_fast_ppp(&toy.system, &p, &w0, &w0, 10_000, &quiet().with_reference(&z_toy).into()).unwrap();
            for tr in [&a, &b] {
                let e = tr.energies();
                for w in e.windows(2) {
                    let rise = (w[1] - w[0]) / w[0].max(1.0);
                    worst_rise = worst_rise.max(rise);
                    if w[1] > w[0] + 1e-9 * w[0].max(1.0) {
                        rises += 1;
                    }
                }
                let e1 = tr.records()[0].energy.unwrap();
                for r in tr.records() {
                    let t = r.k as f64 - 1.0 + p.sigma;
                    let bd = explicit_bounds(e1, eta, alpha, t).unwrap();
                    worst_res = worst_res.max(r.residual * r.residual / bd.residual_sq);
                    worst_gap = worst_gap.max(r.gap.unwrap() / bd.gap);
                }
            }
        }
    }
    (
        outcome(
            rises == 0,
            format!("{rises} increases, largest relative change {worst_rise:.2e}, toy reference error {ref_err:.1e}"),
        ),
        outcome(
            worst_res <= 1.0 && worst_gap <= 1.0,
            format!("max residual^2/bound {worst_res:.3}, max gap/bound {worst_gap:.3}"),
        ),
    )
}

fn ohm() -> Outcome {
    let t = skew_resolvent_op(10, 0.1).unwrap();
    let x_m1 = Vector::from_element(10, 1.0);
    let x0 = t.apply(&x_m1);
    let c = x0.norm();
    let p = ScheduleParams::from_eta(2.0, 0.5, 1.0).unwrap();
    let tr = run_fast_km(&t, &x_m1, &x0, &p, 10_000, &quiet()).unwrap();
    let worst = tr.records()[1..]
        .iter()
        .map(|r| r.residual / (2.0 * c / r.k as f64))
        .fold(0.0, f64::max);
    outcome(worst <= 1.0, format!("max residual/bound {worst:.4}"))
}

fn little_o() -> Outcome {
    let t = skew_resolvent_op(10, 0.1).unwrap();
    let ones = Vector::from_element(10, 1.0);
    let p = ScheduleParams::from_eta(4.0, 0.5, 4.0).unwrap();
    let tr = run_fast_km(&t, &ones, &ones, &p, 10_001, &quiet()).unwrap();
    let kr = |lo: usize, hi: usize| {
        tr.records()[lo..=hi]
            .iter()
            .map(|r| r.k as f64 * r.residual)
            .fold(0.0, f64::max)
    };
    let (early, late) = (kr(1000, 2000), kr(5000, 10_000));
    outcome(late <= 0.9 * early, format!("ratio {:.4}", late / early))
}

fn drs_shadows() -> Outcome {
    let toy = l1_ball_toy();
    let w0 = Vector::zeros(2);
    let km_ref = run_km_ppp(&toy.system, &w0, 1.0, 1_000_000, &quiet().into()).unwrap();
    let x_ref = toy.system.resolve(km_ref.final_iterate().unwrap()).shadows.blocks()[0].clone();
    let p = ScheduleParams::from_eta(4.0, 0.5, 4.0).unwrap();
    let mut at = None;
    let mut mismatch = 0.0f64;
    run_fast_ppp_observed(&toy.system, &p, &w0, &w0, 5001, &quiet().into(), |st| {
        let b = st.resolved.shadows.blocks();
        let spread = (&b[0] - &b[1]).norm();
        mismatch = mismatch.max((spread - st.record.residual).abs());
        if st.k == 5000 {
            at = Some((spread, (&b[0] - &x_ref).norm().max((&b[1] - &x_ref).norm())));
        }
    })
    .unwrap();
    let (spread, dist) = at.unwrap();
    outcome(
        spread <= 1e-8 && dist <= 1e-6 && mismatch <= 1e-12,
        format!("||x1 - x2|| at k=5000 {spread:.2e} (target 1e-8), distance to reference {dist:.2e}, gap/residual mismatch {mismatch:.1e}"),
    )
}

fn variance_bound() -> Outcome {
    let n = 20;
    let med = gen_median(n, 10, 0).unwrap();
    let sys = build_graph_drs(med.spec.clone()).unwrap();
    let l1 = sys.lambda1().unwrap();
    let w0 = Vector::zeros(sys.reduced_dim());
    let p = ScheduleParams::from_eta(4.0, 0.9, 4.0).unwrap();
    let mut slack = f64::INFINITY;
    let mut last = None;
    run_fast_ppp_observed(&sys, &p, &w0, &w0, 5000, &quiet().into(), |st| {
        let bound = st.record.residual.powi(2) / (l1 * n as f64) + 1e-10;
        slack = slack.min(bound - st.record.variance.unwrap());
        last = Some(st.resolved.shadows.mean().unwrap());
    })
    .unwrap();
    let opt = med.optimality_residual(&last.unwrap());
    outcome(
        slack >= 0.0 && opt <= 1e-4,
        format!("min slack {slack:.2e}, final subgradient residual {opt:.2e}"),
    )
}

fn graph_drs_n2() -> Outcome {
    let toy = l1_ball_toy();
    let graph = build_graph_drs(l1_ball_graph_spec().unwrap()).unwrap();
    let w0 = Vector::from_column_slice(&[2.0, -1.0]);
    let p = ScheduleParams::from_eta(4.0, 0.5, 4.0).unwrap();
    let opts: PppOptions = all_snapshots().into();
    let a = run_fast_ppp(&toy.system, &p, &w0, &w0, 200, &opts).unwrap();
    let b = run_fast_ppp(&graph, &p, &w0, &w0, 200, &opts).unwrap();
    let sup = a.sup_distance(&b).unwrap();
    let res = a
        .residuals()
        .iter()
        .zip(b.residuals())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    outcome(
        sup <= 1e-12 && res <= 1e-12,
        format!("iterate distance {sup:.1e}, residual distance {res:.1e}"),
    )
}

fn beckmann() -> Outcome {
    let prob = gen_beckmann(20, Marginals::TwoPoints, 1e-3, 100.0).unwrap();
    let sys = build_pdhg(prob.pdhg()).unwrap();
    let cond = sys.step_condition();
    let u0 = Vector::zeros(sys.reduced_dim());

    let km_ref = run_km_ppp(&sys, &u0, 0.9, 1_000_000, &quiet().into()).unwrap();
    let u_ref = sys.resolve(km_ref.final_iterate().unwrap()).next;
    let (s_ref, y_ref) = sys.split(&u_ref);
    let f_ref = prob.objective(&s_ref);
    let hit = |s: &Vector| (prob.objective(s) - f_ref).abs() <= 1e-4 * f_ref && prob.infeasibility(s) <= 1e-6;

    let mut min_slack = f64::INFINITY;
    let mut check = |u: &Vector, ju: &Vector| {
        let (s, y) = sys.split(ju);
        let gap = prob.primal_dual_gap(&s, &y, &s_ref, &y_ref).unwrap();
        let bound = sys.inner(&(u - ju), &(ju - &u_ref));
        min_slack = min_slack.min(bound - gap);
    };

    let budget = 40_000;
    let mut km_hit = None;
    run_km_ppp_observed(&sys, &u0, 0.9, budget, &quiet().into(), |st| {
        check(st.w, &st.resolved.next);
        if km_hit.is_none() && hit(&sys.split(&st.resolved.next).0) {
            km_hit = Some(st.k);
        }
    })
    .unwrap();
    let p = ScheduleParams::from_eta(4.0, 0.9, 4.0)
        .unwrap()
        .with_step(1.9)
        .unwrap()
        .with_cooling(Cooling {
            mode: CoolingMode::Linear,
            alpha_max: 400.0,
            maxit: budget,
        })
        .unwrap();
    let mut fast_hit = None;
    run_fast_ppp_observed(&sys, &p, &u0, &u0, budget, &quiet().into(), |st| {
        check(st.w, &st.resolved.next);
        if fast_hit.is_none() && hit(&sys.split(&st.resolved.next).0) {
            fast_hit = Some(st.k);
        }
    })
    .unwrap();
    let pass = match (fast_hit, km_hit) {
        (Some(f), Some(k)) => 2 * f <= k,
        (Some(_), None) => true,
        _ => false,
    } && min_slack >= -1e-9
        && cond.satisfied;
    outcome(
        pass,
        format!(
            "iterations fast {fast_hit:?} vs KM {km_hit:?}, min bound slack {min_slack:.2e}, tau1 tau2 ||Div||^2 {:.3}",
            cond.product
        ),
    )
}

fn ode() -> Outcome {
    let mut rel = 0.0f64;
    let mut tight = f64::INFINITY;
    for mode in [EdgeMode::ThetaOne, EdgeMode::ThetaAlphaMinusOne] {
        let spec = edge_case_spec(mode, EDGE_C1, EDGE_C2, 1.0).unwrap();
        let traj = integrate_rk4(&spec, 200.0, 1e-3).unwrap();
        for s in &traj.samples {
            if s.t <= 100.0 {
                let exact = rotation_closed_form(mode, EDGE_C1, EDGE_C2, s.t).unwrap();
                rel = rel.max((&s.x - &exact).norm() / exact.norm());
            }
            if s.t >= 20.0 {
                tight = tight.min(s.t * s.qx_norm);
            }
        }
    }
    let traj = integrate_rk4_sampled(&interior_spec(), 200.0, 1e-3, 100).unwrap();
    let tq = |t: f64| {
        let s = traj.at(t).unwrap();
        s.t * s.qx_norm
    };
    let ratio = tq(200.0) / tq(20.0);
    outcome(
        rel <= 1e-6 && tight >= 0.4 && ratio <= 0.2,
        format!("closed-form rel error {rel:.1e}, edge min t||Qx|| {tight:.3}, interior ratio {ratio:.3} (target 0.2)"),
    )
}

fn tikhonov() -> Outcome {
    let spec = tikhonov_spec(3.0, 0.5);
    let anchor = tikhonov_anchor(&spec).unwrap();
    let h = 1e-3;
    let second = integrate_rk4(&spec, 50.0, h).unwrap();
    let first = integrate_tikhonov_flow(spec.q.as_ref(), spec.alpha, 1.0, spec.t0, &anchor, &spec.x0, 50.0, h).unwrap();
    let sup = second
        .samples
        .iter()
        .zip(&first.samples)
        .map(|(a, b)| (&a.x - &b.x).amax())
        .fold(0.0, f64::max);
    outcome(sup <= 1e-6, format!("sup distance {sup:.1e}"))
}

fn determinism() -> Outcome {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let base = |out: &std::path::Path, label: &str, problem: ProblemSpec, solver: SolverSpec| RunConfig {
        schema_version: 1,
        seed: 42,
        output: out.to_path_buf(),
        label: label.into(),
        thin: 1,
        problem,
        solver,
        reference: ReferenceSpec::Auto,
    };
    let cases = |out: &std::path::Path| {
        vec![
            base(
                out,
                "median",
                ProblemSpec::GeometricMedian { n: 8, d: 5, seed: None, z: None },
                SolverSpec::FastKm {
                    alpha: 4.0,
                    eta: Some(0.5),
                    theta: None,
                    sigma: 4.0,
                    step: 1.0,
                    iterations: 300,
                },
            ),
            base(
                out,
                "ot",
                ProblemSpec::BeckmannOt {
                    p: 6,
                    marginals: Marginals::Random { seed: 5 },
                    tau1: 1e-2,
                    tau2: None,
                },
                SolverSpec::Km { theta: 0.9, iterations: 300 },
            ),
            base(
                out,
                "skew",
                ProblemSpec::SkewToy { d: 10, tau: 0.1 },
                SolverSpec::FastKmCooled {
                    alpha0: 4.0,
                    eta: 0.5,
                    sigma: 4.0,
                    step: 1.0,
                    mode: CoolingMode::Log,
                    alpha_max: None,
                    maxit: None,
                    iterations: 300,
                },
            ),
        ]
    };
    let mut differing = Vec::new();
    for (a, b) in cases(dir_a.path()).iter().zip(cases(dir_b.path())) {
        let ra = run_experiment(a).unwrap();
        let rb = run_experiment(&b).unwrap();
        if std::fs::read(&ra.csv).unwrap() != std::fs::read(&rb.csv).unwrap() {
            differing.push(a.label.clone());
        }
    }
    // parallel and serial sweeps must agree as well
    let mut sweep_base = cases(dir_a.path()).remove(2);
    sweep_base.solver = SolverSpec::FastKm {
        alpha: 4.0,
        eta: Some(0.5),
        theta: None,
        sigma: 4.0,
        step: 1.0,
        iterations: 200,
    };
    let grid = SweepGrid {
        alphas: vec![2.0, 4.0],
        sigmas: vec![2.0],
        etas: vec![0.1, 0.5, 0.9],
    };
    let par = run_sweep(&sweep_base, &grid, true).unwrap();
    let bytes: Vec<_> = par.iter().map(|o| std::fs::read(&o.csv).unwrap()).collect();
    sweep_base.output = dir_b.path().to_path_buf();
    let ser = run_sweep(&sweep_base, &grid, false).unwrap();
    for (o, b) in ser.iter().zip(&bytes) {
        if &std::fs::read(&o.csv).unwrap() != b {
            differing.push(o.metadata.config.label.clone());
        }
    }
    outcome(
        differing.is_empty(),
        format!("{} runs compared, differing: {differing:?}", 3 + 2 * grid.len()),
    )
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "Halpern equivalence", halpern()),
        (2, "Tran-Dinh equivalence", trandinh()),
        (3, "prior-scheme coefficients", prior_scheme()),
    ];
    let (energy, bounds) = lyapunov_grid();
    results.push((4, "Lyapunov decrease", energy));
    results.push((5, "explicit bounds", bounds));
    results.push((6, "OHM bound", ohm()));
    results.push((7, "little-o proxy", little_o()));
    results.push((8, "DRS shadows", drs_shadows()));
    results.push((9, "Graph-DRS variance bound", variance_bound()));
    results.push((10, "Graph-DRS equals DRS at N=2", graph_drs_n2()));
    results.push((11, "Beckmann OT", beckmann()));
    results.push((12, "ODE closed forms and decay", ode()));
    results.push((13, "Tikhonov equivalence", tikhonov()));
    results.push((14, "determinism", determinism()));

    let mut failed = 0;
    for (i, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("[{tag}] {i:>2} {name}: {}", o.detail);
    }
    println!(
        "{} passed, {failed} failed in {:.1} s",
        results.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
