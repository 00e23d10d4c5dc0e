use approx::assert_abs_diff_eq;
use fastkm::diagnostics::SnapshotPolicy;
use fastkm::fastkm::{run_fast_km, RunOptions, ScheduleParams};
use fastkm::operators::{
    averaged_map, group_soft_threshold, project_ball, prox_half_sq_dist, skew_resolvent_op,
    soft_threshold, DenseMap, FixedPointMap, GridDivergence, LinearMap, Prox,
};
use fastkm::precond::{variance, Conjugate};
use fastkm::{BlockVector, Vector};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn vec_strategy(len: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-10.0f64..10.0, len).prop_map(Vector::from_vec)
}

fn even_dim() -> impl Strategy<Value = usize> {
    (1usize..6).prop_map(|h| 2 * h)
}

/// `||Ta - Tb||^2 <= <Ta - Tb, a - b>`.
fn firmly_nonexpansive(ta: &Vector, tb: &Vector, a: &Vector, b: &Vector) -> bool {
    let d = ta - tb;
    d.norm_squared() <= d.dot(&(a - b)) + 1e-10 * (1.0 + (a - b).norm_squared())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn skew_resolvent_matches_dense_inverse(
        (d, x) in even_dim().prop_flat_map(|d| (Just(d), vec_strategy(d))),
        tau in 0.01f64..5.0,
    ) {
        let t = skew_resolvent_op(d, tau).unwrap();
        let h = d / 2;
        let mut m = DMatrix::<f64>::identity(d, d);
        for i in 0..h {
            m[(i, i + h)] = tau;
            m[(i + h, i)] = -tau;
        }
        let inv = m.try_inverse().unwrap();
        assert_abs_diff_eq!(t.apply(&x), &inv * &x, epsilon = 1e-12);
        assert_abs_diff_eq!(t.apply(&t.forward(&x)), x, epsilon = 1e-12);
    }

    #[test]
    fn skew_resolvent_is_firmly_nonexpansive(
        (a, b) in (vec_strategy(8), vec_strategy(8)),
        tau in 0.01f64..5.0,
    ) {
        let t = skew_resolvent_op(8, tau).unwrap();
        prop_assert!(firmly_nonexpansive(&t.apply(&a), &t.apply(&b), &a, &b));
    }

    #[test]
    fn averaged_map_is_nonexpansive(
        (a, b) in (vec_strategy(6), vec_strategy(6)),
        tau in 0.01f64..5.0,
        s in 0.01f64..=2.0,
    ) {
        let t = averaged_map(skew_resolvent_op(6, tau).unwrap(), s).unwrap();
        prop_assert!((t.apply(&a) - t.apply(&b)).norm() <= (a - b).norm() * (1.0 + 1e-12));
    }

    #[test]
    fn soft_threshold_optimality(v in vec_strategy(7), tau in 0.0f64..5.0) {
        // v - p lies in tau * subdifferential of |.| at p
        let p = soft_threshold(&v, tau).unwrap();
        for (&vi, &pi) in v.iter().zip(p.iter()) {
            if pi != 0.0 {
                prop_assert!((vi - pi - tau * pi.signum()).abs() <= 1e-12);
            } else {
                prop_assert!(vi.abs() <= tau + 1e-12);
            }
        }
    }

    #[test]
    fn group_threshold_with_unit_rows_is_soft_threshold(v in vec_strategy(9), tau in 0.0f64..5.0) {
        assert_abs_diff_eq!(group_soft_threshold(&v, 1, tau).unwrap(), soft_threshold(&v, tau).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn group_threshold_row_optimality(v in vec_strategy(8), tau in 0.0f64..5.0) {
        let p = group_soft_threshold(&v, 2, tau).unwrap();
        for (vr, pr) in v.as_slice().chunks(2).zip(p.as_slice().chunks(2)) {
            let (vr, pr) = (Vector::from_column_slice(vr), Vector::from_column_slice(pr));
            let n = pr.norm();
            if n > 0.0 {
                prop_assert!((&vr - &pr - &pr * (tau / n)).norm() <= 1e-10);
            } else {
                prop_assert!(vr.norm() <= tau + 1e-12);
            }
        }
    }

    #[test]
    fn proxes_are_firmly_nonexpansive(
        (a, b) in (vec_strategy(4), vec_strategy(4)),
        tau in 0.01f64..3.0,
    ) {
        let c = Vector::from_element(4, 1.0);
        let ball = |x: &Vector| prox_half_sq_dist(x, |y: &Vector| project_ball(y, &c, 1.5).unwrap(), tau).unwrap();
        let soft = |x: &Vector| soft_threshold(x, tau).unwrap();
        let group = |x: &Vector| group_soft_threshold(x, 2, tau).unwrap();
        prop_assert!(firmly_nonexpansive(&ball(&a), &ball(&b), &a, &b));
        prop_assert!(firmly_nonexpansive(&soft(&a), &soft(&b), &a, &b));
        prop_assert!(firmly_nonexpansive(&group(&a), &group(&b), &a, &b));
    }

    #[test]
    fn conjugate_of_l1_prox_is_box_projection(y in vec_strategy(6), tau in 0.01f64..5.0) {
        // (||.||_1)* is the indicator of the unit sup-norm ball
        let l1 = |v: &Vector, t: f64| soft_threshold(v, t).unwrap();
        let p = Conjugate(l1).prox(&y, tau);
        assert_abs_diff_eq!(p, y.map(|x| x.clamp(-1.0, 1.0)), epsilon = 1e-12);
    }

    #[test]
    fn divergence_adjoint_and_dense_oracle(
        p in 2usize..7,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let div = GridDivergence::new(p).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let u = Vector::from_fn(p * p, |_, _| rng.random_range(-1.0..1.0));
        let s = Vector::from_fn(2 * p * p, |_, _| rng.random_range(-1.0..1.0));
        prop_assert!((div.gradient(&u).dot(&s) + u.dot(&div.apply(&s))).abs() <= 1e-12);
        let dense = DenseMap::materialize(&div);
        assert_abs_diff_eq!(dense.matrix().transpose() * &u, div.apply_adjoint(&u), epsilon = 1e-14);
        prop_assert!(div.apply(&s).sum().abs() <= 1e-12);
    }

    #[test]
    fn variance_is_half_mean_pairwise_distance(
        pts in prop::collection::vec(vec_strategy(3), 2..6),
        shift in vec_strategy(3),
    ) {
        let n = pts.len() as f64;
        let mut pair = 0.0;
        for a in &pts {
            for b in &pts {
                pair += (a - b).norm_squared();
            }
        }
        let v = variance(&BlockVector::new(pts.clone())).unwrap();
        prop_assert!((v - pair / (2.0 * n * n)).abs() <= 1e-9 * (1.0 + v));
        let moved: Vec<Vector> = pts.iter().map(|x| x + &shift).collect();
        prop_assert!((variance(&BlockVector::new(moved)).unwrap() - v).abs() <= 1e-9 * (1.0 + v));
    }

    #[test]
    fn energy_never_increases(
        alpha in 3.0f64..20.0,
        eta in 0.05f64..0.95,
        tau in 0.05f64..1.0,
        x in vec_strategy(6),
    ) {
        let t = skew_resolvent_op(6, tau).unwrap();
        let z = Vector::zeros(6);
        let p = ScheduleParams::from_eta(alpha, eta, alpha).unwrap();
        let opts = RunOptions::default().with_snapshots(SnapshotPolicy::None).with_reference(&z);
        let tr = run_fast_km(&t, &x, &x, &p, 500, &opts).unwrap();
        let e = tr.energies();
        for w in e.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0));
        }
    }
}
