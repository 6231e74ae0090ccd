//! Randomized invariants: adjoint pairing, defect evaluation agreement,
//! order stability, radius inequalities, and certificate soundness.

use biiso_core::asymptotics::{
    class_flags, convex_hull, hausdorff, numerical_range, unitary_similarity_certificate,
};
use biiso_core::defect::{binomial_f64, binomial_identity_residual, classify_pair, defect_operator, PairConfig};
use biiso_core::generators::gen_finite_pair;
use biiso_core::{C64, FsVector, LinearOperator, WeightRule};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

fn cbox() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| C64::new(re, im))
}

fn dense_matrix(d: usize) -> impl Strategy<Value = DMatrix<C64>> {
    prop::collection::vec(cbox(), d * d).prop_map(move |v| DMatrix::from_vec(d, d, v))
}

fn square_triple() -> impl Strategy<Value = (DMatrix<C64>, DMatrix<C64>, DMatrix<C64>)> {
    (2usize..=5).prop_flat_map(|d| (dense_matrix(d), dense_matrix(d), dense_matrix(d)))
}

fn sparse_vector(max_index: usize) -> impl Strategy<Value = FsVector> {
    prop::collection::btree_map(0..max_index, cbox(), 0..6)
        .prop_map(|m| FsVector::new(m.into_iter().collect()))
}

fn explicit_rule() -> impl Strategy<Value = WeightRule> {
    prop::collection::vec(cbox(), 24).prop_map(WeightRule::Explicit)
}

fn structured_operator() -> impl Strategy<Value = LinearOperator> {
    let rule = prop_oneof![
        cbox().prop_map(WeightRule::Constant),
        (cbox(), (-0.9f64..0.9).prop_map(|r| C64::new(r, 0.1)))
            .prop_map(|(f, r)| WeightRule::Geometric { first: f, ratio: r }),
        explicit_rule(),
    ];
    (rule, 0usize..3).prop_map(|(r, kind)| match kind {
        0 => LinearOperator::forward_shift(r),
        1 => LinearOperator::backward_shift(r),
        _ => LinearOperator::diagonal(r),
    })
}

fn op_window_norm(op: &LinearOperator) -> f64 {
    op.op_norm(32)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// `<T x; y> = <x; T* y>` for structured operators on finite supports.
    #[test]
    fn adjoint_moves_across_the_pairing(
        op in structured_operator(),
        x in sparse_vector(16),
        y in sparse_vector(16),
    ) {
        let lhs = op.apply(&x).unwrap().inner(&y);
        let rhs = x.inner(&op.adjoint().apply(&y).unwrap());
        let scale = 1.0 + op_window_norm(&op) * x.norm() * y.norm();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * scale);
    }

    /// The adjoint is an involution, exactly.
    #[test]
    fn adjoint_is_an_involution(op in structured_operator()) {
        let back = op.adjoint().adjoint();
        for k in 0..12 {
            let e = FsVector::basis(k);
            prop_assert_eq!(op.apply(&e).unwrap(), back.apply(&e).unwrap());
        }
    }

    /// Dense adjoints are involutive at the representation level.
    #[test]
    fn dense_adjoint_is_involutive(m in dense_matrix(4)) {
        let op = LinearOperator::dense(m);
        prop_assert_eq!(op.adjoint().adjoint(), op);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The recursion evaluation agrees with the signed binomial sum.
    #[test]
    fn defect_matches_the_binomial_sum(
        (a, b, p) in square_triple(),
        m in 1u32..=4,
    ) {
        let d = a.nrows();
        let oa = LinearOperator::dense(a.clone());
        let ob = LinearOperator::dense(b.clone());
        let op = LinearOperator::dense(p.clone());
        let delta = defect_operator(&oa, &ob, &op, m, d).unwrap();

        let mut direct = DMatrix::<C64>::zeros(d, d);
        let astar = a.adjoint();
        for j in 0..=m {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let coeff = C64::new(sign * binomial_f64(m, j), 0.0);
            let k = (m - j) as u32;
            let mut term = p.clone();
            for _ in 0..k {
                term = &astar * term * &b;
            }
            direct += term.map(|v| v * coeff);
        }
        let got = delta.as_dense().unwrap();
        let scale = p.norm() * (1.0f64).max(a.norm() * b.norm()).powi(m as i32) + 1.0;
        prop_assert!((got - &direct).norm() <= 1e-10 * scale);
    }

    /// Annihilation is upward closed in the order.
    #[test]
    fn annihilation_orders_are_monotone(
        (a, b, p) in square_triple(),
        seed in 0u64..1000,
    ) {
        let d = a.nrows();
        let random_cfg = PairConfig::new(
            LinearOperator::dense(a),
            LinearOperator::dense(b),
            biiso_core::metric::positivity_certificate(LinearOperator::dense(p), 1e-10, d).unwrap(),
            5,
            d,
        ).unwrap();
        let first_order = {
            let mut cfg = gen_finite_pair(3, seed, false).unwrap();
            cfg.m_max = 5;
            cfg
        };
        for cfg in [random_cfg, first_order] {
            let report = classify_pair(&cfg, 1e-9).unwrap();
            let mut seen = false;
            for &(_, flag) in &report.m_p_biisometric_orders {
                prop_assert!(!seen || flag);
                seen = seen || flag;
            }
        }
    }

    /// Powers of a first-order pair stay first order.
    #[test]
    fn pair_powers_preserve_first_order(seed in 0u64..500, n in 1u32..=4, normal in any::<bool>()) {
        let cfg = gen_finite_pair(3, seed, normal).unwrap();
        let an = cfg.a.pow(n).unwrap();
        let bn = cfg.b.pow(n).unwrap();
        let powered = PairConfig::new(an, bn, cfg.metric.clone(), 1, cfg.window).unwrap();
        let norm = defect_operator(&powered.a, &powered.b, powered.metric.p(), 1, powered.window)
            .unwrap()
            .op_norm(powered.window);
        prop_assert!(norm <= 1e-9 * powered.defect_scale(1));
    }

    /// The power identity pins `A*^n P B^n = P` for first-order pairs.
    #[test]
    fn first_order_pairs_satisfy_the_power_identity(seed in 0u64..500, n in 1u32..=8) {
        let cfg = gen_finite_pair(4, seed, true).unwrap();
        let residual = binomial_identity_residual(&cfg, 1, n, 1e-9).unwrap();
        prop_assert!(residual <= 1e-9);
    }

    /// Metric pairings of a vector with itself are real and nonnegative.
    #[test]
    fn metric_self_pairing_is_real(seed in 0u64..500, x in sparse_vector(4)) {
        let cfg = gen_finite_pair(4, seed, false).unwrap();
        let q = cfg.metric.p_inner(&x, &x).unwrap();
        prop_assert!(q.re >= -1e-12 * (1.0 + x.norm_sq()));
        prop_assert!(q.im.abs() <= 1e-12 * (1.0 + q.re.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// `r(A) <= w(A) <= ||A||`, up to range discretization.
    #[test]
    fn radius_chain_holds((a, _, _) in square_triple()) {
        let op = LinearOperator::dense(a.clone());
        let report = class_flags(&op, 1e-10, 512).unwrap();
        let slack = 1e-3 * report.op_norm.max(1.0);
        prop_assert!(report.spectral_radius <= report.numerical_radius + slack);
        prop_assert!(report.numerical_radius <= report.op_norm + 1e-10 * report.op_norm.max(1.0));
    }

    /// Eigenvalues lie in the numerical range.
    #[test]
    fn eigenvalues_sit_inside_the_range((a, _, _) in square_triple()) {
        let op = LinearOperator::dense(a.clone());
        let range = numerical_range(&op, 512).unwrap();
        let eigs = biiso_core::asymptotics::spectral_points(&op).unwrap();
        let mut joined = range.hull.clone();
        joined.extend(eigs.iter().cloned());
        let grown = convex_hull(&joined);
        let scale = 1.0f64.max(range.radius);
        prop_assert!(hausdorff(&grown, &range.hull) <= 2e-3 * scale);
    }

    /// Diagonalizable unimodular spectra always certify, and the certificate
    /// reconstructs the operator.
    #[test]
    fn certificates_are_sound(
        seed_phases in prop::collection::vec(0.0f64..std::f64::consts::TAU, 3),
        shear in dense_matrix(3),
    ) {
        let min_gap = {
            let mut g = f64::INFINITY;
            for i in 0..3 {
                for j in (i + 1)..3 {
                    let diff = (C64::new(0.0, seed_phases[i]).exp()
                        - C64::new(0.0, seed_phases[j]).exp())
                    .norm();
                    g = g.min(diff);
                }
            }
            g
        };
        prop_assume!(min_gap > 1e-2);
        let v = nalgebra::DMatrix::identity(3, 3) + shear.map(|z| z * C64::new(0.3, 0.0));
        let vinv = match v.clone().lu().try_inverse() {
            Some(inv) => inv,
            None => return Err(TestCaseError::reject("singular shear")),
        };
        let cond = v.singular_values().max() / v.singular_values().min();
        prop_assume!(cond < 50.0);
        let u = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            3,
            seed_phases.iter().map(|&t| C64::new(0.0, t).exp()),
        ));
        let a = LinearOperator::dense(&v * u * &vinv);
        let cert = unitary_similarity_certificate(&a, 1e-10).unwrap();
        prop_assert!(cert.residual_conjugation <= 1e-7);
        prop_assert!(cert.residual_unitary <= 1e-10);
        prop_assert!(cert.residual_p1 <= 1e-6);
        let m = a.as_dense().unwrap();
        let s_inv = match cert.s.clone().lu().try_inverse() {
            Some(inv) => inv,
            None => return Err(TestCaseError::reject("singular certificate")),
        };
        let recon = s_inv * &cert.u * &cert.s;
        prop_assert!((m - recon).norm() <= 1e-6 * (1.0 + m.norm()));
    }
}
