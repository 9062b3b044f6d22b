//! Property checks for the quadric cone, its tangential fields and their flows.

use nullforge::cone::parametrize_null_quadric;
use nullforge::linalg::{bilinear, numerical_rank};
use nullforge::{CMatrix, ConeVariety, CVector, FieldPair, C64};
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = C64> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| C64::new(a, b))
}

fn vector(n: usize) -> impl Strategy<Value = CVector> {
    prop::collection::vec(complex(), n).prop_map(CVector::from_vec)
}

/// Random symmetric form with unit diagonal shift, nondegenerate with overwhelming probability.
fn form(n: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec(complex(), n * n).prop_map(move |entries| {
        let a = CMatrix::from_vec(n, n, entries);
        (&a + a.transpose()) * C64::from(0.25) + CMatrix::identity(n, n) * C64::from(2.0)
    })
}

fn variety_and_pair() -> impl Strategy<Value = (ConeVariety, FieldPair)> {
    (3usize..6).prop_flat_map(|n| {
        (form(n), 0..n, 0..n).prop_filter_map("distinct indices", move |(q, a, b)| {
            let (j, k) = (a.min(b), a.max(b));
            let v = ConeVariety::new(q).ok()?;
            Some((v, FieldPair::new(j, k, n).ok()?))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn real_time_null_quadric_flows_preserve_the_form(pair in 0usize..3, z in vector(3), t in -10.0f64..10.0) {
        let v = ConeVariety::null3();
        let pair = v.pairs()[pair];
        let w = v.tangent_flow(pair, C64::from(t), &z);
        let drift = (v.membership_residual(&w) - v.membership_residual(&z)).norm();
        prop_assert!(drift < 1e-10 * (1.0 + z.norm_squared()));
    }

    #[test]
    fn complex_time_flows_preserve_the_form(
        (v, pair) in variety_and_pair(),
        seed in vector(5),
        t in complex().prop_map(|t| t * 5.0),
    ) {
        // growth of the flow is part of the rounding budget
        let z = seed.rows(0, v.dim()).into_owned();
        let w = v.tangent_flow(pair, t, &z);
        let drift = (v.membership_residual(&w) - v.membership_residual(&z)).norm();
        prop_assert!(drift < 1e-10 * (1.0 + z.norm_squared().max(w.norm_squared())) * v.form().norm());
    }

    #[test]
    fn flows_form_a_one_parameter_group(
        (v, pair) in variety_and_pair(),
        seed in vector(5),
        s in complex().prop_map(|s| s * 0.25),
        t in complex().prop_map(|t| t * 0.25),
    ) {
        let z = seed.rows(0, v.dim()).into_owned();
        let middle = v.tangent_flow(pair, t, &z);
        let composed = v.tangent_flow(pair, s, &middle);
        let direct = v.tangent_flow(pair, s + t, &z);
        let scale = 1.0 + z.norm().max(middle.norm()).max(direct.norm());
        prop_assert!((composed - &direct).norm() <= 1e-12 * scale);
    }

    #[test]
    fn flow_agrees_with_the_matrix_exponential((v, pair) in variety_and_pair(), seed in vector(5), t in complex()) {
        // oracle: Taylor series of exp(t M) applied to z
        let z = seed.rows(0, v.dim()).into_owned();
        let m = v.field_matrix(pair) * t;
        let mut term = z.clone();
        let mut sum = z.clone();
        for k in 1..80 {
            term = &m * term / C64::from(k as f64);
            sum += &term;
        }
        let flow = v.tangent_flow(pair, t, &z);
        prop_assert!((flow - &sum).norm() <= 1e-11 * (1.0 + sum.norm()));
    }

    #[test]
    fn fields_are_tangent_to_level_sets((v, pair) in variety_and_pair(), seed in vector(5)) {
        // d/dt P(exp(tM) z) at 0 equals 2 (Qz)^T M z
        let z = seed.rows(0, v.dim()).into_owned();
        let qz = v.form() * &z;
        let rate = bilinear(&qz, &(v.field_matrix(pair) * &z)) * 2.0;
        prop_assert!(rate.norm() < 1e-12 * (1.0 + z.norm_squared()) * v.form().norm().powi(2));
        prop_assert!((v.field(pair, &z) - v.field_matrix(pair) * &z).norm() < 1e-12 * (1.0 + z.norm()) * v.form().norm());
    }

    #[test]
    fn fields_span_null_quadric_tangent_spaces(g in complex(), w in complex().prop_filter("w != 0", |w| w.norm() > 1e-3)) {
        let v = ConeVariety::null3();
        let z = parametrize_null_quadric(g, w).unwrap();
        let columns: Vec<CVector> = v.pairs().into_iter().map(|p| v.field(p, &z)).collect();
        prop_assert_eq!(numerical_rank(&CMatrix::from_columns(&columns), 1e-8), 2);
        let qz = v.form() * &z;
        for c in &columns {
            prop_assert!(bilinear(&qz, c).norm() < 1e-12 * (1.0 + z.norm_squared()));
        }
    }

    #[test]
    fn parametrization_lands_on_the_quadric(g in complex(), w in complex().prop_filter("w != 0", |w| w.norm() > 0.0)) {
        let z = parametrize_null_quadric(g, w).unwrap();
        prop_assert!(ConeVariety::null3().membership_residual(&z).norm() < 1e-14 * (1.0 + z.norm_squared()));
    }

    #[test]
    fn null_pairs_average_to_target(q in form(4), target in vector(4)) {
        let v = ConeVariety::new(q).unwrap();
        prop_assume!(target.norm() > 1e-3);
        let (a, b) = v.null_pair_decompose(&target).unwrap();
        let scale = (1.0 + target.norm_squared()) * v.form().norm();
        prop_assert!(v.membership_residual(&a).norm() < 1e-12 * scale);
        prop_assert!(v.membership_residual(&b).norm() < 1e-12 * scale);
        prop_assert!(((&a + &b) * C64::from(0.5) - &target).norm() < 1e-12 * (1.0 + target.norm()));
        prop_assert!(a.norm() > 0.0 && b.norm() > 0.0);
    }
}

#[test]
fn tangent_spaces_of_the_quadric_are_cut_out_by_the_gradient() {
    let v = ConeVariety::null3();
    for (g, w) in [(0.3, 1.0), (-2.0, 0.5), (0.0, 3.0)] {
        let z = parametrize_null_quadric(C64::from(g), C64::new(w, 0.2)).unwrap();
        let basis = v.tangent_basis(&z).unwrap();
        assert_eq!(basis.len(), 2);
        let qz = v.form() * &z;
        for b in &basis {
            assert!(bilinear(&qz, b).norm() < 1e-12);
        }
        // z itself is tangent (cone property) and lies in the span
        let m = CMatrix::from_columns(&[basis[0].clone(), basis[1].clone(), z.clone()]);
        assert_eq!(numerical_rank(&m, 1e-8), 2);
    }
}
