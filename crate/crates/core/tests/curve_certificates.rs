//! Certificates on integrated curves: directedness, embedding gap, SL2 image,
//! minimal-surface mesh and growth.

use nullforge::curves::{
    directedness_report, embedding_gap, growth_profile, mesh_convergence, perturb_to_embedding, to_sl2, MeshSettings,
    PerturbSettings,
};
use nullforge::generators::{catenoid, enneper, even_selfcross};
use nullforge::{
    build_family, correct_periods, integrate_curve, ConeVariety, CVector, DirectedCurve, FamilySettings, PlanarDomain,
    SolverSettings, C64,
};
use proptest::prelude::*;

fn corrected_catenoid(base: CVector) -> DirectedCurve {
    let d = PlanarDomain::annulus(0.5, 2.0).unwrap();
    let cone = ConeVariety::null3();
    let fam = build_family(&catenoid(&d).unwrap(), &cone, &d, &FamilySettings::default()).unwrap();
    let c = correct_periods(&fam, &SolverSettings::default()).unwrap();
    integrate_curve(&c.corrected, &d, &cone, (C64::from(1.0), base)).unwrap()
}

fn third_axis(height: f64) -> CVector {
    CVector::from_vec(vec![C64::from(0.0), C64::from(0.0), C64::from(height)])
}

#[test]
fn corrected_catenoid_is_a_directed_curve() {
    let c = corrected_catenoid(CVector::zeros(3));
    let report = directedness_report(&c, 256);
    assert!(report.passed);
    assert!(report.max_scaled_residual < 1e-9);
    assert!(c.diagnostics().period_residual < 1e-9);
    // F is single valued: integrating f around the middle circle returns to the start
    let n = 512;
    let mut acc = CVector::zeros(3);
    for k in 0..n {
        let e = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
        acc += c.derivative().eval(e) * (C64::new(0.0, 1.0) * e * (2.0 * std::f64::consts::PI / n as f64));
    }
    assert!(acc.norm() < 1e-9);
}

#[test]
fn corrected_catenoid_maps_to_a_null_curve_in_sl2() {
    let c = corrected_catenoid(third_axis(5.0));
    let s = to_sl2(&c, 32).unwrap();
    assert!(s.min_abs_f3 > 0.1, "{}", s.min_abs_f3);
    assert!(s.det_residual < 1e-10);
    assert!(s.null_residual < 1e-6, "{}", s.null_residual);
}

#[test]
fn corrected_catenoid_mesh_converges_at_second_order() {
    let c = corrected_catenoid(CVector::zeros(3));
    let study = mesh_convergence(&c, &MeshSettings { n_theta: 64, ..Default::default() }, 3).unwrap();
    for level in &study[1..] {
        assert!(level.conformality_order.unwrap() >= 1.8, "{study:?}");
        assert!(level.harmonicity_order.unwrap() >= 1.8, "{study:?}");
    }
}

#[test]
fn perturbation_separates_the_even_curve() {
    let d = PlanarDomain::annulus(0.75, 1.5).unwrap();
    let cone = ConeVariety::null3();
    let f = even_selfcross(&d);
    let c = integrate_curve(&f, &d, &cone, (C64::from(1.0), CVector::zeros(3))).unwrap();
    let fam = build_family(&f, &cone, &d, &FamilySettings::default()).unwrap();
    let settings = PerturbSettings { seed: 3, attempts: 4, grid: 32, ..PerturbSettings::default() };
    let out = perturb_to_embedding(&c, &fam, &settings).unwrap();
    assert!(out.original_gap < 1e-8);
    assert!(out.improved());
    assert!(out.c1_distance <= settings.c1_bound);
    assert_eq!(out.attempts.len(), 5);
    // the certificate is recomputed independently on the returned curve
    let again = embedding_gap(&out.curve, 32, None).unwrap();
    assert_eq!(again.gap, out.gap.gap);
}

fn enneper_curve() -> DirectedCurve {
    let d = PlanarDomain::annulus(0.5, 1.5).unwrap();
    integrate_curve(&enneper(&d), &d, &ConeVariety::null3(), (C64::from(1.0), CVector::zeros(3))).unwrap()
}

fn shift() -> impl Strategy<Value = CVector> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3)
        .prop_map(|v| CVector::from_iterator(3, v.into_iter().map(|(a, b)| C64::new(a, b))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gap_ignores_translations(w in shift(), grid in 8usize..20) {
        let c = enneper_curve();
        let a = embedding_gap(&c, grid, None).unwrap();
        let b = embedding_gap(&c.translated(&w), grid, None).unwrap();
        prop_assert!((a.gap - b.gap).abs() <= 1e-12 * (1.0 + w.norm()));
        // symmetric in the pair: the witness distance is realised in both orders
        let d1 = (c.eval(a.witness.1) - c.eval(a.witness.0)).norm();
        let d2 = (c.eval(a.witness.0) - c.eval(a.witness.1)).norm();
        prop_assert_eq!(d1, d2);
        prop_assert!((d1 - a.gap).abs() < 1e-14 * (1.0 + a.gap));
    }

    #[test]
    fn growth_moves_by_at_most_the_shift(w in shift()) {
        let c = enneper_curve();
        let shells = [0.8, 1.0, 1.2, 1.5];
        let a = growth_profile(&c, &shells).unwrap();
        let b = growth_profile(&c.translated(&w), &shells).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.value - y.value).abs() <= w.norm() + 1e-12);
        }
    }
}
