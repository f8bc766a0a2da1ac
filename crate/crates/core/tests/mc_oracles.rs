//! Monte Carlo battery against quadrature oracles.

use islands_core::formulas::{
    inhomogeneous_bounds, r_one_point, r_two_point, rho_hom, third_moment, HomogeneousEvaluator,
    HomogeneousParams, InhomogeneousRanges, QmcConfig,
};
use islands_core::mc::*;
use islands_core::stats::summarize;
use islands_core::{IntensityMeasure, LengthLaw, Lengths, ModelSpec, QuadConfig};

fn unit_spec(kappa: f64, alpha: f64) -> ModelSpec {
    ModelSpec::homogeneous(kappa, alpha, LengthLaw::deterministic(1.0).unwrap()).unwrap()
}

fn unit_params() -> HomogeneousParams {
    HomogeneousParams::new(1.0, 1.0, LengthLaw::deterministic(1.0).unwrap()).unwrap()
}

fn q() -> QuadConfig {
    QuadConfig::default()
}

#[test]
fn ocean_mean_matches_rho() {
    let rho = rho_hom(&unit_params(), &q()).unwrap();
    let s = estimate_ocean(&unit_spec(1.0, 1.0), 50.0, 10_000, 101).unwrap();
    assert!(
        (s.mean / 50.0 - rho).abs() < 3.0 * s.mean_se / 50.0,
        "{s:?} vs {rho}"
    );
    for spec in [unit_spec(0.0, 1.0), unit_spec(1.0, 0.0)] {
        let s = estimate_ocean(&spec, 12.0, 100, 3).unwrap();
        assert_eq!((s.mean, s.variance), (12.0, 0.0));
    }
}

#[test]
fn one_point_matches_simulation() {
    let spec = unit_spec(1.0, 1.0);
    let rep = fkg_test(&spec, 3.0, 3.0, 100_000, 7).unwrap();
    let r = r_one_point(&spec, 3.0, &q()).unwrap();
    assert!((rep.details["first"] - r).abs() < 3.0 * rep.details["first_se"]);
    // Translation invariance.
    assert!(
        (r_one_point(&spec, 0.0, &q()).unwrap() - r_one_point(&spec, 17.0, &q()).unwrap()).abs()
            < q().abs_tol
    );
}

#[test]
fn saturated_anchors_leave_uncovered_points() {
    let p = HomogeneousParams::new(1.0, 1e3, LengthLaw::deterministic(1.0).unwrap()).unwrap();
    let rho = rho_hom(&p, &q()).unwrap();
    assert!((rho - (-1.0f64).exp()).abs() < 0.01, "{rho}");
    let s = estimate_ocean(&unit_spec(1.0, 1e3), 50.0, 4000, 13).unwrap();
    assert!((s.mean / 50.0 - rho).abs() < 3.0 * s.mean_se / 50.0);
}

#[test]
fn two_point_matches_simulation() {
    let spec = unit_spec(1.0, 1.0);
    for (z, seed) in [(0.1, 1), (0.5, 2), (0.9, 3), (2.0, 4)] {
        let rep = fkg_test(&spec, 0.0, z, 100_000, seed).unwrap();
        let tp = r_two_point(&spec, 0.0, z, &q()).unwrap();
        let err = (rep.details["joint"] - tp.total).abs();
        assert!(
            err < 3.0 * rep.details["joint_se"],
            "z={z}: {} vs {}",
            rep.details["joint"],
            tp.total
        );
    }
}

#[test]
fn inhomogeneous_two_point_matches_simulation() {
    let spec = ModelSpec::new(
        IntensityMeasure::piecewise(vec![0.0], vec![0.5, 2.0]).unwrap(),
        IntensityMeasure::piecewise(vec![0.5], vec![1.5, 0.7]).unwrap(),
        Lengths::Fixed(LengthLaw::uniform(0.5, 1.5).unwrap()),
    )
    .unwrap();
    let rep = fkg_test(&spec, -0.2, 0.6, 100_000, 17).unwrap();
    let tp = r_two_point(&spec, -0.2, 0.6, &q()).unwrap();
    assert!(
        (rep.details["joint"] - tp.total).abs() < 3.0 * rep.details["joint_se"],
        "{rep:?} {tp:?}"
    );
    assert!(
        (rep.details["first"] - r_one_point(&spec, -0.2, &q()).unwrap()).abs()
            < 3.0 * rep.details["first_se"]
    );
}

#[test]
fn fkg_examples() {
    let spec = unit_spec(1.0, 1.0);
    let rho = rho_hom(&unit_params(), &q()).unwrap();
    let same = fkg_test(&spec, 1.0, 1.0, 20_000, 5).unwrap();
    assert!((same.statistic - (rho - rho * rho)).abs() < 3.0 * same.details["difference_se"]);
    // Beyond twice the maximal length the events are independent.
    let far = fkg_test(&spec, 0.0, 2.5, 20_000, 5).unwrap();
    assert!(far.statistic.abs() < 3.0 * far.details["difference_se"]);
    let near = fkg_test(&spec, 0.0, 0.3, 100_000, 5).unwrap();
    assert!(near.pass && near.z_score.unwrap() > 3.0);
    let exact = r_two_point(&spec, 0.0, 0.3, &q()).unwrap().total - rho * rho;
    assert!((near.statistic - exact).abs() < 3.0 * near.details["difference_se"]);
}

#[test]
fn clt_examples() {
    let spec = unit_spec(1.0, 1.0);
    let rep = clt_test(&spec, 500.0, 2000, 2024, &q()).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!(rep.p_value.unwrap() > 0.01);
    assert!(rep.details["theta_mean"].abs() < 3.0 / 2000f64.sqrt());
    let none = clt_test(&unit_spec(0.0, 1.0), 500.0, 2000, 2024, &q()).unwrap();
    assert_eq!(none.verdict, Verdict::Degenerate);
}

#[test]
fn wiener_covariance_examples() {
    let spec = unit_spec(1.0, 1.0);
    let rep = wiener_covariance_test(&spec, 500.0, &[0.5, 1.0], 2000, 2024, &q()).unwrap();
    assert!(rep.pass, "{rep:?}");
    let d = &rep.details;
    assert!((d["cov_1_1"] - 1.0).abs() < 3.0 * d["se_1_1"]);
    assert!((d["cov_0.5_1"] - 0.5).abs() < 3.0 * d["se_0.5_1"]);
}

#[test]
fn dispersion_examples() {
    let spec = unit_spec(1.0, 1.0);
    let clones = count_dispersion_test(&spec, 0.0, CountKind::Clones, 100_000, 31, &q()).unwrap();
    assert!(clones.pass, "{clones:?}");
    assert!(clones.z_score.unwrap().abs() < 3.0);
    let anchored =
        count_dispersion_test(&spec, 0.0, CountKind::Anchored, 100_000, 31, &q()).unwrap();
    assert!(
        anchored.pass && anchored.z_score.unwrap() > 3.0,
        "{anchored:?}"
    );
    assert!((anchored.details["mean"] - (1.0 - (-1.0f64).exp())).abs() < 0.01);
    let saturated = count_dispersion_test(
        &unit_spec(1.0, 1e3),
        0.0,
        CountKind::Anchored,
        100_000,
        31,
        &q(),
    )
    .unwrap();
    assert!((saturated.statistic - 1.0).abs() < 0.05);
}

#[test]
fn left_end_examples() {
    let hom = ModelSpec::homogeneous(1.0, 1.0, LengthLaw::exponential(1.0).unwrap()).unwrap();
    assert!(
        left_end_equivalence_test(&hom, 0.0, 4.0, (8, 4), 2000, 41, &q())
            .unwrap()
            .pass
    );
    let blocks = ModelSpec::new(
        IntensityMeasure::piecewise(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0, 0.0]).unwrap(),
        IntensityMeasure::constant(1.0).unwrap(),
        Lengths::Fixed(LengthLaw::deterministic(1.0).unwrap()),
    )
    .unwrap();
    let rep = left_end_equivalence_test(&blocks, -1.0, 2.0, (12, 1), 4000, 41, &q()).unwrap();
    assert!(rep.pass, "{rep:?}");
    let empty = ModelSpec::homogeneous(0.0, 1.0, LengthLaw::deterministic(1.0).unwrap()).unwrap();
    let rep = left_end_equivalence_test(&empty, 0.0, 4.0, (4, 2), 100, 41, &q()).unwrap();
    assert!(
        rep.pass
            && rep.details["count_left_route"] == 0.0
            && rep.details["count_right_route"] == 0.0
    );
}

#[test]
fn variance_sandwich_holds_empirically() {
    let ev = HomogeneousEvaluator::new(&unit_params(), &q()).unwrap();
    let vc = ev.variance_constants().unwrap();
    let g = 100.0;
    let s = estimate_ocean(&unit_spec(1.0, 1.0), g, 20_000, 55).unwrap();
    assert!(
        s.variance >= vc.nu * g - vc.lambda - 3.0 * s.variance_se,
        "{s:?} {vc:?}"
    );
    assert!(
        s.variance <= vc.nu * g + 3.0 * s.variance_se,
        "{s:?} {vc:?}"
    );
}

#[test]
fn third_central_moment_grows_linearly() {
    let spec = unit_spec(1.0, 1.0);
    let mut ratios = Vec::new();
    for g in [50.0, 100.0, 200.0] {
        let s = estimate_ocean(&spec, g, 20_000, 77).unwrap();
        ratios.push((
            (s.third_central_moment / g).abs(),
            s.third_central_moment_se / g,
        ));
    }
    // Bounded ratio: each |m3|/G stays within 3 SE of a common O(1) bound.
    for (r, se) in ratios {
        assert!(r < 0.1 + 3.0 * se, "{r} ± {se}");
    }
}

#[test]
fn third_moment_matches_simulation() {
    let xs = ocean_samples(&unit_spec(1.0, 1.0), 5.0, 200_000, 88).unwrap();
    let cubes: Vec<f64> = xs.iter().map(|x| x * x * x).collect();
    let s = summarize(&cubes).unwrap();
    let m = third_moment(&unit_params(), 5.0, &QmcConfig::default()).unwrap();
    assert!(m.converged);
    let se = (s.mean_se.powi(2) + m.stderr.powi(2)).sqrt();
    assert!(
        (m.value - s.mean).abs() < 3.0 * se,
        "{m:?} vs {} ± {}",
        s.mean,
        s.mean_se
    );
}

#[test]
fn inhomogeneous_spec_stays_inside_envelopes() {
    let law = LengthLaw::deterministic(1.0).unwrap();
    let spec = ModelSpec::new(
        IntensityMeasure::piecewise(vec![10.0, 20.0, 30.0], vec![0.5, 2.0, 1.0, 0.7]).unwrap(),
        IntensityMeasure::piecewise(vec![5.0, 25.0], vec![2.0, 0.5, 1.2]).unwrap(),
        Lengths::Fixed(law.clone()),
    )
    .unwrap();
    let b = inhomogeneous_bounds(
        &InhomogeneousRanges {
            kappa_minus: 0.5,
            kappa_plus: 2.0,
            alpha_minus: 0.5,
            alpha_plus: 2.0,
            lengths_minus: law.clone(),
            lengths_plus: law,
        },
        &q(),
    )
    .unwrap();
    let g = 40.0;
    let s = estimate_ocean(&spec, g, 10_000, 99).unwrap();
    assert!(
        s.mean / g >= b.rho_minus - 3.0 * s.mean_se / g
            && s.mean / g <= b.rho_plus + 3.0 * s.mean_se / g
    );
    assert!(s.variance / g >= b.nu_minus - 3.0 * s.variance_se / g);
    assert!(s.variance / g <= b.nu_plus + 3.0 * s.variance_se / g);
}

#[test]
fn determinism_across_worker_counts() {
    let spec = ModelSpec::homogeneous(1.0, 0.5, LengthLaw::uniform(0.2, 2.0).unwrap()).unwrap();
    let a = with_threads(Some(1), || estimate_ocean(&spec, 30.0, 500, 4))
        .unwrap()
        .unwrap();
    let b = with_threads(Some(4), || estimate_ocean(&spec, 30.0, 500, 4))
        .unwrap()
        .unwrap();
    assert_eq!(a, b);
    let c = with_threads(Some(3), || fkg_test(&spec, 0.0, 0.7, 2000, 4))
        .unwrap()
        .unwrap();
    let d = with_threads(Some(1), || fkg_test(&spec, 0.0, 0.7, 2000, 4))
        .unwrap()
        .unwrap();
    assert_eq!(c, d);
}
