//! Invariants of the sampler and of the exact evaluators.

use islands_core::formulas::{
    j_hom, r_one_point, r_two_point, rho_hom, tau_bound, HomogeneousEvaluator, HomogeneousParams,
};
use islands_core::model::left_end_intensity;
use islands_core::rng::RngStream;
use islands_core::sampler::*;
use islands_core::stats::{ks_standard_normal, pairwise_sum};
use islands_core::{IntensityMeasure, LengthLaw, Lengths, ModelSpec, QuadConfig};
use proptest::prelude::*;

fn law_strategy() -> impl Strategy<Value = LengthLaw> {
    prop_oneof![
        (0.1f64..3.0).prop_map(|v| LengthLaw::deterministic(v).unwrap()),
        (0.1f64..2.0).prop_map(|m| LengthLaw::exponential(m).unwrap()),
        (0.0f64..1.0, 0.1f64..2.0).prop_map(|(a, w)| LengthLaw::uniform(a, a + w).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn realizations_are_well_formed(
        kappa in 0.0f64..4.0,
        alpha in 0.0f64..4.0,
        law in law_strategy(),
        window in 0.5f64..30.0,
        seed in any::<u64>(),
    ) {
        let spec = ModelSpec::homogeneous(kappa, alpha, law).unwrap();
        let pad = pad_width(&spec, DEFAULT_PAD_EPS).unwrap();
        let real = sample_realization(&spec, window, pad, &RngStream::new(seed, 0)).unwrap();
        let anchored = anchored_clones(&real.clones, &real.anchors);
        prop_assert!(anchored.entries.len() <= real.clones.entries.len());
        let ivs = &real.islands.intervals;
        for w in ivs.windows(2) {
            prop_assert!(w[0].1 < w[1].0);
        }
        for &(s, e) in ivs {
            prop_assert!(s < e);
            prop_assert!(real.anchors.positions.iter().any(|&a| s <= a && a <= e));
        }
        let o = real.ocean(0.0, window);
        prop_assert!((0.0..=window).contains(&o));
        let ends: Vec<f64> = (1..=10).map(|k| window * k as f64 / 10.0).collect();
        let cum = cumulative_ocean(&real.islands, 0.0, &ends);
        for w in cum.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for c in &anchored.entries {
            prop_assert!(!in_ocean(&real.islands, c.right_end) || c.length == 0.0);
        }
    }

    #[test]
    fn j_is_a_nondecreasing_probability(kappa in 0.0f64..5.0, law in law_strategy(), u in 0.0f64..5.0, du in 0.0f64..2.0) {
        let p = HomogeneousParams::new(kappa, 1.0, law).unwrap();
        let a = j_hom(&p, u).unwrap();
        let b = j_hom(&p, u + du).unwrap();
        prop_assert!(0.0 < a && a <= b && b <= 1.0);
        prop_assert!((j_hom(&p, 1e3).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn left_end_intensity_is_translation_invariant(kappa in 0.0f64..4.0, law in law_strategy(), y in -10.0f64..10.0) {
        let spec = ModelSpec::homogeneous(kappa, 1.0, law).unwrap();
        let v = left_end_intensity(&spec, y, &QuadConfig::default()).unwrap();
        prop_assert!((v - kappa).abs() < 1e-9 * (1.0 + kappa));
    }

    #[test]
    fn pairwise_sum_is_close_to_naive(xs in prop::collection::vec(-1e3f64..1e3, 0..300)) {
        let naive: f64 = xs.iter().sum();
        prop_assert!((pairwise_sum(&xs) - naive).abs() < 1e-9 * (1.0 + xs.iter().map(|x| x.abs()).sum::<f64>()));
    }

    #[test]
    fn ks_p_value_is_a_probability(xs in prop::collection::vec(-5.0f64..5.0, 1..200)) {
        let (d, p) = ks_standard_normal(&xs).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((0.0..=1.0).contains(&p));
    }
}

proptest! {
    // Each case builds tabulated kernels; keep the count small.
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn variance_is_sandwiched_convex_and_near_linear(
        kappa in 0.2f64..2.0,
        alpha in 0.5f64..2.0,
        law in law_strategy(),
    ) {
        let q = QuadConfig::default();
        let ev = HomogeneousEvaluator::new(&HomogeneousParams::new(kappa, alpha, law).unwrap(), &q).unwrap();
        let vc = ev.variance_constants().unwrap();
        prop_assert!(vc.nu > 0.0 && vc.lambda > 0.0);
        for v in [vc.nu0, vc.nu1, vc.nu3, vc.nu_shared, vc.lambda0, vc.lambda1, vc.lambda3, vc.lambda_shared] {
            prop_assert!(v.is_finite() && v >= -1e-12);
        }
        let grid: Vec<f64> = (0..=12).map(|k| 0.5 * k as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&g| ev.variance_exact(g).unwrap().value).collect();
        for (&g, &v) in grid.iter().zip(&vals) {
            prop_assert!(v >= vc.nu * g - vc.lambda - 1e-7, "G={g}");
            prop_assert!(v <= vc.nu * g + 1e-7, "G={g}");
        }
        for w in vals.windows(3) {
            prop_assert!(w[0] <= w[1] + 1e-9);
            prop_assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-7);
        }
    }

    #[test]
    fn rho_decreases_in_both_rates(kappa in 0.1f64..2.0, alpha in 0.2f64..2.0, law in law_strategy()) {
        let q = QuadConfig::default();
        let rho = |k: f64, a: f64| rho_hom(&HomogeneousParams::new(k, a, law.clone()).unwrap(), &q).unwrap();
        let base = rho(kappa, alpha);
        prop_assert!(base > 0.0 && base < 1.0);
        prop_assert!(rho(kappa * 1.5, alpha) <= base + 1e-10);
        prop_assert!(rho(kappa, alpha * 1.5) <= base + 1e-10);
    }
}

#[test]
fn envelope_of_the_linear_regime() {
    // |nu G - lambda - σ²(O_G)| <= 2 alpha^{-2} (3 + alpha G) e^{-alpha G} holds
    // when clone lengths decay at least as fast as the anchor gaps.
    let q = QuadConfig::default();
    for (k, a, law) in [
        (1.0, 1.0, LengthLaw::deterministic(1.0).unwrap()),
        (1.5, 0.7, LengthLaw::uniform(0.2, 1.4).unwrap()),
        (1.0, 1.0, LengthLaw::exponential(0.5).unwrap()),
    ] {
        let ev =
            HomogeneousEvaluator::new(&HomogeneousParams::new(k, a, law).unwrap(), &q).unwrap();
        let vc = ev.variance_constants().unwrap();
        for g in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let gap = (vc.nu * g - vc.lambda - ev.variance_exact(g).unwrap().value).abs();
            assert!(gap <= tau_bound(a, g).unwrap() + 1e-8, "G={g}: {gap}");
        }
    }
}

#[test]
fn long_clones_escape_the_linear_envelope() {
    // Clones longer on average than anchor gaps correlate distant points
    // through the shared-clone term, which decays like the length tail.
    let q = QuadConfig::default();
    let ev = HomogeneousEvaluator::new(
        &HomogeneousParams::new(1.0, 1.0, LengthLaw::exponential(3.0).unwrap()).unwrap(),
        &q,
    )
    .unwrap();
    let vc = ev.variance_constants().unwrap();
    let g = 20.0;
    let gap = (vc.nu * g - vc.lambda - ev.variance_exact(g).unwrap().value).abs();
    assert!(gap > tau_bound(1.0, g).unwrap());
}

#[test]
fn formula_level_positive_association() {
    let q = QuadConfig::default();
    let hom = ModelSpec::homogeneous(1.0, 1.0, LengthLaw::deterministic(1.0).unwrap()).unwrap();
    let inhom = ModelSpec::new(
        IntensityMeasure::piecewise(vec![1.0], vec![0.5, 2.0]).unwrap(),
        IntensityMeasure::piecewise(vec![0.0], vec![1.0, 0.6]).unwrap(),
        Lengths::Fixed(LengthLaw::deterministic(1.0).unwrap()),
    )
    .unwrap();
    for spec in [hom, inhom] {
        let pts: Vec<f64> = (0..6).map(|k| -0.5 + 0.6 * k as f64).collect();
        let singles: Vec<f64> = pts
            .iter()
            .map(|&z| r_one_point(&spec, z, &q).unwrap())
            .collect();
        for i in 0..pts.len() {
            assert!((0.0..=1.0).contains(&singles[i]));
            for j in i..pts.len() {
                let tp = r_two_point(&spec, pts[i], pts[j], &q).unwrap();
                assert!(tp.r3 >= 0.0 && tp.shared >= 0.0);
                assert!(
                    tp.total - singles[i] * singles[j] >= -1e-8,
                    "({}, {})",
                    pts[i],
                    pts[j]
                );
                if i == j {
                    assert!((tp.total - singles[i]).abs() < 1e-7);
                }
            }
        }
    }
}
