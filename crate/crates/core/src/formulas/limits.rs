//! Closed-form envelopes, small-parameter expansions and bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulas::homogeneous::{rho_hom, HomogeneousParams};
use crate::model::LengthLaw;
use crate::quad::QuadConfig;

/// `2 alpha^{-2} (3 + alpha G) e^{-alpha G}`, an upper bound of
/// `|nu G - lambda - σ²(O_G)|`.
pub fn tau_bound(alpha: f64, window: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::arg(format!("alpha must be > 0, got {alpha}")));
    }
    if !(window >= 0.0) {
        return Err(Error::arg(format!("window must be >= 0, got {window}")));
    }
    Ok(2.0 / (alpha * alpha) * (3.0 + alpha * window) * (-alpha * window).exp())
}

/// `phi(x) = x - 1 + e^{-x} (1 - x²/2)`.
pub fn phi(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::arg(format!("phi needs x >= 0, got {x}")));
    }
    if x < 0.5 {
        // phi(x) = Σ_{k>=3} (-1)^k [1/k! - 1/(2 (k-2)!)] x^k; the direct form
        // cancels catastrophically near 0.
        let mut sum = 0.0;
        let mut xk = x * x * x;
        let mut fact_k = 6.0; // k!
        let mut fact_km2 = 1.0; // (k-2)!
        for k in 3..40 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * (1.0 / fact_k - 0.5 / fact_km2) * xk;
            xk *= x;
            fact_k *= (k + 1) as f64;
            fact_km2 *= (k - 1) as f64;
        }
        return Ok(sum);
    }
    Ok(x - 1.0 + (-x).exp() * (1.0 - 0.5 * x * x))
}

/// `kappa alpha^{-2} E[phi(alpha L)]`, the closed-form vanishing-clone
/// slope. The exact `nu` does not follow it; as `kappa -> 0` it tends to
/// [`isolated_island_slope`].
pub fn nu_vanishing(params: &HomogeneousParams, quad: &QuadConfig) -> Result<f64> {
    params.validate()?;
    let a = params.alpha;
    let e = params
        .lengths
        .expect(|l| phi(a * l).unwrap_or(f64::NAN), quad)?;
    Ok(params.kappa * e / (a * a))
}

/// `kappa E[L² (1 - e^{-alpha L})]`: the variance slope when anchored clones
/// are rare enough to form isolated islands, i.e. as `kappa -> 0` or as
/// lengths shrink.
pub fn isolated_island_slope(params: &HomogeneousParams, quad: &QuadConfig) -> Result<f64> {
    params.validate()?;
    let a = params.alpha;
    Ok(params.kappa
        * params
            .lengths
            .expect(|l| -l * l * (-a * l).exp_m1(), quad)?)
}

/// `h_n = ∫ (alpha x)^n / n! e^{-alpha x} H(x) dx`, the moments entering the
/// vanishing-clone slope `w = 2 h_1 - h_2`.
pub fn h_moment(params: &HomogeneousParams, n: i32, quad: &QuadConfig) -> Result<f64> {
    let a = params.alpha;
    let fact: f64 = (1..=n).map(f64::from).product();
    let law = &params.lengths;
    let kinks = law.kinks();
    Ok(crate::quad::integrate_exp_weighted(
        |x| Ok((a * x).powi(n) / fact * law.tail_integral(x) / a),
        a,
        &kinks,
        quad,
    )?
    .value)
}

/// First-order predictions of three limiting regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitAsymptotics {
    /// `nu ~ alpha kappa E(L³) / 3` for short clones.
    pub nu_small_l3: f64,
    /// `1 - rho ~ kappa E(L e^{-alpha L})` as `kappa -> 0`, as printed.
    pub ocean_deficit_small_kappa: f64,
    /// `1 - rho ~ kappa E(L)` for short clones.
    pub ocean_deficit_small_l: f64,
    /// `kappa E(L (1 - e^{-alpha L}))`, the mean number of anchored clones
    /// covering a point, which is the first-order deficit as `kappa -> 0`
    /// and as lengths shrink.
    pub mean_anchored_count: f64,
    /// [`isolated_island_slope`], the first-order `nu` in the same regimes.
    pub nu_isolated_islands: f64,
}

pub fn limit_asymptotics(
    params: &HomogeneousParams,
    quad: &QuadConfig,
) -> Result<LimitAsymptotics> {
    params.validate()?;
    let (k, a, law) = (params.kappa, params.alpha, &params.lengths);
    Ok(LimitAsymptotics {
        nu_small_l3: a * k * law.moment(3) / 3.0,
        ocean_deficit_small_kappa: k * law.expect(|l| l * (-a * l).exp(), quad)?,
        ocean_deficit_small_l: k * law.mean(),
        mean_anchored_count: k * law.expect(|l| l * (-(-a * l).exp_m1()), quad)?,
        nu_isolated_islands: isolated_island_slope(params, quad)?,
    })
}

/// Bounds on the probability that a single clone covers two points at
/// distance `n`, which controls the mixing coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingBound {
    /// `1 - J(n)`.
    pub one_minus_j: f64,
    /// `kappa ∫_n^∞ P(L >= t) dt`.
    pub tail_integral_bound: f64,
    /// The smaller of the two.
    pub bound: f64,
    /// Whether the bounds are summable over `n`, which holds when `E(L²) < ∞`.
    pub summable: bool,
}

pub fn mixing_bound(params: &HomogeneousParams, n: f64) -> Result<MixingBound> {
    params.validate()?;
    if !(n >= 0.0) {
        return Err(Error::arg(format!("mixing distance must be >= 0, got {n}")));
    }
    let tail = params.j_exponent(n);
    let one_minus_j = -(-tail).exp_m1();
    Ok(MixingBound {
        one_minus_j,
        tail_integral_bound: tail,
        bound: one_minus_j.min(tail),
        summable: params.lengths.moment(2).is_finite(),
    })
}

/// Parameter ranges of an inhomogeneous model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InhomogeneousRanges {
    pub kappa_minus: f64,
    pub kappa_plus: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    pub lengths_minus: LengthLaw,
    pub lengths_plus: LengthLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InhomogeneousBounds {
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub nu_minus: f64,
    pub nu_plus: f64,
}

/// Checks `P(lo >= t) <= P(hi >= t)` on a grid covering both supports.
fn stochastically_below(lo: &LengthLaw, hi: &LengthLaw) -> bool {
    let top = lo
        .max_support()
        .unwrap_or(0.0)
        .max(hi.max_support().unwrap_or(0.0))
        .max(20.0 * lo.mean().max(hi.mean()));
    let mut pts: Vec<f64> = (0..=2000).map(|i| top * i as f64 / 2000.0).collect();
    pts.extend(lo.kinks());
    pts.extend(hi.kinks());
    pts.iter()
        .all(|&t| lo.survival(t) <= hi.survival(t) + 1e-12)
}

/// Envelopes of the ocean fraction and of the variance slope for any model
/// whose rates and lengths stay within the given ranges.
pub fn inhomogeneous_bounds(
    r: &InhomogeneousRanges,
    quad: &QuadConfig,
) -> Result<InhomogeneousBounds> {
    let ok = 0.0 < r.alpha_minus
        && r.alpha_minus <= r.alpha_plus
        && r.alpha_plus.is_finite()
        && 0.0 < r.kappa_minus
        && r.kappa_minus <= r.kappa_plus
        && r.kappa_plus.is_finite();
    if !ok {
        return Err(Error::arg(
            "bounds need 0 < kappa- <= kappa+ < ∞ and 0 < alpha- <= alpha+ < ∞",
        ));
    }
    r.lengths_minus.validate()?;
    r.lengths_plus.validate()?;
    if r.lengths_minus.survival(f64::MIN_POSITIVE) <= 0.0 {
        return Err(Error::arg(
            "the lower length law must put mass on positive lengths",
        ));
    }
    if !stochastically_below(&r.lengths_minus, &r.lengths_plus) {
        return Err(Error::arg(
            "lower length law is not stochastically below the upper one",
        ));
    }
    let rho_minus = rho_hom(
        &HomogeneousParams::new(r.kappa_plus, r.alpha_plus, r.lengths_plus.clone())?,
        quad,
    )?;
    let rho_plus = rho_hom(
        &HomogeneousParams::new(r.kappa_minus, r.alpha_minus, r.lengths_minus.clone())?,
        quad,
    )?;
    let delta = (1.0 - rho_plus) * rho_minus;
    Ok(InhomogeneousBounds {
        rho_minus,
        rho_plus,
        nu_minus: delta * delta / (4.0 * r.kappa_plus),
        nu_plus: 4.0 / r.alpha_minus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_examples() {
        assert_eq!(tau_bound(1.0, 0.0).unwrap(), 6.0);
        assert!((tau_bound(1.0, 20.0).unwrap() - 46.0 * (-20.0f64).exp()).abs() < 1e-20);
        assert!((tau_bound(1.0, 20.0).unwrap() - 9.48e-8).abs() < 1e-10);
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(0.0).unwrap(), 0.0);
        assert!((phi(1.0).unwrap() - 0.5 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((phi(2.0).unwrap() - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        // Series and direct form agree where both are accurate.
        for &x in &[0.3f64, 0.45, 0.49] {
            let direct = x - 1.0 + (-x).exp() * (1.0 - 0.5 * x * x);
            assert!((phi(x).unwrap() - direct).abs() < 1e-14);
        }
        assert!(phi(1e-4).unwrap() > 0.0);
        assert!(phi(-1.0).is_err());
    }

    #[test]
    fn slope_matches_h_moments() {
        // w = 2 h1 - h2 = alpha^{-2} E[phi(alpha L)]
        let q = QuadConfig::default();
        for (a, law) in [
            (1.0, LengthLaw::deterministic(1.0).unwrap()),
            (0.7, LengthLaw::exponential(1.3).unwrap()),
            (2.0, LengthLaw::uniform(0.2, 1.1).unwrap()),
        ] {
            let p = HomogeneousParams::new(1.0, a, law).unwrap();
            let w = 2.0 * h_moment(&p, 1, &q).unwrap() - h_moment(&p, 2, &q).unwrap();
            assert!((w - nu_vanishing(&p, &q).unwrap()).abs() < 1e-8, "{w}");
        }
    }

    #[test]
    fn rare_islands_fix_the_variance_slope() {
        // Isolated anchored clones contribute independent compound-Poisson
        // terms, so nu/kappa -> E[L² (1 - e^{-alpha L})].
        let q = QuadConfig::default();
        for law in [
            LengthLaw::deterministic(1.0).unwrap(),
            LengthLaw::exponential(1.0).unwrap(),
        ] {
            let p = HomogeneousParams::new(1e-3, 1.0, law).unwrap();
            let nu = crate::formulas::variance_constants(&p, &q).unwrap().nu;
            let w = isolated_island_slope(&p, &q).unwrap();
            assert!((nu / w - 1.0).abs() < 0.01, "{nu} vs {w}");
        }
        let p = HomogeneousParams::new(1.0, 1.0, LengthLaw::deterministic(0.05).unwrap()).unwrap();
        let la = limit_asymptotics(&p, &q).unwrap();
        assert!((la.nu_isolated_islands - 0.05f64.powi(2) * -(-0.05f64).exp_m1()).abs() < 1e-15);
        let nu = crate::formulas::variance_constants(&p, &q).unwrap().nu;
        assert!((nu / la.nu_isolated_islands - 1.0).abs() < 0.05);
        let rho = rho_hom(&p, &q).unwrap();
        assert!(((1.0 - rho) / la.mean_anchored_count - 1.0).abs() < 0.05);
    }

    #[test]
    fn mixing_examples() {
        let d = HomogeneousParams::new(1.0, 1.0, LengthLaw::deterministic(1.0).unwrap()).unwrap();
        assert_eq!(mixing_bound(&d, 1.0).unwrap().bound, 0.0);
        let at0 = mixing_bound(&d, 0.0).unwrap();
        assert!((at0.bound - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        let e = HomogeneousParams::new(1.0, 1.0, LengthLaw::exponential(1.0).unwrap()).unwrap();
        let m = mixing_bound(&e, 3.0).unwrap();
        assert!((m.tail_integral_bound - (-3.0f64).exp()).abs() < 1e-15);
        assert!(m.bound <= m.tail_integral_bound);
    }

    #[test]
    fn collapsed_ranges_reproduce_rho() {
        let law = LengthLaw::deterministic(1.0).unwrap();
        let r = InhomogeneousRanges {
            kappa_minus: 1.0,
            kappa_plus: 1.0,
            alpha_minus: 1.0,
            alpha_plus: 1.0,
            lengths_minus: law.clone(),
            lengths_plus: law.clone(),
        };
        let b = inhomogeneous_bounds(&r, &QuadConfig::default()).unwrap();
        let rho = rho_hom(
            &HomogeneousParams::new(1.0, 1.0, law).unwrap(),
            &QuadConfig::default(),
        )
        .unwrap();
        assert_eq!(b.rho_minus, rho);
        assert_eq!(b.rho_plus, rho);
        assert_eq!(b.nu_plus, 4.0);
    }
}
