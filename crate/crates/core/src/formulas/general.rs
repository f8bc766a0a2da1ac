//! Coverage probabilities and one/two-point functions for general models.
//!
//! Anchor positions are integrated in the variable `s = e^{-a([x, z])}`,
//! which turns `A(x, z) a(dx)` into `ds` on `(0, 1]`. This needs the anchor
//! intensity to have a closed-form primitive and infinite mass on both half
//! lines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulas::homogeneous::{HomogeneousEvaluator, HomogeneousParams};
use crate::model::{IntensityMeasure, ModelSpec};
use crate::quad::{integrate, integrate_try, QuadConfig};

/// `∫_y^∞ P(L_t >= t - x) c(dt)` for `x <= y`.
pub fn j_exponent(spec: &ModelSpec, x: f64, y: f64, quad: &QuadConfig) -> Result<f64> {
    if !(x <= y) {
        return Err(Error::arg(format!("J needs x <= y, got x={x}, y={y}")));
    }
    let lengths = spec.lengths();
    let value = match spec.clones() {
        IntensityMeasure::Density { f, support, .. } => {
            let lo = y.max(support.0);
            let hi = support.1;
            if lo >= hi {
                return Ok(0.0);
            }
            let mut breaks: Vec<f64> = Vec::new();
            for (a, b, law) in lengths.pieces() {
                breaks.push(a);
                breaks.push(b);
                breaks.extend(law.kinks().into_iter().map(|k| x + k));
            }
            integrate(
                |t| f(t) * lengths.law_at(t).survival(t - x),
                lo,
                hi,
                &breaks,
                quad,
            )?
            .value
        }
        clones => {
            // Closed form on each piece where both the rate and the law are
            // constant: rate · [H(lo - x) - H(hi - x)].
            let mut cuts = clones.kinks();
            for (a, _, _) in lengths.pieces().into_iter().skip(1) {
                cuts.push(a);
            }
            cuts.retain(|&c| c > y);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut total = 0.0;
            let mut lo = y;
            for hi in cuts.into_iter().chain(std::iter::once(f64::INFINITY)) {
                let mid = if hi.is_finite() {
                    0.5 * (lo + hi)
                } else {
                    lo + 1.0
                };
                let rate = clones.rate_at(mid);
                if rate > 0.0 {
                    let law = lengths.law_at(mid);
                    let upper = if hi.is_finite() {
                        law.tail_integral(hi - x)
                    } else {
                        0.0
                    };
                    total += rate * (law.tail_integral(lo - x) - upper);
                }
                lo = hi;
            }
            total
        }
    };
    if !value.is_finite() {
        return Err(Error::numeric("clone-cover exponent", value, f64::INFINITY));
    }
    Ok(value)
}

/// Probability that no single clone covers both `x` and `y`.
pub fn j_general(spec: &ModelSpec, x: f64, y: f64, quad: &QuadConfig) -> Result<f64> {
    Ok((-j_exponent(spec, x, y, quad)?).exp())
}

/// Probability that `[x, y]` contains no anchor.
pub fn a_gap(spec: &ModelSpec, x: f64, y: f64, quad: &QuadConfig) -> Result<f64> {
    if !(x <= y) {
        return Err(Error::arg(format!("A needs x <= y, got x={x}, y={y}")));
    }
    Ok((-spec.anchors().measure(x, y, quad)?).exp())
}

/// `E(n_C(x))`, the mean number of clones covering `x`.
pub fn mean_clone_count(spec: &ModelSpec, x: f64, quad: &QuadConfig) -> Result<f64> {
    if let Some((k, _, law)) = spec.homogeneous_params() {
        return Ok(k * law.mean());
    }
    j_exponent(spec, x, x, quad)
}

/// Right ends farther than this from a point cannot reach it, up to the tail
/// budget.
fn right_end_reach(spec: &ModelSpec, quad: &QuadConfig) -> f64 {
    if let Some(m) = spec.lengths().max_support() {
        return m;
    }
    let sup = spec.clones().sup_rate().max(1e-300);
    let laws = spec.lengths().laws();
    let mut r = spec.lengths().max_mean().max(1e-12);
    while laws
        .iter()
        .map(|l| sup * l.tail_integral(r))
        .fold(0.0, f64::max)
        > quad.tail_mass
    {
        r *= 1.5;
    }
    r
}

/// `E(n_A(x))`, the mean number of anchored clones covering `x`.
pub fn mean_anchored_count(spec: &ModelSpec, x: f64, quad: &QuadConfig) -> Result<f64> {
    if spec.anchors().is_zero() || spec.clones().is_zero() {
        return Ok(0.0);
    }
    if let Some((k, a, law)) = spec.homogeneous_params() {
        return Ok(k * law.expect(|l| l * (-(-a * l).exp_m1()), quad)?);
    }
    let reach = right_end_reach(spec, quad);
    let mut breaks = spec.clones().kinks();
    for (lo, _, law) in spec.lengths().pieces() {
        breaks.push(lo);
        breaks.extend(law.kinks().into_iter().map(|k| x + k));
    }
    breaks.extend(spec.anchors().kinks());
    let anchors = spec.anchors();
    let est = integrate_try(
        |z| {
            let rate = spec.clones().rate_at(z);
            if rate == 0.0 {
                return Ok(0.0);
            }
            let law = spec.lengths().law_at(z);
            let mut failure = None;
            let v = law.expect_from(
                z - x,
                |t| match anchors.measure(z - t, z, quad) {
                    Ok(m) => -(-m).exp_m1(),
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                },
                &quad.scaled(0.1),
            )?;
            match failure {
                Some(e) => Err(e),
                None => Ok(rate * v),
            }
        },
        x,
        x + reach,
        &breaks,
        quad,
    )?;
    Ok(est.value)
}

/// Two-point function and its decomposition by the anchors between the
/// points. `r0`, `r1` and `r2` treat the two sides of an anchor between the
/// points as independent, with `r2 = r(z) r(z') - r3`. Clones covering both
/// points break that independence and raise the anchored terms by the factor
/// `1 / J(z, z')`; `shared = (r1 + r2)(1 / J(z, z') - 1)` is the excess, so
/// `total = r0 + r1 + r2 + shared`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPoint {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub shared: f64,
    pub total: f64,
}

impl TwoPoint {
    fn assemble(r0: f64, r1: f64, r3: f64, product: f64, shared_exponent: f64) -> Self {
        let r2 = product - r3;
        let shared = (r1 + r2).max(0.0) * shared_exponent.exp_m1();
        TwoPoint {
            r0,
            r1,
            r2,
            r3,
            shared,
            total: r0 + r1 + r2 + shared,
        }
    }
}

/// Evaluator of one- and two-point functions through the general route.
pub struct GeneralEvaluator<'a> {
    spec: &'a ModelSpec,
    quad: QuadConfig,
    inner: QuadConfig,
    kinks: Vec<f64>,
    breaks: Vec<f64>,
}

impl<'a> GeneralEvaluator<'a> {
    pub fn new(spec: &'a ModelSpec, quad: &QuadConfig) -> Result<Self> {
        quad.validate()?;
        let anchors = spec.anchors();
        if matches!(anchors, IntensityMeasure::Density { .. }) || !anchors.unbounded_both_sides() {
            return Err(Error::Unsupported(
                "ocean probabilities need an anchor intensity with a closed-form primitive and \
                 positive rate on both outer pieces"
                    .into(),
            ));
        }
        let mut kinks = Vec::new();
        for law in spec.lengths().laws() {
            kinks.extend(law.kinks());
        }
        kinks.retain(|&k| k > 0.0);
        kinks.sort_by(f64::total_cmp);
        kinks.dedup();
        let mut breaks = spec.clones().kinks();
        breaks.extend(anchors.kinks());
        for (lo, _, _) in spec.lengths().pieces().into_iter().skip(1) {
            breaks.push(lo);
        }
        Ok(GeneralEvaluator {
            spec,
            quad: *quad,
            inner: quad.scaled(0.01),
            kinks,
            breaks,
        })
    }

    fn exponent(&self, x: f64, y: f64) -> Result<f64> {
        j_exponent(self.spec, x, y, &self.quad)
    }

    /// `J(x|z|y)` style ratio `J(x, z) J(z', y) / J(x, y)`, clamped to `[0, 1]`.
    fn ratio(&self, x: f64, z: f64, z2: f64, y: f64) -> Result<f64> {
        let e = self.exponent(x, z)? + self.exponent(z2, y)? - self.exponent(x, y)?;
        Ok((-e.max(0.0)).exp())
    }

    fn prim(&self, x: f64) -> Result<f64> {
        self.spec.anchors().primitive(x)
    }

    /// Position `x <= z` with `a([x, z]) = -ln s`.
    fn left_of(&self, z: f64, s: f64) -> Result<f64> {
        if s >= 1.0 {
            return Ok(z);
        }
        self.spec
            .anchors()
            .inverse_primitive(self.prim(z)? + s.ln())
    }

    /// Position `y >= z` with `a([z, y]) = -ln s`.
    fn right_of(&self, z: f64, s: f64) -> Result<f64> {
        if s >= 1.0 {
            return Ok(z);
        }
        self.spec
            .anchors()
            .inverse_primitive(self.prim(z)? - s.ln())
    }

    /// Positions where the integrand may kink, as seen from `z`, mapped to
    /// the `s` variable of the left (`left = true`) or right side.
    fn s_breaks(&self, z: f64, anchor_from: f64, left: bool) -> Result<Vec<f64>> {
        let mut pts: Vec<f64> = self.breaks.clone();
        for &k in &self.kinks {
            pts.push(z - k);
            pts.push(z + k);
            pts.push(anchor_from - k);
            pts.push(anchor_from + k);
        }
        let p0 = self.prim(anchor_from)?;
        let mut out = Vec::new();
        for p in pts {
            let inside = if left {
                p < anchor_from
            } else {
                p > anchor_from
            };
            if inside {
                let d = (self.prim(p)? - p0).abs();
                out.push((-d).exp());
            }
        }
        Ok(out)
    }

    /// `∫_0^1 ds J(x|z|w)` with `x` the left anchor of `z` at level `s`:
    /// the probability that `z` is in the ocean given an anchor at `w >= z`
    /// and the nearest anchor to the left integrated out.
    fn left_factor(&self, z: f64, w: f64) -> Result<f64> {
        let breaks = self.s_breaks(z, z, true)?;
        Ok(integrate_try(
            |s| {
                let x = self.left_of(z, s)?;
                self.ratio(x, z, z, w)
            },
            0.0,
            1.0,
            &breaks,
            &self.inner,
        )?
        .value)
    }

    /// Mirror of [`left_factor`](Self::left_factor): anchor at `w <= z`, right
    /// anchor integrated out.
    fn right_factor(&self, w: f64, z: f64) -> Result<f64> {
        let breaks = self.s_breaks(z, z, false)?;
        Ok(integrate_try(
            |s| {
                let y = self.right_of(z, s)?;
                self.ratio(w, z, z, y)
            },
            0.0,
            1.0,
            &breaks,
            &self.inner,
        )?
        .value)
    }

    /// `r(z)`, the probability that `z` is in the ocean.
    pub fn r_one_point(&self, z: f64) -> Result<f64> {
        let breaks = self.s_breaks(z, z, false)?;
        let est = integrate_try(
            |s| {
                let y = self.right_of(z, s)?;
                self.left_factor(z, y)
            },
            0.0,
            1.0,
            &breaks,
            &self.quad.scaled(0.1),
        )?;
        Ok(est.value.clamp(0.0, 1.0))
    }

    pub fn r_two_point(&self, z: f64, z2: f64) -> Result<TwoPoint> {
        let (z, z2) = if z <= z2 { (z, z2) } else { (z2, z) };
        let outer = self.quad.scaled(0.1);
        let gap = (-self.spec.anchors().measure(z, z2, &self.quad)?).exp();
        let rz = self.r_one_point(z)?;
        let rz2 = if z2 == z { rz } else { self.r_one_point(z2)? };

        // No anchor in (z, z').
        let r0 = {
            let lb = self.s_breaks(z, z, true)?;
            let rb = self.s_breaks(z2, z2, false)?;
            gap * integrate_try(
                |s1| {
                    let x = self.left_of(z, s1)?;
                    Ok(integrate_try(
                        |s2| {
                            let y = self.right_of(z2, s2)?;
                            self.ratio(x, z, z2, y)
                        },
                        0.0,
                        1.0,
                        &rb,
                        &self.inner,
                    )?
                    .value)
                },
                0.0,
                1.0,
                &lb,
                &outer,
            )?
            .value
        };

        // Exactly one anchor, at s in (z, z').
        let r1 = if z2 > z {
            let mut breaks = self.breaks.clone();
            for &k in &self.kinks {
                breaks.push(z + k);
                breaks.push(z2 - k);
            }
            gap * integrate_try(
                |s| {
                    let rate = self.spec.anchors().rate_at(s);
                    if rate == 0.0 {
                        return Ok(0.0);
                    }
                    Ok(rate * self.left_factor(z, s)? * self.right_factor(s, z2)?)
                },
                z,
                z2,
                &breaks,
                &outer,
            )?
            .value
        } else {
            0.0
        };

        // Right anchor of z at s, left anchor of z' at t, with s >= t.
        let split = gap;
        let r3 = {
            let rb = self.s_breaks(z, z, false)?;
            let far = if split > 0.0 {
                rz2 * integrate_try(
                    |sig| self.left_factor(z, self.right_of(z, sig)?),
                    0.0,
                    split,
                    &rb,
                    &outer,
                )?
                .value
            } else {
                0.0
            };
            let near = if split < 1.0 {
                integrate_try(
                    |sig| {
                        let s = self.right_of(z, sig)?;
                        let lf = self.left_factor(z, s)?;
                        if lf == 0.0 {
                            return Ok(0.0);
                        }
                        Ok(lf * self.capped_right(s, z2)?)
                    },
                    split,
                    1.0,
                    &rb,
                    &outer,
                )?
                .value
            } else {
                0.0
            };
            far + near
        };
        if r3 < -self.quad.abs_tol {
            return Err(Error::numeric(
                "r3 (must be nonnegative)",
                r3,
                self.quad.abs_tol,
            ));
        }
        let shared = j_exponent(self.spec, z, z2, &self.quad)?;
        Ok(TwoPoint::assemble(r0, r1, r3, rz * rz2, shared))
    }

    /// `∫_{t <= s} A(t, z') a(dt) ∫ J(t|z'|y) B(...)`, the probability that `z'`
    /// is in the ocean with its left anchor restricted to `t <= s < z'`.
    fn capped_right(&self, s: f64, z2: f64) -> Result<f64> {
        let gap = (-self.spec.anchors().measure(s, z2, &self.quad)?).exp();
        let breaks = self.s_breaks(z2, s, true)?;
        let v = integrate_try(
            |tau| {
                let t = self.left_of(s, tau)?;
                self.right_factor(t, z2)
            },
            0.0,
            1.0,
            &breaks,
            &self.inner,
        )?;
        Ok(gap * v.value)
    }
}

/// Probability that `z` is in the ocean.
pub fn r_one_point(spec: &ModelSpec, z: f64, quad: &QuadConfig) -> Result<f64> {
    if spec.anchors().is_zero() || spec.clones().is_zero() {
        return Ok(1.0);
    }
    if let Some((k, a, law)) = spec.homogeneous_params() {
        return HomogeneousEvaluator::new(&HomogeneousParams::new(k, a, law.clone())?, quad)
            .map(|e| e.rho());
    }
    GeneralEvaluator::new(spec, quad)?.r_one_point(z)
}

/// Probability that both `z` and `z'` are in the ocean, with its decomposition.
pub fn r_two_point(spec: &ModelSpec, z: f64, z2: f64, quad: &QuadConfig) -> Result<TwoPoint> {
    let (z, z2) = if z <= z2 { (z, z2) } else { (z2, z) };
    if spec.anchors().is_zero() {
        // Nothing is anchored: both points are in the ocean with no anchor between.
        return Ok(TwoPoint::assemble(1.0, 0.0, 0.0, 0.0, 0.0));
    }
    if let Some((k, a, law)) = spec.homogeneous_params() {
        let ev = HomogeneousEvaluator::new(&HomogeneousParams::new(k, a, law.clone())?, quad)?;
        return two_point_from_rbar(&ev, z2 - z);
    }
    GeneralEvaluator::new(spec, quad)?.r_two_point(z, z2)
}

pub(crate) fn two_point_from_rbar(ev: &HomogeneousEvaluator, d: f64) -> Result<TwoPoint> {
    let rb = ev.rbar(d)?;
    let rho = ev.rho();
    Ok(TwoPoint::assemble(
        rb.r0,
        rb.r1,
        rb.r3,
        rho * rho,
        ev.params().j_exponent(d),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LengthLaw, Lengths};

    fn q() -> QuadConfig {
        QuadConfig::default()
    }

    fn hom(k: f64, a: f64, law: LengthLaw) -> ModelSpec {
        ModelSpec::homogeneous(k, a, law).unwrap()
    }

    /// Same homogeneous model, disguised so it takes the general route.
    fn disguised(k: f64, a: f64, law: LengthLaw) -> ModelSpec {
        ModelSpec::new(
            IntensityMeasure::piecewise(vec![-50.0], vec![k, k]).unwrap(),
            IntensityMeasure::piecewise(vec![50.0], vec![a, a]).unwrap(),
            Lengths::Fixed(law),
        )
        .unwrap()
    }

    #[test]
    fn j_examples() {
        let s = hom(1.0, 1.0, LengthLaw::deterministic(1.0).unwrap());
        assert!((j_general(&s, 0.0, 0.0, &q()).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(j_general(&s, 0.0, 1.5, &q()).unwrap(), 1.0);
        let none = hom(0.0, 1.0, LengthLaw::deterministic(1.0).unwrap());
        assert_eq!(j_general(&none, -3.0, 2.0, &q()).unwrap(), 1.0);
        assert!(j_general(&s, 1.0, 0.0, &q()).is_err());
    }

    #[test]
    fn j_density_matches_closed_form() {
        // Rate 1 on [0, 10] as a density versus as a piecewise intensity.
        let law = LengthLaw::exponential(0.8).unwrap();
        let d = ModelSpec::new(
            IntensityMeasure::density(|_| 1.0, 1.0, 0.0, 10.0).unwrap(),
            IntensityMeasure::constant(1.0).unwrap(),
            Lengths::Fixed(law.clone()),
        )
        .unwrap();
        let p = ModelSpec::new(
            IntensityMeasure::piecewise(vec![0.0, 10.0], vec![0.0, 1.0, 0.0]).unwrap(),
            IntensityMeasure::constant(1.0).unwrap(),
            Lengths::Fixed(law),
        )
        .unwrap();
        for &(x, y) in &[(1.0, 2.0), (3.0, 3.0), (-1.0, 0.5), (9.0, 9.5)] {
            let a = j_exponent(&d, x, y, &q()).unwrap();
            let b = j_exponent(&p, x, y, &q()).unwrap();
            assert!((a - b).abs() < 1e-9, "{x} {y}: {a} vs {b}");
        }
    }

    #[test]
    fn gap_examples() {
        let s = hom(1.0, 2.0, LengthLaw::deterministic(1.0).unwrap());
        assert!((a_gap(&s, 0.0, 1.0, &q()).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(a_gap(&s, 0.3, 0.3, &q()).unwrap(), 1.0);
        let z = hom(1.0, 0.0, LengthLaw::deterministic(1.0).unwrap());
        assert_eq!(a_gap(&z, 0.0, 9.0, &q()).unwrap(), 1.0);
    }

    #[test]
    fn mean_count_examples() {
        let s = hom(2.0, 1.0, LengthLaw::exponential(3.0).unwrap());
        assert!((mean_clone_count(&s, 0.0, &q()).unwrap() - 6.0).abs() < 1e-12);
        let d = hom(1.0, 1.0, LengthLaw::deterministic(1.0).unwrap());
        assert!(
            (mean_anchored_count(&d, 0.0, &q()).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-12
        );
        let no_anchor = hom(1.0, 0.0, LengthLaw::deterministic(1.0).unwrap());
        assert_eq!(mean_anchored_count(&no_anchor, 0.0, &q()).unwrap(), 0.0);
        // General route on the disguised homogeneous model.
        for law in [
            LengthLaw::deterministic(1.0).unwrap(),
            LengthLaw::exponential(0.7).unwrap(),
        ] {
            let h = hom(1.3, 0.9, law.clone());
            let g = disguised(1.3, 0.9, law);
            let a = mean_anchored_count(&h, 2.0, &q()).unwrap();
            let b = mean_anchored_count(&g, 2.0, &q()).unwrap();
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
            let c1 = mean_clone_count(&h, 2.0, &q()).unwrap();
            let c2 = mean_clone_count(&g, 2.0, &q()).unwrap();
            assert!((c1 - c2).abs() < 1e-12);
        }
    }

    #[test]
    fn general_route_reproduces_stationary_values() {
        let law = LengthLaw::deterministic(1.0).unwrap();
        let g = disguised(1.0, 1.0, law.clone());
        let ev = GeneralEvaluator::new(&g, &q()).unwrap();
        let rho = r_one_point(&hom(1.0, 1.0, law.clone()), 0.0, &q()).unwrap();
        assert!((ev.r_one_point(0.0).unwrap() - rho).abs() < 1e-8);
        assert!((ev.r_one_point(17.0).unwrap() - rho).abs() < 1e-8);
        let h = hom(1.0, 1.0, law);
        for &d in &[0.0, 0.3, 0.9, 1.6] {
            let a = ev.r_two_point(0.0, d).unwrap();
            let b = r_two_point(&h, 0.0, d, &q()).unwrap();
            for (u, v) in [(a.r0, b.r0), (a.r1, b.r1), (a.r3, b.r3), (a.total, b.total)] {
                assert!((u - v).abs() < 1e-7, "d={d}: {a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn unsupported_anchor_intensities() {
        let s = ModelSpec::new(
            IntensityMeasure::constant(1.0).unwrap(),
            IntensityMeasure::piecewise(vec![0.0], vec![0.0, 1.0]).unwrap(),
            Lengths::Fixed(LengthLaw::deterministic(1.0).unwrap()),
        )
        .unwrap();
        assert!(matches!(
            r_one_point(&s, 1.0, &q()),
            Err(Error::Unsupported(_))
        ));
    }
}
