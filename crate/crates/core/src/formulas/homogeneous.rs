//! Stationary evaluator for the homogeneous model.
//!
//! With clone rate `kappa`, anchor rate `alpha` and length law `L`, the
//! probability that an interval of length `u` is covered by no single clone is
//! `J(u) = exp(-kappa H(u))` with `H(u) = E[(L - u)^+]`. Most quantities below
//! factor through the gap kernel
//!
//! ```text
//! g(t) = ∫_0^∞ alpha e^{-alpha x} J(x) J(t) / J(x + t) dx,
//! ```
//!
//! the probability that a point is in the ocean given that the nearest
//! anchor on its right is at distance `t`, and through its exponentially
//! smoothed tail `T(v) = ∫_v^∞ alpha e^{-alpha (w - v)} g(w) dw`. Both are
//! tabulated once per parameter set.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LengthLaw;
use crate::quad::{
    integrate, integrate_exp_weighted, integrate_exp_weighted_flat, integrate_try, ChebTable,
    Estimate, QuadConfig,
};

/// Parameters of the homogeneous model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousParams {
    pub kappa: f64,
    pub alpha: f64,
    pub lengths: LengthLaw,
}

impl HomogeneousParams {
    pub fn new(kappa: f64, alpha: f64, lengths: LengthLaw) -> Result<Self> {
        let p = HomogeneousParams {
            kappa,
            alpha,
            lengths,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::arg(format!(
                "kappa must be finite and >= 0, got {}",
                self.kappa
            )));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::arg(format!(
                "alpha must be finite and > 0, got {}",
                self.alpha
            )));
        }
        self.lengths.validate()
    }

    /// Exponent of `J(u)`, i.e. `kappa ∫_u^∞ P(L >= t) dt`.
    pub fn j_exponent(&self, u: f64) -> f64 {
        self.kappa * self.lengths.tail_integral(u)
    }

    pub fn j(&self, u: f64) -> f64 {
        (-self.j_exponent(u)).exp()
    }

    /// `J(a) J(b) / J(c)` computed from exponents and clamped to `[0, 1]`.
    pub(crate) fn j_ratio(&self, a: f64, b: f64, c: f64) -> f64 {
        let e = self.j_exponent(a) + self.j_exponent(b) - self.j_exponent(c);
        (-e.max(0.0)).exp()
    }

    /// Distance beyond which `J` equals 1 to double precision.
    pub fn reach(&self) -> f64 {
        if self.kappa == 0.0 {
            return 0.0;
        }
        match self.lengths.max_support() {
            Some(m) => m,
            None => {
                let mean = self.lengths.mean();
                // kappa·mean·e^{-u/mean} < 1e-17
                (mean * (self.kappa * mean * 1e17).ln()).max(0.0)
            }
        }
    }

    fn kinks(&self) -> Vec<f64> {
        let mut k = self.lengths.kinks();
        k.retain(|&v| v > 0.0);
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }
}

/// `J(u) = exp(-kappa ∫_u^∞ P(L >= t) dt)`.
pub fn j_hom(params: &HomogeneousParams, u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::arg(format!("J needs u >= 0, got {u}")));
    }
    Ok(params.j(u))
}

/// Stationary two-point components at one separation `z`.
///
/// `r0`, `r1` and `r3` factor the joint ocean probability across the anchors
/// between the two points as if clones on either side of an anchor were
/// independent. A clone covering both points is counted on both sides, so
/// the exact probability of the one-anchor and two-or-more-anchor events is
/// larger by the factor `1 / J(z)`. `shared` is that excess,
/// `(r1 + rho² - r3)(1/J(z) - 1)`, which vanishes once `z` exceeds every
/// clone length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbarValues {
    pub r0: f64,
    pub r1: f64,
    pub r3: f64,
    pub shared: f64,
}

impl RbarValues {
    /// `r0 + r1 - r3 + shared`, the covariance of the ocean indicators at
    /// distance `z`.
    pub fn combination(&self) -> f64 {
        self.r0 + self.r1 - self.r3 + self.shared
    }
}

/// Variance constants of the homogeneous model: `nu_i = ∫ 2 r_i(z) dz` and
/// `lambda_i = ∫ 2 z r_i(z) dz` per component, with
/// `nu = nu0 + nu1 - nu3 + nu_shared` and likewise for `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceConstants {
    pub nu0: f64,
    pub nu1: f64,
    pub nu3: f64,
    pub nu_shared: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda3: f64,
    pub lambda_shared: f64,
    pub nu: f64,
    pub lambda: f64,
    /// Error estimate of `nu`, respectively `lambda`.
    pub nu_error: f64,
    pub lambda_error: f64,
}

/// Cached tables for one homogeneous parameter set.
#[derive(Debug, Clone)]
pub struct HomogeneousEvaluator {
    params: HomogeneousParams,
    quad: QuadConfig,
    inner: QuadConfig,
    reach: f64,
    kinks: Vec<f64>,
    /// Breakpoints of `g` and `T` on `[0, reach]`.
    table_breaks: Vec<f64>,
    j_alpha: f64,
    g: Option<ChebTable>,
    tail: Option<ChebTable>,
    rho: f64,
}

/// Relative accuracy target of the tabulated kernels.
const TABLE_TOL: f64 = 1e-13;

impl HomogeneousEvaluator {
    pub fn new(params: &HomogeneousParams, quad: &QuadConfig) -> Result<Self> {
        params.validate()?;
        quad.validate()?;
        let inner = QuadConfig {
            abs_tol: (quad.abs_tol * 1e-3).max(1e-15),
            rel_tol: (quad.rel_tol * 1e-3).max(1e-14),
            ..*quad
        };
        let reach = params.reach();
        let kinks = params.kinks();
        let mut table_breaks = kinks.clone();
        for &a in &kinks {
            for &b in &kinks {
                if a > b {
                    table_breaks.push(a - b);
                }
            }
        }
        table_breaks.retain(|&b| b > 0.0 && b < reach);
        table_breaks.sort_by(f64::total_cmp);
        table_breaks.dedup();

        let mut ev = HomogeneousEvaluator {
            params: params.clone(),
            quad: *quad,
            inner,
            reach,
            kinks,
            table_breaks,
            j_alpha: 1.0,
            g: None,
            tail: None,
            rho: 1.0,
        };
        if reach == 0.0 {
            return Ok(ev);
        }
        let p = &ev.params;
        let alpha = p.alpha;
        ev.j_alpha = ev.exp_weighted(|x| Ok(p.j(x)), &ev.kinks, &ev.inner)?.value;

        let g = ChebTable::build(
            |t| ev.gap_kernel_direct(t),
            0.0,
            reach,
            &ev.table_breaks,
            TABLE_TOL,
            ev.j_alpha,
        )?;
        let tail = ChebTable::build(
            |v| {
                let breaks: Vec<f64> = ev.table_breaks.iter().copied().filter(|&b| b > v).collect();
                let body = integrate(
                    |w| alpha * (-alpha * (w - v)).exp() * g.eval(w),
                    v,
                    reach,
                    &breaks,
                    &ev.inner,
                )?;
                Ok(body.value + (-alpha * (reach - v)).exp() * ev.j_alpha)
            },
            0.0,
            reach,
            &ev.table_breaks,
            TABLE_TOL,
            ev.j_alpha,
        )?;
        ev.rho = tail.eval(0.0);
        ev.g = Some(g);
        ev.tail = Some(tail);
        Ok(ev)
    }

    pub fn params(&self) -> &HomogeneousParams {
        &self.params
    }

    /// `j(alpha) = ∫ alpha e^{-alpha x} J(x) dx`.
    pub fn j_alpha(&self) -> f64 {
        self.j_alpha
    }

    /// Stationary ocean fraction.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `∫ alpha e^{-alpha x} h(x) dx` for integrands built from `J`.
    ///
    /// After the log map an unbounded law with `alpha·E[L] > 1` makes `J`
    /// behave like a fractional power of `s` near 0; those are integrated in
    /// `x` up to the reach, past which `J` is 1.
    fn exp_weighted<F>(&self, h: F, kinks: &[f64], cfg: &QuadConfig) -> Result<Estimate>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let p = &self.params;
        if p.lengths.max_support().is_none() && p.alpha * p.lengths.mean() > 1.0 {
            integrate_exp_weighted_flat(h, p.alpha, kinks, self.reach, cfg)
        } else {
            integrate_exp_weighted(h, p.alpha, kinks, cfg)
        }
    }

    /// `g(t)` by direct quadrature, bypassing the table.
    pub fn gap_kernel_direct(&self, t: f64) -> Result<f64> {
        let p = &self.params;
        let mut kinks = self.kinks.clone();
        kinks.extend(self.kinks.iter().map(|k| k - t).filter(|&k| k > 0.0));
        Ok(self
            .exp_weighted(|x| Ok(p.j_ratio(x, t, x + t)), &kinks, &self.inner)?
            .value)
    }

    /// Tabulated `g(t)`.
    pub fn gap_kernel(&self, t: f64) -> f64 {
        self.g.as_ref().map_or(1.0, |g| g.eval(t.max(0.0)))
    }

    /// Tabulated `T(v)`.
    pub fn gap_tail(&self, v: f64) -> f64 {
        self.tail.as_ref().map_or(1.0, |g| g.eval(v.max(0.0)))
    }

    /// Where `g` or `T` may lose smoothness.
    fn breaks_for(&self, z: f64) -> Vec<f64> {
        let mut b: Vec<f64> = self.table_breaks.clone();
        b.extend(self.table_breaks.iter().map(|x| z - x));
        b.push(z - self.reach);
        b.retain(|&x| x > 0.0 && x < z);
        b
    }

    /// `r0` component at separation `z`: no anchor between the two points.
    pub fn rbar0(&self, z: f64) -> Result<f64> {
        let p = &self.params;
        let alpha = p.alpha;
        if self.reach == 0.0 {
            return Ok((-alpha * z).exp());
        }
        let outer_kinks: Vec<f64> = self
            .kinks
            .iter()
            .flat_map(|&k| [k, k - z])
            .filter(|&k| k > 0.0)
            .collect();
        let v = self.exp_weighted(
            |x| {
                let inner_kinks: Vec<f64> = self
                    .kinks
                    .iter()
                    .flat_map(|&k| [k, k - x - z])
                    .filter(|&k| k > 0.0)
                    .collect();
                Ok(self
                    .exp_weighted(
                        |y| Ok(p.j_ratio(x, y, x + y + z)),
                        &inner_kinks,
                        &self.inner,
                    )?
                    .value)
            },
            &outer_kinks,
            &self.inner,
        )?;
        Ok((-alpha * z).exp() * v.value)
    }

    /// `r1` component: exactly one anchor between the two points.
    pub fn rbar1(&self, z: f64) -> Result<f64> {
        let alpha = self.params.alpha;
        if z <= 0.0 {
            return Ok(0.0);
        }
        let conv = integrate(
            |t| self.gap_kernel(t) * self.gap_kernel(z - t),
            0.0,
            z,
            &self.breaks_for(z),
            &self.inner,
        )?;
        Ok(alpha * (-alpha * z).exp() * conv.value)
    }

    /// `r3` component: the correction that turns the unconstrained product
    /// into the two-or-more-anchors term.
    pub fn rbar3(&self, z: f64) -> Result<f64> {
        let alpha = self.params.alpha;
        let mut s = self.rho * self.gap_tail(z);
        if z > 0.0 {
            let conv = integrate(
                |t| self.gap_kernel(t) * self.gap_tail(z - t),
                0.0,
                z,
                &self.breaks_for(z),
                &self.inner,
            )?;
            s += alpha * conv.value;
        }
        Ok((-alpha * z).exp() * s)
    }

    pub fn rbar(&self, z: f64) -> Result<RbarValues> {
        if !(z >= 0.0) {
            return Err(Error::arg(format!("rbar needs z >= 0, got {z}")));
        }
        let r1 = self.rbar1(z)?;
        let r3 = self.rbar3(z)?;
        Ok(RbarValues {
            r0: self.rbar0(z)?,
            r1,
            r3,
            shared: self.shared_from(z, r1, r3),
        })
    }

    /// Excess of the anchored terms due to clones covering both points.
    pub fn rbar_shared(&self, z: f64) -> Result<f64> {
        Ok(self.shared_from(z, self.rbar1(z)?, self.rbar3(z)?))
    }

    fn shared_from(&self, z: f64, r1: f64, r3: f64) -> f64 {
        let excess = self.params.j_exponent(z).exp_m1();
        if excess == 0.0 {
            return 0.0;
        }
        (r1 + self.rho * self.rho - r3).max(0.0) * excess
    }

    /// Separation beyond which every component is below the tail budget:
    /// the anchored ones are at most `(1 + alpha z) e^{-alpha z}`, the
    /// integrated moments add at most one more power of `z`, and the shared
    /// term is zero past the reach.
    fn horizon(&self) -> f64 {
        let alpha = self.params.alpha;
        let budget = self.quad.tail_mass;
        let mut z = 1.0 / alpha;
        while 2.0 * (3.0 + alpha * z) * (-alpha * z).exp() / (alpha * alpha) > budget {
            z *= 1.25;
        }
        z.max(self.reach)
    }

    fn z_breaks(&self, upper: f64) -> Vec<f64> {
        let mut b = self.table_breaks.clone();
        b.push(self.reach);
        for &a in &self.kinks {
            for &c in &self.kinks {
                b.push(a + c);
            }
        }
        b.retain(|&x| x > 0.0 && x < upper);
        b
    }

    /// `∫_0^upper w(z) r_i(z) dz` for every component, with the error
    /// estimate of the combination.
    fn weighted_components<W, A>(
        &self,
        upper: f64,
        weight: W,
        at: A,
    ) -> Result<([f64; 4], Estimate)>
    where
        W: Fn(f64) -> f64,
        A: Fn(f64) -> Result<RbarValues>,
    {
        let breaks = self.z_breaks(upper);
        let mut parts = [0.0; 4];
        let comps: [fn(&RbarValues) -> f64; 4] = [|r| r.r0, |r| r.r1, |r| r.r3, |r| r.shared];
        for (i, c) in comps.iter().enumerate() {
            parts[i] = integrate_try(
                |z| Ok(weight(z) * c(&at(z)?)),
                0.0,
                upper,
                &breaks,
                &self.quad.scaled(0.1),
            )?
            .value;
        }
        let comb = integrate_try(
            |z| Ok(weight(z) * at(z)?.combination()),
            0.0,
            upper,
            &breaks,
            &self.quad.scaled(0.01),
        )?;
        Ok((parts, comb))
    }

    pub fn variance_constants(&self) -> Result<VarianceConstants> {
        let upper = self.horizon();
        // All ten integrations revisit many of the same nodes.
        let memo: RefCell<HashMap<u64, RbarValues>> = RefCell::new(HashMap::new());
        let at = |z: f64| -> Result<RbarValues> {
            if let Some(v) = memo.borrow().get(&z.to_bits()) {
                return Ok(*v);
            }
            let v = self.rbar(z)?;
            memo.borrow_mut().insert(z.to_bits(), v);
            Ok(v)
        };
        let (n, nu) = self.weighted_components(upper, |_| 2.0, at)?;
        let (l, lambda) = self.weighted_components(upper, |z| 2.0 * z, at)?;
        let vc = VarianceConstants {
            nu0: n[0],
            nu1: n[1],
            nu3: n[2],
            nu_shared: n[3],
            lambda0: l[0],
            lambda1: l[1],
            lambda3: l[2],
            lambda_shared: l[3],
            nu: nu.value,
            lambda: lambda.value,
            nu_error: nu.error,
            lambda_error: lambda.error,
        };
        let all = [
            vc.nu0,
            vc.nu1,
            vc.nu3,
            vc.nu_shared,
            vc.lambda0,
            vc.lambda1,
            vc.lambda3,
            vc.lambda_shared,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("variance constants", vc.nu, vc.nu_error));
        }
        Ok(vc)
    }

    /// `σ²(O_G) = 2 ∫_0^G (G - z) c(z) dz` with `c` the covariance
    /// [`RbarValues::combination`].
    pub fn variance_exact(&self, window: f64) -> Result<Estimate> {
        if !(window >= 0.0 && window.is_finite()) {
            return Err(Error::arg(format!("window must be >= 0, got {window}")));
        }
        if window == 0.0 || self.reach == 0.0 {
            return Ok(Estimate {
                value: 0.0,
                error: 0.0,
                evals: 0,
            });
        }
        let est = integrate_try(
            |z| Ok(2.0 * (window - z) * self.rbar(z)?.combination()),
            0.0,
            window,
            &self.z_breaks(window),
            &self.quad.scaled(0.01),
        )?;
        Ok(Estimate {
            value: est.value.max(0.0),
            ..est
        })
    }

    /// `m_k = ∫_0^∞ s^k e^{-alpha s} g(s) ds`, used by closed-form identities.
    pub fn kernel_moment(&self, k: i32) -> Result<f64> {
        let alpha = self.params.alpha;
        let upper = self.horizon() + self.reach;
        let mut breaks = self.table_breaks.clone();
        breaks.push(self.reach);
        Ok(integrate(
            |s| s.powi(k) * (-alpha * s).exp() * self.gap_kernel(s),
            0.0,
            upper,
            &breaks,
            &self.inner,
        )?
        .value)
    }
}

/// `rho = ∫∫ alpha² e^{-alpha(u+v)} J(u) J(v) / J(u+v) du dv`.
pub fn rho_hom(params: &HomogeneousParams, quad: &QuadConfig) -> Result<f64> {
    Ok(HomogeneousEvaluator::new(params, quad)?.rho())
}

pub fn rbar(params: &HomogeneousParams, z: f64, quad: &QuadConfig) -> Result<RbarValues> {
    HomogeneousEvaluator::new(params, quad)?.rbar(z)
}

pub fn variance_constants(
    params: &HomogeneousParams,
    quad: &QuadConfig,
) -> Result<VarianceConstants> {
    HomogeneousEvaluator::new(params, quad)?.variance_constants()
}

pub fn variance_exact(params: &HomogeneousParams, window: f64, quad: &QuadConfig) -> Result<f64> {
    Ok(HomogeneousEvaluator::new(params, quad)?
        .variance_exact(window)?
        .value)
}
