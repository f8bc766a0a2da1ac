//! Adaptive Gauss-Kronrod quadrature and piecewise Chebyshev tables.
//!
//! Every improper integral in the crate is reduced to integrals over finite
//! intervals, mostly via the substitution `x = -ln(s) / rate` which turns an
//! exponentially weighted half line into the unit interval.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and limits shared by all quadrature routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Neglected mass when a semi-infinite integral is truncated.
    pub tail_mass: f64,
    pub max_subdiv: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            abs_tol: 1e-9,
            rel_tol: 1e-8,
            tail_mass: 1e-12,
            max_subdiv: 1 << 14,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.abs_tol) && positive(self.rel_tol) && positive(self.tail_mass)) {
            return Err(Error::arg(
                "quadrature tolerances must be finite and positive",
            ));
        }
        if self.max_subdiv == 0 {
            return Err(Error::arg("max_subdiv must be positive"));
        }
        if self.tail_mass >= self.abs_tol {
            return Err(Error::arg("tail_mass must be smaller than abs_tol"));
        }
        Ok(())
    }

    /// Same config with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> QuadConfig {
        QuadConfig {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

struct RuleResult {
    value: f64,
    error: f64,
    /// Integral of |f|, used to detect the round-off floor.
    abs: f64,
}

fn gk21<F>(f: &mut F, a: f64, b: f64) -> Result<RuleResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = fc.abs() * WGK[10];
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.is_finite() {
        return Err(Error::numeric("Gauss-Kronrod rule", value, f64::INFINITY));
    }
    Ok(RuleResult {
        value,
        error,
        abs: res_abs,
    })
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive 21-point Gauss-Kronrod integration of a fallible
/// integrand over `[a, b]`, with the interval first split at `breaks`.
pub fn integrate_try<F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::arg("integration bounds must be finite"));
    }
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evals: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut nodes = vec![lo];
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&p| p.is_finite() && p > lo && p < hi)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    nodes.extend(inner);
    nodes.push(hi);

    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    for w in nodes.windows(2) {
        let r = gk21(&mut f, w[0], w[1])?;
        evals += 21;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value: r.value,
            error: r.error,
            abs: r.abs,
        });
    }

    let mut total: f64 = heap.iter().map(|s| s.value).sum();
    let mut total_err: f64 = heap.iter().map(|s| s.error).sum();
    loop {
        let target = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total_err <= target || heap.is_empty() {
            return Ok(Estimate {
                value: sign * total,
                error: total_err,
                evals,
            });
        }
        if heap.len() >= cfg.max_subdiv {
            return Err(Error::numeric(
                "adaptive quadrature",
                sign * total,
                total_err,
            ));
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        let at_floor = worst.error <= 50.0 * f64::EPSILON * worst.abs.max(f64::MIN_POSITIVE);
        if at_floor || mid <= worst.a || mid >= worst.b {
            // Round-off limited: splitting cannot improve this piece, so it
            // stays in the totals but leaves the work queue.
            continue;
        }
        let left = gk21(&mut f, worst.a, mid)?;
        let right = gk21(&mut f, mid, worst.b)?;
        evals += 42;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: left.value,
            error: left.error,
            abs: left.abs,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: right.value,
            error: right.error,
            abs: right.abs,
        });
    }
}

/// Infallible-integrand convenience wrapper around [`integrate_try`].
pub fn integrate<F>(mut f: F, a: f64, b: f64, breaks: &[f64], cfg: &QuadConfig) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    integrate_try(|x| Ok(f(x)), a, b, breaks, cfg)
}

/// `∫_0^∞ rate·e^{-rate·x} h(x) dx`, computed as `∫_0^1 h(-ln(s)/rate) ds`.
///
/// `kinks` are positions on the x axis where `h` is not smooth.
pub fn integrate_exp_weighted<F>(
    mut h: F,
    rate: f64,
    kinks: &[f64],
    cfg: &QuadConfig,
) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::arg(
            "exponential weight needs a positive finite rate",
        ));
    }
    let breaks: Vec<f64> = kinks
        .iter()
        .filter(|&&k| k > 0.0)
        .map(|&k| (-rate * k).exp())
        .collect();
    integrate_try(
        |s| {
            if s <= 0.0 {
                return Ok(0.0);
            }
            h(-s.ln() / rate)
        },
        0.0,
        1.0,
        &breaks,
        cfg,
    )
}

/// Same integral when `h` is constant on `[flat_from, ∞)`: the finite part is
/// integrated in `x` and the tail is `e^{-rate·flat_from} h(flat_from)`.
/// Avoids the algebraic endpoint behaviour the log map can create.
pub fn integrate_exp_weighted_flat<F>(
    mut h: F,
    rate: f64,
    kinks: &[f64],
    flat_from: f64,
    cfg: &QuadConfig,
) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::arg(
            "exponential weight needs a positive finite rate",
        ));
    }
    if !(flat_from.is_finite() && flat_from > 0.0) {
        return integrate_exp_weighted(h, rate, kinks, cfg);
    }
    let tail_weight = (-rate * flat_from).exp();
    let tail = if tail_weight > 0.0 {
        tail_weight * h(flat_from)?
    } else {
        0.0
    };
    let body = integrate_try(
        |x| Ok(rate * (-rate * x).exp() * h(x)?),
        0.0,
        flat_from,
        kinks,
        cfg,
    )?;
    Ok(Estimate {
        value: body.value + tail,
        ..body
    })
}

/// Piecewise Chebyshev interpolant on `[lo, hi]`, constant to the right of `hi`.
#[derive(Debug, Clone)]
pub struct ChebTable {
    lo: f64,
    hi: f64,
    panels: Vec<Panel>,
    beyond: f64,
}

#[derive(Debug, Clone)]
struct Panel {
    a: f64,
    b: f64,
    coeffs: Vec<f64>,
}

const CHEB_DEGREE: usize = 24;
const CHEB_MAX_DEPTH: usize = 40;

impl ChebTable {
    /// Samples `f` adaptively until the trailing Chebyshev coefficients on
    /// every panel fall below `tol`.
    pub fn build<F>(
        mut f: F,
        lo: f64,
        hi: f64,
        breaks: &[f64],
        tol: f64,
        beyond: f64,
    ) -> Result<Self>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::arg(
                "Chebyshev table needs a finite interval lo < hi",
            ));
        }
        let mut cuts: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|&p| p > lo && p < hi)
            .collect();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + y.abs()));
        let mut panels = Vec::new();
        for w in cuts.windows(2) {
            Self::fit(&mut f, w[0], w[1], tol, 0, &mut panels)?;
        }
        Ok(ChebTable {
            lo,
            hi,
            panels,
            beyond,
        })
    }

    fn fit<F>(f: &mut F, a: f64, b: f64, tol: f64, depth: usize, out: &mut Vec<Panel>) -> Result<()>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let n = CHEB_DEGREE;
        let mut vals = [0.0; CHEB_DEGREE + 1];
        for (j, v) in vals.iter_mut().enumerate() {
            let t = (std::f64::consts::PI * j as f64 / n as f64).cos();
            *v = f(0.5 * (a + b) + 0.5 * (b - a) * t)?;
        }
        let mut coeffs = vec![0.0; n + 1];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, v) in vals.iter().enumerate() {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                s += w * v * (std::f64::consts::PI * (k * j) as f64 / n as f64).cos();
            }
            *c = 2.0 * s / n as f64;
        }
        coeffs[0] *= 0.5;
        coeffs[n] *= 0.5;
        let tail = coeffs[n - 2..].iter().map(|c| c.abs()).fold(0.0, f64::max);
        if tail <= tol || depth >= CHEB_MAX_DEPTH {
            out.push(Panel { a, b, coeffs });
            return Ok(());
        }
        let mid = 0.5 * (a + b);
        Self::fit(f, a, mid, tol, depth + 1, out)?;
        Self::fit(f, mid, b, tol, depth + 1, out)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x > self.hi {
            return self.beyond;
        }
        let x = x.max(self.lo);
        let idx = self
            .panels
            .partition_point(|p| p.b < x)
            .min(self.panels.len() - 1);
        let p = &self.panels[idx];
        let t = (2.0 * x - p.a - p.b) / (p.b - p.a);
        // Clenshaw recurrence.
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in p.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + p.coeffs[0]
    }

    pub fn panels(&self) -> usize {
        self.panels.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> QuadConfig {
        QuadConfig {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            tail_mass: 1e-15,
            max_subdiv: 4096,
        }
    }

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, &[], &tight()).unwrap();
        assert!((r.value - 0.0).abs() < 1e-14);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let a = integrate(f64::exp, 0.0, 1.0, &[], &tight()).unwrap().value;
        let b = integrate(f64::exp, 1.0, 0.0, &[], &tight()).unwrap().value;
        assert!((a + b).abs() < 1e-15);
        assert!((a - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn kink_with_breakpoint_and_without() {
        let f = |x: f64| (x - 0.3).abs();
        let exact = 0.5 * 0.09 + 0.5 * 0.49;
        let with = integrate(f, 0.0, 1.0, &[0.3], &tight()).unwrap();
        assert!((with.value - exact).abs() < 1e-14);
        let without = integrate(f, 0.0, 1.0, &[], &tight()).unwrap();
        assert!((without.value - exact).abs() < 1e-12);
        assert!(without.evals > with.evals);
    }

    #[test]
    fn exponential_weight_maps_half_line() {
        // E[X^2] for X ~ Exp(2) is 2 / 4.
        let r = integrate_exp_weighted(|x| Ok(x * x), 2.0, &[], &tight()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);
        // E[min(X, 1)] for X ~ Exp(1) is 1 - e^{-1}.
        let r = integrate_exp_weighted(|x| Ok(x.min(1.0)), 1.0, &[1.0], &tight()).unwrap();
        let f = integrate_exp_weighted_flat(|x| Ok(x.min(1.0)), 1.0, &[], 1.0, &tight()).unwrap();
        assert!((f.value - r.value).abs() < 1e-13);
        assert!((r.value - (1.0 - (-1f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn subdivision_limit_reports_numeric_error() {
        let cfg = QuadConfig {
            max_subdiv: 2,
            ..tight()
        };
        let err = integrate(|x| (1.0 / x).sin(), 1e-6, 1.0, &[], &cfg).unwrap_err();
        assert!(matches!(err, Error::Numeric { .. }));
    }

    #[test]
    fn config_validation() {
        assert!(QuadConfig::default().validate().is_ok());
        let bad = QuadConfig {
            tail_mass: 1.0,
            ..QuadConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn chebyshev_table_reproduces_smooth_and_kinked_functions() {
        let f = |x: f64| Ok((-x).exp() * (1.0 + (x - 1.0).max(0.0)));
        let table = ChebTable::build(f, 0.0, 5.0, &[1.0], 1e-13, 0.0).unwrap();
        for i in 0..=500 {
            let x = i as f64 / 100.0;
            let want = (-x).exp() * (1.0 + (x - 1.0).max(0.0));
            assert!((table.eval(x) - want).abs() < 1e-12, "x={x}");
        }
        assert_eq!(table.eval(7.0), 0.0);
    }
}
