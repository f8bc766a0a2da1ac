//! Moments of the ocean measure `E(O_G^n)` for the homogeneous model by
//! randomised quasi-Monte Carlo.
//!
//! For sorted points `z_1 <= ... <= z_n` the n-point function sums over the
//! anchor content of each gap `(z_k, z_{k+1})`: none, exactly one anchor, or
//! two or more anchors of which only the extreme ones matter. Consecutive
//! anchors `p < q` with points `z_i..z_j` between them contribute the factor
//! `J(z_i - p) J(q - z_j) / J(q - p)`. Consecutive points separated by at
//! least one anchor contribute `1 / J(z_{k+1} - z_k)`: a clone covering both
//! would otherwise be excluded once on each side of the anchor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulas::homogeneous::HomogeneousParams;

/// Randomised quasi-Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QmcConfig {
    pub points_per_shift: usize,
    pub shifts: usize,
    pub seed: u64,
    /// Requested relative standard error; estimates above it are flagged.
    pub rel_tol: f64,
}

impl Default for QmcConfig {
    fn default() -> Self {
        QmcConfig {
            points_per_shift: 1 << 15,
            shifts: 16,
            seed: 0x5eed,
            rel_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QmcEstimate {
    pub value: f64,
    pub stderr: f64,
    /// False when `stderr` exceeds the requested tolerance.
    pub converged: bool,
}

/// Generator of the additive recurrence `frac(i · g)` with `g_k = φ_d^{-k}`,
/// where `φ_d` is the positive root of `x^{d+1} = x + 1`.
struct Kronecker {
    step: Vec<f64>,
}

impl Kronecker {
    fn new(dim: usize) -> Self {
        let mut phi = 2.0f64;
        for _ in 0..64 {
            phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
        }
        let step = (1..=dim)
            .map(|k| (1.0 / phi.powi(k as i32)).fract())
            .collect();
        Kronecker { step }
    }

    fn point(&self, i: usize, shift: &[f64], out: &mut [f64]) {
        for ((o, g), s) in out.iter_mut().zip(&self.step).zip(shift) {
            *o = (s + (i as f64) * g).fract();
        }
    }
}

/// `E(O_G^n)` for `n >= 1`.
pub fn moment_qmc(
    params: &HomogeneousParams,
    window: f64,
    n: usize,
    cfg: &QmcConfig,
) -> Result<QmcEstimate> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::arg(format!("window must be positive, got {window}")));
    }
    if n == 0 {
        return Err(Error::arg("moment order must be >= 1"));
    }
    if !(params.kappa.is_finite()
        && params.kappa >= 0.0
        && params.alpha.is_finite()
        && params.alpha >= 0.0)
    {
        return Err(Error::arg("kappa and alpha must be finite and >= 0"));
    }
    if cfg.shifts < 2 || cfg.points_per_shift == 0 {
        return Err(Error::arg(
            "QMC needs at least two shifts and one point per shift",
        ));
    }
    let full = window.powi(n as i32);
    if params.kappa == 0.0 || params.alpha == 0.0 || params.lengths.is_degenerate_zero() {
        return Ok(QmcEstimate {
            value: full,
            stderr: 0.0,
            converged: true,
        });
    }
    let dim = n + 2 + 2 * (n - 1);
    let seq = Kronecker::new(dim);
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut means = Vec::with_capacity(cfg.shifts);
    let mut u = vec![0.0; dim];
    let mut work = Workspace::new(n);
    for _ in 0..cfg.shifts {
        let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let mut acc = 0.0;
        for i in 0..cfg.points_per_shift {
            seq.point(i, &shift, &mut u);
            acc += n_point_integrand(params, window, n, &u, &mut work);
        }
        means.push(acc / cfg.points_per_shift as f64);
    }
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (means.len() - 1) as f64;
    let value = full * m;
    let stderr = full * (var / means.len() as f64).sqrt();
    Ok(QmcEstimate {
        value,
        stderr,
        converged: stderr <= cfg.rel_tol * value.abs(),
    })
}

/// `E(O_G³)`.
pub fn third_moment(
    params: &HomogeneousParams,
    window: f64,
    cfg: &QmcConfig,
) -> Result<QmcEstimate> {
    moment_qmc(params, window, 3, cfg)
}

struct Workspace {
    z: Vec<f64>,
    /// Per gap: weight and anchor positions for each of the three types.
    gaps: Vec<[(f64, f64, f64); 3]>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            z: vec![0.0; n],
            gaps: vec![[(0.0, 0.0, 0.0); 3]; n.saturating_sub(1)],
        }
    }
}

/// `-ln(1 - u (1 - e^{-alpha d})) / alpha`: an exponential variable of rate
/// `alpha` conditioned to be below `d`.
fn truncated_exp(u: f64, alpha: f64, d: f64) -> f64 {
    -(u * (-alpha * d).exp_m1()).ln_1p() / alpha
}

fn n_point_integrand(
    p: &HomogeneousParams,
    window: f64,
    n: usize,
    u: &[f64],
    w: &mut Workspace,
) -> f64 {
    let alpha = p.alpha;
    for (z, &ui) in w.z.iter_mut().zip(&u[..n]) {
        *z = window * ui;
    }
    w.z.sort_by(f64::total_cmp);
    // Nearest anchors outside the outermost points.
    let left = w.z[0] + (1.0 - u[n]).ln() / alpha;
    let right = w.z[n - 1] - (1.0 - u[n + 1]).ln() / alpha;
    for k in 0..n - 1 {
        let (a, b) = (w.z[k], w.z[k + 1]);
        let d = b - a;
        let ua = u[n + 2 + 2 * k];
        let ub = u[n + 3 + 2 * k];
        let e = (-alpha * d).exp();
        let s1 = a + ua * d;
        let s2 = a + truncated_exp(ua, alpha, d);
        let t2 = b - truncated_exp(ub, alpha, d);
        let m = -(-alpha * d).exp_m1();
        let w2 = if s2 <= t2 { m * m } else { 0.0 };
        w.gaps[k] = [(e, 0.0, 0.0), (alpha * d * e, s1, s1), (w2, s2, t2)];
    }
    let mut total = 0.0;
    let combos = 3usize.pow((n - 1) as u32);
    for c in 0..combos {
        let mut code = c;
        let mut weight = 1.0;
        let mut factor = 1.0;
        let mut anchor = left;
        let mut first = 0;
        for k in 0..n - 1 {
            let kind = code % 3;
            code /= 3;
            let (gw, s, t) = w.gaps[k][kind];
            weight *= gw;
            if weight == 0.0 {
                break;
            }
            if kind > 0 {
                factor *= p.j_ratio(w.z[first] - anchor, s - w.z[k], s - anchor);
                factor *= p.j_exponent(w.z[k + 1] - w.z[k]).exp();
                anchor = t;
                first = k + 1;
            }
        }
        if weight == 0.0 {
            continue;
        }
        // Close the last segment at the right anchor.
        factor *= p.j_ratio(w.z[first] - anchor, right - w.z[n - 1], right - anchor);
        total += weight * factor;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::homogeneous::HomogeneousEvaluator;
    use crate::model::LengthLaw;
    use crate::quad::QuadConfig;

    fn hp(k: f64, a: f64) -> HomogeneousParams {
        HomogeneousParams {
            kappa: k,
            alpha: a,
            lengths: LengthLaw::deterministic(1.0).unwrap(),
        }
    }

    #[test]
    fn degenerate_cases_fill_the_window() {
        let cfg = QmcConfig::default();
        assert_eq!(third_moment(&hp(0.0, 1.0), 5.0, &cfg).unwrap().value, 125.0);
        assert_eq!(third_moment(&hp(1.0, 0.0), 5.0, &cfg).unwrap().value, 125.0);
    }

    #[test]
    fn low_orders_match_quadrature() {
        let p = hp(1.0, 1.0);
        let ev = HomogeneousEvaluator::new(&p, &QuadConfig::default()).unwrap();
        let cfg = QmcConfig::default();
        let g = 5.0;
        let m1 = moment_qmc(&p, g, 1, &cfg).unwrap();
        assert!(
            (m1.value - g * ev.rho()).abs() < 4.0 * m1.stderr + 1e-9,
            "{m1:?}"
        );
        let m2 = moment_qmc(&p, g, 2, &cfg).unwrap();
        let exact = ev.variance_exact(g).unwrap().value + (g * ev.rho()).powi(2);
        assert!(
            (m2.value - exact).abs() < 4.0 * m2.stderr + 1e-9,
            "{m2:?} vs {exact}"
        );
        assert!(m2.stderr < 1e-3 * exact);
    }
}
