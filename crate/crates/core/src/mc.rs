//! Replicated simulation and the statistical checks built on it.
//!
//! Replication `i` draws from `RngStream::new(seed, i)`. Replications run on
//! the current rayon pool and are collected in index order before any
//! reduction, so every result is independent of the number of workers.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulas::general::{mean_anchored_count, mean_clone_count, r_one_point, r_two_point};
use crate::formulas::homogeneous::{HomogeneousEvaluator, HomogeneousParams};
use crate::formulas::limits::{inhomogeneous_bounds, InhomogeneousRanges};
use crate::model::ModelSpec;
use crate::quad::QuadConfig;
use crate::rng::RngStream;
use crate::sampler::{
    count_anchored_covering, count_covering, in_ocean, islands_on, left_ends_via_right_ends,
    ocean_measure, pad_width, sample_anchors_on, sample_clones_on, theta_from, LeftEndSampler,
    DEFAULT_PAD_EPS,
};
use crate::stats::{
    chi_square_gof, chi_square_two_sample, covariance, ks_standard_normal, mean, pairwise_sum,
    poisson_expected, summarize,
};

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool
/// when `threads` is `None`.
pub fn with_threads<T, F>(threads: Option<usize>, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::arg("thread count must be >= 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::arg(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// `f` applied to replications `0..reps`, in index order.
fn replicate<T, F>(reps: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&RngStream) -> Result<T> + Sync,
{
    (0..reps as u64)
        .into_par_iter()
        .map(|i| f(&RngStream::new(seed, i)))
        .collect()
}

/// Empirical moments of the ocean measure `O([0, G])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OceanStats {
    pub reps: usize,
    pub window: f64,
    pub seed: u64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub third_central_moment: f64,
    pub third_central_moment_se: f64,
}

/// Ocean measure of `[0, window]` for each replication.
pub fn ocean_samples(spec: &ModelSpec, window: f64, reps: usize, seed: u64) -> Result<Vec<f64>> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::arg(format!("window must be positive, got {window}")));
    }
    let pad = pad_width(spec, DEFAULT_PAD_EPS)?;
    replicate(reps, seed, |s| {
        let isl = islands_on(spec, 0.0, window, pad, s)?;
        Ok(ocean_measure(&isl, 0.0, window))
    })
}

pub fn estimate_ocean(spec: &ModelSpec, window: f64, reps: usize, seed: u64) -> Result<OceanStats> {
    if reps < 2 {
        return Err(Error::arg(format!(
            "need at least two replications, got {reps}"
        )));
    }
    let xs = ocean_samples(spec, window, reps, seed)?;
    let s = summarize(&xs)?;
    Ok(OceanStats {
        reps,
        window,
        seed,
        mean: s.mean,
        mean_se: s.mean_se,
        variance: s.variance,
        variance_se: s.variance_se,
        third_central_moment: s.third,
        third_central_moment_se: s.third_se,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The input makes the statistic meaningless, e.g. a deterministic ocean.
    Degenerate,
    /// Not enough signal to decide, e.g. no clone ever covers the point.
    Inconclusive,
}

/// Outcome of one statistical or numerical check. `pass` is false only for
/// a `Fail` verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub z_score: Option<f64>,
    pub pass: bool,
    pub verdict: Verdict,
    pub seed: u64,
    pub reps: usize,
    pub details: BTreeMap<String, f64>,
}

impl TestReport {
    fn new(name: &str, seed: u64, reps: usize) -> Self {
        TestReport {
            name: name.to_string(),
            statistic: 0.0,
            p_value: None,
            z_score: None,
            pass: true,
            verdict: Verdict::Pass,
            seed,
            reps,
            details: BTreeMap::new(),
        }
    }

    fn decide(mut self, pass: bool) -> Self {
        self.pass = pass;
        self.verdict = if pass { Verdict::Pass } else { Verdict::Fail };
        self
    }

    fn with_verdict(mut self, verdict: Verdict) -> Self {
        self.verdict = verdict;
        self.pass = verdict != Verdict::Fail;
        self
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    /// One summary line for terminal output.
    pub fn summary_line(&self) -> String {
        let mut line = format!(
            "{:<28} {:<12} statistic={:.6e}",
            self.name,
            format!("{:?}", self.verdict).to_uppercase(),
            self.statistic
        );
        if let Some(p) = self.p_value {
            line.push_str(&format!(" p={p:.4}"));
        }
        if let Some(z) = self.z_score {
            line.push_str(&format!(" z={z:.3}"));
        }
        line
    }
}

/// One CSV row per report; details are left to the JSON form.
pub fn write_reports_csv<W: Write>(reports: &[TestReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record([
        "test",
        "verdict",
        "pass",
        "statistic",
        "p_value",
        "z_score",
        "seed",
        "reps",
    ])
    .map_err(io)?;
    let opt = |v: Option<f64>| v.map(crate::sampler::fmt_f64).unwrap_or_default();
    for r in reports {
        w.write_record([
            r.name.clone(),
            format!("{:?}", r.verdict).to_lowercase(),
            r.pass.to_string(),
            crate::sampler::fmt_f64(r.statistic),
            opt(r.p_value),
            opt(r.z_score),
            r.seed.to_string(),
            r.reps.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn bernoulli_mean(xs: &[bool]) -> f64 {
    xs.iter().filter(|&&b| b).count() as f64 / xs.len() as f64
}

/// Monte Carlo check that the events `{z in ocean}` and `{z2 in ocean}` are
/// positively correlated. Passes when the covariance estimate exceeds
/// `-3` standard errors.
pub fn fkg_test(spec: &ModelSpec, z: f64, z2: f64, reps: usize, seed: u64) -> Result<TestReport> {
    if reps < 1000 {
        return Err(Error::arg(format!(
            "fkg_test needs reps >= 1000, got {reps}"
        )));
    }
    if !(z.is_finite() && z2.is_finite()) {
        return Err(Error::arg("fkg_test points must be finite"));
    }
    let pad = pad_width(spec, DEFAULT_PAD_EPS)?;
    let pairs = replicate(reps, seed, |s| {
        let isl = islands_on(spec, z.min(z2), z.max(z2), pad, s)?;
        Ok((in_ocean(&isl, z), in_ocean(&isl, z2)))
    })?;
    let a: Vec<bool> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<bool> = pairs.iter().map(|p| p.1).collect();
    let ab: Vec<bool> = pairs.iter().map(|p| p.0 && p.1).collect();
    let (pa, pb, pab) = (bernoulli_mean(&a), bernoulli_mean(&b), bernoulli_mean(&ab));
    let diff = pab - pa * pb;
    // Influence function of p_ab - p_a p_b.
    let infl: Vec<f64> = pairs
        .iter()
        .map(|&(x, y)| {
            let (x, y) = (f64::from(u8::from(x)), f64::from(u8::from(y)));
            (x * y - pab) - pb * (x - pa) - pa * (y - pb)
        })
        .collect();
    let n = reps as f64;
    let sq: Vec<f64> = infl.iter().map(|v| v * v).collect();
    let se = (pairwise_sum(&sq) / (n - 1.0) / n).sqrt();
    let bern_se = |p: f64| (p * (1.0 - p) / n).sqrt();
    let mut rep = TestReport::new("fkg", seed, reps)
        .detail("z", z)
        .detail("z2", z2)
        .detail("joint", pab)
        .detail("joint_se", bern_se(pab))
        .detail("first", pa)
        .detail("first_se", bern_se(pa))
        .detail("second", pb)
        .detail("second_se", bern_se(pb))
        .detail("difference", diff)
        .detail("difference_se", se);
    rep.statistic = diff;
    if se == 0.0 {
        return Ok(rep.with_verdict(Verdict::Degenerate));
    }
    rep.z_score = Some(diff / se);
    Ok(rep.decide(diff > -3.0 * se))
}

/// Stationary constants needed to normalise `Theta_G`.
struct Normalisation {
    rho: f64,
    nu: f64,
}

fn normalisation(spec: &ModelSpec, quad: &QuadConfig) -> Result<Option<Normalisation>> {
    let (k, a, law) = spec
        .homogeneous_params()
        .ok_or_else(|| Error::arg("this test needs a homogeneous model"))?;
    if k == 0.0 || a == 0.0 || law.is_degenerate_zero() {
        return Ok(None);
    }
    let ev = HomogeneousEvaluator::new(&HomogeneousParams::new(k, a, law.clone())?, quad)?;
    let nu = ev.variance_constants()?.nu;
    if !(nu > 0.0) {
        return Ok(None);
    }
    Ok(Some(Normalisation { rho: ev.rho(), nu }))
}

/// Kolmogorov–Smirnov test of `Theta_G(1) = (O_G - rho G) / sqrt(nu G)`
/// against the standard normal. Passes at `p > 0.01`.
pub fn clt_test(
    spec: &ModelSpec,
    window: f64,
    reps: usize,
    seed: u64,
    quad: &QuadConfig,
) -> Result<TestReport> {
    if reps < 500 {
        return Err(Error::arg(format!(
            "clt_test needs reps >= 500 for the asymptotic p-value, got {reps}"
        )));
    }
    let Some(norm) = normalisation(spec, quad)? else {
        return Ok(TestReport::new("clt", seed, reps).with_verdict(Verdict::Degenerate));
    };
    let scale = (norm.nu * window).sqrt();
    let theta: Vec<f64> = ocean_samples(spec, window, reps, seed)?
        .into_iter()
        .map(|o| (o - norm.rho * window) / scale)
        .collect();
    let (d, p) = ks_standard_normal(&theta)?;
    let s = summarize(&theta)?;
    let mut rep = TestReport::new("clt", seed, reps)
        .detail("rho", norm.rho)
        .detail("nu", norm.nu)
        .detail("theta_mean", s.mean)
        .detail("theta_mean_se", s.mean_se)
        .detail("theta_variance", s.variance);
    rep.statistic = d;
    rep.p_value = Some(p);
    Ok(rep.decide(p > 0.01))
}

/// Compares the empirical covariance of `Theta_G(s)` and `Theta_G(t)` with
/// `min(s, t)` for every pair of grid points, diagonal included. Passes when
/// every pair lies within 3 standard errors.
pub fn wiener_covariance_test(
    spec: &ModelSpec,
    window: f64,
    grid: &[f64],
    reps: usize,
    seed: u64,
    quad: &QuadConfig,
) -> Result<TestReport> {
    if grid.is_empty() || grid.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::arg(
            "covariance grid must be non-empty and inside (0, 1]",
        ));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("covariance grid must be strictly increasing"));
    }
    if reps < 2 {
        return Err(Error::arg("need at least two replications"));
    }
    let Some(norm) = normalisation(spec, quad)? else {
        return Ok(
            TestReport::new("wiener_covariance", seed, reps).with_verdict(Verdict::Degenerate)
        );
    };
    let pad = pad_width(spec, DEFAULT_PAD_EPS)?;
    let paths = replicate(reps, seed, |s| {
        let isl = islands_on(spec, 0.0, window, pad, s)?;
        Ok(theta_from(&isl, window, grid, norm.rho, norm.nu))
    })?;
    let column = |k: usize| paths.iter().map(|p| p[k]).collect::<Vec<f64>>();
    let mut rep = TestReport::new("wiener_covariance", seed, reps);
    let mut worst = 0.0f64;
    for i in 0..grid.len() {
        for j in i..grid.len() {
            let (c, se) = covariance(&column(i), &column(j))?;
            let z = (c - grid[i]) / se;
            worst = worst.max(z.abs());
            let key = format!("{}_{}", grid[i], grid[j]);
            rep = rep
                .detail(&format!("cov_{key}"), c)
                .detail(&format!("se_{key}"), se);
        }
    }
    rep.statistic = worst;
    rep.z_score = Some(worst);
    Ok(rep.decide(worst <= 3.0))
}

/// Which clones a dispersion test counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountKind {
    Clones,
    Anchored,
}

/// Dispersion of the number of (anchored) clones covering `x`.
///
/// The statistic is `variance / mean` and the z-score is that of
/// `variance - mean`. Clone counts pass when they are consistent with a
/// Poisson law: `|z| < 3` and a chi-square fit against the exact mean with
/// `p > 0.01`. Anchored counts pass when `z > 3`.
pub fn count_dispersion_test(
    spec: &ModelSpec,
    x: f64,
    kind: CountKind,
    reps: usize,
    seed: u64,
    quad: &QuadConfig,
) -> Result<TestReport> {
    if reps < 10_000 {
        return Err(Error::arg(format!(
            "count_dispersion_test needs reps >= 10000, got {reps}"
        )));
    }
    let pad = pad_width(spec, DEFAULT_PAD_EPS)?;
    let counts = replicate(reps, seed, |s| {
        let clones = sample_clones_on(spec, x, x, pad, s)?;
        Ok(match kind {
            CountKind::Clones => count_covering(&clones, x),
            CountKind::Anchored => {
                count_anchored_covering(&clones, &sample_anchors_on(spec, x, x, pad, s)?, x)
            }
        })
    })?;
    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let name = match kind {
        CountKind::Clones => "dispersion_clones",
        CountKind::Anchored => "dispersion_anchored",
    };
    let s = summarize(&xs)?;
    let expected = match kind {
        CountKind::Clones => mean_clone_count(spec, x, quad)?,
        CountKind::Anchored => mean_anchored_count(spec, x, quad)?,
    };
    let mut rep = TestReport::new(name, seed, reps)
        .detail("mean", s.mean)
        .detail("variance", s.variance)
        .detail("expected_mean", expected);
    if s.mean == 0.0 {
        return Ok(rep.with_verdict(Verdict::Inconclusive));
    }
    let infl: Vec<f64> = xs.iter().map(|&v| (v - s.mean).powi(2) - v).collect();
    let n = reps as f64;
    let im = mean(&infl);
    let dev: Vec<f64> = infl.iter().map(|v| (v - im) * (v - im)).collect();
    let se = (pairwise_sum(&dev) / (n - 1.0) / n).sqrt();
    let z = (s.variance - s.mean) / se;
    rep.statistic = s.variance / s.mean;
    rep.z_score = Some(z);
    rep = rep.detail("excess_se", se);
    match kind {
        CountKind::Clones => {
            let kmax = counts.iter().copied().max().unwrap_or(0) + 1;
            let mut observed = vec![0.0; kmax + 1];
            for &c in &counts {
                observed[c] += 1.0;
            }
            let exp = poisson_expected(expected, reps, kmax)?;
            let (chi, df, p) = chi_square_gof(&observed, &exp, 5.0)?;
            rep = rep.detail("chi_square", chi).detail("df", df as f64);
            rep.p_value = Some(p);
            Ok(rep.decide(z.abs() < 3.0 && p > 0.01))
        }
        CountKind::Anchored => Ok(rep.decide(z > 3.0)),
    }
}

/// Two-sample chi-square comparison of clones drawn through the left-end
/// description on `[lo, hi]` with clones drawn through right ends. Boxes are
/// `left_bins` equal slices of `[lo, hi]` times `length_bins` pooled
/// length quantiles. Passes at `p > 0.01`.
#[allow(clippy::too_many_arguments)]
pub fn left_end_equivalence_test(
    spec: &ModelSpec,
    lo: f64,
    hi: f64,
    boxes: (usize, usize),
    reps: usize,
    seed: u64,
    quad: &QuadConfig,
) -> Result<TestReport> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::arg(format!("window [{lo}, {hi}] is empty")));
    }
    let (left_bins, length_bins) = boxes;
    if left_bins == 0 || length_bins == 0 || reps == 0 {
        return Err(Error::arg("boxes and reps must be positive"));
    }
    let pad = pad_width(spec, DEFAULT_PAD_EPS)?;
    let sampler = LeftEndSampler::new(spec, quad);
    let draws = replicate(reps, seed, |s| {
        Ok((
            sampler.sample(lo, hi, s)?,
            left_ends_via_right_ends(spec, lo, hi, pad, s),
        ))
    })?;
    let via_left: Vec<(f64, f64)> = draws.iter().flat_map(|d| d.0.iter().copied()).collect();
    let via_right: Vec<(f64, f64)> = draws.iter().flat_map(|d| d.1.iter().copied()).collect();

    let mut lengths: Vec<f64> = via_left.iter().chain(&via_right).map(|p| p.1).collect();
    lengths.sort_by(f64::total_cmp);
    let mut cuts: Vec<f64> = (1..length_bins)
        .filter_map(|k| lengths.get(k * lengths.len() / length_bins).copied())
        .collect();
    cuts.dedup();
    let width = (hi - lo) / left_bins as f64;
    let cell = |&(y, t): &(f64, f64)| {
        let i = (((y - lo) / width) as usize).min(left_bins - 1);
        let j = cuts.partition_point(|&c| c <= t);
        i * (cuts.len() + 1) + j
    };
    let cells = left_bins * (cuts.len() + 1);
    let mut r = vec![0.0; cells];
    let mut s = vec![0.0; cells];
    for p in &via_left {
        r[cell(p)] += 1.0;
    }
    for p in &via_right {
        s[cell(p)] += 1.0;
    }
    let (chi, df, p) = chi_square_two_sample(&r, &s, 10.0)?;
    let mut rep = TestReport::new("left_end_equivalence", seed, reps)
        .detail("count_left_route", via_left.len() as f64)
        .detail("count_right_route", via_right.len() as f64)
        .detail("df", df as f64);
    rep.statistic = chi;
    rep.p_value = Some(p);
    Ok(rep.decide(p > 0.01))
}

/// Monte Carlo check that the ocean fraction and the variance slope of
/// `spec` on `[0, window]` stay inside the envelopes for the given ranges,
/// each up to 3 standard errors.
pub fn envelope_test(
    spec: &ModelSpec,
    ranges: &InhomogeneousRanges,
    window: f64,
    reps: usize,
    seed: u64,
    quad: &QuadConfig,
) -> Result<TestReport> {
    let b = inhomogeneous_bounds(ranges, quad)?;
    let s = estimate_ocean(spec, window, reps, seed)?;
    let (frac, frac_se) = (s.mean / window, s.mean_se / window);
    let (slope, slope_se) = (s.variance / window, s.variance_se / window);
    // Smallest margin in standard errors; negative means outside.
    let margin = |v: f64, se: f64, lo: f64, hi: f64| {
        let gap = (v - lo).min(hi - v);
        if se > 0.0 {
            gap / se
        } else if gap >= 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    };
    let worst = margin(frac, frac_se, b.rho_minus, b.rho_plus)
        .min(margin(slope, slope_se, b.nu_minus, b.nu_plus));
    let mut rep = TestReport::new("envelope", seed, reps)
        .detail("ocean_fraction", frac)
        .detail("ocean_fraction_se", frac_se)
        .detail("variance_slope", slope)
        .detail("variance_slope_se", slope_se)
        .detail("rho_minus", b.rho_minus)
        .detail("rho_plus", b.rho_plus)
        .detail("nu_minus", b.nu_minus)
        .detail("nu_plus", b.nu_plus);
    rep.statistic = worst;
    rep.z_score = Some(worst);
    Ok(rep.decide(worst >= -3.0))
}

/// Quadrature check that `r(z, z2) - r(z) r(z2) >= -tol` on all pairs of
/// `points`.
pub fn fkg_quadrature_check(
    spec: &ModelSpec,
    points: &[f64],
    tol: f64,
    quad: &QuadConfig,
) -> Result<TestReport> {
    let singles = points
        .iter()
        .map(|&z| r_one_point(spec, z, quad))
        .collect::<Result<Vec<f64>>>()?;
    let mut worst = f64::INFINITY;
    for (i, &z) in points.iter().enumerate() {
        for (j, &z2) in points.iter().enumerate().skip(i) {
            let joint = r_two_point(spec, z, z2, quad)?.total;
            worst = worst.min(joint - singles[i] * singles[j]);
        }
    }
    let mut rep = TestReport::new("fkg_quadrature", 0, 0).detail("tolerance", tol);
    rep.statistic = worst;
    Ok(rep.decide(worst >= -tol))
}

/// Checks `nu G - lambda <= variance_exact(G) <= nu G` on the given windows,
/// allowing the combined quadrature error.
pub fn sandwich_check(
    params: &HomogeneousParams,
    windows: &[f64],
    quad: &QuadConfig,
) -> Result<TestReport> {
    let ev = HomogeneousEvaluator::new(params, quad)?;
    let vc = ev.variance_constants()?;
    let mut worst = f64::INFINITY;
    for &g in windows {
        let v = ev.variance_exact(g)?;
        let slack = v.error + g * vc.nu_error + vc.lambda_error + quad.abs_tol;
        let lower = v.value - (vc.nu * g - vc.lambda);
        let upper = vc.nu * g - v.value;
        worst = worst.min(lower + slack).min(upper + slack);
    }
    let mut rep = TestReport::new("variance_sandwich", 0, 0)
        .detail("nu", vc.nu)
        .detail("lambda", vc.lambda);
    rep.statistic = worst;
    Ok(rep.decide(worst >= 0.0))
}
