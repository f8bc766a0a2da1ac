//! Sample moments and the goodness-of-fit tests used by the Monte Carlo
//! battery.

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Normal, Poisson};

use crate::error::{Error, Result};

/// Sum in a fixed binary-tree order, so the result depends only on the
/// order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Biased central moments `m_k = n^{-1} Σ (x - mean)^k` for `k = 2..=max`.
/// Index `k` of the returned vector holds `m_k`; entries 0 and 1 are 1 and 0.
pub fn central_moments(xs: &[f64], max: usize) -> Vec<f64> {
    let m = mean(xs);
    let n = xs.len() as f64;
    let mut out = vec![1.0, 0.0];
    let mut buf = vec![0.0; xs.len()];
    for k in 2..=max {
        for (b, &x) in buf.iter_mut().zip(xs) {
            *b = (x - m).powi(k as i32);
        }
        out.push(pairwise_sum(&buf) / n);
    }
    out
}

/// Sample summary of one scalar over replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub mean_se: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// From the fourth central moment: `sqrt((m4 - (n-3)/(n-1) s⁴) / n)`.
    pub variance_se: f64,
    /// Unbiased third cumulant estimator, or the raw third central moment
    /// below three samples.
    pub third: f64,
    /// Delta-method standard error `sqrt((m6 - m3² - 6 m4 m2 + 9 m2³) / n)`.
    pub third_se: f64,
}

pub fn summarize(xs: &[f64]) -> Result<Summary> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::arg(format!("need at least two samples, got {n}")));
    }
    let nf = n as f64;
    let m = central_moments(xs, 6);
    let variance = m[2] * nf / (nf - 1.0);
    let fourth_term = m[4] - (nf - 3.0) / (nf - 1.0) * variance * variance;
    let third = if n >= 3 {
        m[3] * nf * nf / ((nf - 1.0) * (nf - 2.0))
    } else {
        m[3]
    };
    let third_var = m[6] - m[3] * m[3] - 6.0 * m[4] * m[2] + 9.0 * m[2].powi(3);
    Ok(Summary {
        n,
        mean: mean(xs),
        mean_se: (variance / nf).sqrt(),
        variance,
        variance_se: (fourth_term.max(0.0) / nf).sqrt(),
        third,
        third_se: (third_var.max(0.0) / nf).sqrt(),
    })
}

/// Sample covariance and the standard error of the product moment.
pub fn covariance(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::arg(
            "covariance needs two equally long samples of size >= 2",
        ));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let prods: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .collect();
    let n = xs.len() as f64;
    let c = pairwise_sum(&prods) / (n - 1.0);
    let dev: Vec<f64> = prods.iter().map(|p| (p - c) * (p - c)).collect();
    let se = (pairwise_sum(&dev) / (n - 1.0) / n).sqrt();
    Ok((c, se))
}

/// Asymptotic Kolmogorov tail `P(K > x) = 2 Σ_{k>=1} (-1)^{k-1} e^{-2 k² x²}`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // The alternating series converges slowly here; the dual form
        // sqrt(2π)/x Σ e^{-(2k-1)² π² / (8x²)} gives the cdf directly.
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let mut cdf = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            cdf += (-j * j * c).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / x;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against the standard normal.
/// Returns `(D, p)` with the asymptotic p-value `Q((sqrt(n) + 0.12 + 0.11/sqrt(n)) D)`.
pub fn ks_standard_normal(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(Error::arg("KS test needs a non-empty sample"));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = normal.cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    Ok((d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)))
}

/// Chi-square goodness of fit of observed counts to expected counts. Bins
/// are merged left to right until each expected count reaches `min_expected`.
/// Returns `(statistic, degrees of freedom, p)`.
pub fn chi_square_gof(
    observed: &[f64],
    expected: &[f64],
    min_expected: f64,
) -> Result<(f64, usize, f64)> {
    if observed.len() != expected.len() {
        return Err(Error::arg("observed and expected bins differ in number"));
    }
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&oi, &ei) in observed.iter().zip(expected) {
        o += oi;
        e += ei;
        if e >= min_expected {
            bins.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => bins.push((o, e)),
        }
    }
    if bins.len() < 2 {
        return Err(Error::arg(
            "chi-square test needs at least two bins after pooling",
        ));
    }
    let stat: f64 = bins.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let df = bins.len() - 1;
    Ok((stat, df, chi_square_sf(stat, df as f64)))
}

/// Two-sample chi-square for Poisson counts: under equal intensities
/// `(r - s) / sqrt(r + s)` is approximately standard normal per bin. Bins with
/// fewer than `min_total` combined counts are pooled into one.
/// Returns `(statistic, degrees of freedom, p)`; with no counts at all the
/// statistic is 0 and p is 1.
pub fn chi_square_two_sample(r: &[f64], s: &[f64], min_total: f64) -> Result<(f64, usize, f64)> {
    if r.len() != s.len() {
        return Err(Error::arg("two-sample bins differ in number"));
    }
    let mut pooled = (0.0, 0.0);
    let mut stat = 0.0;
    let mut df = 0usize;
    for (&ri, &si) in r.iter().zip(s) {
        if ri + si >= min_total {
            stat += (ri - si) * (ri - si) / (ri + si);
            df += 1;
        } else {
            pooled.0 += ri;
            pooled.1 += si;
        }
    }
    if pooled.0 + pooled.1 > 0.0 {
        stat += (pooled.0 - pooled.1).powi(2) / (pooled.0 + pooled.1);
        df += 1;
    }
    if df == 0 {
        return Ok((0.0, 0, 1.0));
    }
    Ok((stat, df, chi_square_sf(stat, df as f64)))
}

pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    ChiSquared::new(df).map_or(f64::NAN, |d| d.sf(x))
}

/// Expected Poisson counts for `0..=kmax`, the last bin holding the tail.
pub fn poisson_expected(mean: f64, n: usize, kmax: usize) -> Result<Vec<f64>> {
    let law = Poisson::new(mean).map_err(|e| Error::arg(format!("Poisson mean {mean}: {e}")))?;
    let mut out: Vec<f64> = (0..kmax).map(|k| n as f64 * law.pmf(k as u64)).collect();
    let head: f64 = out.iter().sum();
    out.push((n as f64 - head).max(0.0));
    Ok(out)
}
