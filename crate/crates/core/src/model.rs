//! Intensity measures, clone-length laws and the model specification.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadConfig};

/// Number of points at which a density intensity is checked against its
/// declared bound.
pub const DENSITY_AUDIT_POINTS: usize = 1024;

/// Rate function of a density intensity.
pub type RateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Intensity measure of a Poisson process on the line, `c(dx)` for clone
/// right ends or `a(dx)` for anchors.
#[derive(Clone)]
pub enum IntensityMeasure {
    Constant {
        rate: f64,
    },
    /// `rates[i]` applies on `[breakpoints[i-1], breakpoints[i])`, with
    /// `rates[0]` to the left of the first breakpoint and the last rate to the
    /// right of the last one.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        rates: Vec<f64>,
    },
    /// Rate `f(x)` on `support`, zero elsewhere, with `f <= bound`.
    Density {
        f: RateFn,
        bound: f64,
        support: (f64, f64),
    },
}

impl fmt::Debug for IntensityMeasure {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntensityMeasure::Constant { rate } => write!(out, "Constant({rate})"),
            IntensityMeasure::PiecewiseConstant { breakpoints, rates } => {
                write!(out, "PiecewiseConstant({breakpoints:?}, {rates:?})")
            }
            IntensityMeasure::Density { bound, support, .. } => {
                write!(out, "Density(bound={bound}, support={support:?})")
            }
        }
    }
}

impl IntensityMeasure {
    pub fn constant(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "rate must be finite and >= 0, got {rate}"
            )));
        }
        Ok(IntensityMeasure::Constant { rate })
    }

    pub fn piecewise(breakpoints: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidModel(format!(
                "piecewise intensity needs {} rates for {} breakpoints, got {}",
                breakpoints.len() + 1,
                breakpoints.len(),
                rates.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidModel(
                "breakpoints must be finite and strictly increasing".into(),
            ));
        }
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidModel(
                "piecewise rates must be finite and >= 0".into(),
            ));
        }
        Ok(IntensityMeasure::PiecewiseConstant { breakpoints, rates })
    }

    /// Builds a density intensity, rejecting it if `f` is negative or exceeds
    /// `bound` anywhere on a regular audit grid over the support.
    pub fn density<F>(f: F, bound: f64, lo: f64, hi: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidModel(
                "density support must be a finite interval lo < hi".into(),
            ));
        }
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::InvalidModel(
                "density bound must be finite and >= 0".into(),
            ));
        }
        let n = DENSITY_AUDIT_POINTS;
        for i in 0..n {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let v = f(x);
            if !(v.is_finite() && v >= 0.0 && v <= bound) {
                return Err(Error::InvalidModel(format!(
                    "density value {v} at x={x} violates 0 <= f <= {bound}"
                )));
            }
        }
        Ok(IntensityMeasure::Density {
            f: Arc::new(f),
            bound,
            support: (lo, hi),
        })
    }

    /// Rate (density with respect to Lebesgue measure) at `x`.
    pub fn rate_at(&self, x: f64) -> f64 {
        match self {
            IntensityMeasure::Constant { rate } => *rate,
            IntensityMeasure::PiecewiseConstant { breakpoints, rates } => {
                rates[breakpoints.partition_point(|&b| b <= x)]
            }
            IntensityMeasure::Density { f, support, .. } => {
                if x >= support.0 && x <= support.1 {
                    f(x)
                } else {
                    0.0
                }
            }
        }
    }

    /// An upper bound of the rate over the whole line.
    pub fn sup_rate(&self) -> f64 {
        match self {
            IntensityMeasure::Constant { rate } => *rate,
            IntensityMeasure::PiecewiseConstant { rates, .. } => {
                rates.iter().copied().fold(0.0, f64::max)
            }
            IntensityMeasure::Density { bound, .. } => *bound,
        }
    }

    /// Points where the rate may jump.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            IntensityMeasure::Constant { .. } => vec![],
            IntensityMeasure::PiecewiseConstant { breakpoints, .. } => breakpoints.clone(),
            IntensityMeasure::Density { support, .. } => vec![support.0, support.1],
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            IntensityMeasure::Constant { rate } => *rate == 0.0,
            IntensityMeasure::PiecewiseConstant { rates, .. } => rates.iter().all(|&r| r == 0.0),
            IntensityMeasure::Density { bound, .. } => *bound == 0.0,
        }
    }

    /// True when both half lines carry infinite mass, i.e. there is almost
    /// surely a point of the process on either side of any position.
    pub fn unbounded_both_sides(&self) -> bool {
        match self {
            IntensityMeasure::Constant { rate } => *rate > 0.0,
            IntensityMeasure::PiecewiseConstant { rates, .. } => {
                rates[0] > 0.0 && rates[rates.len() - 1] > 0.0
            }
            IntensityMeasure::Density { .. } => false,
        }
    }

    /// Measure of `[lo, hi]`.
    pub fn measure(&self, lo: f64, hi: f64, quad: &QuadConfig) -> Result<f64> {
        if !(lo <= hi) {
            return Err(Error::arg(format!("reversed interval [{lo}, {hi}]")));
        }
        if lo == hi {
            return Ok(0.0);
        }
        match self {
            IntensityMeasure::Density { f, support, .. } => {
                let a = lo.max(support.0);
                let b = hi.min(support.1);
                if a >= b {
                    return Ok(0.0);
                }
                let f = f.clone();
                Ok(integrate(|x| f(x), a, b, &[], quad)?.value)
            }
            _ => Ok(self.primitive(hi)? - self.primitive(lo)?),
        }
    }

    /// A primitive `F` of the rate, so that `measure(lo, hi) = F(hi) - F(lo)`.
    /// Closed form except for densities, where it needs quadrature.
    pub fn primitive(&self, x: f64) -> Result<f64> {
        match self {
            IntensityMeasure::Constant { rate } => Ok(rate * x),
            IntensityMeasure::PiecewiseConstant { breakpoints, rates } => {
                if breakpoints.is_empty() {
                    return Ok(rates[0] * x);
                }
                // Anchored at the first breakpoint.
                let b0 = breakpoints[0];
                if x <= b0 {
                    return Ok(rates[0] * (x - b0));
                }
                let mut acc = 0.0;
                for i in 0..breakpoints.len() {
                    let lo = breakpoints[i];
                    let hi = breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY);
                    if x <= hi {
                        return Ok(acc + rates[i + 1] * (x - lo));
                    }
                    acc += rates[i + 1] * (hi - lo);
                }
                unreachable!("last piece is unbounded")
            }
            IntensityMeasure::Density { support, .. } => {
                let x = x.clamp(support.0, support.1);
                self.measure(support.0, x, &QuadConfig::default())
            }
        }
    }

    /// Generalised inverse of [`primitive`](Self::primitive): the smallest `x`
    /// with `F(x) >= v`. Only available in closed form.
    pub fn inverse_primitive(&self, v: f64) -> Result<f64> {
        match self {
            IntensityMeasure::Constant { rate } => {
                if *rate == 0.0 {
                    return Err(Error::arg(
                        "cannot invert the primitive of a zero intensity",
                    ));
                }
                Ok(v / rate)
            }
            IntensityMeasure::PiecewiseConstant { breakpoints, rates } => {
                if breakpoints.is_empty() {
                    if rates[0] == 0.0 {
                        return Err(Error::arg(
                            "cannot invert the primitive of a zero intensity",
                        ));
                    }
                    return Ok(v / rates[0]);
                }
                let b0 = breakpoints[0];
                if v <= 0.0 {
                    if rates[0] == 0.0 {
                        return Err(Error::arg("primitive is bounded below"));
                    }
                    return Ok(b0 + v / rates[0]);
                }
                let mut acc = 0.0;
                for i in 0..breakpoints.len() {
                    let lo = breakpoints[i];
                    let hi = breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY);
                    let r = rates[i + 1];
                    let piece = r * (hi - lo);
                    if r > 0.0 && v <= acc + piece {
                        return Ok(lo + (v - acc) / r);
                    }
                    acc += piece;
                }
                Err(Error::arg("primitive is bounded above"))
            }
            IntensityMeasure::Density { .. } => Err(Error::Unsupported(
                "inverse primitive of a density intensity".into(),
            )),
        }
    }
}

/// Law of the length of a clone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LengthLaw {
    Deterministic {
        value: f64,
    },
    Exponential {
        mean: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    Atoms {
        values: Vec<f64>,
        probabilities: Vec<f64>,
    },
}

impl LengthLaw {
    pub fn deterministic(value: f64) -> Result<Self> {
        let law = LengthLaw::Deterministic { value };
        law.validate()?;
        Ok(law)
    }

    pub fn exponential(mean: f64) -> Result<Self> {
        let law = LengthLaw::Exponential { mean };
        law.validate()?;
        Ok(law)
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        let law = LengthLaw::Uniform { low, high };
        law.validate()?;
        Ok(law)
    }

    pub fn atoms(values: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        let law = LengthLaw::Atoms {
            values,
            probabilities,
        };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            LengthLaw::Deterministic { value } => value.is_finite() && *value >= 0.0,
            LengthLaw::Exponential { mean } => mean.is_finite() && *mean > 0.0,
            LengthLaw::Uniform { low, high } => {
                low.is_finite() && high.is_finite() && *low >= 0.0 && high > low
            }
            LengthLaw::Atoms {
                values,
                probabilities,
            } => {
                !values.is_empty()
                    && values.len() == probabilities.len()
                    && values.iter().all(|v| v.is_finite() && *v >= 0.0)
                    && probabilities.iter().all(|p| p.is_finite() && *p >= 0.0)
                    && (probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("invalid length law {self:?}")))
        }
    }

    /// `P(L >= t)`; equal to 1 for `t <= 0`.
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match self {
            LengthLaw::Deterministic { value } => {
                if t <= *value {
                    1.0
                } else {
                    0.0
                }
            }
            LengthLaw::Exponential { mean } => (-t / mean).exp(),
            LengthLaw::Uniform { low, high } => {
                if t <= *low {
                    1.0
                } else if t >= *high {
                    0.0
                } else {
                    (high - t) / (high - low)
                }
            }
            LengthLaw::Atoms {
                values,
                probabilities,
            } => values
                .iter()
                .zip(probabilities)
                .filter(|(v, _)| **v >= t)
                .map(|(_, p)| p)
                .sum(),
        }
    }

    /// `∫_u^∞ P(L >= t) dt = E[(L - u)^+]` for `u >= 0`, and `E[L] - u` below.
    pub fn tail_integral(&self, u: f64) -> f64 {
        if u < 0.0 {
            return self.mean() - u;
        }
        match self {
            LengthLaw::Deterministic { value } => (value - u).max(0.0),
            LengthLaw::Exponential { mean } => mean * (-u / mean).exp(),
            LengthLaw::Uniform { low, high } => {
                if u >= *high {
                    0.0
                } else if u >= *low {
                    (high - u) * (high - u) / (2.0 * (high - low))
                } else {
                    (low - u) + 0.5 * (high - low)
                }
            }
            LengthLaw::Atoms {
                values,
                probabilities,
            } => values
                .iter()
                .zip(probabilities)
                .map(|(v, p)| p * (v - u).max(0.0))
                .sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// Raw moment `E[L^k]`.
    pub fn moment(&self, k: u32) -> f64 {
        let ki = k as i32;
        match self {
            LengthLaw::Deterministic { value } => value.powi(ki),
            LengthLaw::Exponential { mean } => {
                (1..=k).map(f64::from).product::<f64>() * mean.powi(ki)
            }
            LengthLaw::Uniform { low, high } => {
                (high.powi(ki + 1) - low.powi(ki + 1)) / ((ki + 1) as f64 * (high - low))
            }
            LengthLaw::Atoms {
                values,
                probabilities,
            } => values
                .iter()
                .zip(probabilities)
                .map(|(v, p)| p * v.powi(ki))
                .sum(),
        }
    }

    /// `E[f(L); L >= from]`, exact for atomic laws and by quadrature against
    /// the density otherwise.
    pub fn expect_from<F>(&self, from: f64, mut f: F, quad: &QuadConfig) -> Result<f64>
    where
        F: FnMut(f64) -> f64,
    {
        match self {
            LengthLaw::Deterministic { value } => Ok(if *value >= from { f(*value) } else { 0.0 }),
            LengthLaw::Atoms {
                values,
                probabilities,
            } => Ok(values
                .iter()
                .zip(probabilities)
                .filter(|(v, _)| **v >= from)
                .map(|(v, p)| p * f(*v))
                .sum()),
            LengthLaw::Uniform { low, high } => {
                let a = low.max(from);
                if a >= *high {
                    return Ok(0.0);
                }
                let width = high - low;
                Ok(integrate(|t| f(t) / width, a, *high, &[], quad)?.value)
            }
            LengthLaw::Exponential { mean } => {
                // t = a + mean·(-ln s) maps the tail onto (0, 1].
                let a = from.max(0.0);
                let scale = (-a / mean).exp();
                let est = integrate(
                    |s| {
                        if s <= 0.0 {
                            0.0
                        } else {
                            f(a - mean * s.ln())
                        }
                    },
                    0.0,
                    1.0,
                    &[],
                    &quad.scaled(1.0 / scale.max(1e-300)),
                )?;
                Ok(scale * est.value)
            }
        }
    }

    pub fn expect<F>(&self, f: F, quad: &QuadConfig) -> Result<f64>
    where
        F: FnMut(f64) -> f64,
    {
        self.expect_from(0.0, f, quad)
    }

    /// Smallest `q` with `P(L <= q) >= p`, for `p` in `[0, 1)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::arg(format!("quantile level {p} outside [0, 1)")));
        }
        Ok(match self {
            LengthLaw::Deterministic { value } => *value,
            LengthLaw::Exponential { mean } => -mean * (1.0 - p).ln(),
            LengthLaw::Uniform { low, high } => low + p * (high - low),
            LengthLaw::Atoms {
                values,
                probabilities,
            } => {
                let mut order: Vec<usize> = (0..values.len()).collect();
                order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
                let mut cdf = 0.0;
                let mut q = values[order[order.len() - 1]];
                for &i in &order {
                    cdf += probabilities[i];
                    if cdf >= p && probabilities[i] > 0.0 {
                        q = values[i];
                        break;
                    }
                }
                q
            }
        })
    }

    /// Essential supremum, `None` for unbounded support.
    pub fn max_support(&self) -> Option<f64> {
        match self {
            LengthLaw::Deterministic { value } => Some(*value),
            LengthLaw::Exponential { .. } => None,
            LengthLaw::Uniform { high, .. } => Some(*high),
            LengthLaw::Atoms {
                values,
                probabilities,
            } => values
                .iter()
                .zip(probabilities)
                .filter(|(_, p)| **p > 0.0)
                .map(|(v, _)| *v)
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v)))),
        }
    }

    /// Lengths where the survival function is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            LengthLaw::Deterministic { value } => vec![*value],
            LengthLaw::Exponential { .. } => vec![],
            LengthLaw::Uniform { low, high } => vec![*low, *high],
            LengthLaw::Atoms {
                values,
                probabilities,
            } => values
                .iter()
                .zip(probabilities)
                .filter(|(_, p)| **p > 0.0)
                .map(|(v, _)| *v)
                .collect(),
        }
    }

    /// True when `L = 0` almost surely.
    pub fn is_degenerate_zero(&self) -> bool {
        self.max_support() == Some(0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LengthLaw::Deterministic { value } => *value,
            LengthLaw::Exponential { mean } => {
                Exp::new(1.0 / mean).expect("validated mean").sample(rng)
            }
            LengthLaw::Uniform { low, high } => rng.random_range(*low..*high),
            LengthLaw::Atoms {
                values,
                probabilities,
            } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probabilities) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                values[values.len() - 1]
            }
        }
    }
}

/// Clone-length laws as a function of the clone's right end.
#[derive(Debug, Clone, PartialEq)]
pub enum Lengths {
    Fixed(LengthLaw),
    /// `laws[i]` applies to right ends in `[breakpoints[i-1], breakpoints[i])`.
    ByPosition {
        breakpoints: Vec<f64>,
        laws: Vec<LengthLaw>,
    },
}

impl Lengths {
    pub fn by_position(breakpoints: Vec<f64>, laws: Vec<LengthLaw>) -> Result<Self> {
        if laws.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidModel(format!(
                "position-dependent lengths need {} laws for {} breakpoints",
                breakpoints.len() + 1,
                breakpoints.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidModel(
                "length breakpoints must be strictly increasing".into(),
            ));
        }
        for law in &laws {
            law.validate()?;
        }
        Ok(Lengths::ByPosition { breakpoints, laws })
    }

    pub fn law_at(&self, x: f64) -> &LengthLaw {
        match self {
            Lengths::Fixed(law) => law,
            Lengths::ByPosition { breakpoints, laws } => {
                &laws[breakpoints.partition_point(|&b| b <= x)]
            }
        }
    }

    /// `(lo, hi, law)` for each piece of the partition, with infinite ends.
    pub fn pieces(&self) -> Vec<(f64, f64, &LengthLaw)> {
        match self {
            Lengths::Fixed(law) => vec![(f64::NEG_INFINITY, f64::INFINITY, law)],
            Lengths::ByPosition { breakpoints, laws } => laws
                .iter()
                .enumerate()
                .map(|(i, law)| {
                    let lo = if i == 0 {
                        f64::NEG_INFINITY
                    } else {
                        breakpoints[i - 1]
                    };
                    let hi = breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
                    (lo, hi, law)
                })
                .collect(),
        }
    }

    pub fn laws(&self) -> Vec<&LengthLaw> {
        self.pieces().into_iter().map(|(_, _, l)| l).collect()
    }

    /// `P(L_x >= t)`.
    pub fn survival(&self, x: f64, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::arg(format!("survival needs t >= 0, got {t}")));
        }
        Ok(self.law_at(x).survival(t))
    }

    pub fn max_support(&self) -> Option<f64> {
        self.laws()
            .into_iter()
            .map(LengthLaw::max_support)
            .try_fold(0.0f64, |m, s| s.map(|s| m.max(s)))
    }

    /// Largest mean over the pieces.
    pub fn max_mean(&self) -> f64 {
        self.laws()
            .into_iter()
            .map(LengthLaw::mean)
            .fold(0.0, f64::max)
    }
}

/// Full parameterisation of the clone/anchor model.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    clones: IntensityMeasure,
    anchors: IntensityMeasure,
    lengths: Lengths,
}

impl ModelSpec {
    pub fn new(
        clones: IntensityMeasure,
        anchors: IntensityMeasure,
        lengths: Lengths,
    ) -> Result<Self> {
        for law in lengths.laws() {
            law.validate()?;
        }
        Ok(ModelSpec {
            clones,
            anchors,
            lengths,
        })
    }

    /// Homogeneous model with clone rate `kappa`, anchor rate `alpha` and a
    /// single length law.
    pub fn homogeneous(kappa: f64, alpha: f64, law: LengthLaw) -> Result<Self> {
        Self::new(
            IntensityMeasure::constant(kappa)?,
            IntensityMeasure::constant(alpha)?,
            Lengths::Fixed(law),
        )
    }

    pub fn clones(&self) -> &IntensityMeasure {
        &self.clones
    }

    pub fn anchors(&self) -> &IntensityMeasure {
        &self.anchors
    }

    pub fn lengths(&self) -> &Lengths {
        &self.lengths
    }

    /// True iff both intensities are constant and the length law does not
    /// depend on position.
    pub fn is_homogeneous(&self) -> bool {
        matches!(self.clones, IntensityMeasure::Constant { .. })
            && matches!(self.anchors, IntensityMeasure::Constant { .. })
            && matches!(self.lengths, Lengths::Fixed(_))
    }

    /// `(kappa, alpha, law)` for homogeneous specs.
    pub fn homogeneous_params(&self) -> Option<(f64, f64, &LengthLaw)> {
        match (&self.clones, &self.anchors, &self.lengths) {
            (
                IntensityMeasure::Constant { rate: k },
                IntensityMeasure::Constant { rate: a },
                Lengths::Fixed(law),
            ) => Some((*k, *a, law)),
            _ => None,
        }
    }
}

/// Density of the intensity `c'(dy)` of clone left ends at `y`:
/// `c'(y) = Σ_pieces E[c(y + L); y + L in piece]`, so that a clone with left
/// end `y` and length `t` has right end `y + t`.
pub fn left_end_intensity(spec: &ModelSpec, y: f64, quad: &QuadConfig) -> Result<f64> {
    let clones = &spec.clones;
    let mut total = 0.0;
    for (lo, hi, law) in spec.lengths.pieces() {
        let from = (lo - y).max(0.0);
        if hi - y < 0.0 {
            continue;
        }
        let v = law.expect_from(
            from,
            |t| {
                let x = y + t;
                if x >= lo && x < hi {
                    clones.rate_at(x)
                } else {
                    0.0
                }
            },
            quad,
        )?;
        if !v.is_finite() {
            return Err(Error::numeric("left-end intensity", v, f64::NAN));
        }
        total += v;
    }
    Ok(total)
}
