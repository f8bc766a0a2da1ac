//! Windowed sampling of clones, anchors, islands and the ocean.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{left_end_intensity, IntensityMeasure, LengthLaw, ModelSpec};
use crate::quad::QuadConfig;
use crate::rng::{Lane, RngStream};

/// Default tail probability used to size the padding around a window.
pub const DEFAULT_PAD_EPS: f64 = 1e-9;

/// A clone `[right_end - length, right_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloneEntry {
    pub right_end: f64,
    pub length: f64,
}

impl CloneEntry {
    pub fn left_end(&self) -> f64 {
        self.right_end - self.length
    }

    pub fn contains(&self, x: f64) -> bool {
        self.left_end() <= x && x <= self.right_end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloneSet {
    /// Sorted by right end; ties keep draw order.
    pub entries: Vec<CloneEntry>,
    pub region: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    pub positions: Vec<f64>,
    pub region: (f64, f64),
}

/// Sorted, pairwise disjoint closed intervals separated by strict gaps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IslandSet {
    pub intervals: Vec<(f64, f64)>,
}

/// Everything drawn for one replication on one window.
#[derive(Debug, Clone)]
pub struct Realization {
    pub window: f64,
    pub clones: CloneSet,
    pub anchors: AnchorSet,
    pub islands: IslandSet,
}

impl Realization {
    pub fn ocean(&self, a: f64, b: f64) -> f64 {
        ocean_measure(&self.islands, a, b)
    }
}

/// Padding that makes windowed sampling exact up to probability `epsilon`.
pub fn pad_width(spec: &ModelSpec, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::arg(format!(
            "pad epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let mut pad = 0.0f64;
    for law in spec.lengths().laws() {
        let reach = match law.max_support() {
            Some(m) => m,
            None => law.quantile(1.0 - epsilon)?,
        };
        if !reach.is_finite() {
            return Err(Error::arg(format!(
                "no finite quantile at 1 - {epsilon} for {law:?}"
            )));
        }
        pad = pad.max(reach);
    }
    Ok(pad)
}

/// Points of a Poisson process with the given intensity on `[lo, hi]`, sorted.
pub fn sample_points<R: Rng + ?Sized>(
    intensity: &IntensityMeasure,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = Vec::new();
    if !(hi > lo) {
        return out;
    }
    match intensity {
        IntensityMeasure::Constant { rate } => fill_constant(*rate, lo, hi, rng, &mut out),
        IntensityMeasure::PiecewiseConstant { breakpoints, rates } => {
            let mut cuts = vec![lo];
            cuts.extend(breakpoints.iter().copied().filter(|&b| b > lo && b < hi));
            cuts.push(hi);
            for w in cuts.windows(2) {
                let rate = intensity.rate_at(0.5 * (w[0] + w[1]));
                debug_assert!(rates.contains(&rate));
                fill_constant(rate, w[0], w[1], rng, &mut out);
            }
        }
        IntensityMeasure::Density { f, bound, support } => {
            let a = lo.max(support.0);
            let b = hi.min(support.1);
            if b > a {
                let mut candidates = Vec::new();
                fill_constant(*bound, a, b, rng, &mut candidates);
                for x in candidates {
                    let u: f64 = rng.random();
                    if u * bound < f(x) {
                        out.push(x);
                    }
                }
            }
        }
    }
    out
}

/// Homogeneous points by exponential spacings, which come out sorted.
fn fill_constant<R: Rng + ?Sized>(rate: f64, lo: f64, hi: f64, rng: &mut R, out: &mut Vec<f64>) {
    if rate <= 0.0 {
        return;
    }
    let mut x = lo;
    loop {
        let gap: f64 = Exp1.sample(rng);
        x += gap / rate;
        if x > hi {
            break;
        }
        out.push(x);
    }
}

/// Clones with right ends on `[0, window + pad]`.
pub fn sample_clones(spec: &ModelSpec, window: f64, pad: f64, rng: &RngStream) -> Result<CloneSet> {
    check_window(window, pad)?;
    sample_clones_on(spec, 0.0, window, pad, rng)
}

/// Anchors on `[-pad, window + pad]`, from a lane independent of the clones.
pub fn sample_anchors(
    spec: &ModelSpec,
    window: f64,
    pad: f64,
    rng: &RngStream,
) -> Result<AnchorSet> {
    check_window(window, pad)?;
    sample_anchors_on(spec, 0.0, window, pad, rng)
}

/// Clones with right ends on `[lo, hi + pad]`: every clone meeting `[lo, hi]`
/// whose length is at most `pad`.
pub fn sample_clones_on(
    spec: &ModelSpec,
    lo: f64,
    hi: f64,
    pad: f64,
    rng: &RngStream,
) -> Result<CloneSet> {
    check_range(lo, hi, pad)?;
    let mut r = rng.lane(Lane::Clones);
    let top = hi + pad;
    let rights = sample_points(spec.clones(), lo, top, &mut r);
    let entries = rights
        .into_iter()
        .map(|x| CloneEntry {
            right_end: x,
            length: spec.lengths().law_at(x).sample(&mut r),
        })
        .collect();
    Ok(CloneSet {
        entries,
        region: (lo, top),
    })
}

/// Anchors on `[lo - pad, hi + pad]`.
pub fn sample_anchors_on(
    spec: &ModelSpec,
    lo: f64,
    hi: f64,
    pad: f64,
    rng: &RngStream,
) -> Result<AnchorSet> {
    check_range(lo, hi, pad)?;
    let mut r = rng.lane(Lane::Anchors);
    let region = (lo - pad, hi + pad);
    Ok(AnchorSet {
        positions: sample_points(spec.anchors(), region.0, region.1, &mut r),
        region,
    })
}

fn check_window(window: f64, pad: f64) -> Result<()> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::arg(format!(
            "window length must be positive, got {window}"
        )));
    }
    if !(pad >= 0.0 && pad.is_finite()) {
        return Err(Error::arg(format!("pad must be >= 0, got {pad}")));
    }
    Ok(())
}

fn check_range(lo: f64, hi: f64, pad: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::arg(format!(
            "sampling range [{lo}, {hi}] is not a finite interval"
        )));
    }
    if !(pad >= 0.0 && pad.is_finite()) {
        return Err(Error::arg(format!("pad must be >= 0, got {pad}")));
    }
    Ok(())
}

/// Clones whose closed interval contains at least one anchor.
pub fn anchored_clones(clones: &CloneSet, anchors: &AnchorSet) -> CloneSet {
    let pos = &anchors.positions;
    let entries = clones
        .entries
        .iter()
        .filter(|c| {
            let i = pos.partition_point(|&a| a < c.left_end());
            i < pos.len() && pos[i] <= c.right_end
        })
        .copied()
        .collect();
    CloneSet {
        entries,
        region: clones.region,
    }
}

/// Maximal connected unions of the given clones; touching intervals merge.
pub fn islands(anchored: &CloneSet) -> IslandSet {
    let mut ivs: Vec<(f64, f64)> = anchored
        .entries
        .iter()
        .map(|c| (c.left_end(), c.right_end))
        .collect();
    ivs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (s, e) in ivs {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    // Zero-length islands carry no measure.
    out.retain(|(s, e)| e > s);
    IslandSet { intervals: out }
}

/// Measure of `[a, b]` not covered by islands.
pub fn ocean_measure(islands: &IslandSet, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    // Summing the gaps (not b - a - covered) keeps the result monotone in b.
    let ivs = &islands.intervals;
    let start = ivs.partition_point(|iv| iv.1 <= a);
    let mut ocean = 0.0;
    let mut cursor = a;
    for &(s, e) in &ivs[start..] {
        if s >= b {
            break;
        }
        if s > cursor {
            ocean += s - cursor;
        }
        cursor = cursor.max(e);
        if cursor >= b {
            return ocean;
        }
    }
    ocean + (b - cursor)
}

/// Cumulative ocean measure `O([a, b_k])` for increasing right ends `b_k`.
pub fn cumulative_ocean(islands: &IslandSet, a: f64, ends: &[f64]) -> Vec<f64> {
    ends.iter().map(|&b| ocean_measure(islands, a, b)).collect()
}

pub fn count_covering(clones: &CloneSet, x: f64) -> usize {
    // Only clones with right end >= x can cover x.
    let start = clones.entries.partition_point(|c| c.right_end < x);
    clones.entries[start..]
        .iter()
        .filter(|c| c.left_end() <= x)
        .count()
}

pub fn count_anchored_covering(clones: &CloneSet, anchors: &AnchorSet, x: f64) -> usize {
    let pos = &anchors.positions;
    let start = clones.entries.partition_point(|c| c.right_end < x);
    clones.entries[start..]
        .iter()
        .filter(|c| {
            if c.left_end() > x {
                return false;
            }
            let i = pos.partition_point(|&a| a < c.left_end());
            i < pos.len() && pos[i] <= c.right_end
        })
        .count()
}

/// Draws clones, anchors and islands for one replication.
pub fn sample_realization(
    spec: &ModelSpec,
    window: f64,
    pad: f64,
    rng: &RngStream,
) -> Result<Realization> {
    let clones = sample_clones(spec, window, pad, rng)?;
    let anchors = sample_anchors(spec, window, pad, rng)?;
    let isl = islands(&anchored_clones(&clones, &anchors));
    Ok(Realization {
        window,
        clones,
        anchors,
        islands: isl,
    })
}

/// Islands meeting `[lo, hi]`, exact up to clones longer than `pad`.
pub fn islands_on(
    spec: &ModelSpec,
    lo: f64,
    hi: f64,
    pad: f64,
    rng: &RngStream,
) -> Result<IslandSet> {
    let clones = sample_clones_on(spec, lo, hi, pad, rng)?;
    let anchors = sample_anchors_on(spec, lo, hi, pad, rng)?;
    Ok(islands(&anchored_clones(&clones, &anchors)))
}

/// Whether `x` lies in no island.
pub fn in_ocean(islands: &IslandSet, x: f64) -> bool {
    let ivs = &islands.intervals;
    let i = ivs.partition_point(|iv| iv.1 < x);
    !(i < ivs.len() && ivs[i].0 <= x)
}

/// `(O_{Gt} - rho G t) / sqrt(nu G)` along `grid` for one realization.
pub fn theta_path(
    spec: &ModelSpec,
    window: f64,
    grid: &[f64],
    rho: f64,
    nu: f64,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    if !spec.is_homogeneous() {
        return Err(Error::arg("theta_path needs a homogeneous model"));
    }
    if !(nu > 0.0) {
        return Err(Error::arg(format!("theta_path needs nu > 0, got {nu}")));
    }
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::arg("theta grid must lie in [0, 1]"));
    }
    let pad = pad_width(spec, DEFAULT_PAD_EPS)?;
    let real = sample_realization(spec, window, pad, rng)?;
    Ok(theta_from(&real.islands, window, grid, rho, nu))
}

pub(crate) fn theta_from(
    islands: &IslandSet,
    window: f64,
    grid: &[f64],
    rho: f64,
    nu: f64,
) -> Vec<f64> {
    let scale = (nu * window).sqrt();
    grid.iter()
        .map(|&t| {
            if t == 0.0 {
                0.0
            } else {
                let gt = window * t;
                (ocean_measure(islands, 0.0, gt) - rho * gt) / scale
            }
        })
        .collect()
}

/// Samples clones by left end on `[lo, hi]` using the transported intensity
/// and length law, independently of the right-end construction.
pub struct LeftEndSampler<'a> {
    spec: &'a ModelSpec,
    quad: QuadConfig,
    bound: f64,
    sup_rate: f64,
}

/// Give up on drawing one transported length after this many proposals.
const MAX_LENGTH_PROPOSALS: usize = 1_000_000;

impl<'a> LeftEndSampler<'a> {
    pub fn new(spec: &'a ModelSpec, quad: &QuadConfig) -> Self {
        let sup_rate = spec.clones().sup_rate();
        let pieces = spec.lengths().pieces().len() as f64;
        LeftEndSampler {
            spec,
            quad: *quad,
            bound: sup_rate * pieces,
            sup_rate,
        }
    }

    /// Per-piece contributions `w_k(y)`; their sum is the left-end intensity.
    fn piece_weights(&self, y: f64) -> Result<Vec<f64>> {
        let clones = self.spec.clones();
        self.spec
            .lengths()
            .pieces()
            .into_iter()
            .map(|(lo, hi, law)| {
                if hi < y {
                    return Ok(0.0);
                }
                law.expect_from(
                    (lo - y).max(0.0),
                    |t| {
                        let x = y + t;
                        if x >= lo && x < hi {
                            clones.rate_at(x)
                        } else {
                            0.0
                        }
                    },
                    &self.quad,
                )
            })
            .collect()
    }

    /// Draws `(left_end, length)` pairs with left ends in `[lo, hi]`, sorted by
    /// left end.
    pub fn sample(&self, lo: f64, hi: f64, rng: &RngStream) -> Result<Vec<(f64, f64)>> {
        let mut r = rng.lane(Lane::LeftEnds);
        let mut out = Vec::new();
        if self.bound <= 0.0 || !(hi > lo) {
            return Ok(out);
        }
        let mut candidates = Vec::new();
        fill_constant(self.bound, lo, hi, &mut r, &mut candidates);
        for y in candidates {
            let weights = self.piece_weights(y)?;
            let dens: f64 = weights.iter().sum();
            if !dens.is_finite() {
                return Err(Error::numeric("left-end intensity", dens, f64::NAN));
            }
            let u: f64 = r.random();
            if u * self.bound >= dens {
                continue;
            }
            out.push((y, self.sample_length(y, &weights, dens, &mut r)?));
        }
        Ok(out)
    }

    fn sample_length<R: Rng + ?Sized>(
        &self,
        y: f64,
        weights: &[f64],
        dens: f64,
        r: &mut R,
    ) -> Result<f64> {
        let pieces = self.spec.lengths().pieces();
        let pick = r.random::<f64>() * dens;
        let mut acc = 0.0;
        let mut k = pieces.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if pick < acc {
                k = i;
                break;
            }
        }
        let (lo, hi, law): (f64, f64, &LengthLaw) = pieces[k];
        for _ in 0..MAX_LENGTH_PROPOSALS {
            let t = law.sample(r);
            let x = y + t;
            if x < lo || x >= hi {
                continue;
            }
            if r.random::<f64>() * self.sup_rate < self.spec.clones().rate_at(x) {
                return Ok(t);
            }
        }
        Err(Error::numeric(
            "transported length rejection sampler",
            f64::NAN,
            f64::NAN,
        ))
    }

    /// The intensity being sampled, for diagnostics.
    pub fn intensity(&self, y: f64) -> Result<f64> {
        left_end_intensity(self.spec, y, &self.quad)
    }
}

/// Clones as `(left_end, length)` pairs with left ends in `[lo, hi]`, via the
/// right-end construction and a padded sampling range.
pub fn left_ends_via_right_ends(
    spec: &ModelSpec,
    lo: f64,
    hi: f64,
    pad: f64,
    rng: &RngStream,
) -> Vec<(f64, f64)> {
    let mut r = rng.lane(Lane::Clones);
    let rights = sample_points(spec.clones(), lo, hi + pad, &mut r);
    let mut out: Vec<(f64, f64)> = rights
        .into_iter()
        .map(|x| (x, spec.lengths().law_at(x).sample(&mut r)))
        .map(|(x, t)| (x - t, t))
        .filter(|&(y, _)| y >= lo && y <= hi)
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

pub fn write_clones_csv<W: Write>(clones: &CloneSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["right_end", "length"]).map_err(csv_err)?;
    for c in &clones.entries {
        w.write_record([fmt_f64(c.right_end), fmt_f64(c.length)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_anchors_csv<W: Write>(anchors: &AnchorSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["position"]).map_err(csv_err)?;
    for a in &anchors.positions {
        w.write_record([fmt_f64(*a)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_islands_csv<W: Write>(islands: &IslandSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["start", "end"]).map_err(csv_err)?;
    for (s, e) in &islands.intervals {
        w.write_record([fmt_f64(*s), fmt_f64(*e)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Round-trippable float text with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(entries: &[(f64, f64)]) -> CloneSet {
        CloneSet {
            entries: entries
                .iter()
                .map(|&(x, t)| CloneEntry {
                    right_end: x,
                    length: t,
                })
                .collect(),
            region: (-10.0, 10.0),
        }
    }

    fn anchors(p: &[f64]) -> AnchorSet {
        AnchorSet {
            positions: p.to_vec(),
            region: (-10.0, 10.0),
        }
    }

    #[test]
    fn pad_examples() {
        let det = ModelSpec::homogeneous(1.0, 1.0, LengthLaw::deterministic(1.0).unwrap()).unwrap();
        assert_eq!(pad_width(&det, 0.3).unwrap(), 1.0);
        let exp = ModelSpec::homogeneous(1.0, 1.0, LengthLaw::exponential(1.0).unwrap()).unwrap();
        assert!((pad_width(&exp, 1e-6).unwrap() - 13.815_510_557_964_274).abs() < 1e-9);
        let uni = ModelSpec::homogeneous(1.0, 1.0, LengthLaw::uniform(0.0, 2.0).unwrap()).unwrap();
        assert_eq!(pad_width(&uni, 1e-9).unwrap(), 2.0);
        assert!(pad_width(&det, 0.0).is_err());
    }

    #[test]
    fn anchoring_examples() {
        assert_eq!(
            anchored_clones(&set(&[(2.0, 3.0)]), &anchors(&[0.0]))
                .entries
                .len(),
            1
        );
        assert_eq!(
            anchored_clones(&set(&[(2.0, 1.0)]), &anchors(&[1.0]))
                .entries
                .len(),
            1
        );
        assert!(anchored_clones(&set(&[(2.0, 1.0)]), &anchors(&[0.5]))
            .entries
            .is_empty());
    }

    #[test]
    fn island_examples() {
        assert_eq!(
            islands(&set(&[(2.0, 2.0), (3.0, 2.0)])).intervals,
            vec![(0.0, 3.0)]
        );
        assert_eq!(
            islands(&set(&[(1.0, 1.0), (3.0, 1.0)])).intervals,
            vec![(0.0, 1.0), (2.0, 3.0)]
        );
        assert_eq!(
            islands(&set(&[(1.0, 1.0), (2.0, 1.0)])).intervals,
            vec![(0.0, 2.0)]
        );
    }

    #[test]
    fn ocean_membership_respects_closed_islands() {
        let isl = IslandSet {
            intervals: vec![(0.0, 1.0), (2.0, 3.0)],
        };
        assert!(!in_ocean(&isl, 0.0));
        assert!(!in_ocean(&isl, 1.0));
        assert!(in_ocean(&isl, 1.5));
        assert!(!in_ocean(&isl, 2.5));
        assert!(in_ocean(&isl, 3.5));
        assert!(in_ocean(&isl, -0.1));
    }

    #[test]
    fn range_sampling_extends_window_sampling() {
        let spec = ModelSpec::homogeneous(2.0, 1.0, LengthLaw::exponential(0.5).unwrap()).unwrap();
        let rng = RngStream::new(11, 3);
        assert_eq!(
            sample_clones(&spec, 4.0, 1.0, &rng).unwrap(),
            sample_clones_on(&spec, 0.0, 4.0, 1.0, &rng).unwrap()
        );
        assert_eq!(
            sample_anchors(&spec, 4.0, 1.0, &rng).unwrap(),
            sample_anchors_on(&spec, 0.0, 4.0, 1.0, &rng).unwrap()
        );
        let c = sample_clones_on(&spec, -3.0, -3.0, 1.0, &rng).unwrap();
        assert!(c
            .entries
            .iter()
            .all(|e| (-3.0..=-2.0).contains(&e.right_end)));
        assert!(sample_clones_on(&spec, 1.0, 0.0, 1.0, &rng).is_err());
    }

    #[test]
    fn ocean_examples() {
        assert_eq!(ocean_measure(&IslandSet::default(), 0.0, 7.0), 7.0);
        let one = IslandSet {
            intervals: vec![(0.0, 3.0)],
        };
        assert_eq!(ocean_measure(&one, 1.0, 2.0), 0.0);
        let two = IslandSet {
            intervals: vec![(0.0, 1.0), (2.0, 4.0)],
        };
        assert_eq!(ocean_measure(&two, 0.0, 4.0), 1.0);
    }

    #[test]
    fn covering_examples() {
        let c = set(&[(2.0, 3.0)]);
        assert_eq!(count_covering(&c, 0.0), 1);
        assert_eq!(count_covering(&c, 3.0), 0);
        assert_eq!(count_anchored_covering(&c, &anchors(&[-1.0]), 0.0), 1);
        assert_eq!(count_anchored_covering(&c, &anchors(&[2.5]), 0.0), 0);
    }

    #[test]
    fn zero_intensities_give_empty_sets() {
        let spec =
            ModelSpec::homogeneous(0.0, 0.0, LengthLaw::deterministic(1.0).unwrap()).unwrap();
        let rng = RngStream::new(3, 0);
        assert!(sample_clones(&spec, 10.0, 1.0, &rng)
            .unwrap()
            .entries
            .is_empty());
        assert!(sample_anchors(&spec, 10.0, 1.0, &rng)
            .unwrap()
            .positions
            .is_empty());
    }

    #[test]
    fn zero_rate_region_has_no_anchors() {
        let spec = ModelSpec::new(
            IntensityMeasure::constant(1.0).unwrap(),
            IntensityMeasure::piecewise(vec![0.0, 50.0], vec![0.0, 0.0, 1.0]).unwrap(),
            crate::model::Lengths::Fixed(LengthLaw::deterministic(1.0).unwrap()),
        )
        .unwrap();
        for s in 0..20 {
            let a = sample_anchors(&spec, 100.0, 0.0, &RngStream::new(9, s)).unwrap();
            assert!(a.positions.iter().all(|&p| p >= 50.0));
            assert!(!a.positions.is_empty());
        }
    }

    #[test]
    fn clone_sets_sorted_within_region() {
        let spec = ModelSpec::homogeneous(3.0, 1.0, LengthLaw::exponential(2.0).unwrap()).unwrap();
        let c = sample_clones(&spec, 20.0, 5.0, &RngStream::new(1, 2)).unwrap();
        assert!(c
            .entries
            .windows(2)
            .all(|w| w[0].right_end <= w[1].right_end));
        assert!(c
            .entries
            .iter()
            .all(|e| e.right_end >= 0.0 && e.right_end <= 25.0 && e.length >= 0.0));
    }

    #[test]
    fn theta_at_zero_and_without_clones() {
        let spec =
            ModelSpec::homogeneous(0.0, 1.0, LengthLaw::deterministic(1.0).unwrap()).unwrap();
        let path = theta_path(
            &spec,
            50.0,
            &[0.0, 0.5, 1.0],
            1.0,
            0.3,
            &RngStream::new(1, 0),
        )
        .unwrap();
        assert_eq!(path, vec![0.0, 0.0, 0.0]);
        assert!(theta_path(&spec, 50.0, &[1.0], 1.0, 0.0, &RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn csv_export_has_headers() {
        let mut buf = Vec::new();
        write_islands_csv(
            &IslandSet {
                intervals: vec![(0.0, 1.5)],
            },
            &mut buf,
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("start,end\n"));
        assert!(text.contains("1.5000000000000000e0"));
    }
}
