//! Finite-scale estimators: moment sums and their scaling exponents,
//! fixed-radius covering and packing counts, box-dimension extraction and
//! coarse level-set counts.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::measures::{brute_log_partition_sums, Cascade, MeasureSpec, Metric, Profile};
use crate::real::{lit, log_sum_exp, to_f64, LogFactorials, Real};
use crate::symbolic::{LevelShape, MoranSpec, RegimeRule};

/// Depths below this are ignored when extracting liminf/limsup estimates.
pub const DEFAULT_WARMUP: usize = 2;
/// Fewest designated depths accepted by [`moment_scaling`].
pub const MIN_SUBSEQUENCE: usize = 4;
/// Largest number of cylinders enumerated by the covering and packing counts.
pub const COVER_CAP: u128 = 1 << 22;
/// Coarse-graining schedule walked from the largest value down.
pub const DEFAULT_EPS: [f64; 4] = [0.2, 0.1, 0.05, 0.02];
/// Readings at consecutive `eps` within this distance count as stable.
pub const STABILITY_TOL: f64 = 0.02;

/// `log sum_{|sigma| = n} mu(J_sigma)^q`. The factored product over levels is
/// exact; `oracle` switches to full enumeration (`n <= 16`).
pub fn partition_sum<T: Real>(spec: &MeasureSpec<T>, n: usize, q: T, oracle: bool) -> Result<T> {
    if oracle {
        return Ok(brute_log_partition_sums(spec, n, &[q])?[0]);
    }
    let cascade = spec.cascade()?;
    if q == T::one() {
        return Ok(T::zero());
    }
    let profile = cascade.profile(n)?;
    Ok(cascade.factored_log_partition_sum(profile.counts(n), q))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleEntry<T> {
    pub depth: usize,
    /// `log r_n`
    pub log_scale: T,
    pub log_quantity: T,
}

impl<T: Real> ScaleEntry<T> {
    /// `log quantity / (-log r)`
    pub fn ratio(&self) -> T {
        if self.log_quantity == T::zero() {
            return T::zero();
        }
        self.log_quantity / -self.log_scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSeries<T> {
    pub entries: Vec<ScaleEntry<T>>,
    pub quantity_label: String,
}

impl<T: Real> ScaleSeries<T> {
    pub fn ratios(&self) -> Vec<T> {
        self.entries.iter().map(ScaleEntry::ratio).collect()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, header: bool) -> io::Result<()> {
        if header {
            writeln!(out, "n,log_scale,log_quantity")?;
        }
        for e in &self.entries {
            writeln!(out, "{},{},{}", e.depth, e.log_scale, e.log_quantity)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimEstimate<T> {
    pub series: ScaleSeries<T>,
    pub liminf_est: T,
    pub limsup_est: T,
    /// Depths the two estimates were extracted from.
    pub subsequence_used: Vec<usize>,
}

impl<T: Real> DimEstimate<T> {
    fn from_designated(series: ScaleSeries<T>, designated: Vec<usize>) -> Result<Self> {
        if designated.len() < MIN_SUBSEQUENCE {
            return Err(Error::InsufficientDepths {
                found: designated.len(),
                needed: MIN_SUBSEQUENCE,
            });
        }
        let ratios: Vec<T> = series
            .entries
            .iter()
            .filter(|e| designated.contains(&e.depth))
            .map(ScaleEntry::ratio)
            .collect();
        let liminf_est = ratios.iter().copied().fold(T::infinity(), T::min);
        let limsup_est = ratios.iter().copied().fold(T::neg_infinity(), T::max);
        Ok(Self {
            series,
            liminf_est,
            limsup_est,
            subsequence_used: designated,
        })
    }

    /// One-line record `label,liminf,limsup,depths` with depths joined by `;`.
    pub fn summary_line(&self) -> String {
        let depths: Vec<String> = self.subsequence_used.iter().map(|d| d.to_string()).collect();
        format!(
            "{},{},{},{}",
            self.series.quantity_label,
            self.liminf_est,
            self.limsup_est,
            depths.join(";")
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MomentOptions {
    pub warmup: usize,
    pub oracle: bool,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self {
            warmup: DEFAULT_WARMUP,
            oracle: false,
        }
    }
}

/// Depths whose regime differs from the next level's, or every depth for
/// rules that do not switch on a schedule.
fn designated_depths(rule: &RegimeRule, profile: &Profile<impl Real>, depths: &[usize], warmup: usize) -> Vec<usize> {
    let switching = matches!(rule, RegimeRule::Switching { .. });
    depths
        .iter()
        .copied()
        .filter(|&d| d >= warmup)
        .filter(|&d| {
            !switching || (d < profile.max_depth() && profile.regime_of_level(d) != profile.regime_of_level(d + 1))
        })
        .collect()
}

fn check_depths(depths: &[usize]) -> Result<usize> {
    if depths.is_empty() {
        return Err(Error::InsufficientDepths {
            found: 0,
            needed: MIN_SUBSEQUENCE,
        });
    }
    if depths.windows(2).any(|w| w[0] >= w[1]) || depths[0] == 0 {
        return Err(Error::Invalid("depths must be positive and strictly increasing".into()));
    }
    Ok(*depths.last().unwrap())
}

pub fn moment_scaling<T: Real>(spec: &MeasureSpec<T>, q: T, depths: &[usize]) -> Result<DimEstimate<T>> {
    moment_scaling_with(spec, q, depths, MomentOptions::default())
}

/// Scaling ratios `log S_n(q) / (-log r_n)` over `depths`, with liminf and
/// limsup estimates taken over the phase-flip depths past the warm-up.
pub fn moment_scaling_with<T: Real>(
    spec: &MeasureSpec<T>,
    q: T,
    depths: &[usize],
    options: MomentOptions,
) -> Result<DimEstimate<T>> {
    let max = check_depths(depths)?;
    let cascade = spec.cascade()?;
    // one extra level decides whether the last depth is a flip
    let profile = cascade.profile(max + 1)?;
    let mut entries = Vec::with_capacity(depths.len());
    for &n in depths {
        let log_quantity = if q == T::one() {
            T::zero()
        } else if options.oracle {
            brute_log_partition_sums(spec, n, &[q])?[0]
        } else {
            cascade.factored_log_partition_sum(profile.counts(n), q)
        };
        entries.push(ScaleEntry {
            depth: n,
            log_scale: profile.log_diameter(n),
            log_quantity,
        });
    }
    let series = ScaleSeries {
        entries,
        quantity_label: format!("moment_q={q}"),
    };
    let designated = designated_depths(&cascade.rule, &profile, depths, options.warmup);
    DimEstimate::from_designated(series, designated)
}

/// Metric realisation of a construction for the covering and packing counts.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry<T> {
    /// Moran placement inside `[0, 1]`.
    Interval(MoranSpec<T>),
    /// Symbolic tree where depth-`m` cylinders have diameter `ratio^m`.
    Ultrametric { branching: usize, ratio: T },
}

impl<T: Real> Geometry<T> {
    pub fn of(spec: &MeasureSpec<T>) -> Result<Self> {
        let cascade = spec.cascade()?;
        Ok(match cascade.metric {
            Metric::Interval => Geometry::Interval(cascade.moran_spec()?),
            Metric::Ultrametric => Geometry::Ultrametric {
                branching: cascade.regimes[0].branching(),
                ratio: cascade.regimes[0].ratio,
            },
        })
    }
}

fn check_radius<T: Real>(r: T) -> Result<()> {
    if !(r > T::zero()) || !r.is_finite() {
        return Err(Error::Domain {
            value: to_f64(r),
            domain: "radius r > 0",
        });
    }
    Ok(())
}

/// First depth whose cylinders have length at most `r`, with the shapes of
/// levels `1..=depth`.
fn resolution_depth<T: Real>(spec: &MoranSpec<T>, r: T) -> Result<(usize, Vec<LevelShape<T>>)> {
    let target = r.ln() + lit(1e-12);
    let worst = spec
        .shapes
        .iter()
        .map(|s| s.ratio.ln())
        .fold(T::neg_infinity(), T::max);
    let bound = (target / worst).ceil().max(T::zero()).to_usize().unwrap_or(usize::MAX);
    let bound = bound.saturating_add(1).min(1 << 24);
    let shapes = spec.shape_sequence(bound)?;
    let mut acc = T::zero();
    let mut depth = 0;
    while acc > target {
        if depth == shapes.len() {
            return Err(Error::CapExceeded {
                what: "resolution depth",
                requested: depth as u128 + 1,
                cap: shapes.len() as u128,
            });
        }
        acc = acc + shapes[depth].ratio.ln();
        depth += 1;
    }
    let mut shapes = shapes;
    shapes.truncate(depth);
    Ok((depth, shapes))
}

fn zero_gap<T: Real>(shape: &LevelShape<T>) -> bool {
    MoranSpec::relative_gap(shape) <= T::epsilon() * lit(16.0)
}

/// Connected components of the depth-`n` cylinder union, left to right.
fn components<T: Real>(shapes: &[LevelShape<T>]) -> Result<Vec<(T, T)>> {
    let count = shapes
        .iter()
        .fold(1u128, |acc, s| acc.saturating_mul(s.branching as u128));
    if count > COVER_CAP {
        return Err(Error::CapExceeded {
            what: "cylinders at the resolution depth",
            requested: count,
            cap: COVER_CAP,
        });
    }
    let n = shapes.len();
    let mut steps = Vec::with_capacity(n);
    let mut length = T::one();
    for s in shapes {
        let gap = MoranSpec::relative_gap(s).max(T::zero());
        steps.push((s.ratio + gap) * length);
        length = length * s.ratio;
    }
    let touch = length * lit(1e-9);
    let mut out: Vec<(T, T)> = Vec::new();
    let mut idx = vec![0usize; n];
    let mut lefts = vec![T::zero(); n + 1];
    loop {
        let left = lefts[n];
        let right = left + length;
        match out.last_mut() {
            Some(last) if left - last.1 <= touch => last.1 = last.1.max(right),
            _ => out.push((left, right)),
        }
        // advance the odometer from the deepest level
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < shapes[k].branching {
                break;
            }
            idx[k] = 0;
        }
        lefts[k + 1] = lefts[k] + T::from_usize(idx[k]).unwrap() * steps[k];
        for j in k + 1..n {
            lefts[j + 1] = lefts[j];
        }
    }
}

fn ultrametric_depth<T: Real>(ratio: T, r: T) -> usize {
    if r >= T::one() {
        return 0;
    }
    let m = (r.ln() / ratio.ln() - lit(1e-12)).ceil();
    m.max(T::zero()).to_usize().unwrap_or(usize::MAX)
}

/// Fewest closed radius-`r` balls centred in the set that cover it.
///
/// Greedy from the left: the next ball is centred at the rightmost set point
/// within `r` of the leftmost uncovered point. On interval unions this is
/// optimal among centred covers.
pub fn covering_count<T: Real>(geometry: &Geometry<T>, r: T) -> Result<u128> {
    check_radius(r)?;
    match geometry {
        Geometry::Ultrametric { branching, ratio } => {
            let m = ultrametric_depth(*ratio, r);
            Ok((*branching as u128).saturating_pow(m.min(u32::MAX as usize) as u32))
        }
        Geometry::Interval(spec) => {
            let (_, shapes) = resolution_depth(spec, r)?;
            if shapes.iter().all(zero_gap) {
                return Ok(full_interval_cover(r));
            }
            Ok(greedy_cover(&components(&shapes)?, r))
        }
    }
}

fn full_interval_cover<T: Real>(r: T) -> u128 {
    let v = (T::one() / (r + r)).ceil();
    v.to_u128().unwrap_or(u128::MAX).max(1)
}

fn greedy_cover<T: Real>(parts: &[(T, T)], r: T) -> u128 {
    let mut count = 0u128;
    let mut covered = T::neg_infinity();
    let mut i = 0;
    while i < parts.len() {
        let (a, b) = parts[i];
        if covered >= b {
            i += 1;
            continue;
        }
        let l = covered.max(a);
        let target = l + r;
        // last component starting at or before the target
        let mut k = i;
        while k + 1 < parts.len() && parts[k + 1].0 <= target {
            k += 1;
        }
        let centre = target.min(parts[k].1);
        covered = centre + r;
        count += 1;
        i = k;
    }
    count
}

/// Most pairwise disjoint closed radius-`r` balls centred in the set,
/// chosen greedily from the left (centres more than `2r` apart).
pub fn packing_count<T: Real>(geometry: &Geometry<T>, r: T) -> Result<u128> {
    Ok(packing_centres(geometry, r)?.map_or_else(|n| n, |c| c.len() as u128))
}

/// Packing centres when they are enumerated, otherwise their count.
pub fn packing_centres<T: Real>(geometry: &Geometry<T>, r: T) -> Result<std::result::Result<Vec<T>, u128>> {
    check_radius(r)?;
    match geometry {
        Geometry::Ultrametric { branching, ratio } => {
            let m = ultrametric_depth(*ratio, r);
            Ok(Err((*branching as u128).saturating_pow(m.min(u32::MAX as usize) as u32)))
        }
        Geometry::Interval(spec) => {
            let (_, shapes) = resolution_depth(spec, r)?;
            if shapes.iter().all(zero_gap) {
                let spacing = (r + r) * (T::one() + lit(1e-12));
                let m = (T::one() / spacing).floor().to_u128().unwrap_or(u128::MAX).saturating_add(1);
                return Ok(Err(m.min(full_interval_cover(r))));
            }
            let parts = components(&shapes)?;
            let nudge = r * lit(1e-9);
            let mut centres = Vec::new();
            let mut next = T::neg_infinity();
            for &(a, b) in &parts {
                if next > b {
                    continue;
                }
                let mut c = next.max(a);
                while c <= b {
                    centres.push(c);
                    c = c + r + r + nudge;
                }
                next = c;
            }
            Ok(Ok(centres))
        }
    }
}

/// Covering exponents `log N_r / (-log r)` over decreasing radii; the
/// estimates are the extremes over the second half of the series.
pub fn box_dimensions<T: Real>(geometry: &Geometry<T>, radii: &[T]) -> Result<DimEstimate<T>> {
    if radii.is_empty() || radii.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Invalid("radii must be non-empty and strictly decreasing".into()));
    }
    let mut entries = Vec::with_capacity(radii.len());
    for (i, &r) in radii.iter().enumerate() {
        let count = covering_count(geometry, r)?;
        entries.push(ScaleEntry {
            depth: i + 1,
            log_scale: r.ln(),
            log_quantity: lit::<T>(count as f64).ln(),
        });
    }
    let tail: Vec<usize> = entries[radii.len() / 2..].iter().map(|e| e.depth).collect();
    let series = ScaleSeries {
        entries,
        quantity_label: "covering".into(),
    };
    if tail.len() < MIN_SUBSEQUENCE {
        return Err(Error::InsufficientDepths {
            found: tail.len(),
            needed: MIN_SUBSEQUENCE,
        });
    }
    DimEstimate::from_designated(series, tail)
}

/// Cylinder diameters of a spec at the given depths.
pub fn cylinder_radii<T: Real>(spec: &MeasureSpec<T>, depths: &[usize]) -> Result<Vec<T>> {
    let max = check_depths(depths)?;
    let profile = spec.cascade()?.profile(max)?;
    Ok(depths.iter().map(|&d| profile.log_diameter(d).exp()).collect())
}

/// Log-count histogram on the lattice `(offset + i) * spacing`.
#[derive(Debug, Clone)]
struct Lattice<T> {
    spacing: T,
    offset: i64,
    log_counts: Vec<T>,
}

impl<T: Real> Lattice<T> {
    fn point() -> Self {
        Self {
            spacing: T::one(),
            offset: 0,
            log_counts: vec![T::zero()],
        }
    }

    fn occupied(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.log_counts
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_finite())
            .map(move |(i, &c)| (T::from_i64(self.offset + i as i64).unwrap() * self.spacing, c))
    }

    /// Rounds weighted atoms `(value, log_count)` onto a lattice.
    fn from_atoms(atoms: &[(T, T)], spacing: T) -> Self {
        let index = |v: T| (v / spacing).round().to_i64().unwrap();
        let lo = atoms.iter().map(|a| index(a.0)).min().unwrap_or(0);
        let hi = atoms.iter().map(|a| index(a.0)).max().unwrap_or(0);
        let len = (hi - lo + 1) as usize;
        let mut max = vec![T::neg_infinity(); len];
        for &(v, c) in atoms {
            let slot = &mut max[(index(v) - lo) as usize];
            *slot = slot.max(c);
        }
        let mut sum = vec![T::zero(); len];
        for &(v, c) in atoms {
            let t = (index(v) - lo) as usize;
            sum[t] = sum[t] + (c - max[t]).exp();
        }
        let log_counts = max
            .iter()
            .zip(&sum)
            .map(|(&m, &s)| if m.is_finite() { m + s.ln() } else { m })
            .collect();
        Self {
            spacing,
            offset: lo,
            log_counts,
        }
    }

    /// Distribution of sums of independent picks from both histograms,
    /// rebinned at `spacing`.
    fn convolve(&self, other: &Self, spacing: T) -> Self {
        let left: Vec<(T, T)> = self.occupied().collect();
        let right: Vec<(T, T)> = other.occupied().collect();
        let inv = T::one() / spacing;
        let index = |v: T| (v * inv).round().to_i64().unwrap();
        let lo = index(left[0].0 + right[0].0);
        let hi = index(left[left.len() - 1].0 + right[right.len() - 1].0);
        let len = (hi - lo + 1) as usize;
        let targets: Vec<Vec<usize>> = left
            .iter()
            .map(|&(x, _)| right.iter().map(|&(y, _)| (index(x + y) - lo) as usize).collect())
            .collect();
        let mut max = vec![T::neg_infinity(); len];
        for ((_, cx), row) in left.iter().zip(&targets) {
            for ((_, cy), &t) in right.iter().zip(row) {
                max[t] = max[t].max(*cx + *cy);
            }
        }
        let floor = lit::<T>(-60.0);
        let mut sum = vec![T::zero(); len];
        for ((_, cx), row) in left.iter().zip(&targets) {
            for ((_, cy), &t) in right.iter().zip(row) {
                let d = *cx + *cy - max[t];
                if d > floor {
                    sum[t] = sum[t] + d.exp();
                }
            }
        }
        let log_counts = max
            .iter()
            .zip(&sum)
            .map(|(&m, &s)| if m.is_finite() { m + s.ln() } else { m })
            .collect();
        Self {
            spacing,
            offset: lo,
            log_counts,
        }
    }
}

/// Leaves hold at most this many exact multinomial atoms.
const LEAF_BUDGET: f64 = 65536.0;

/// Histograms of `sum of m log-weights` for one regime, memoised by `m`.
#[derive(Debug, Clone)]
struct RegimeHistograms<T> {
    /// distinct log-weights and how often each occurs
    values: Vec<(T, usize)>,
    unit: T,
    memo: HashMap<usize, Lattice<T>>,
}

impl<T: Real> RegimeHistograms<T> {
    fn new(log_weights: &[T], unit: T) -> Self {
        let mut values: Vec<(T, usize)> = Vec::new();
        for &l in log_weights {
            match values.iter_mut().find(|(v, _)| *v == l) {
                Some(slot) => slot.1 += 1,
                None => values.push((l, 1)),
            }
        }
        Self {
            values,
            unit,
            memo: HashMap::new(),
        }
    }

    fn atoms(&self, m: usize) -> f64 {
        // compositions of m into k parts
        let k = self.values.len();
        let mut c = 1.0f64;
        for i in 1..k {
            c = c * (m + i) as f64 / i as f64;
        }
        c
    }

    fn get(&mut self, m: usize, factorials: &LogFactorials<T>) -> Lattice<T> {
        if m == 0 {
            return Lattice::point();
        }
        if let Some(h) = self.memo.get(&m) {
            return h.clone();
        }
        let spacing = self.unit * T::from_usize(m).unwrap();
        let h = if self.atoms(m) <= LEAF_BUDGET {
            self.leaf(m, spacing, factorials)
        } else {
            let a = self.get(m / 2, factorials);
            let b = self.get(m - m / 2, factorials);
            a.convolve(&b, spacing)
        };
        self.memo.insert(m, h.clone());
        h
    }

    fn leaf(&self, m: usize, spacing: T, factorials: &LogFactorials<T>) -> Lattice<T> {
        let k = self.values.len();
        let log_mult: Vec<T> = self
            .values
            .iter()
            .map(|&(_, c)| T::from_usize(c).unwrap().ln())
            .collect();
        let mut atoms = Vec::new();
        let mut parts = vec![0usize; k];
        compositions(m, 0, &mut parts, &mut |parts| {
            let mut value = T::zero();
            let mut log_count = factorials.ln_factorial(m);
            for (i, &n) in parts.iter().enumerate() {
                let n_t = T::from_usize(n).unwrap();
                value = value + n_t * self.values[i].0;
                log_count = log_count - factorials.ln_factorial(n) + n_t * log_mult[i];
            }
            atoms.push((value, log_count));
        });
        Lattice::from_atoms(&atoms, spacing)
    }
}

fn compositions(rest: usize, i: usize, parts: &mut [usize], visit: &mut impl FnMut(&[usize])) {
    if i + 1 == parts.len() {
        parts[i] = rest;
        visit(parts);
        return;
    }
    for n in 0..=rest {
        parts[i] = n;
        compositions(rest - n, i + 1, parts, visit);
    }
}

/// Counts of depth-`n` cylinders by local exponent, binned finely.
#[derive(Debug, Clone)]
pub struct CoarseHistogram<T> {
    pub depth: usize,
    pub log_diameter: T,
    /// `(exponent, log_count)` in increasing exponent order
    pub bins: Vec<(T, T)>,
}

/// Result of a coarse level-set query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSetCount<T> {
    /// natural log of the count, `-inf` when empty
    pub log_count: T,
    /// `log_count / (-log r_n)`
    pub exponent: T,
}

impl<T: Real> LevelSetCount<T> {
    /// The count itself when it is below `2^53`.
    pub fn count(&self) -> Option<u64> {
        if self.log_count == T::neg_infinity() {
            return Some(0);
        }
        let c = to_f64(self.log_count).exp().round();
        (c < 9.007_199_254_740_992e15).then_some(c as u64)
    }
}

impl<T: Real> CoarseHistogram<T> {
    pub fn total_log_count(&self) -> T {
        let counts: Vec<T> = self.bins.iter().map(|b| b.1).collect();
        log_sum_exp(&counts)
    }

    /// Cylinders with local exponent in `[alpha - eps, alpha + eps]`.
    pub fn level_set(&self, alpha: T, eps: T) -> LevelSetCount<T> {
        let lo = self.bins.partition_point(|b| b.0 < alpha - eps);
        let hi = self.bins.partition_point(|b| b.0 <= alpha + eps);
        let counts: Vec<T> = self.bins[lo..hi.max(lo)].iter().map(|b| b.1).collect();
        let log_count = log_sum_exp(&counts);
        LevelSetCount {
            log_count,
            exponent: if log_count == T::neg_infinity() {
                log_count
            } else {
                log_count / -self.log_diameter
            },
        }
    }

    /// Smallest and largest exponent present.
    pub fn support(&self) -> (T, T) {
        (self.bins[0].0, self.bins[self.bins.len() - 1].0)
    }
}

/// Exponent resolution used unless overridden: the smallest default `eps`
/// divided by 40.
pub fn default_resolution() -> f64 {
    DEFAULT_EPS[DEFAULT_EPS.len() - 1] / 40.0
}

/// Builds and caches coarse histograms for one measure.
///
/// Each regime's `m`-level histogram is split in halves until the exact
/// multinomial atoms fit a budget, and the halves are convolved on a lattice
/// of spacing `resolution * lambda * m` (`lambda` the smallest `|log ratio|`).
/// Every tree level contributes at most half a spacing of rounding, so the
/// exponent of a cylinder is off by at most
/// `resolution * (tree height + 2) / 2`, about `0.01 * resolution` per unit of
/// height; with the default resolution this stays below `eps / 4` for depths
/// up to `10^5`.
#[derive(Debug, Clone)]
pub struct LevelSetEstimator<T> {
    cascade: Cascade<T>,
    profile: Profile<T>,
    unit: T,
    factorials: LogFactorials<T>,
    regimes: Vec<RegimeHistograms<T>>,
    built: HashMap<usize, CoarseHistogram<T>>,
}

impl<T: Real> LevelSetEstimator<T> {
    pub fn new(spec: &MeasureSpec<T>, max_depth: usize) -> Result<Self> {
        Self::with_resolution(spec, max_depth, lit(default_resolution()))
    }

    pub fn with_resolution(spec: &MeasureSpec<T>, max_depth: usize, resolution: T) -> Result<Self> {
        if !(resolution > T::zero()) {
            return Err(Error::Domain {
                value: to_f64(resolution),
                domain: "resolution > 0",
            });
        }
        let cascade = spec.cascade()?;
        let profile = cascade.profile(max_depth + 1)?;
        let lambda = cascade
            .regimes
            .iter()
            .map(|r| -r.log_ratio)
            .fold(T::infinity(), T::min);
        let unit = resolution * lambda;
        let regimes = cascade
            .regimes
            .iter()
            .map(|r| RegimeHistograms::new(&r.log_weights, unit))
            .collect();
        Ok(Self {
            factorials: LogFactorials::new(max_depth.max(1)),
            cascade,
            profile,
            unit,
            regimes,
            built: HashMap::new(),
        })
    }

    pub fn cascade(&self) -> &Cascade<T> {
        &self.cascade
    }

    pub fn profile(&self) -> &Profile<T> {
        &self.profile
    }

    pub fn max_depth(&self) -> usize {
        self.profile.max_depth() - 1
    }

    pub fn histogram(&mut self, n: usize) -> Result<&CoarseHistogram<T>> {
        if n == 0 || n > self.max_depth() {
            return Err(Error::Domain {
                value: n as f64,
                domain: "1 <= depth <= estimator max depth",
            });
        }
        if !self.built.contains_key(&n) {
            let h = self.build(n);
            self.built.insert(n, h);
        }
        Ok(&self.built[&n])
    }

    fn build(&mut self, n: usize) -> CoarseHistogram<T> {
        let counts = self.profile.counts(n).to_vec();
        let spacing = self.unit * T::from_usize(n).unwrap();
        let mut total = Lattice::point();
        for (regime, &c) in counts.iter().enumerate() {
            let h = self.regimes[regime].get(c as usize, &self.factorials);
            total = total.convolve(&h, spacing);
        }
        let log_diameter = self.profile.log_diameter(n);
        let mut bins: Vec<(T, T)> = total
            .occupied()
            .map(|(v, c)| (v / log_diameter, c))
            .collect();
        bins.sort_by(|a, b| to_f64(a.0).total_cmp(&to_f64(b.0)));
        CoarseHistogram {
            depth: n,
            log_diameter,
            bins,
        }
    }

    pub fn level_set(&mut self, alpha: T, eps: T, n: usize) -> Result<LevelSetCount<T>> {
        check_eps(eps)?;
        Ok(self.histogram(n)?.level_set(alpha, eps))
    }

    /// Extremes of the coarse exponent over `depths` for every `eps`, and the
    /// pair at the smallest stable `eps`.
    pub fn spectrum(&mut self, alpha: T, eps_schedule: &[T], depths: &[usize]) -> Result<LevelSetEstimate<T>> {
        if eps_schedule.is_empty() || depths.is_empty() {
            return Err(Error::Invalid("eps and depth schedules must be non-empty".into()));
        }
        let mut eps_sorted = eps_schedule.to_vec();
        eps_sorted.sort_by(|a, b| to_f64(*b).total_cmp(&to_f64(*a)));
        let mut readings = Vec::with_capacity(eps_sorted.len());
        for &eps in &eps_sorted {
            check_eps(eps)?;
            let mut lower = T::infinity();
            let mut upper = T::neg_infinity();
            for &n in depths {
                let e = self.histogram(n)?.level_set(alpha, eps).exponent;
                lower = lower.min(e);
                upper = upper.max(e);
            }
            readings.push(EpsReading { eps, lower, upper });
        }
        Ok(LevelSetEstimate::from_readings(readings, lit(STABILITY_TOL)))
    }
}

fn check_eps<T: Real>(eps: T) -> Result<()> {
    if !(eps > T::zero()) {
        return Err(Error::Domain {
            value: to_f64(eps),
            domain: "eps > 0",
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsReading<T> {
    pub eps: T,
    pub lower: T,
    pub upper: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetEstimate<T> {
    pub lower_est: T,
    pub upper_est: T,
    pub eps_used: T,
    pub stable: bool,
    /// one reading per `eps`, largest first
    pub readings: Vec<EpsReading<T>>,
}

fn close<T: Real>(a: T, b: T, tol: T) -> bool {
    a == b || (a - b).abs() <= tol
}

impl<T: Real> LevelSetEstimate<T> {
    fn from_readings(readings: Vec<EpsReading<T>>, tol: T) -> Self {
        let stable_at = (1..readings.len()).rev().find(|&i| {
            close(readings[i].lower, readings[i - 1].lower, tol)
                && close(readings[i].upper, readings[i - 1].upper, tol)
        });
        let (pick, stable) = match stable_at {
            Some(i) => (readings[i], true),
            None => (readings[readings.len() - 1], false),
        };
        Self {
            lower_est: pick.lower,
            upper_est: pick.upper,
            eps_used: pick.eps,
            stable,
            readings,
        }
    }
}

impl<T: Real> fmt::Display for LevelSetEstimate<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}] at eps {}{}",
            self.lower_est,
            self.upper_est,
            self.eps_used,
            if self.stable { "" } else { " (unstable)" }
        )
    }
}

/// One-shot coarse level-set count at depth `n`.
pub fn coarse_level_set<T: Real>(spec: &MeasureSpec<T>, alpha: T, eps: T, n: usize) -> Result<LevelSetCount<T>> {
    LevelSetEstimator::new(spec, n)?.level_set(alpha, eps, n)
}

pub fn level_set_spectrum<T: Real>(
    spec: &MeasureSpec<T>,
    alpha: T,
    eps_schedule: &[T],
    depths: &[usize],
) -> Result<LevelSetEstimate<T>> {
    let max = check_depths(depths)?;
    LevelSetEstimator::new(spec, max)?.spectrum(alpha, eps_schedule, depths)
}

/// Default depths for level-set estimates: powers of two from 1000 for the
/// Fibonacci rule, phase-flip depths in `[100, 50000]` for switching rules.
pub fn default_level_depths<T: Real>(spec: &MeasureSpec<T>) -> Result<Vec<usize>> {
    let cascade = spec.cascade()?;
    match cascade.rule {
        RegimeRule::Switching { .. } => {
            let flips = cascade.rule.flip_depths(50_000)?;
            Ok(flips.into_iter().filter(|&d| d >= 100).collect())
        }
        _ => Ok(vec![1000, 2000, 4000, 8000]),
    }
}
