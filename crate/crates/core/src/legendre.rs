//! Numerical Legendre transforms `f*(alpha) = inf_q (alpha q + f(q))`,
//! one-sided derivatives and convexity diagnostics.
//!
//! A transform value of `-inf` is represented by `T::neg_infinity()`.

use std::fmt;
use std::io::{self, Write};

use crate::analytic::{CurveLabel, SpectrumCurve};
use crate::error::{Error, Result};
use crate::real::{lit, Real};
use crate::roots::golden_section;

/// Outward probing stops at this `|q|`.
const PROBE_LIMIT: f64 = 1e4;
/// Slopes of `alpha q + f(q)` below this are treated as flat when probing.
const FLAT_SLOPE: f64 = 1e-9;

/// Transform of a [`SpectrumCurve`] sampled on an `alpha` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformCurve<T> {
    pub alpha_grid: Vec<T>,
    pub values: Vec<T>,
    pub source_label: CurveLabel,
}

impl<T: Real> TransformCurve<T> {
    /// Smallest and largest `alpha` with a finite value.
    pub fn finite_support(&self) -> Option<(T, T)> {
        let mut finite = self
            .alpha_grid
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| v.is_finite())
            .map(|(a, _)| *a);
        let first = finite.next()?;
        Some((first, finite.last().unwrap_or(first)))
    }

    /// `(alpha, value)` at the largest finite value.
    pub fn maximum(&self) -> Option<(T, T)> {
        self.alpha_grid
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| v.is_finite())
            .fold(None, |best: Option<(T, T)>, (&a, &v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((a, v)),
            })
    }

    /// Finite values form one contiguous run.
    pub fn support_is_interval(&self) -> bool {
        let flags: Vec<bool> = self.values.iter().map(|v| v.is_finite()).collect();
        let starts = flags
            .iter()
            .enumerate()
            .filter(|&(i, &f)| f && (i == 0 || !flags[i - 1]))
            .count();
        starts <= 1
    }

    /// Largest violation of concavity over consecutive finite triples,
    /// measured as a positive second divided difference times the spacing.
    pub fn concavity_defect(&self) -> T {
        let (a, v) = (&self.alpha_grid, &self.values);
        let mut worst = T::zero();
        for i in 1..a.len().saturating_sub(1) {
            if !(v[i - 1].is_finite() && v[i].is_finite() && v[i + 1].is_finite()) {
                continue;
            }
            let left = (v[i] - v[i - 1]) / (a[i] - a[i - 1]);
            let right = (v[i + 1] - v[i]) / (a[i + 1] - a[i]);
            let jump = (right - left) * (a[i + 1] - a[i - 1]) / lit(2.0);
            worst = worst.max(jump);
        }
        worst
    }

    /// Piecewise-linear value at `alpha`; `-inf` outside the finite support.
    pub fn eval(&self, alpha: T) -> T {
        let (a, v) = (&self.alpha_grid, &self.values);
        if a.len() == 1 {
            return if alpha == a[0] { v[0] } else { T::neg_infinity() };
        }
        if alpha < a[0] || alpha > a[a.len() - 1] {
            return T::neg_infinity();
        }
        let i = a.partition_point(|&x| x <= alpha).clamp(1, a.len() - 1) - 1;
        let t = (alpha - a[i]) / (a[i + 1] - a[i]);
        if t == T::zero() {
            v[i]
        } else if t == T::one() {
            v[i + 1]
        } else {
            v[i] + t * (v[i + 1] - v[i])
        }
    }

    /// `sup_alpha (f*(alpha) - alpha q)` over the finite grid points.
    pub fn inverse_at(&self, q: T) -> T {
        self.alpha_grid
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| v.is_finite())
            .map(|(&a, &v)| v - a * q)
            .fold(T::neg_infinity(), T::max)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, header: bool) -> io::Result<()> {
        if header {
            writeln!(out, "alpha,value,source_label")?;
        }
        for (a, v) in self.alpha_grid.iter().zip(&self.values) {
            writeln!(out, "{a},{},{}", format_value(*v), self.source_label)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, true).expect("in-memory write");
        String::from_utf8(buf).expect("ascii csv")
    }
}

/// Shortest round-trip decimal, with `-inf` for the empty-set marker.
pub fn format_value<T: Real>(v: T) -> String {
    if v == T::neg_infinity() {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

impl<T: Real> fmt::Display for TransformCurve<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.finite_support() {
            Some((lo, hi)) => write!(f, "{}* on [{lo}, {hi}]", self.source_label),
            None => write!(f, "{}* empty", self.source_label),
        }
    }
}

fn tolerance<T: Real>(x: T) -> T {
    lit::<T>(1e-12) * (T::one() + x.abs())
}

/// `inf_q (alpha q + f(q))`, `-inf` when the infimum diverges past a grid end.
///
/// The grid minimum is refined by golden-section search on the two cells
/// around it when the curve carries a closed form. A minimum on a grid end is
/// certified by probing outward with doubling steps up to `|q| = 1e4`: a
/// persistent decrease means `-inf`, a flattening slope means the infimum is
/// approached at infinity and the probed value is returned. Curves that
/// decrease outward at both ends are not convex and give
/// [`Error::UnboundedBelow`].
pub fn legendre_at<T: Real>(curve: &SpectrumCurve<T>, alpha: T) -> Result<T> {
    let q = &curve.q_grid;
    let g: Vec<T> = q
        .iter()
        .zip(&curve.values)
        .map(|(&q, &f)| alpha * q + f)
        .collect();
    let n = g.len();
    if n == 1 {
        return Ok(g[0]);
    }
    let falls_left = g[0] < g[1] - tolerance(g[1]);
    let falls_right = g[n - 1] < g[n - 2] - tolerance(g[n - 2]);
    if falls_left && falls_right {
        return Err(Error::UnboundedBelow);
    }
    let (i_min, g_min) = g
        .iter()
        .enumerate()
        .fold((0, g[0]), |best, (i, &v)| if v < best.1 { (i, v) } else { best });

    let objective = |x: T| alpha * x + curve.eval(x);
    if i_min > 0 && i_min < n - 1 {
        if curve.evaluator().is_none() {
            return Ok(g_min);
        }
        let span = q[i_min + 1] - q[i_min - 1];
        let (_, refined) = golden_section(objective, q[i_min - 1], q[i_min + 1], span * lit(1e-12));
        return Ok(refined.min(g_min));
    }

    let outward = if i_min == 0 { -T::one() } else { T::one() };
    let (edge, inner) = if i_min == 0 { (0, 1) } else { (n - 1, n - 2) };
    let step = (q[edge] - q[inner]).abs();
    if curve.evaluator().is_none() {
        let slope = (g[edge] - g[inner]) / step;
        return Ok(if slope < -lit::<T>(FLAT_SLOPE) {
            T::neg_infinity()
        } else {
            g_min
        });
    }
    probe(objective, q[edge], g[edge], outward, step)
}

fn probe<T: Real>(objective: impl Fn(T) -> T, start: T, value: T, outward: T, step: T) -> Result<T> {
    let limit = lit::<T>(PROBE_LIMIT);
    let flat = lit::<T>(FLAT_SLOPE);
    let (mut x, mut v, mut h) = (start, value, step);
    while x.abs() < limit {
        let next = x + outward * h;
        let w = objective(next);
        if !w.is_finite() {
            return Ok(if w == T::neg_infinity() { w } else { v });
        }
        if w >= v - tolerance(v) {
            // stopped decreasing: the minimum lies between x and next
            return Ok(v.min(w));
        }
        let slope = (v - w) / h;
        x = next;
        v = w;
        h = h + h;
        if slope <= flat {
            return Ok(v);
        }
    }
    // still decreasing at the probe limit; the decay rate decides
    let w = objective(x + outward * h);
    let slope = (v - w) / h;
    Ok(if slope > flat { T::neg_infinity() } else { v.min(w) })
}

/// Richardson-extrapolated one-sided difference quotients `(left, right)`.
///
/// With a closed form the quotients are re-evaluated at `h, h/2, h/4, h/8`
/// (`h` the grid step); otherwise they come from grid values at one and two
/// steps and `q` must be a grid point.
pub fn one_sided_derivatives<T: Real>(curve: &SpectrumCurve<T>, q: T) -> Result<(T, T)> {
    let grid = &curve.q_grid;
    if grid.len() < 3 || !(q > grid[0] && q < grid[grid.len() - 1]) {
        return Err(Error::Domain {
            value: crate::real::to_f64(q),
            domain: "interior of the q grid",
        });
    }
    let h = curve.step();
    if let Some(f) = curve.evaluator() {
        let f0 = f(q);
        let quotient = |dir: T, h: T| (f(q + dir * h) - f0) / (dir * h);
        let side = |dir: T| richardson([0, 1, 2, 3].map(|k| quotient(dir, h / lit(f64::from(1u32 << k)))));
        return Ok((side(-T::one()), side(T::one())));
    }
    let i = grid
        .iter()
        .position(|&x| (x - q).abs() <= h * lit(1e-9))
        .ok_or(Error::Domain {
            value: crate::real::to_f64(q),
            domain: "grid point when no closed form is available",
        })?;
    let v = &curve.values;
    let right = if i + 2 < grid.len() {
        let d1 = (v[i + 1] - v[i]) / (grid[i + 1] - grid[i]);
        let d2 = (v[i + 2] - v[i]) / (grid[i + 2] - grid[i]);
        d1 + d1 - d2
    } else {
        (v[i + 1] - v[i]) / (grid[i + 1] - grid[i])
    };
    let left = if i >= 2 {
        let d1 = (v[i] - v[i - 1]) / (grid[i] - grid[i - 1]);
        let d2 = (v[i] - v[i - 2]) / (grid[i] - grid[i - 2]);
        d1 + d1 - d2
    } else {
        (v[i] - v[i - 1]) / (grid[i] - grid[i - 1])
    };
    Ok((left, right))
}

/// Eliminates the `h, h^2, h^3` error terms of quotients taken at halving steps.
fn richardson<T: Real>(mut d: [T; 4]) -> T {
    let mut factor = T::one();
    for level in 1..4 {
        factor = factor + factor;
        for i in 0..4 - level {
            d[i] = (factor * d[i + 1] - d[i]) / (factor - T::one());
        }
    }
    d[0]
}

/// Transform over `alpha` in `[-f'_+(q_max), -f'_-(q_min)]`, sampled at as
/// many points as the source grid (one point when the range is degenerate).
pub fn spectrum_curve<T: Real>(curve: &SpectrumCurve<T>) -> Result<TransformCurve<T>> {
    let (lo, hi) = slope_range(curve)?;
    let points = curve.q_grid.len().max(2);
    let alpha_grid = if (hi - lo).abs() <= lit::<T>(1e-9) * (T::one() + lo.abs()) {
        vec![(lo + hi) / lit(2.0)]
    } else {
        let span = hi - lo;
        let last = T::from_usize(points - 1).unwrap();
        (0..points)
            .map(|i| lo + span * T::from_usize(i).unwrap() / last)
            .collect()
    };
    spectrum_curve_on(curve, &alpha_grid)
}

/// `-f'` at the two grid ends, as `(alpha_min, alpha_max)`.
pub fn slope_range<T: Real>(curve: &SpectrumCurve<T>) -> Result<(T, T)> {
    let grid = &curve.q_grid;
    let (first, last) = (grid[0], grid[grid.len() - 1]);
    match curve.evaluator() {
        Some(_) => {
            let h = curve.step();
            // one step inside so that both one-sided quotients are available
            let shifted = SpectrumCurve::from_evaluator(
                curve.label,
                vec![first - h - h, first, last, last + h + h],
                curve.evaluator().unwrap().clone(),
            )?;
            let (_, right_end) = one_sided_derivatives(&shifted, last)?;
            let (left_start, _) = one_sided_derivatives(&shifted, first)?;
            Ok((-right_end, -left_start))
        }
        None => {
            let n = grid.len();
            if n < 2 {
                return Ok((T::zero(), T::zero()));
            }
            let right_end = (curve.values[n - 1] - curve.values[n - 2]) / (grid[n - 1] - grid[n - 2]);
            let left_start = (curve.values[1] - curve.values[0]) / (grid[1] - grid[0]);
            Ok((-right_end, -left_start))
        }
    }
}

pub fn spectrum_curve_on<T: Real>(curve: &SpectrumCurve<T>, alpha_grid: &[T]) -> Result<TransformCurve<T>> {
    if alpha_grid.windows(2).any(|w| !(w[0] < w[1])) || alpha_grid.is_empty() {
        return Err(Error::Invalid("alpha grid must be non-empty and strictly increasing".into()));
    }
    let values = alpha_grid
        .iter()
        .map(|&a| legendre_at(curve, a))
        .collect::<Result<Vec<T>>>()?;
    Ok(TransformCurve {
        alpha_grid: alpha_grid.to_vec(),
        values,
        source_label: curve.label,
    })
}

/// Exponent window `(sup_{q>0} -b(q)/q, inf_{q<0} -b(q)/q)` over log-spaced
/// `|q|` in `[1e-3, 1e4]`.
pub fn alpha_window<T: Real>(b: impl Fn(T) -> T) -> (T, T) {
    let mut lower = T::neg_infinity();
    let mut upper = T::infinity();
    for i in 0..=700 {
        let q = lit::<T>(10f64.powf(-3.0 + f64::from(i) / 100.0));
        lower = lower.max(-b(q) / q);
        upper = upper.min(b(-q) / q);
    }
    (lower, upper)
}

/// Largest violation of convexity on a curve's own grid, as a non-negative
/// number (zero for convex samples).
pub fn convexity_defect<T: Real>(curve: &SpectrumCurve<T>) -> T {
    let (q, v) = (&curve.q_grid, &curve.values);
    let mut worst = T::zero();
    for i in 1..q.len().saturating_sub(1) {
        let left = (v[i] - v[i - 1]) / (q[i] - q[i - 1]);
        let right = (v[i + 1] - v[i]) / (q[i + 1] - q[i]);
        let second = (right - left) * (q[i + 1] - q[i - 1]) / lit(2.0);
        worst = worst.max(-second);
    }
    worst
}

/// Discrete second differences `f(q-h) - 2f(q) + f(q+h)` along the grid.
pub fn second_differences<T: Real>(curve: &SpectrumCurve<T>) -> Vec<T> {
    curve
        .values
        .windows(3)
        .map(|w| w[0] - w[1] - w[1] + w[2])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{
        dimension_functions, entropy_h, tau_ex3, uniform_grid, Bound, Evaluator,
    };
    use crate::measures::{Family, MeasureSpec};
    use std::sync::Arc;

    fn grid() -> Vec<f64> {
        uniform_grid(-5.0, 5.0, 0.05).unwrap()
    }

    fn closed(label: CurveLabel, f: Evaluator<f64>) -> SpectrumCurve<f64> {
        SpectrumCurve::from_evaluator(label, grid(), f).unwrap()
    }

    fn tau_lower() -> SpectrumCurve<f64> {
        let spec = MeasureSpec::default_for(Family::SwitchedBernoulli);
        closed(
            CurveLabel::TauLower,
            Arc::new(move |q| tau_ex3(q, Bound::Lower, &spec).unwrap()),
        )
    }

    #[test]
    fn linear_function() {
        let line = closed(CurveLabel::BranchA, Arc::new(|q| 1.0 - q));
        assert!((legendre_at(&line, 1.0).unwrap() - 1.0).abs() < 1e-12);
        for alpha in [0.0, 0.9, 1.1, 2.0] {
            assert_eq!(legendre_at(&line, alpha).unwrap(), f64::NEG_INFINITY);
        }
        let (l, r) = one_sided_derivatives(&line, 0.5).unwrap();
        assert!((l + 1.0).abs() < 1e-12 && (r + 1.0).abs() < 1e-12);
        let t = spectrum_curve(&line).unwrap();
        assert_eq!(t.alpha_grid.len(), 1);
        assert!((t.alpha_grid[0] - 1.0).abs() < 1e-9 && (t.values[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sampled_line_without_closed_form() {
        let g = grid();
        let v = g.iter().map(|q| 1.0 - q).collect();
        let line = SpectrumCurve::from_samples(CurveLabel::BranchA, g, v).unwrap();
        assert!((legendre_at(&line, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(legendre_at(&line, 1.2).unwrap(), f64::NEG_INFINITY);
        let (l, r) = one_sided_derivatives(&line, 0.5).unwrap();
        assert!((l + 1.0).abs() < 1e-12 && (r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn tangency_values() {
        let tau = tau_lower();
        let (_, r1) = one_sided_derivatives(&tau, 1.0).unwrap();
        let v = legendre_at(&tau, -r1).unwrap();
        assert!((v - entropy_h(0.2).unwrap()).abs() < 1e-6, "{v}");
        assert!((v - 0.7219).abs() < 1e-4);
        let (_, r0) = one_sided_derivatives(&tau, 0.0).unwrap();
        assert!((legendre_at(&tau, -r0).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let spec = MeasureSpec::default_for(Family::FibonacciMoran);
        let beta = dimension_functions(&spec).unwrap().lower;
        let curve = closed(CurveLabel::Beta, beta.clone());
        for q in [-2.0, 0.5, 2.0, 3.7] {
            let (l, r) = one_sided_derivatives(&curve, q).unwrap();
            let oracle = (beta(q + 1e-7) - beta(q - 1e-7)) / 2e-7;
            assert!((l - r).abs() < 1e-6, "q={q} {l} {r}");
            assert!((l - oracle).abs() < 1e-6, "q={q} {l} {oracle}");
        }
    }

    #[test]
    fn kink_of_the_lower_function() {
        let spec = MeasureSpec::default_for(Family::SwitchedBernoulli);
        let funcs = dimension_functions(&spec).unwrap();
        let b = closed(CurveLabel::LowerMultifractal, funcs.lower.clone());
        let hi = funcs.named(CurveLabel::TauUpper).unwrap();
        let lo = funcs.named(CurveLabel::TauLower).unwrap();
        let d = |f: &Evaluator<f64>, q: f64| (f(q + 1e-7) - f(q - 1e-7)) / 2e-7;
        let (l, r) = one_sided_derivatives(&b, 1.0).unwrap();
        // b = tau_lower just below 1, tau_upper just above
        assert!((l - d(lo, 1.0)).abs() < 1e-6 && (r - d(hi, 1.0)).abs() < 1e-6);
        assert!(l != r && (l - r).abs() > 1e-3);
    }

    #[test]
    fn maxima_of_transforms() {
        let spec = MeasureSpec::default_for(Family::SwitchedBernoulli);
        let funcs = dimension_functions(&spec).unwrap();
        let big = closed(CurveLabel::UpperMultifractal, funcs.upper.clone());
        let t = spectrum_curve(&big).unwrap();
        let (_, top) = t.maximum().unwrap();
        assert!((top - 1.0).abs() < 1e-3);
        let (_, r0) = one_sided_derivatives(&big, 0.0).unwrap();
        assert!((legendre_at(&big, -r0).unwrap() - 1.0).abs() < 1e-9);

        let fib = MeasureSpec::default_for(Family::FibonacciMoran);
        let beta = dimension_functions(&fib).unwrap().lower;
        let curve = closed(CurveLabel::Beta, beta.clone());
        let t = spectrum_curve(&curve).unwrap();
        let (_, top) = t.maximum().unwrap();
        assert!((top - beta(0.0)).abs() < 1e-3, "{top} {}", beta(0.0));
        assert!(t.support_is_interval());
        assert!(t.concavity_defect() <= 1e-10);
    }

    #[test]
    fn fenchel_inequality() {
        let tau = tau_lower();
        let t = spectrum_curve(&tau).unwrap();
        for (&a, &v) in t.alpha_grid.iter().zip(&t.values).step_by(7) {
            for (&q, &f) in tau.q_grid.iter().zip(&tau.values) {
                assert!(a * q + f >= v - 1e-12);
            }
        }
    }

    #[test]
    fn inverse_recovers_convex_source() {
        let spec = MeasureSpec::default_for(Family::SwitchedBernoulli);
        let upper: Evaluator<f64> = Arc::new(move |q| tau_ex3(q, Bound::Upper, &spec).unwrap());
        let curve = closed(CurveLabel::TauUpper, upper.clone());
        let t = spectrum_curve(&curve).unwrap();
        let h = curve.step();
        for &q in curve.q_grid.iter().skip(2).take(curve.q_grid.len() - 4) {
            // resolution: variation of the source over two grid steps
            let tol = (upper(q + 2.0 * h) - upper(q - 2.0 * h)).abs();
            let back = t.inverse_at(q);
            assert!((back - upper(q)).abs() <= tol, "q={q} {back} {}", upper(q));
        }
    }

    #[test]
    fn unbounded_below_for_concave_input() {
        let cap = closed(CurveLabel::BranchA, Arc::new(|q| -q * q));
        assert_eq!(legendre_at(&cap, 0.0), Err(Error::UnboundedBelow));
    }

    #[test]
    fn lower_transform_is_hull_transform() {
        // inf over min(f, g) equals the smaller of the two branch transforms
        let spec = MeasureSpec::default_for(Family::FourLetter);
        let funcs = dimension_functions(&spec).unwrap();
        let b = closed(CurveLabel::LowerMultifractal, funcs.lower.clone());
        let fa = closed(CurveLabel::BranchA, funcs.named(CurveLabel::BranchA).unwrap().clone());
        let fb = closed(CurveLabel::BranchB, funcs.named(CurveLabel::BranchB).unwrap().clone());
        for alpha in [0.8, 0.9, 1.0, 1.1, 1.3] {
            let direct = legendre_at(&b, alpha).unwrap();
            let branches = legendre_at(&fa, alpha).unwrap().min(legendre_at(&fb, alpha).unwrap());
            assert!(direct == branches || (direct - branches).abs() < 1e-9, "{alpha}");
        }
    }

    #[test]
    fn window_of_bernoulli_branch() {
        let spec = MeasureSpec::<f64>::default_for(Family::SwitchedBernoulli);
        let (lo, hi) = alpha_window(|q| tau_ex3(q, Bound::Upper, &spec).unwrap());
        assert!((lo - -(0.6f64.log2())).abs() < 1e-3, "{lo}");
        assert!((hi - -(0.4f64.log2())).abs() < 1e-3, "{hi}");
    }

    #[test]
    fn csv_marks_empty_values() {
        let t = TransformCurve {
            alpha_grid: vec![0.5, 1.0],
            values: vec![f64::NEG_INFINITY, 1.0],
            source_label: CurveLabel::LowerMultifractal,
        };
        assert_eq!(t.to_csv(), "alpha,value,source_label\n0.5,-inf,b_mu\n1,1,b_mu\n");
        assert_eq!(t.finite_support(), Some((1.0, 1.0)));
    }

    #[test]
    fn convexity_diagnostics() {
        let tau = tau_lower();
        assert!(convexity_defect(&tau) <= 1e-12);
        assert!(second_differences(&tau).iter().all(|&d| d >= -1e-10));
        let cap = closed(CurveLabel::BranchA, Arc::new(|q| -q * q));
        assert!(convexity_defect(&cap) > 1e-3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn line_transform_is_point(slope in -3.0f64..-0.1, intercept in -2.0f64..2.0, off in 0.05f64..1.0) {
                let line = closed(CurveLabel::BranchA, Arc::new(move |q| intercept + slope * q));
                let at = legendre_at(&line, -slope).unwrap();
                prop_assert!((at - intercept).abs() < 1e-12 * (1.0 + intercept.abs()));
                prop_assert_eq!(legendre_at(&line, -slope + off).unwrap(), f64::NEG_INFINITY);
                prop_assert_eq!(legendre_at(&line, -slope - off).unwrap(), f64::NEG_INFINITY);
            }

            #[test]
            fn transform_below_every_candidate(p in 0.05f64..0.45, alpha in 0.2f64..3.0) {
                let spec = MeasureSpec::<f64>::SwitchedBernoulli { p, p_hat: 0.5, schedule: Default::default() };
                let curve = closed(CurveLabel::TauLower, Arc::new(move |q| tau_ex3(q, Bound::Lower, &spec).unwrap()));
                let v = legendre_at(&curve, alpha).unwrap();
                for (&q, &f) in curve.q_grid.iter().zip(&curve.values) {
                    prop_assert!(alpha * q + f >= v - 1e-12);
                }
            }

            #[test]
            fn decreasing_sources_have_nonnegative_support(p in 0.05f64..0.45) {
                let spec = MeasureSpec::<f64>::SwitchedBernoulli { p, p_hat: 0.5, schedule: Default::default() };
                let curve = closed(CurveLabel::TauLower, Arc::new(move |q| tau_ex3(q, Bound::Lower, &spec).unwrap()));
                let t = spectrum_curve(&curve).unwrap();
                let (lo, _) = t.finite_support().unwrap();
                prop_assert!(lo >= 0.0);
                prop_assert!(t.support_is_interval());
                prop_assert!(t.concavity_defect() <= 1e-10);
            }
        }
    }
}
