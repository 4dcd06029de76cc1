//! Closed-form multifractal dimension functions of the five families, the
//! entropy helpers, and a bisection solver for the finite-depth exponent
//! equation `sum mu(J)^q |J|^beta = 1`.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::{brute_log_partition_sums, Family, MeasureSpec};
use crate::real::{lit, log_moment, Real};
use crate::roots::{bisect, BisectionOptions};
use crate::symbolic::letter_frequency;

pub type Evaluator<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Golden ratio conjugate, the positive root of `x^2 + x = 1`.
pub fn eta<T: Real>() -> T {
    (lit::<T>(5.0).sqrt() - T::one()) / lit(2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveLabel {
    /// lower multifractal function `b`
    LowerMultifractal,
    /// upper multifractal function `B`
    UpperMultifractal,
    /// packing-type function `Delta`
    Packing,
    Beta,
    BetaK,
    TauLower,
    TauUpper,
    BetaLower,
    BetaUpper,
    Beta1,
    Beta2,
    BranchA,
    BranchB,
    MomentLiminf,
    MomentLimsup,
}

impl CurveLabel {
    pub const ALL: [CurveLabel; 15] = [
        CurveLabel::LowerMultifractal,
        CurveLabel::UpperMultifractal,
        CurveLabel::Packing,
        CurveLabel::Beta,
        CurveLabel::BetaK,
        CurveLabel::TauLower,
        CurveLabel::TauUpper,
        CurveLabel::BetaLower,
        CurveLabel::BetaUpper,
        CurveLabel::Beta1,
        CurveLabel::Beta2,
        CurveLabel::BranchA,
        CurveLabel::BranchB,
        CurveLabel::MomentLiminf,
        CurveLabel::MomentLimsup,
    ];

    pub fn from_name(name: &str) -> Option<CurveLabel> {
        CurveLabel::ALL.into_iter().find(|l| l.as_str() == name)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CurveLabel::LowerMultifractal => "b_mu",
            CurveLabel::UpperMultifractal => "B_mu",
            CurveLabel::Packing => "Delta_mu",
            CurveLabel::Beta => "beta",
            CurveLabel::BetaK => "beta_k",
            CurveLabel::TauLower => "tau_lower",
            CurveLabel::TauUpper => "tau_upper",
            CurveLabel::BetaLower => "beta_lower",
            CurveLabel::BetaUpper => "beta_upper",
            CurveLabel::Beta1 => "beta_1",
            CurveLabel::Beta2 => "beta_2",
            CurveLabel::BranchA => "branch_a",
            CurveLabel::BranchB => "branch_b",
            CurveLabel::MomentLiminf => "moment_liminf",
            CurveLabel::MomentLimsup => "moment_limsup",
        }
    }

    pub fn is_dimension_function(self) -> bool {
        matches!(
            self,
            CurveLabel::LowerMultifractal | CurveLabel::UpperMultifractal | CurveLabel::Packing
        )
    }

    /// Curves that are convex by construction. The lower function and the
    /// pointwise minima are excluded.
    pub fn expected_convex(self) -> bool {
        !matches!(
            self,
            CurveLabel::LowerMultifractal
                | CurveLabel::BetaLower
                | CurveLabel::MomentLiminf
                | CurveLabel::MomentLimsup
        )
    }
}

impl fmt::Display for CurveLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Uniform grid `min, min + step, ...` up to `max` (inclusive within 1e-9).
pub fn uniform_grid<T: Real>(min: f64, max: f64, step: f64) -> Result<Vec<T>> {
    if !(step > 0.0) || !(max >= min) || !min.is_finite() || !max.is_finite() {
        return Err(Error::Invalid(format!(
            "grid needs min <= max and step > 0, got [{min}, {max}] step {step}"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let v = min + i as f64 * step;
            // snap representation noise so that grids hit integers exactly
            lit((v * 1e12).round() / 1e12)
        })
        .collect())
}

/// A function of `q` sampled on a grid, optionally backed by its closed form.
#[derive(Clone)]
pub struct SpectrumCurve<T> {
    pub q_grid: Vec<T>,
    pub values: Vec<T>,
    pub label: CurveLabel,
    evaluator: Option<Evaluator<T>>,
}

impl<T: Real> fmt::Debug for SpectrumCurve<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectrumCurve")
            .field("label", &self.label)
            .field("points", &self.q_grid.len())
            .field("closed_form", &self.evaluator.is_some())
            .finish()
    }
}

fn check_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Invalid("empty grid".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Invalid("grid must be strictly increasing".into()));
    }
    Ok(())
}

impl<T: Real> SpectrumCurve<T> {
    pub fn from_evaluator(label: CurveLabel, q_grid: Vec<T>, evaluator: Evaluator<T>) -> Result<Self> {
        check_grid(&q_grid)?;
        let values = q_grid.iter().map(|&q| evaluator(q)).collect();
        Ok(Self {
            q_grid,
            values,
            label,
            evaluator: Some(evaluator),
        })
    }

    pub fn from_samples(label: CurveLabel, q_grid: Vec<T>, values: Vec<T>) -> Result<Self> {
        check_grid(&q_grid)?;
        if q_grid.len() != values.len() {
            return Err(Error::Invalid(format!(
                "{} grid points but {} values",
                q_grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            q_grid,
            values,
            label,
            evaluator: None,
        })
    }

    pub fn evaluator(&self) -> Option<&Evaluator<T>> {
        self.evaluator.as_ref()
    }

    /// Closed form when available, otherwise linear interpolation (constant
    /// extrapolation of the end slopes outside the grid).
    pub fn eval(&self, q: T) -> T {
        if let Some(f) = &self.evaluator {
            return f(q);
        }
        let g = &self.q_grid;
        if g.len() == 1 {
            return self.values[0];
        }
        let i = match g.iter().position(|&x| x > q) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => g.len() - 2,
        }
        .min(g.len() - 2);
        let t = (q - g[i]) / (g[i + 1] - g[i]);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    /// Smallest spacing of the grid.
    pub fn step(&self) -> T {
        self.q_grid
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::infinity(), T::min)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, header: bool) -> io::Result<()> {
        if header {
            writeln!(out, "q,value,label")?;
        }
        for (q, v) in self.q_grid.iter().zip(&self.values) {
            writeln!(out, "{q},{v},{}", self.label)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, true).expect("in-memory write");
        String::from_utf8(buf).expect("ascii csv")
    }
}

fn log_sum_powers<T: Real>(weights: &[T], q: T) -> T {
    let logs: Vec<T> = weights.iter().map(|w| w.ln()).collect();
    log_moment(&logs, q).0
}

fn family_error(expected: Family, got: Family) -> Error {
    Error::Invalid(format!("expected a {expected} measure, got {got}"))
}

/// Finite-depth exponent of the Fibonacci construction from the letter count of
/// the first `k` letters.
pub fn beta_k_fibonacci<T: Real>(q: T, k: usize, spec: &MeasureSpec<T>) -> Result<T> {
    let MeasureSpec::FibonacciMoran { r_a, r_b, p_a, p_b } = spec else {
        return Err(family_error(Family::FibonacciMoran, spec.family()));
    };
    let (count_a, _) = letter_frequency(k)?;
    let rho = T::from_usize(k - count_a).unwrap() / T::from_usize(count_a).unwrap();
    let la = log_sum_powers(p_a, q);
    let lb = log_sum_powers(p_b, q);
    Ok((-la - rho * lb) / (r_a.ln() + rho * r_b.ln()))
}

pub fn beta_fibonacci<T: Real>(q: T, spec: &MeasureSpec<T>) -> Result<T> {
    let MeasureSpec::FibonacciMoran { r_a, r_b, p_a, p_b } = spec else {
        return Err(family_error(Family::FibonacciMoran, spec.family()));
    };
    let e = eta::<T>();
    Ok((-log_sum_powers(p_a, q) - e * log_sum_powers(p_b, q)) / (r_a.ln() + e * r_b.ln()))
}

/// Solves `log sum_sigma mu(J_sigma)^q + beta log|J| = 0` at depth `k` by
/// bisection. With `oracle` the sum comes from full enumeration (`k <= 16`).
pub fn beta_k_bisection<T: Real>(spec: &MeasureSpec<T>, q: T, k: usize, oracle: bool) -> Result<T> {
    let cascade = spec.cascade()?;
    let profile = cascade.profile(k)?;
    let log_sum = if oracle {
        brute_log_partition_sums(spec, k, &[q])?[0]
    } else {
        cascade.factored_log_partition_sum(profile.counts(k), q)
    };
    let log_diam = profile.log_diameter(k);
    bisect(|beta| log_sum + beta * log_diam, BisectionOptions::default())
}

/// `(lower, upper)` envelope of the two frequency mixtures 1/3 and 2/3.
pub fn beta_bounds_ex2<T: Real>(q: T, spec: &MeasureSpec<T>) -> Result<(T, T)> {
    let [g1, g2] = ex2_branches(q, spec)?;
    Ok((g1.min(g2), g1.max(g2)))
}

/// Frequency mixture with weight `w` on the two-branch level type.
pub fn ex2_mixture<T: Real>(q: T, w: T, spec: &MeasureSpec<T>) -> Result<T> {
    let MeasureSpec::NonRegularMoran {
        r_a, r_b, p_a, p_b, ..
    } = spec
    else {
        return Err(family_error(Family::NonRegularMoran, spec.family()));
    };
    let one = T::one();
    let num = w * log_sum_powers(p_a, q) + (one - w) * log_sum_powers(p_b, q);
    let den = w * r_a.ln() + (one - w) * r_b.ln();
    Ok(-num / den)
}

fn ex2_branches<T: Real>(q: T, spec: &MeasureSpec<T>) -> Result<[T; 2]> {
    let third = T::one() / lit(3.0);
    Ok([
        ex2_mixture(q, third, spec)?,
        ex2_mixture(q, third + third, spec)?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Lower,
    Upper,
}

pub fn tau_ex3<T: Real>(q: T, which: Bound, spec: &MeasureSpec<T>) -> Result<T> {
    let MeasureSpec::SwitchedBernoulli { p, p_hat, .. } = spec else {
        return Err(family_error(Family::SwitchedBernoulli, spec.family()));
    };
    let s = match which {
        Bound::Lower => *p,
        Bound::Upper => *p_hat,
    };
    Ok(log_sum_powers(&[s, T::one() - s], q) / T::LN_2())
}

/// Which branch realises the lower function of the switched Bernoulli measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveBranch {
    TauLower,
    TauUpper,
    /// the branches touch
    Both,
}

/// Case table for `p < p_hat`: `b = tau_lower` on `(0, 1)`, `b = tau_upper`
/// for `q < 0` or `q > 1`, and the branches coincide at `q = 0, 1`.
pub fn ex3_lower_branch<T: Real>(q: T) -> ActiveBranch {
    if q == T::zero() || q == T::one() {
        ActiveBranch::Both
    } else if q > T::zero() && q < T::one() {
        ActiveBranch::TauLower
    } else {
        ActiveBranch::TauUpper
    }
}

pub fn b_b_ex3<T: Real>(q: T, spec: &MeasureSpec<T>) -> Result<(T, T)> {
    let lo = tau_ex3(q, Bound::Lower, spec)?;
    let hi = tau_ex3(q, Bound::Upper, spec)?;
    Ok((lo.min(hi), lo.max(hi)))
}

fn log4_sum<T: Real>(weights: &[T], q: T) -> T {
    log_sum_powers(weights, q) / (T::LN_2() + T::LN_2())
}

pub fn b_b_ex4<T: Real>(q: T, spec: &MeasureSpec<T>) -> Result<(T, T)> {
    let MeasureSpec::FourLetter { a, b, .. } = spec else {
        return Err(family_error(Family::FourLetter, spec.family()));
    };
    let la = log4_sum(a, q);
    let lb = log4_sum(b, q);
    Ok((la.min(lb), la.max(lb)))
}

pub fn yuan_betas<T: Real>(q: T, spec: &MeasureSpec<T>) -> Result<(T, T)> {
    let MeasureSpec::YuanSwitching {
        scale_a,
        scale_b,
        p,
        p_tilde,
        ..
    } = spec
    else {
        return Err(family_error(Family::YuanSwitching, spec.family()));
    };
    let one = T::one();
    Ok((
        log_sum_powers(&[*p, one - *p], q) / scale_a.ln(),
        log_sum_powers(&[*p_tilde, one - *p_tilde], q) / scale_b.ln(),
    ))
}

/// Binary entropy in bits.
pub fn entropy_h<T: Real>(s: T) -> Result<T> {
    if !(s > T::zero() && s < T::one()) {
        return Err(Error::Domain {
            value: crate::real::to_f64(s),
            domain: "0 < s < 1",
        });
    }
    let one = T::one();
    Ok((-s * s.ln() - (one - s) * (one - s).ln()) / T::LN_2())
}

/// `-p_hat log2 p - (1 - p_hat) log2 (1 - p)`; `p_hat` may sit on `{0, 1}`.
pub fn mixed_entropy_h<T: Real>(p_hat: T, p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::Domain {
            value: crate::real::to_f64(p),
            domain: "0 < p < 1",
        });
    }
    if !(p_hat >= T::zero() && p_hat <= T::one()) {
        return Err(Error::Domain {
            value: crate::real::to_f64(p_hat),
            domain: "0 <= p_hat <= 1",
        });
    }
    let one = T::one();
    Ok((-p_hat * p.ln() - (one - p_hat) * (one - p).ln()) / T::LN_2())
}

/// Closed forms for one family: the lower, upper and packing functions and
/// the named branch curves they are built from.
#[derive(Clone)]
pub struct DimensionFunctions<T> {
    pub family: Family,
    pub lower: Evaluator<T>,
    pub upper: Evaluator<T>,
    pub packing: Evaluator<T>,
    pub named: Vec<(CurveLabel, Evaluator<T>)>,
}

impl<T: Real> DimensionFunctions<T> {
    pub fn named(&self, label: CurveLabel) -> Option<&Evaluator<T>> {
        self.named.iter().find(|(l, _)| *l == label).map(|(_, f)| f)
    }

    /// `(label, evaluator)` for b, B, Delta followed by the named curves.
    pub fn all(&self) -> Vec<(CurveLabel, Evaluator<T>)> {
        let mut out = vec![
            (CurveLabel::LowerMultifractal, self.lower.clone()),
            (CurveLabel::UpperMultifractal, self.upper.clone()),
            (CurveLabel::Packing, self.packing.clone()),
        ];
        out.extend(self.named.iter().cloned());
        out
    }

    pub fn curves(&self, q_grid: &[T]) -> Result<Vec<SpectrumCurve<T>>> {
        self.all()
            .into_iter()
            .map(|(label, f)| SpectrumCurve::from_evaluator(label, q_grid.to_vec(), f))
            .collect()
    }
}

fn min_of<T: Real>(f: Evaluator<T>, g: Evaluator<T>) -> Evaluator<T> {
    Arc::new(move |q| f(q).min(g(q)))
}

fn max_of<T: Real>(f: Evaluator<T>, g: Evaluator<T>) -> Evaluator<T> {
    Arc::new(move |q| f(q).max(g(q)))
}

fn two_branch<T: Real>(
    family: Family,
    first: (CurveLabel, Evaluator<T>),
    second: (CurveLabel, Evaluator<T>),
    envelope_labels: Option<(CurveLabel, CurveLabel)>,
) -> DimensionFunctions<T> {
    let lower = min_of(first.1.clone(), second.1.clone());
    let upper = max_of(first.1.clone(), second.1.clone());
    let mut named = vec![first, second];
    if let Some((lo, hi)) = envelope_labels {
        named.push((lo, lower.clone()));
        named.push((hi, upper.clone()));
    }
    DimensionFunctions {
        family,
        lower,
        packing: upper.clone(),
        upper,
        named,
    }
}

/// Closed-form dimension functions of a validated spec.
pub fn dimension_functions<T: Real>(spec: &MeasureSpec<T>) -> Result<DimensionFunctions<T>> {
    spec.validate()?;
    let s = spec.clone();
    Ok(match spec.family() {
        Family::FibonacciMoran => {
            let beta: Evaluator<T> = Arc::new(move |q| beta_fibonacci(q, &s).unwrap());
            DimensionFunctions {
                family: Family::FibonacciMoran,
                lower: beta.clone(),
                upper: beta.clone(),
                packing: beta.clone(),
                named: vec![(CurveLabel::Beta, beta)],
            }
        }
        Family::NonRegularMoran => {
            let s2 = s.clone();
            let third = T::one() / lit(3.0);
            let g1: Evaluator<T> = Arc::new(move |q| ex2_mixture(q, third, &s).unwrap());
            let g2: Evaluator<T> =
                Arc::new(move |q| ex2_mixture(q, third + third, &s2).unwrap());
            two_branch(
                Family::NonRegularMoran,
                (CurveLabel::BranchA, g1),
                (CurveLabel::BranchB, g2),
                Some((CurveLabel::BetaLower, CurveLabel::BetaUpper)),
            )
        }
        Family::SwitchedBernoulli => {
            let s2 = s.clone();
            let lo: Evaluator<T> = Arc::new(move |q| tau_ex3(q, Bound::Lower, &s).unwrap());
            let hi: Evaluator<T> = Arc::new(move |q| tau_ex3(q, Bound::Upper, &s2).unwrap());
            two_branch(
                Family::SwitchedBernoulli,
                (CurveLabel::TauLower, lo),
                (CurveLabel::TauUpper, hi),
                None,
            )
        }
        Family::FourLetter => {
            let MeasureSpec::FourLetter { a, b, .. } = spec else {
                unreachable!()
            };
            let (a, b) = (a.clone(), b.clone());
            let fa: Evaluator<T> = Arc::new(move |q| log4_sum(&a, q));
            let fb: Evaluator<T> = Arc::new(move |q| log4_sum(&b, q));
            two_branch(
                Family::FourLetter,
                (CurveLabel::BranchA, fa),
                (CurveLabel::BranchB, fb),
                None,
            )
        }
        Family::YuanSwitching => {
            let s2 = s.clone();
            let b1: Evaluator<T> = Arc::new(move |q| yuan_betas(q, &s).unwrap().0);
            let b2: Evaluator<T> = Arc::new(move |q| yuan_betas(q, &s2).unwrap().1);
            two_branch(
                Family::YuanSwitching,
                (CurveLabel::Beta1, b1),
                (CurveLabel::Beta2, b2),
                None,
            )
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::Schedule;

    fn fib() -> MeasureSpec<f64> {
        MeasureSpec::default_for(Family::FibonacciMoran)
    }

    #[test]
    fn grid_hits_integers() {
        let g: Vec<f64> = uniform_grid(-5.0, 5.0, 0.05).unwrap();
        assert_eq!(g.len(), 201);
        assert!(g.contains(&1.0) && g.contains(&0.0) && g.contains(&-2.0));
        assert!(uniform_grid::<f64>(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn beta_k_values() {
        let spec = fib();
        for k in [1, 2, 7, 100] {
            assert!(beta_k_fibonacci(1.0, k, &spec).unwrap().abs() < 1e-15);
        }
        let v = beta_k_fibonacci(0.0, 1, &spec).unwrap();
        assert!((v - (-(2f64.ln()) / 0.4f64.ln())).abs() < 1e-15);
        let closed = beta_k_fibonacci(2.0, 12, &spec).unwrap();
        let solved = beta_k_bisection(&spec, 2.0, 12, false).unwrap();
        assert!((closed - solved).abs() < 1e-9);
    }

    #[test]
    fn beta_limit() {
        let spec = fib();
        assert!(beta_fibonacci(1.0, &spec).unwrap().abs() < 1e-15);
        assert!(beta_fibonacci(0.0, &spec).unwrap() > beta_fibonacci(2.0, &spec).unwrap());
        for q in [-2.0, 0.0, 0.5, 2.0] {
            let d = beta_k_fibonacci(q, 10_000, &spec).unwrap() - beta_fibonacci(q, &spec).unwrap();
            assert!(d.abs() <= 1e-3, "q={q} diff={d}");
        }
        let e: f64 = eta();
        assert!((e * e + e - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bisection_special_values() {
        let spec = MeasureSpec::<f64>::default_for(Family::NonRegularMoran);
        assert_eq!(beta_k_bisection(&spec, 1.0, 9, false).unwrap(), 0.0);
        let cascade = spec.cascade().unwrap();
        let count = cascade.cylinder_count(9).unwrap() as f64;
        let diam = cascade.log_diameter(9).unwrap();
        let v = beta_k_bisection(&spec, 0.0, 9, true).unwrap();
        assert!((v - count.ln() / -diam).abs() < 1e-11);
        let (lo, hi) = beta_bounds_ex2(2.0, &spec).unwrap();
        let b11 = beta_k_bisection(&spec, 2.0, 11, false).unwrap();
        assert!(lo <= b11 && b11 <= hi, "{lo} {b11} {hi}");
    }

    #[test]
    fn ex2_bounds() {
        let spec = MeasureSpec::<f64>::default_for(Family::NonRegularMoran);
        let (lo, hi) = beta_bounds_ex2(1.0, &spec).unwrap();
        assert!(lo.abs() < 1e-15 && hi.abs() < 1e-15);
        for q in [-3.0, -1.0, 0.0, 0.5, 2.0, 4.0] {
            let (lo, hi) = beta_bounds_ex2(q, &spec).unwrap();
            assert!(hi > lo, "q={q}");
        }
        let flat = MeasureSpec::NonRegularMoran {
            r_a: 0.4,
            r_b: 0.3,
            p_a: vec![0.5, 0.5],
            p_b: vec![1.0 / 3.0; 3],
            schedule: Schedule::Doubling,
        };
        // at q = 0 the sums count branches
        let direct = |w: f64| -(w * 2f64.ln() + (1.0 - w) * 3f64.ln()) / (w * 0.4f64.ln() + (1.0 - w) * 0.3f64.ln());
        let (a, b) = (direct(1.0 / 3.0), direct(2.0 / 3.0));
        let (lo, hi) = beta_bounds_ex2(0.0, &flat).unwrap();
        assert!((lo - a.min(b)).abs() < 1e-14 && (hi - a.max(b)).abs() < 1e-14);
    }

    #[test]
    fn tau_values() {
        let spec = MeasureSpec::<f64>::default_for(Family::SwitchedBernoulli);
        for which in [Bound::Lower, Bound::Upper] {
            assert!(tau_ex3(1.0, which, &spec).unwrap().abs() < 1e-15);
            assert!((tau_ex3(0.0, which, &spec).unwrap() - 1.0).abs() < 1e-15);
        }
        let v = tau_ex3(2.0, Bound::Lower, &spec).unwrap();
        assert!((v - 0.68f64.log2()).abs() < 1e-14);
        assert!((v + 0.5564).abs() < 1e-4);
    }

    #[test]
    fn ex3_case_table() {
        let spec = MeasureSpec::<f64>::default_for(Family::SwitchedBernoulli);
        for q in [0.0, 1.0] {
            let (b, big) = b_b_ex3(q, &spec).unwrap();
            assert!((b - big).abs() < 1e-15);
        }
        for q in [-2.0, -0.5, 0.25, 0.5, 0.9, 1.5, 2.0] {
            let (b, big) = b_b_ex3(q, &spec).unwrap();
            let lo = tau_ex3(q, Bound::Lower, &spec).unwrap();
            let hi = tau_ex3(q, Bound::Upper, &spec).unwrap();
            match ex3_lower_branch(q) {
                ActiveBranch::TauLower => assert!(b == lo && big == hi && b < big),
                ActiveBranch::TauUpper => assert!(b == hi && big == lo && b < big),
                ActiveBranch::Both => unreachable!(),
            }
        }
        let (b, big) = b_b_ex3(2.0, &spec).unwrap();
        assert!((b - 0.52f64.log2()).abs() < 1e-14);
        assert!((big - 0.68f64.log2()).abs() < 1e-14);
    }

    #[test]
    fn ex4_values() {
        let uniform = MeasureSpec::<f64>::FourLetter {
            a: vec![0.25; 4],
            b: vec![0.25; 4],
            schedule: Schedule::Factorial,
        };
        for q in [-2.0, 0.0, 0.5, 3.0] {
            let (b, big) = b_b_ex4(q, &uniform).unwrap();
            assert!((b - (1.0 - q)).abs() < 1e-14 && (big - (1.0 - q)).abs() < 1e-14);
        }
        let spec = MeasureSpec::<f64>::default_for(Family::FourLetter);
        let (b, big) = b_b_ex4(0.0, &spec).unwrap();
        assert!((b - 1.0).abs() < 1e-15 && (big - 1.0).abs() < 1e-15);
        let (b, big) = b_b_ex4(2.0, &spec).unwrap();
        assert!((b + 1.0).abs() < 1e-14);
        assert!((big - 0.30f64.ln() / 4f64.ln()).abs() < 1e-14);
        assert!((big + 0.8685).abs() < 1e-4);
    }

    #[test]
    fn yuan_values() {
        let spec = MeasureSpec::<f64>::default_for(Family::YuanSwitching);
        let (b1, b2) = yuan_betas(1.0, &spec).unwrap();
        assert!(b1.abs() < 1e-15 && b2.abs() < 1e-15);
        let (b1, b2) = yuan_betas(0.0, &spec).unwrap();
        assert!((b1 - 2f64.ln() / 5f64.ln()).abs() < 1e-15);
        assert!((b2 - 2f64.ln() / 3f64.ln()).abs() < 1e-15);
        let same = MeasureSpec::<f64>::YuanSwitching {
            scale_a: 5.0,
            scale_b: 3.0,
            p: 0.3,
            p_tilde: 0.3,
            schedule: Schedule::Factorial,
        };
        let grid: Vec<f64> = uniform_grid(-5.0, 5.0, 0.05).unwrap();
        for q in grid {
            let (b1, b2) = yuan_betas(q, &same).unwrap();
            if q < 1.0 {
                assert!(b1 < b2, "q={q}");
            } else if q > 1.0 {
                assert!(b1 > b2, "q={q}");
            }
        }
    }

    #[test]
    fn entropies() {
        assert!((entropy_h(0.5f64).unwrap() - 1.0).abs() < 1e-15);
        assert!(entropy_h(1e-12f64).unwrap() < 1e-10 * 40.0);
        assert!((entropy_h(0.2f64).unwrap() - 0.7219280948873623).abs() < 1e-13);
        assert!(entropy_h(0.0f64).is_err() && entropy_h(1.0f64).is_err());
        assert!((mixed_entropy_h(0.3f64, 0.3).unwrap() - entropy_h(0.3f64).unwrap()).abs() < 1e-14);
        let v = mixed_entropy_h(0.5f64, 0.2).unwrap();
        assert!((v - (-0.5 * (0.2f64 * 0.8).log2())).abs() < 1e-14);
        assert!((v - 1.3219).abs() < 1e-4);
        assert!((mixed_entropy_h(0.0f64, 0.2).unwrap() - 0.3219).abs() < 1e-4);
        assert!(mixed_entropy_h(0.5f64, 1.0).is_err());
    }

    #[test]
    fn zero_at_one_for_all_families() {
        for f in Family::ALL {
            let funcs = dimension_functions(&MeasureSpec::<f64>::default_for(f)).unwrap();
            for (label, e) in funcs.all() {
                assert!(e(1.0).abs() < 1e-12, "{f} {label}");
            }
        }
    }

    #[test]
    fn csv_layout() {
        let grid = vec![0.0, 0.5, 1.0];
        let c = SpectrumCurve::from_samples(CurveLabel::TauLower, grid, vec![1.0, 0.25, 0.0]).unwrap();
        assert_eq!(c.to_csv(), "q,value,label\n0,1,tau_lower\n0.5,0.25,tau_lower\n1,0,tau_lower\n");
        assert!(SpectrumCurve::from_samples(CurveLabel::Beta, vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn interpolation_without_closed_form() {
        let c = SpectrumCurve::from_samples(CurveLabel::Beta, vec![0.0, 1.0, 2.0], vec![1.0, 0.0, -2.0]).unwrap();
        assert_eq!(c.eval(0.5), 0.5);
        assert_eq!(c.eval(1.5), -1.0);
        assert_eq!(c.eval(3.0), -4.0);
    }

    #[test]
    fn generic_over_f32() {
        let spec = MeasureSpec::<f32>::default_for(Family::SwitchedBernoulli);
        let v = tau_ex3(2.0f32, Bound::Lower, &spec).unwrap();
        assert!((v - 0.68f32.log2()).abs() < 1e-6);
    }
}
