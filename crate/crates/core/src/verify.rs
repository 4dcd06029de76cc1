//! Machine-checked versions of the ordering, shape, upper-bound and formalism
//! statements, collected into a reproducible report.
//!
//! Every entry carries a margin and a tolerance and passes when
//! `margin >= -tolerance`. Entries marked informative record a comparison the
//! theory does not predict; skipped entries record why a check could not run.

use std::fmt;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analytic::{dimension_functions, eta, uniform_grid, CurveLabel, DimensionFunctions, SpectrumCurve};
use crate::coarse::{default_level_depths, LevelSetEstimate, LevelSetEstimator, DEFAULT_EPS, DEFAULT_WARMUP};
use crate::error::{Error, Result};
use crate::legendre::{alpha_window, format_value, legendre_at, one_sided_derivatives};
use crate::measures::{sample_log_measure_path, Cascade, Family, MeasureSpec};
use crate::real::{lit, to_f64, Real};
use crate::symbolic::{RegimeRule, Schedule};

/// Tolerance for exact analytic identities.
pub const ANALYTIC_TOL: f64 = 1e-9;
/// Slack allowed above a Legendre bound.
pub const UPPER_BOUND_TOL: f64 = 0.05;
/// Agreement required between a level-set estimate and its predicted value.
pub const FORMALISM_TOL: f64 = 0.1;
/// Distance allowed between sampled and predicted exponent extremes.
pub const SAMPLED_TOL: f64 = 0.05;
/// Share of samples that must land within [`SAMPLED_TOL`].
pub const SAMPLED_SHARE: f64 = 0.9;
/// Left and right derivatives closer than this count as a derivative.
pub const DIFFERENTIABLE_TOL: f64 = 1e-6;
/// Bound on `|log sum mu^q |J|^beta|` accepted as finite and positive.
pub const PROVIDED_BOUND: f64 = 10.0;

const ORDERING: &str = "ordering";
const SHAPE: &str = "shape";
const UPPER_BOUND: &str = "upper_bound";
const FORMALISM: &str = "formalism";
const SAMPLED: &str = "sampled";
/// Group names accepted by [`VerifyOptions::skip`]; `levelset` covers the two
/// groups that need level-set histograms.
pub const GROUPS: [&str; 6] = [ORDERING, SHAPE, UPPER_BOUND, FORMALISM, SAMPLED, "levelset"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Recorded for reference; never counts as a failure.
    Informative,
    Skipped(String),
}

impl CheckStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Informative => "INFO",
            CheckStatus::Skipped(_) => "SKIP",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckEntry<T> {
    pub claim_id: String,
    /// statement being checked, in symbols
    pub anchor: &'static str,
    /// `NaN` for skipped entries
    pub margin: T,
    pub tolerance: T,
    pub status: CheckStatus,
    pub parameters: String,
}

impl<T: Real> CheckEntry<T> {
    pub fn hard(claim_id: impl Into<String>, anchor: &'static str, margin: T, tolerance: T, parameters: String) -> Self {
        let status = if margin >= -tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self {
            claim_id: claim_id.into(),
            anchor,
            margin,
            tolerance,
            status,
            parameters,
        }
    }

    pub fn informative(claim_id: impl Into<String>, anchor: &'static str, margin: T, tolerance: T, parameters: String) -> Self {
        Self {
            status: CheckStatus::Informative,
            ..Self::hard(claim_id, anchor, margin, tolerance, parameters)
        }
    }

    pub fn skipped(claim_id: impl Into<String>, anchor: &'static str, reason: impl Into<String>, parameters: String) -> Self {
        Self {
            claim_id: claim_id.into(),
            anchor,
            margin: T::nan(),
            tolerance: T::zero(),
            status: CheckStatus::Skipped(reason.into()),
            parameters,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

impl<T: Real> fmt::Display for CheckEntry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} [{}] margin={} tol={} {}",
            self.status.as_str(),
            self.claim_id,
            self.anchor,
            format_value(self.margin),
            self.tolerance,
            self.parameters
        )?;
        if let CheckStatus::Skipped(reason) = &self.status {
            write!(f, " reason: {reason}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub informative: usize,
    pub skipped: usize,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "pass={} fail={} informative={} skipped={}",
            self.pass, self.fail, self.informative, self.skipped
        )
    }
}

/// Checks for one spec together with everything needed to rerun them.
#[derive(Debug, Clone)]
pub struct VerificationReport<T> {
    pub spec: MeasureSpec<T>,
    pub seed: u64,
    pub q_grid: Vec<T>,
    pub eps_schedule: Vec<T>,
    pub level_depths: Vec<usize>,
    pub checks: Vec<CheckEntry<T>>,
}

impl<T: Real> VerificationReport<T> {
    pub fn summary(&self) -> Summary {
        let mut s = Summary::default();
        for c in &self.checks {
            match c.status {
                CheckStatus::Pass => s.pass += 1,
                CheckStatus::Fail => s.fail += 1,
                CheckStatus::Informative => s.informative += 1,
                CheckStatus::Skipped(_) => s.skipped += 1,
            }
        }
        s
    }

    pub fn has_failures(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Fail)
    }

    pub fn find(&self, claim_id: &str) -> Option<&CheckEntry<T>> {
        self.checks.iter().find(|c| c.claim_id == claim_id)
    }

    fn header_lines(&self) -> Vec<String> {
        let grid = &self.q_grid;
        vec![
            format!("spec: {:?}", self.spec),
            format!("seed: {}", self.seed),
            format!(
                "q_grid: {}..{} ({} points)",
                grid.first().map_or(String::new(), |v| v.to_string()),
                grid.last().map_or(String::new(), |v| v.to_string()),
                grid.len()
            ),
            format!("eps: {}", join(&self.eps_schedule)),
            format!("level_depths: {}", join(&self.level_depths)),
        ]
    }

    pub fn write_text<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for line in self.header_lines() {
            writeln!(out, "# {line}")?;
        }
        for c in &self.checks {
            writeln!(out, "{c}")?;
        }
        writeln!(out, "summary: {}", self.summary())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("report is UTF-8")
    }

    /// `claim_id,anchor,status,margin,tolerance,parameters,reason`; text
    /// fields are quoted.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "claim_id,anchor,status,margin,tolerance,parameters,reason")?;
        for c in &self.checks {
            let reason = match &c.status {
                CheckStatus::Skipped(r) => r.as_str(),
                _ => "",
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.claim_id,
                quote(c.anchor),
                c.status.as_str(),
                format_value(c.margin),
                c.tolerance,
                quote(&c.parameters),
                quote(reason)
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("report is UTF-8")
    }
}

fn join<D: fmt::Display>(xs: &[D]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

#[derive(Debug, Clone)]
pub struct VerifyOptions<T> {
    pub q_grid: Vec<T>,
    /// q values for the formalism checks
    pub formalism_q: Vec<T>,
    /// exponents for the upper-bound checks; `None` uses the window midpoint
    pub alphas: Option<Vec<T>>,
    pub eps_schedule: Vec<T>,
    /// `None` uses [`default_level_depths`]
    pub level_depths: Option<Vec<usize>>,
    pub seed: u64,
    pub samples: usize,
    /// deepest sampled level; `None` uses the deepest level depth
    pub sample_depth: Option<usize>,
    /// group names from [`GROUPS`]
    pub skip: Vec<String>,
}

impl<T: Real> Default for VerifyOptions<T> {
    fn default() -> Self {
        Self {
            q_grid: uniform_grid(-5.0, 5.0, 0.05).expect("valid default grid"),
            formalism_q: [-2.0, 0.5, 2.0].map(lit).to_vec(),
            alphas: None,
            eps_schedule: DEFAULT_EPS.map(lit).to_vec(),
            level_depths: None,
            seed: 0,
            samples: 100,
            sample_depth: None,
            skip: Vec::new(),
        }
    }
}

impl<T> VerifyOptions<T> {
    fn skips(&self, group: &str) -> bool {
        let level_set = group == UPPER_BOUND || group == FORMALISM;
        self.skip
            .iter()
            .any(|s| s == group || (level_set && s == "levelset"))
    }
}

/// Runs every group not listed in `options.skip`.
pub fn run<T: Real>(spec: &MeasureSpec<T>, options: &VerifyOptions<T>) -> Result<VerificationReport<T>> {
    let curves = dimension_functions(spec)?.curves(&options.q_grid)?;
    run_with_curves(spec, options, &curves)
}

/// [`run`] with the ordering and shape groups reading precomputed curves,
/// for instance curves loaded from a cache.
pub fn run_with_curves<T: Real>(
    spec: &MeasureSpec<T>,
    options: &VerifyOptions<T>,
    curves: &[SpectrumCurve<T>],
) -> Result<VerificationReport<T>> {
    spec.validate()?;
    let level_depths = match &options.level_depths {
        Some(d) => d.clone(),
        None => default_level_depths(spec)?,
    };
    let mut checks = Vec::new();
    if !options.skips(ORDERING) {
        checks.extend(check_ordering_on(spec, curves)?);
    }
    if !options.skips(SHAPE) {
        checks.extend(check_shape_on(curves)?);
    }
    let needs_levels = !options.skips(UPPER_BOUND) || !options.skips(FORMALISM);
    if needs_levels {
        let mut ctx = LevelContext::new(spec, &options.q_grid, &options.eps_schedule, &level_depths)?;
        if !options.skips(UPPER_BOUND) {
            let alphas = match &options.alphas {
                Some(a) => a.clone(),
                None => vec![ctx.default_alpha()],
            };
            checks.extend(ctx.check_upper_bound(&alphas)?);
        }
        if !options.skips(FORMALISM) {
            checks.extend(ctx.check_formalism(&options.formalism_q)?);
        }
    }
    if !options.skips(SAMPLED) {
        let depth = options
            .sample_depth
            .or_else(|| level_depths.iter().copied().max())
            .unwrap_or(1000);
        checks.extend(check_sampled_exponents(spec, depth, options.samples, options.seed)?);
    }
    Ok(VerificationReport {
        spec: spec.clone(),
        seed: options.seed,
        q_grid: options.q_grid.clone(),
        eps_schedule: options.eps_schedule.clone(),
        level_depths,
        checks,
    })
}

/// q values where the lower and upper functions are known to coincide, or
/// `None` when they coincide everywhere or no such statement exists.
fn coincidence_set<T: Real>(spec: &MeasureSpec<T>) -> Option<Vec<f64>> {
    match spec {
        MeasureSpec::NonRegularMoran { .. } => Some(vec![1.0]),
        MeasureSpec::SwitchedBernoulli { .. } => Some(vec![0.0, 1.0]),
        MeasureSpec::FourLetter { a, b, .. } => {
            let same = a.iter().zip(b).all(|(x, y)| (*x - *y).abs() <= lit(1e-15));
            (!same).then(|| vec![0.0, 1.0])
        }
        _ => None,
    }
}

fn grid_params<T: Real>(q_grid: &[T]) -> String {
    format!(
        "q in [{}, {}] ({} points)",
        q_grid.first().copied().unwrap_or_else(T::nan),
        q_grid.last().copied().unwrap_or_else(T::nan),
        q_grid.len()
    )
}

/// `b <= B <= Delta` on the grid, plus strictness off the coincidence set and
/// equality on it where the family has such a statement.
pub fn check_ordering<T: Real>(spec: &MeasureSpec<T>, q_grid: &[T]) -> Result<Vec<CheckEntry<T>>> {
    check_ordering_on(spec, &dimension_functions(spec)?.curves(q_grid)?)
}

fn find_curve<T: Real>(curves: &[SpectrumCurve<T>], label: CurveLabel) -> Result<&SpectrumCurve<T>> {
    curves
        .iter()
        .find(|c| c.label == label)
        .ok_or_else(|| Error::Invalid(format!("no {label} curve supplied")))
}

/// [`check_ordering`] on sampled curves sharing one grid; the curves labelled
/// `b_mu`, `B_mu` and `Delta_mu` are compared.
pub fn check_ordering_on<T: Real>(spec: &MeasureSpec<T>, curves: &[SpectrumCurve<T>]) -> Result<Vec<CheckEntry<T>>> {
    let b = find_curve(curves, CurveLabel::LowerMultifractal)?;
    let big_b = find_curve(curves, CurveLabel::UpperMultifractal)?;
    let delta = find_curve(curves, CurveLabel::Packing)?;
    if big_b.q_grid != b.q_grid || delta.q_grid != b.q_grid {
        return Err(Error::Invalid("ordering needs curves on a common grid".into()));
    }
    let q_grid = &b.q_grid;
    let gap: Vec<T> = big_b.values.iter().zip(&b.values).map(|(u, l)| *u - *l).collect();
    let tol = lit::<T>(ANALYTIC_TOL);
    let params = grid_params(q_grid);
    let gap_upper = delta
        .values
        .iter()
        .zip(&big_b.values)
        .map(|(d, u)| *d - *u)
        .fold(T::infinity(), T::min);
    let mut out = vec![
        CheckEntry::hard("ordering.b_le_B", "b(q) <= B(q)", min_of(&gap), tol, params.clone()),
        CheckEntry::hard("ordering.B_le_Delta", "B(q) <= Delta(q)", gap_upper, tol, params.clone()),
    ];
    if let Some(set) = coincidence_set(spec) {
        let on_set = |q: T| set.iter().any(|&c| (to_f64(q) - c).abs() < 1e-9);
        let (mut on, mut off) = (Vec::new(), Vec::new());
        for (&q, &g) in q_grid.iter().zip(&gap) {
            if on_set(q) {
                on.push(-g.abs());
            } else {
                off.push(g);
            }
        }
        // strictness: the smallest gap must itself exceed the tolerance
        out.push(CheckEntry::hard(
            "ordering.strict_gap",
            "b(q) < B(q) off the coincidence points",
            min_of(&off) - tol,
            T::zero(),
            format!("{params}, coincidence at {set:?}"),
        ));
        if !on.is_empty() {
            out.push(CheckEntry::hard(
                "ordering.equal_at_coincidence",
                "b(q) = B(q) at the coincidence points",
                min_of(&on),
                tol,
                format!("q in {set:?}"),
            ));
        }
    }
    Ok(out)
}

fn min_of<T: Real>(xs: &[T]) -> T {
    xs.iter().copied().fold(T::infinity(), T::min)
}

/// Monotonicity of every curve, convexity of the curves expected convex, and
/// the sign pattern around `q = 1`.
pub fn check_shape<T: Real>(spec: &MeasureSpec<T>, q_grid: &[T]) -> Result<Vec<CheckEntry<T>>> {
    check_shape_on(&dimension_functions(spec)?.curves(q_grid)?)
}

/// [`check_shape`] on sampled curves; the sign pattern needs the `b_mu`,
/// `B_mu` and `Delta_mu` curves.
pub fn check_shape_on<T: Real>(curves: &[SpectrumCurve<T>]) -> Result<Vec<CheckEntry<T>>> {
    let mut out = Vec::new();
    for curve in curves {
        let params = grid_params(&curve.q_grid);
        let values = &curve.values;
        let drop = values
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(T::infinity(), T::min);
        out.push(CheckEntry::hard(
            format!("shape.decreasing.{}", curve.label),
            "q -> f(q) decreasing",
            drop,
            T::zero(),
            params.clone(),
        ));
        if curve.label.expected_convex() {
            let second = values
                .windows(3)
                .map(|w| w[0] - w[1] - w[1] + w[2])
                .fold(T::infinity(), T::min);
            out.push(CheckEntry::hard(
                format!("shape.convex.{}", curve.label),
                "q -> f(q) convex",
                second,
                lit(1e-10),
                params,
            ));
        }
    }
    let b = find_curve(curves, CurveLabel::LowerMultifractal)?;
    let big_b = find_curve(curves, CurveLabel::UpperMultifractal)?;
    let delta = find_curve(curves, CurveLabel::Packing)?;
    let sign = (0..b.q_grid.len())
        .map(|i| sign_margin(b.q_grid[i], b.values[i], big_b.values[i], delta.values[i]))
        .fold(T::infinity(), T::min);
    out.push(CheckEntry::hard(
        "shape.sign",
        "0 <= b <= B <= Delta for q < 1, all zero at q = 1, b <= B <= Delta <= 0 for q > 1",
        sign,
        lit(ANALYTIC_TOL),
        grid_params(&b.q_grid),
    ));
    Ok(out)
}

fn sign_margin<T: Real>(q: T, b: T, big_b: T, delta: T) -> T {
    let ordered = (big_b - b).min(delta - big_b);
    if (q - T::one()).abs() < lit(1e-12) {
        -b.abs().max(big_b.abs()).max(delta.abs())
    } else if q < T::one() {
        b.min(ordered)
    } else {
        (-delta).min(ordered)
    }
}

/// Shared state for the checks that read level-set histograms.
struct LevelContext<T: Real> {
    spec: MeasureSpec<T>,
    dims: DimensionFunctions<T>,
    lower: SpectrumCurve<T>,
    upper: SpectrumCurve<T>,
    estimator: LevelSetEstimator<T>,
    eps: Vec<T>,
    depths: Vec<usize>,
}

impl<T: Real> LevelContext<T> {
    fn new(spec: &MeasureSpec<T>, q_grid: &[T], eps: &[T], depths: &[usize]) -> Result<Self> {
        let dims = dimension_functions(spec)?;
        let max = depths.iter().copied().max().unwrap_or(1);
        Ok(Self {
            spec: spec.clone(),
            lower: SpectrumCurve::from_evaluator(CurveLabel::LowerMultifractal, q_grid.to_vec(), dims.lower.clone())?,
            upper: SpectrumCurve::from_evaluator(CurveLabel::UpperMultifractal, q_grid.to_vec(), dims.upper.clone())?,
            dims,
            estimator: LevelSetEstimator::new(spec, max)?,
            eps: eps.to_vec(),
            depths: depths.to_vec(),
        })
    }

    fn window(&self) -> (T, T) {
        alpha_window(|q| (self.dims.lower)(q))
    }

    fn default_alpha(&self) -> T {
        let (lo, hi) = self.window();
        (lo + hi) / lit(2.0)
    }

    fn estimate(&mut self, alpha: T) -> Result<LevelSetEstimate<T>> {
        self.estimator.spectrum(alpha, &self.eps, &self.depths)
    }

    fn transforms(&self, alpha: T) -> Result<(T, T)> {
        Ok((legendre_at(&self.lower, alpha)?, legendre_at(&self.upper, alpha)?))
    }

    fn check_upper_bound(&mut self, alphas: &[T]) -> Result<Vec<CheckEntry<T>>> {
        const ANCHOR: &str = "lower estimate <= b*(alpha), upper estimate <= B*(alpha)";
        let (lo, hi) = self.window();
        let degenerate = (hi - lo).abs() <= lit(1e-9);
        let tol = lit::<T>(UPPER_BOUND_TOL);
        let mut out = Vec::new();
        for &alpha in alphas {
            let params = format!("alpha={alpha}, window=({lo}, {hi})");
            let edge = lit::<T>(1e-9);
            let inside = if degenerate {
                (alpha - lo).abs() <= edge
            } else {
                alpha > lo + edge && alpha < hi - edge
            };
            if !inside {
                let reason = if alpha >= lo - edge && alpha <= hi + edge {
                    "alpha on the window edge, one-sided derivatives disagree there"
                } else {
                    "alpha outside the exponent window"
                };
                for side in ["lower", "upper"] {
                    out.push(CheckEntry::skipped(
                        format!("upper_bound.{side}@{alpha}"),
                        ANCHOR,
                        reason,
                        params.clone(),
                    ));
                }
                continue;
            }
            let est = self.estimate(alpha)?;
            let (b_star, big_b_star) = self.transforms(alpha)?;
            let p = format!("{params}, {est}, b*={}, B*={}", format_value(b_star), format_value(big_b_star));
            out.push(CheckEntry::hard(
                format!("upper_bound.lower@{alpha}"),
                ANCHOR,
                bound_margin(b_star, est.lower_est),
                tol,
                p.clone(),
            ));
            out.push(CheckEntry::hard(
                format!("upper_bound.upper@{alpha}"),
                ANCHOR,
                bound_margin(big_b_star, est.upper_est),
                tol,
                p,
            ));
        }
        Ok(out)
    }

    /// Pairs each estimate with its predicted value at `alpha`.
    fn compare(
        &mut self,
        id: &str,
        anchor: &'static str,
        alpha: T,
        targets: [(&str, T); 2],
        hard: bool,
        extra: &str,
    ) -> Result<Vec<CheckEntry<T>>> {
        let est = self.estimate(alpha)?;
        let tol = lit::<T>(FORMALISM_TOL);
        let values = [est.lower_est, est.upper_est];
        let mut out = Vec::new();
        for ((side, target), value) in ["lower", "upper"].into_iter().zip(targets).zip(values) {
            let params = format!(
                "alpha={alpha}{extra}, {side}_est={}, predicted {}={}, eps={}{}",
                format_value(value),
                target.0,
                format_value(target.1),
                est.eps_used,
                if est.stable { "" } else { " (unstable)" }
            );
            let margin = match_margin(value, target.1);
            let entry = if hard {
                CheckEntry::hard(format!("{id}.{side}@{alpha}"), anchor, margin, tol, params)
            } else {
                CheckEntry::informative(format!("{id}.{side}@{alpha}"), anchor, margin, tol, params)
            };
            out.push(entry);
        }
        Ok(out)
    }

    fn check_formalism(&mut self, q_values: &[T]) -> Result<Vec<CheckEntry<T>>> {
        match self.spec.family() {
            Family::FibonacciMoran => self.formalism_equal(q_values),
            Family::NonRegularMoran => self.formalism_provided(q_values),
            Family::SwitchedBernoulli => self.formalism_switched(q_values),
            Family::FourLetter => self.formalism_four_letter(),
            Family::YuanSwitching => self.formalism_informative(q_values),
        }
    }

    /// `-f'(q)` when the one-sided derivatives agree.
    fn slope(&self, curve: &SpectrumCurve<T>, q: T) -> Result<std::result::Result<T, String>> {
        let (left, right) = one_sided_derivatives(curve, q)?;
        if (left - right).abs() > lit(DIFFERENTIABLE_TOL) {
            return Ok(Err(format!("{} has a kink at q={q}: left {left}, right {right}", curve.label)));
        }
        Ok(Ok(-(left + right) / lit(2.0)))
    }

    fn formalism_equal(&mut self, q_values: &[T]) -> Result<Vec<CheckEntry<T>>> {
        const ANCHOR: &str = "lower and upper MB dimensions of E(-beta'(q)) equal beta*(-beta'(q))";
        let mut out = Vec::new();
        for &q in q_values {
            let alpha = match self.slope(&self.lower.clone(), q)? {
                Ok(a) => a,
                Err(reason) => {
                    out.push(CheckEntry::skipped(format!("formalism.q={q}"), ANCHOR, reason, format!("q={q}")));
                    continue;
                }
            };
            let target = legendre_at(&self.lower, alpha)?;
            out.extend(self.compare(
                "formalism.beta",
                ANCHOR,
                alpha,
                [("beta*", target), ("beta*", target)],
                true,
                &format!(", q={q}"),
            )?);
        }
        Ok(out)
    }

    /// `log sum mu^q |J|^beta` over every depth from 100 to the deepest
    /// level depth.
    fn provided_sums(&self, q: T, beta: T) -> Vec<T> {
        let cascade = self.estimator.cascade();
        let profile = self.estimator.profile();
        (100..=self.estimator.max_depth())
            .map(|n| cascade.factored_log_partition_sum(profile.counts(n), q) + beta * profile.log_diameter(n))
            .collect()
    }

    fn formalism_provided(&mut self, q_values: &[T]) -> Result<Vec<CheckEntry<T>>> {
        const LOWER: &str = "lower MB dimension of E(-beta_lower'(q)) equals beta_lower*, provided 0 < liminf sum < inf";
        const UPPER: &str = "upper MB dimension of E(-beta_upper'(q)) equals beta_upper*, provided 0 < limsup sum < inf";
        let bound = lit::<T>(PROVIDED_BOUND);
        let mut out = Vec::new();
        for &q in q_values {
            for (upper_side, anchor) in [(false, LOWER), (true, UPPER)] {
                let curve = if upper_side { self.upper.clone() } else { self.lower.clone() };
                let side = if upper_side { "upper" } else { "lower" };
                let id = format!("formalism.{side}@q={q}");
                let alpha = match self.slope(&curve, q)? {
                    Ok(a) => a,
                    Err(reason) => {
                        out.push(CheckEntry::skipped(id, anchor, reason, format!("q={q}")));
                        continue;
                    }
                };
                let beta = curve.eval(q);
                let sums = self.provided_sums(q, beta);
                let extreme = if upper_side {
                    sums.iter().copied().fold(T::neg_infinity(), T::max)
                } else {
                    sums.iter().copied().fold(T::infinity(), T::min)
                };
                let provided = format!(
                    "{} log sum over depths 100..={} = {extreme}",
                    if upper_side { "max" } else { "min" },
                    self.estimator.max_depth()
                );
                if !(extreme.abs() <= bound) {
                    out.push(CheckEntry::skipped(
                        id,
                        anchor,
                        format!("provided clause fails numerically: {provided}"),
                        format!("q={q}"),
                    ));
                    continue;
                }
                let target = legendre_at(&curve, alpha)?;
                let est = self.estimate(alpha)?;
                let value = if upper_side { est.upper_est } else { est.lower_est };
                out.push(CheckEntry::hard(
                    id,
                    anchor,
                    match_margin(value, target),
                    lit(FORMALISM_TOL),
                    format!(
                        "q={q}, alpha={alpha}, {side}_est={}, predicted={}, eps={}, {provided}",
                        format_value(value),
                        format_value(target),
                        est.eps_used
                    ),
                ));
            }
        }
        Ok(out)
    }

    /// Components of the window left after removing the exponent intervals
    /// swept by the kinks of `curve` at `q = 0` and `q = 1`.
    fn kink_free_components(&self, curve: &SpectrumCurve<T>) -> Result<Vec<(T, T)>> {
        let (lo, hi) = self.window();
        let mut cuts = Vec::new();
        for q in [T::zero(), T::one()] {
            let (l, r) = one_sided_derivatives(curve, q)?;
            cuts.push(((-l).min(-r), (-l).max(-r)));
        }
        let mut pieces = vec![(lo, hi)];
        for (a, b) in cuts {
            pieces = pieces
                .into_iter()
                .flat_map(|(x, y)| {
                    let mut keep = Vec::new();
                    if a > x {
                        keep.push((x, a.min(y)));
                    }
                    if b < y {
                        keep.push((b.max(x), y));
                    }
                    keep
                })
                .filter(|(x, y)| *y - *x > lit(1e-6))
                .collect();
        }
        Ok(pieces)
    }

    fn formalism_switched(&mut self, q_values: &[T]) -> Result<Vec<CheckEntry<T>>> {
        const INNER: &str = "MB dimensions of E(alpha) equal b*(alpha) and B*(alpha) away from the kink intervals";
        const TANGENT: &str = "both MB dimensions of E(alpha) equal alpha at the shared tangency alpha = H(p_hat)";
        const OFF: &str = "b(q) != B(q): estimates recorded against the transforms";
        let mut out = Vec::new();
        let lower = self.lower.clone();
        let upper = self.upper.clone();
        let mut alphas: Vec<T> = self
            .kink_free_components(&lower)?
            .into_iter()
            .chain(self.kink_free_components(&upper)?)
            .map(|(x, y)| (x + y) / lit(2.0))
            .collect();
        alphas.sort_by(|a, b| to_f64(*a).total_cmp(&to_f64(*b)));
        alphas.dedup_by(|a, b| (*a - *b).abs() < lit(1e-9));
        if alphas.is_empty() {
            out.push(CheckEntry::skipped(
                "formalism.inner",
                INNER,
                "no exponent left between the kink intervals",
                String::new(),
            ));
        }
        for alpha in alphas {
            let (b_star, big_b_star) = self.transforms(alpha)?;
            out.extend(self.compare("formalism.inner", INNER, alpha, [("b*", b_star), ("B*", big_b_star)], true, "")?);
        }
        // the two branches share the tangent line at q = 1 with slope -H(p_hat)
        let (left, right) = one_sided_derivatives(&upper, T::one())?;
        let tangency = (-left).max(-right);
        out.extend(self.compare(
            "formalism.tangency",
            TANGENT,
            tangency,
            [("H(p_hat)", tangency), ("H(p_hat)", tangency)],
            true,
            "",
        )?);
        for &q in q_values {
            if let Ok(alpha) = self.slope(&upper, q)? {
                let (b_star, big_b_star) = self.transforms(alpha)?;
                out.extend(self.compare(
                    "formalism.off_diagonal",
                    OFF,
                    alpha,
                    [("b*", b_star), ("B*", big_b_star)],
                    false,
                    &format!(", q={q}"),
                )?);
            }
        }
        Ok(out)
    }

    fn formalism_four_letter(&mut self) -> Result<Vec<CheckEntry<T>>> {
        const ANCHOR: &str = "lower MB dimension of E(alpha) equals b*(alpha), upper equals B*(alpha), for alpha in (-log4 max b, -log4 min b)";
        let MeasureSpec::FourLetter { b, .. } = &self.spec else {
            unreachable!("four-letter formalism on another family")
        };
        let log4 = |x: T| x.ln() / lit::<T>(4f64.ln());
        let max = b.iter().copied().fold(T::neg_infinity(), T::max);
        let min = b.iter().copied().fold(T::infinity(), T::min);
        let (lo, hi) = (-log4(max), -log4(min));
        if hi - lo <= lit(1e-9) {
            return Ok(vec![CheckEntry::skipped(
                "formalism.window",
                ANCHOR,
                "window empty: the even-phase weights b are uniform",
                format!("window=({lo}, {hi})"),
            )]);
        }
        let mut out = Vec::new();
        for k in 1..=3 {
            let alpha = lo + (hi - lo) * lit(k as f64 / 4.0);
            let (b_star, big_b_star) = self.transforms(alpha)?;
            out.extend(self.compare(
                "formalism.window",
                ANCHOR,
                alpha,
                [("b*", b_star), ("B*", big_b_star)],
                true,
                &format!(", window=({lo}, {hi})"),
            )?);
        }
        Ok(out)
    }

    fn formalism_informative(&mut self, q_values: &[T]) -> Result<Vec<CheckEntry<T>>> {
        const ANCHOR: &str = "estimates at alpha = -B'(q) recorded against b* and B*";
        let upper = self.upper.clone();
        let mut out = Vec::new();
        for &q in q_values {
            match self.slope(&upper, q)? {
                Ok(alpha) => {
                    let (b_star, big_b_star) = self.transforms(alpha)?;
                    out.extend(self.compare(
                        "formalism.recorded",
                        ANCHOR,
                        alpha,
                        [("b*", b_star), ("B*", big_b_star)],
                        false,
                        &format!(", q={q}"),
                    )?);
                }
                Err(reason) => out.push(CheckEntry::skipped(
                    format!("formalism.recorded@q={q}"),
                    ANCHOR,
                    reason,
                    format!("q={q}"),
                )),
            }
        }
        Ok(out)
    }
}

/// `bound - value`, with an empty level set satisfying any bound.
fn bound_margin<T: Real>(bound: T, value: T) -> T {
    if value == T::neg_infinity() {
        T::infinity()
    } else {
        bound - value
    }
}

/// `-|value - target|`, zero when both are `-inf`.
fn match_margin<T: Real>(value: T, target: T) -> T {
    if value == target {
        T::zero()
    } else {
        -(value - target).abs()
    }
}

/// Limiting shares of regime 0 along the flip depths of a rule.
fn limit_shares<T: Real>(rule: &RegimeRule, cascade: &Cascade<T>, depths: &[usize]) -> Result<Vec<f64>> {
    Ok(match rule {
        RegimeRule::Constant(r) => vec![if *r == 0 { 1.0 } else { 0.0 }],
        RegimeRule::Fibonacci => vec![to_f64(eta::<T>())],
        RegimeRule::Switching { schedule, .. } => match schedule {
            Schedule::Factorial => vec![0.0, 1.0],
            Schedule::Doubling => vec![1.0 / 3.0, 2.0 / 3.0],
            Schedule::Custom(_) => {
                let max = depths.iter().copied().max().unwrap_or(1);
                let profile = cascade.profile(max)?;
                depths
                    .iter()
                    .map(|&n| f64::from(profile.counts(n)[0]) / n as f64)
                    .collect()
            }
        },
    })
}

/// Exponent of a typical point when a share `f` of the levels use regime 0.
fn typical_exponent<T: Real>(cascade: &Cascade<T>, f: f64) -> f64 {
    let entropy = |r: usize| {
        let reg = &cascade.regimes[r];
        -reg.weights
            .iter()
            .zip(&reg.log_weights)
            .map(|(&w, &l)| to_f64(w) * to_f64(l))
            .sum::<f64>()
    };
    let length = |r: usize| -to_f64(cascade.regimes[r].log_ratio);
    if cascade.regimes.len() == 1 {
        return entropy(0) / length(0);
    }
    (f * entropy(0) + (1.0 - f) * entropy(1)) / (f * length(0) + (1.0 - f) * length(1))
}

/// Depths at which sampled exponents are read: flip depths from 1000 (from
/// the warm-up when fewer than two exist there) or powers of two from 1000
/// for the Fibonacci rule.
fn sampling_depths(rule: &RegimeRule, depth: usize) -> Result<Vec<usize>> {
    match rule {
        RegimeRule::Switching { .. } => {
            let flips = rule.flip_depths(depth + 1)?;
            let deep: Vec<usize> = flips.iter().copied().filter(|&d| d >= 1000).collect();
            Ok(if deep.len() >= 2 {
                deep
            } else {
                flips.into_iter().filter(|&d| d >= DEFAULT_WARMUP).collect()
            })
        }
        _ => {
            let mut out = Vec::new();
            let mut n = 1000;
            while n <= depth {
                out.push(n);
                n *= 2;
            }
            if out.len() < 2 {
                out = vec![depth / 2, depth].into_iter().filter(|&d| d > 0).collect();
            }
            Ok(out)
        }
    }
}

/// Running exponents `log mu / log |J|` of sampled words at the sampling
/// depths, compared with the extremes predicted by the law of large numbers
/// along regime runs.
pub fn check_sampled_exponents<T: Real>(
    spec: &MeasureSpec<T>,
    depth: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<CheckEntry<T>>> {
    const ANCHOR: &str = "running exponent of mu-typical points oscillates between the regime mixtures";
    const FIXED: &str = "exponent along the first-branch word, recorded";
    let cascade = spec.cascade()?;
    let depths = sampling_depths(&cascade.rule, depth)?;
    if depths.is_empty() || n_samples == 0 {
        return Ok(vec![CheckEntry::skipped(
            "sampled.bracket",
            ANCHOR,
            "no sampling depths or no samples",
            format!("depth={depth}, samples={n_samples}"),
        )]);
    }
    let max = *depths.iter().max().unwrap();
    let shares = limit_shares(&cascade.rule, &cascade, &depths)?;
    let predicted: Vec<f64> = shares.iter().map(|&f| typical_exponent(&cascade, f)).collect();
    let lo = predicted.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = predicted.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let profile = cascade.profile(max)?;
    let seq = &profile.regimes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut within = 0usize;
    let mut worst = 0.0f64;
    for _ in 0..n_samples {
        let path = sample_log_measure_path(&cascade, seq, &mut rng);
        let (mut e_lo, mut e_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &n in &depths {
            let e = to_f64(path[n]) / to_f64(profile.log_diameter(n));
            e_lo = e_lo.min(e);
            e_hi = e_hi.max(e);
        }
        let dev = (e_lo - lo).abs().max((e_hi - hi).abs());
        worst = worst.max(dev);
        if dev <= SAMPLED_TOL {
            within += 1;
        }
    }
    let share = within as f64 / n_samples as f64;
    let params = format!(
        "seed={seed}, samples={n_samples}, depths={}..={} ({} flips), predicted=({lo}, {hi}), within={share}, worst={worst}",
        depths[0],
        max,
        depths.len()
    );
    let mut out = vec![CheckEntry::hard(
        "sampled.bracket",
        ANCHOR,
        lit(share - SAMPLED_SHARE),
        T::zero(),
        params,
    )];

    // the word that always takes branch 1
    let mut acc = 0.0f64;
    let (mut f_lo, mut f_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut next = depths.iter().peekable();
    for (level, &r) in seq.iter().enumerate() {
        acc += to_f64(cascade.regimes[r].log_weights[0]);
        if next.peek() == Some(&&(level + 1)) {
            next.next();
            let e = acc / to_f64(profile.log_diameter(level + 1));
            f_lo = f_lo.min(e);
            f_hi = f_hi.max(e);
        }
    }
    out.push(CheckEntry::informative(
        "sampled.first_branch_word",
        FIXED,
        lit(f_hi - f_lo),
        T::zero(),
        format!("exponent range over the sampling depths = ({f_lo}, {f_hi})"),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults(family: Family) -> MeasureSpec<f64> {
        MeasureSpec::default_for(family)
    }

    fn coarse_grid() -> Vec<f64> {
        uniform_grid(-5.0, 5.0, 0.05).unwrap()
    }

    #[test]
    fn entry_status_follows_margin() {
        let e = CheckEntry::hard("x", "a", -0.04, 0.05, String::new());
        assert!(e.passed());
        let e = CheckEntry::hard("x", "a", -0.06, 0.05, String::new());
        assert_eq!(e.status, CheckStatus::Fail);
        let e = CheckEntry::<f64>::informative("x", "a", -1.0, 0.05, String::new());
        assert_eq!(e.status, CheckStatus::Informative);
        let e = CheckEntry::<f64>::skipped("x", "a", "why", String::new());
        assert!(e.margin.is_nan());
        assert!(e.to_string().contains("reason: why"));
    }

    #[test]
    fn ordering_and_shape_hold_for_defaults() {
        for family in Family::ALL {
            let spec = defaults(family);
            for c in check_ordering(&spec, &coarse_grid())
                .unwrap()
                .into_iter()
                .chain(check_shape(&spec, &coarse_grid()).unwrap())
            {
                assert!(c.passed(), "{family}: {c}");
            }
        }
    }

    #[test]
    fn uniform_four_letter_ordering_margin_zero() {
        let spec = MeasureSpec::FourLetter {
            a: vec![0.25; 4],
            b: vec![0.25; 4],
            schedule: Schedule::Factorial,
        };
        let checks = check_ordering(&spec, &coarse_grid()).unwrap();
        assert_eq!(checks.len(), 2);
        assert!(checks.iter().all(|c| c.passed() && c.margin.abs() < 1e-12));
    }

    #[test]
    fn ex3_strict_gap_away_from_zero_and_one() {
        let checks = check_ordering(&defaults(Family::SwitchedBernoulli), &coarse_grid()).unwrap();
        let strict = checks.iter().find(|c| c.claim_id == "ordering.strict_gap").unwrap();
        assert!(strict.passed() && strict.margin > 0.0);
        let eq = checks.iter().find(|c| c.claim_id == "ordering.equal_at_coincidence").unwrap();
        assert!(eq.passed());
    }

    #[test]
    fn convexity_not_asserted_for_lower_function() {
        let checks = check_shape(&defaults(Family::SwitchedBernoulli), &coarse_grid()).unwrap();
        assert!(!checks.iter().any(|c| c.claim_id == "shape.convex.b_mu"));
        assert!(checks.iter().any(|c| c.claim_id == "shape.convex.B_mu"));
    }

    #[test]
    fn lifted_curve_fails_shape() {
        let spec = defaults(Family::FourLetter);
        let mut curves = dimension_functions(&spec).unwrap().curves(&coarse_grid()).unwrap();
        // a lower function lifted off zero at q = 1 breaks the sign pattern
        for v in &mut curves[0].values {
            *v += 0.5;
        }
        curves[1].values[10] = curves[1].values[9] + 1.0;
        let checks = check_shape_on(&curves).unwrap();
        let failed: Vec<&str> = checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .map(|c| c.claim_id.as_str())
            .collect();
        assert!(failed.contains(&"shape.sign"), "{failed:?}");
        assert!(failed.contains(&"shape.decreasing.B_mu"), "{failed:?}");
        assert!(check_ordering_on(&spec, &curves[..2]).is_err());
    }

    #[test]
    fn uniform_four_letter_upper_bound_at_one() {
        let spec = MeasureSpec::FourLetter {
            a: vec![0.25; 4],
            b: vec![0.25; 4],
            schedule: Schedule::Factorial,
        };
        let mut ctx = LevelContext::new(&spec, &coarse_grid(), &DEFAULT_EPS, &[200, 400, 800, 1600]).unwrap();
        let checks = ctx.check_upper_bound(&[1.0]).unwrap();
        assert_eq!(checks.len(), 2);
        for c in &checks {
            assert!(c.passed(), "{c}");
            assert!(c.margin.abs() < 1e-9, "{c}");
        }
        let outside = ctx.check_upper_bound(&[1.5]).unwrap();
        assert!(outside.iter().all(|c| matches!(c.status, CheckStatus::Skipped(_))));
    }

    #[test]
    fn edge_alpha_skipped() {
        let spec = defaults(Family::SwitchedBernoulli);
        let mut ctx = LevelContext::new(&spec, &coarse_grid(), &DEFAULT_EPS, &[119, 719]).unwrap();
        let (lo, _) = ctx.window();
        let checks = ctx.check_upper_bound(&[lo]).unwrap();
        assert!(checks.iter().all(|c| matches!(c.status, CheckStatus::Skipped(_))));
    }

    #[test]
    fn switched_kink_free_window() {
        let spec = defaults(Family::SwitchedBernoulli);
        let ctx = LevelContext::new(&spec, &coarse_grid(), &DEFAULT_EPS, &[119]).unwrap();
        let pieces = ctx.kink_free_components(&ctx.lower.clone()).unwrap();
        assert_eq!(pieces.len(), 1);
        let h = |s: f64| -(s * s.log2() + (1.0 - s) * (1.0 - s).log2());
        let mixed = -0.5 * (0.2f64 * 0.8).log2();
        assert!((pieces[0].0 - h(0.4)).abs() < 1e-6, "{pieces:?}");
        assert!((pieces[0].1 - mixed.min(-0.5 * (0.4f64 * 0.6).log2())).abs() < 1e-6, "{pieces:?}");
    }

    #[test]
    fn predicted_pair_switched_bernoulli() {
        let spec = defaults(Family::SwitchedBernoulli);
        let cascade = spec.cascade().unwrap();
        let h = |s: f64| -(s * s.log2() + (1.0 - s) * (1.0 - s).log2());
        assert!((typical_exponent(&cascade, 1.0) - h(0.2)).abs() < 1e-12);
        assert!((typical_exponent(&cascade, 0.0) - h(0.4)).abs() < 1e-12);
    }

    #[test]
    fn sampled_exponents_pass_and_reproduce() {
        let spec = defaults(Family::SwitchedBernoulli);
        let a = check_sampled_exponents(&spec, 40_319, 20, 7).unwrap();
        let b = check_sampled_exponents(&spec, 40_319, 20, 7).unwrap();
        assert_eq!(a, b);
        assert!(a[0].passed(), "{}", a[0]);
        assert_eq!(a[1].status, CheckStatus::Informative);
    }

    #[test]
    fn uniform_exponent_has_no_spread() {
        let spec = MeasureSpec::FourLetter {
            a: vec![0.25; 4],
            b: vec![0.25; 4],
            schedule: Schedule::Factorial,
        };
        let checks = check_sampled_exponents(&spec, 6000, 10, 1).unwrap();
        assert!(checks[0].passed());
        assert!(checks[0].parameters.contains("worst=0"), "{}", checks[0]);
    }

    #[test]
    fn skip_groups() {
        let spec = defaults(Family::FibonacciMoran);
        let options = VerifyOptions {
            skip: vec!["levelset".into(), "sampled".into()],
            ..VerifyOptions::default()
        };
        let report = run(&spec, &options).unwrap();
        assert!(report
            .checks
            .iter()
            .all(|c| c.claim_id.starts_with("ordering") || c.claim_id.starts_with("shape")));
        assert!(!report.has_failures());
        let text = report.to_text();
        assert!(text.starts_with("# spec: FibonacciMoran"));
        assert!(text.trim_end().ends_with(&format!("summary: {}", report.summary())));
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), report.checks.len() + 1);
    }
}
