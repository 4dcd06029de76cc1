//! The five cascade measure families: parameters, per-level regimes, cylinder
//! masses, exhaustive level enumeration and sampling.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::real::{lit, log_moment, log_sum_exp, to_f64, Real};
use crate::symbolic::{LevelShape, MoranSpec, RegimeRule, Schedule, Word};

/// Maximum number of cylinders `level` will enumerate.
pub const ENUMERATION_CAP: u128 = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    FibonacciMoran,
    NonRegularMoran,
    SwitchedBernoulli,
    FourLetter,
    YuanSwitching,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::FibonacciMoran,
        Family::NonRegularMoran,
        Family::SwitchedBernoulli,
        Family::FourLetter,
        Family::YuanSwitching,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::FibonacciMoran => "fibonacci_moran",
            Family::NonRegularMoran => "non_regular_moran",
            Family::SwitchedBernoulli => "switched_bernoulli",
            Family::FourLetter => "four_letter",
            Family::YuanSwitching => "yuan_switching",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == name)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters of one measure family.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec<T> {
    /// Levels follow the Fibonacci word: letter `a` splits in two with ratio
    /// `r_a` and weights `p_a`, letter `b` in three with `r_b` and `p_b`.
    FibonacciMoran {
        r_a: T,
        r_b: T,
        p_a: Vec<T>,
        p_b: Vec<T>,
    },
    /// Same two level types, switched by a schedule: odd phases use `b`,
    /// even phases and level 1 use `a`.
    NonRegularMoran {
        r_a: T,
        r_b: T,
        p_a: Vec<T>,
        p_b: Vec<T>,
        schedule: Schedule,
    },
    /// Dyadic cascade with weights `(p, 1-p)` in odd phases and
    /// `(p_hat, 1-p_hat)` in even phases.
    SwitchedBernoulli { p: T, p_hat: T, schedule: Schedule },
    /// Four-letter tree with the ultrametric `4^-|w ^ v|`; weights `a` in odd
    /// phases and `b` in even phases.
    FourLetter {
        a: Vec<T>,
        b: Vec<T>,
        schedule: Schedule,
    },
    /// Binary Moran cascade. Level `i` with `N_{2k} < i <= N_{2k+1}` has ratio
    /// `1/scale_a` and weights `(p, 1-p)`; otherwise `1/scale_b` and
    /// `(p_tilde, 1-p_tilde)`.
    YuanSwitching {
        scale_a: T,
        scale_b: T,
        p: T,
        p_tilde: T,
        schedule: Schedule,
    },
}

fn prob_tolerance<T: Real>(len: usize) -> T {
    lit::<T>(1e-12).max(T::epsilon() * lit(4.0 * len as f64))
}

fn check_vector<T: Real>(name: &str, v: &[T], len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::InvalidSpec(format!(
            "{name} has {} entries, expected {len}",
            v.len()
        )));
    }
    if let Some(x) = v.iter().find(|&&x| !(x > T::zero() && x < T::one())) {
        return Err(Error::InvalidSpec(format!(
            "{name} entry {x} violates 0 < {name}_j < 1"
        )));
    }
    let sum = v.iter().fold(T::zero(), |a, &b| a + b);
    if (sum - T::one()).abs() > prob_tolerance(len) {
        return Err(Error::InvalidSpec(format!(
            "{name} sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidSpec(msg()))
    }
}

impl<T: Real> MeasureSpec<T> {
    /// Parameter choices used throughout the examples and the CLI.
    pub fn default_for(family: Family) -> Self {
        let v = |xs: &[f64]| xs.iter().map(|&x| lit::<T>(x)).collect::<Vec<T>>();
        match family {
            Family::FibonacciMoran => MeasureSpec::FibonacciMoran {
                r_a: lit(0.4),
                r_b: lit(0.3),
                p_a: v(&[0.3, 0.7]),
                p_b: v(&[0.2, 0.3, 0.5]),
            },
            Family::NonRegularMoran => MeasureSpec::NonRegularMoran {
                r_a: lit(0.4),
                r_b: lit(0.3),
                p_a: v(&[0.3, 0.7]),
                p_b: v(&[0.2, 0.3, 0.5]),
                schedule: Schedule::Doubling,
            },
            Family::SwitchedBernoulli => MeasureSpec::SwitchedBernoulli {
                p: lit(0.2),
                p_hat: lit(0.4),
                schedule: Schedule::Factorial,
            },
            Family::FourLetter => MeasureSpec::FourLetter {
                a: v(&[0.1, 0.2, 0.3, 0.4]),
                b: v(&[0.25, 0.25, 0.25, 0.25]),
                schedule: Schedule::Factorial,
            },
            Family::YuanSwitching => MeasureSpec::YuanSwitching {
                scale_a: lit(5.0),
                scale_b: lit(3.0),
                p: lit(0.2),
                p_tilde: lit(0.4),
                schedule: Schedule::Factorial,
            },
        }
    }

    pub fn family(&self) -> Family {
        match self {
            MeasureSpec::FibonacciMoran { .. } => Family::FibonacciMoran,
            MeasureSpec::NonRegularMoran { .. } => Family::NonRegularMoran,
            MeasureSpec::SwitchedBernoulli { .. } => Family::SwitchedBernoulli,
            MeasureSpec::FourLetter { .. } => Family::FourLetter,
            MeasureSpec::YuanSwitching { .. } => Family::YuanSwitching,
        }
    }

    pub fn schedule(&self) -> Option<&Schedule> {
        match self {
            MeasureSpec::FibonacciMoran { .. } => None,
            MeasureSpec::NonRegularMoran { schedule, .. }
            | MeasureSpec::SwitchedBernoulli { schedule, .. }
            | MeasureSpec::FourLetter { schedule, .. }
            | MeasureSpec::YuanSwitching { schedule, .. } => Some(schedule),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let half = lit::<T>(0.5);
        let third = T::one() / lit(3.0);
        match self {
            MeasureSpec::FibonacciMoran { r_a, r_b, p_a, p_b }
            | MeasureSpec::NonRegularMoran {
                r_a, r_b, p_a, p_b, ..
            } => {
                check(*r_a > T::zero() && *r_a < half, || {
                    format!("r_a = {r_a} violates 0 < r_a < 1/2")
                })?;
                check(*r_b > T::zero() && *r_b < third, || {
                    format!("r_b = {r_b} violates 0 < r_b < 1/3")
                })?;
                check_vector("p_a", p_a, 2)?;
                check_vector("p_b", p_b, 3)
            }
            MeasureSpec::SwitchedBernoulli { p, p_hat, .. } => check(
                *p > T::zero() && p < p_hat && *p_hat <= half,
                || format!("p = {p}, p_hat = {p_hat} violates 0 < p < p_hat <= 1/2"),
            ),
            MeasureSpec::FourLetter { a, b, .. } => {
                check_vector("a", a, 4)?;
                check_vector("b", b, 4)
            }
            MeasureSpec::YuanSwitching {
                scale_a,
                scale_b,
                p,
                p_tilde,
                ..
            } => {
                let two = lit::<T>(2.0);
                check(scale_a > scale_b && *scale_b > two, || {
                    format!("scale_a = {scale_a}, scale_b = {scale_b} violates scale_a > scale_b > 2")
                })?;
                check(*p > T::zero() && *p <= half, || {
                    format!("p = {p} violates 0 < p <= 1/2")
                })?;
                check(*p_tilde > T::zero() && *p_tilde <= half, || {
                    format!("p_tilde = {p_tilde} violates 0 < p_tilde <= 1/2")
                })
            }
        }
    }

    /// Validated per-level structure of the measure.
    pub fn cascade(&self) -> Result<Cascade<T>> {
        self.validate()?;
        Ok(self.cascade_unchecked())
    }

    /// Structure without parameter validation. Used by tests that relax a
    /// family constraint on purpose.
    pub fn cascade_unchecked(&self) -> Cascade<T> {
        let two = lit::<T>(2.0);
        let four = lit::<T>(4.0);
        match self {
            MeasureSpec::FibonacciMoran { r_a, r_b, p_a, p_b } => Cascade::new(
                vec![Regime::new(p_a.clone(), *r_a), Regime::new(p_b.clone(), *r_b)],
                RegimeRule::Fibonacci,
                Metric::Interval,
            ),
            MeasureSpec::NonRegularMoran {
                r_a,
                r_b,
                p_a,
                p_b,
                schedule,
            } => Cascade::new(
                vec![Regime::new(p_a.clone(), *r_a), Regime::new(p_b.clone(), *r_b)],
                RegimeRule::Switching {
                    schedule: schedule.clone(),
                    odd: 1,
                    even: 0,
                    first: Some(0),
                    right_closed: false,
                },
                Metric::Interval,
            ),
            MeasureSpec::SwitchedBernoulli { p, p_hat, schedule } => Cascade::new(
                vec![
                    Regime::new(vec![*p, T::one() - *p], T::one() / two),
                    Regime::new(vec![*p_hat, T::one() - *p_hat], T::one() / two),
                ],
                RegimeRule::Switching {
                    schedule: schedule.clone(),
                    odd: 0,
                    even: 1,
                    first: None,
                    right_closed: false,
                },
                Metric::Interval,
            ),
            MeasureSpec::FourLetter { a, b, schedule } => Cascade::new(
                vec![
                    Regime::new(a.clone(), T::one() / four),
                    Regime::new(b.clone(), T::one() / four),
                ],
                RegimeRule::Switching {
                    schedule: schedule.clone(),
                    odd: 0,
                    even: 1,
                    first: None,
                    right_closed: false,
                },
                Metric::Ultrametric,
            ),
            MeasureSpec::YuanSwitching {
                scale_a,
                scale_b,
                p,
                p_tilde,
                schedule,
            } => Cascade::new(
                vec![
                    Regime::new(vec![*p, T::one() - *p], T::one() / *scale_a),
                    Regime::new(vec![*p_tilde, T::one() - *p_tilde], T::one() / *scale_b),
                ],
                RegimeRule::Switching {
                    schedule: schedule.clone(),
                    odd: 1,
                    even: 0,
                    first: None,
                    right_closed: true,
                },
                Metric::Interval,
            ),
        }
    }
}

/// Weights and contraction ratio shared by every level of one regime.
#[derive(Debug, Clone, PartialEq)]
pub struct Regime<T> {
    pub weights: Vec<T>,
    pub log_weights: Vec<T>,
    pub ratio: T,
    pub log_ratio: T,
}

impl<T: Real> Regime<T> {
    pub fn new(weights: Vec<T>, ratio: T) -> Self {
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Self {
            weights,
            log_weights,
            ratio,
            log_ratio: ratio.ln(),
        }
    }

    pub fn branching(&self) -> usize {
        self.weights.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Embedded in `[0, 1]` with the Moran placement.
    Interval,
    /// Symbolic tree, cylinders of depth `n` are balls of diameter `4^-n`.
    Ultrametric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cascade<T> {
    pub regimes: Vec<Regime<T>>,
    pub rule: RegimeRule,
    pub metric: Metric,
}

impl<T: Real> Cascade<T> {
    pub fn new(regimes: Vec<Regime<T>>, rule: RegimeRule, metric: Metric) -> Self {
        Self {
            regimes,
            rule,
            metric,
        }
    }

    pub fn regime_sequence(&self, n: usize) -> Result<Vec<usize>> {
        self.rule.sequence(n)
    }

    pub fn moran_spec(&self) -> Result<MoranSpec<T>> {
        MoranSpec::new(
            self.regimes
                .iter()
                .map(|r| LevelShape {
                    branching: r.branching(),
                    ratio: r.ratio,
                })
                .collect(),
            self.rule.clone(),
        )
    }

    /// Cumulative regime counts for every depth up to `max_depth`.
    pub fn profile(&self, max_depth: usize) -> Result<Profile<T>> {
        let seq = self.regime_sequence(max_depth)?;
        let r = self.regimes.len();
        let mut prefix = vec![0u32; (max_depth + 1) * r];
        let mut log_diam = Vec::with_capacity(max_depth + 1);
        log_diam.push(T::zero());
        let mut acc = 0.0f64;
        for (d, &reg) in seq.iter().enumerate() {
            let (done, rest) = prefix.split_at_mut((d + 1) * r);
            rest[..r].copy_from_slice(&done[d * r..]);
            rest[reg] += 1;
            acc += to_f64(self.regimes[reg].log_ratio);
            log_diam.push(lit(acc));
        }
        Ok(Profile {
            regimes: seq,
            prefix,
            width: r,
            log_diameters: log_diam,
        })
    }

    pub fn log_measure(&self, word: &Word) -> Result<T> {
        let seq = self.regime_sequence(word.depth())?;
        let mut acc = T::zero();
        for (k, (&idx, &reg)) in word.indices().iter().zip(&seq).enumerate() {
            let regime = &self.regimes[reg];
            if idx == 0 || idx as usize > regime.branching() {
                return Err(Error::InvalidBranchIndex {
                    level: k + 1,
                    index: idx,
                    branching: regime.branching(),
                });
            }
            acc = acc + regime.log_weights[idx as usize - 1];
        }
        Ok(acc)
    }

    pub fn log_diameter(&self, depth: usize) -> Result<T> {
        let seq = self.regime_sequence(depth)?;
        Ok(seq
            .iter()
            .fold(T::zero(), |acc, &r| acc + self.regimes[r].log_ratio))
    }

    /// `log sum_i w_i^q` for each regime.
    pub fn regime_log_moments(&self, q: T) -> Vec<T> {
        self.regimes
            .iter()
            .map(|r| log_moment(&r.log_weights, q).0)
            .collect()
    }

    /// `log sum_sigma mu(J_sigma)^q` from per-regime level counts, using
    /// `sum mu^q = prod_levels sum_i w_i^q`.
    pub fn factored_log_partition_sum(&self, counts: &[u32], q: T) -> T {
        self.regime_log_moments(q)
            .into_iter()
            .zip(counts)
            .fold(T::zero(), |acc, (l, &c)| {
                if c == 0 {
                    acc
                } else {
                    acc + T::from_u32(c).unwrap() * l
                }
            })
    }

    /// Number of depth-`n` cylinders, saturating at `u128::MAX`.
    pub fn cylinder_count(&self, n: usize) -> Result<u128> {
        let seq = self.regime_sequence(n)?;
        Ok(seq.iter().fold(1u128, |acc, &r| {
            acc.saturating_mul(self.regimes[r].branching() as u128)
        }))
    }
}

/// Regime bookkeeping for all depths up to a maximum.
#[derive(Debug, Clone)]
pub struct Profile<T> {
    pub regimes: Vec<usize>,
    prefix: Vec<u32>,
    width: usize,
    log_diameters: Vec<T>,
}

impl<T: Real> Profile<T> {
    pub fn max_depth(&self) -> usize {
        self.regimes.len()
    }

    /// Number of levels `<= n` in each regime.
    pub fn counts(&self, n: usize) -> &[u32] {
        &self.prefix[n * self.width..(n + 1) * self.width]
    }

    /// Natural log of the common diameter of depth-`n` cylinders.
    pub fn log_diameter(&self, n: usize) -> T {
        self.log_diameters[n]
    }

    pub fn regime_of_level(&self, j: usize) -> usize {
        self.regimes[j - 1]
    }

    /// Depths `d` with a regime change between level `d` and `d + 1`.
    pub fn flip_depths(&self) -> Vec<usize> {
        (1..self.regimes.len())
            .filter(|&d| self.regimes[d - 1] != self.regimes[d])
            .collect()
    }
}

/// A cylinder together with its log-mass and log-diameter.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCylinder<T> {
    pub word: Word,
    pub log_measure: T,
    pub log_diameter: T,
}

pub fn cylinder_measure<T: Real>(spec: &MeasureSpec<T>, word: &Word) -> Result<T> {
    spec.cascade()?.log_measure(word)
}

pub fn local_exponent<T: Real>(spec: &MeasureSpec<T>, word: &Word) -> Result<T> {
    if word.depth() == 0 {
        return Err(Error::Domain {
            value: 0.0,
            domain: "word depth >= 1",
        });
    }
    let cascade = spec.cascade()?;
    Ok(cascade.log_measure(word)? / cascade.log_diameter(word.depth())?)
}

fn check_cap<T: Real>(cascade: &Cascade<T>, n: usize) -> Result<()> {
    let count = cascade.cylinder_count(n)?;
    if count > ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            what: "cylinder count",
            requested: count,
            cap: ENUMERATION_CAP,
        });
    }
    Ok(())
}

/// Calls `visit(indices, log_measure)` for every depth-`n` cylinder in
/// lexicographic order.
pub fn for_each_cylinder<T: Real, F: FnMut(&[u32], T)>(
    cascade: &Cascade<T>,
    n: usize,
    mut visit: F,
) -> Result<()> {
    check_cap(cascade, n)?;
    let seq = cascade.regime_sequence(n)?;
    let mut indices = vec![1u32; n];
    let mut partial = vec![T::zero(); n + 1];
    for d in 0..n {
        partial[d + 1] = partial[d] + cascade.regimes[seq[d]].log_weights[0];
    }
    loop {
        visit(&indices, partial[n]);
        let mut d = n;
        loop {
            if d == 0 {
                return Ok(());
            }
            d -= 1;
            let regime = &cascade.regimes[seq[d]];
            if (indices[d] as usize) < regime.branching() {
                indices[d] += 1;
                break;
            }
            indices[d] = 1;
        }
        for k in d..n {
            let regime = &cascade.regimes[seq[k]];
            partial[k + 1] = partial[k] + regime.log_weights[indices[k] as usize - 1];
        }
    }
}

/// Restartable stream over the cylinders of one depth.
pub struct LevelIter<T> {
    cascade: Cascade<T>,
    seq: Vec<usize>,
    indices: Vec<u32>,
    partial: Vec<T>,
    log_diameter: T,
    done: bool,
}

impl<T: Real> LevelIter<T> {
    fn new(cascade: Cascade<T>, n: usize) -> Result<Self> {
        check_cap(&cascade, n)?;
        let seq = cascade.regime_sequence(n)?;
        let mut partial = vec![T::zero(); n + 1];
        for d in 0..n {
            partial[d + 1] = partial[d] + cascade.regimes[seq[d]].log_weights[0];
        }
        let log_diameter = seq
            .iter()
            .fold(T::zero(), |acc, &r| acc + cascade.regimes[r].log_ratio);
        Ok(Self {
            cascade,
            indices: vec![1; n],
            seq,
            partial,
            log_diameter,
            done: false,
        })
    }

    fn advance(&mut self) {
        let n = self.indices.len();
        let mut d = n;
        loop {
            if d == 0 {
                self.done = true;
                return;
            }
            d -= 1;
            if (self.indices[d] as usize) < self.cascade.regimes[self.seq[d]].branching() {
                self.indices[d] += 1;
                break;
            }
            self.indices[d] = 1;
        }
        for k in d..n {
            let regime = &self.cascade.regimes[self.seq[k]];
            self.partial[k + 1] =
                self.partial[k] + regime.log_weights[self.indices[k] as usize - 1];
        }
    }
}

impl<T: Real> Iterator for LevelIter<T> {
    type Item = WeightedCylinder<T>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = WeightedCylinder {
            word: Word::new(self.indices.clone()),
            log_measure: self.partial[self.indices.len()],
            log_diameter: self.log_diameter,
        };
        self.advance();
        Some(item)
    }
}

/// Every depth-`n` cylinder exactly once. Fails above [`ENUMERATION_CAP`].
pub fn level<T: Real>(spec: &MeasureSpec<T>, n: usize) -> Result<LevelIter<T>> {
    LevelIter::new(spec.cascade()?, n)
}

fn pick<T: Real, R: Rng>(weights: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += to_f64(*w);
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Word of depth `n` drawn with probability equal to its mass.
pub fn sample_word<T: Real>(spec: &MeasureSpec<T>, n: usize, seed: u64) -> Result<Word> {
    let cascade = spec.cascade()?;
    let seq = cascade.regime_sequence(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_with(&cascade, &seq, &mut rng))
}

/// Draws one word given a precomputed regime sequence.
pub fn sample_with<T: Real, R: Rng>(cascade: &Cascade<T>, seq: &[usize], rng: &mut R) -> Word {
    Word::new(
        seq.iter()
            .map(|&r| pick(&cascade.regimes[r].weights, rng) as u32 + 1)
            .collect(),
    )
}

/// Running log-mass `log mu(J_{w|d})` for `d = 0..=n` along a sampled word.
pub fn sample_log_measure_path<T: Real, R: Rng>(
    cascade: &Cascade<T>,
    seq: &[usize],
    rng: &mut R,
) -> Vec<T> {
    let mut out = Vec::with_capacity(seq.len() + 1);
    let mut acc = 0.0f64;
    out.push(T::zero());
    for &r in seq {
        let regime = &cascade.regimes[r];
        let i = pick(&regime.weights, rng);
        acc += to_f64(regime.log_weights[i]);
        out.push(lit(acc));
    }
    out
}

/// Largest depth accepted by [`brute_log_partition_sums`].
pub const BRUTE_FORCE_MAX_DEPTH: usize = 16;

/// `log sum_sigma mu(J_sigma)^q` for each `q`, by visiting every depth-`n`
/// cylinder and summing the full path products.
pub fn brute_log_partition_sums<T: Real>(
    spec: &MeasureSpec<T>,
    n: usize,
    qs: &[T],
) -> Result<Vec<T>> {
    if n > BRUTE_FORCE_MAX_DEPTH {
        return Err(Error::CapExceeded {
            what: "brute-force depth",
            requested: n as u128,
            cap: BRUTE_FORCE_MAX_DEPTH as u128,
        });
    }
    let cascade = spec.cascade()?;
    Ok(brute_force(&cascade, n, qs))
}

pub(crate) fn brute_force<T: Real>(cascade: &Cascade<T>, n: usize, qs: &[T]) -> Vec<T> {
    let nq = qs.len();
    let seq = cascade.regime_sequence(n).expect("sequence within cap");
    // per level: scaled w^q for each branch, and the log of the scale factor
    let mut powers: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut log_scale = vec![T::zero(); nq];
    for &r in &seq {
        let regime = &cascade.regimes[r];
        let mut table = vec![T::zero(); regime.branching() * nq];
        for (qi, &q) in qs.iter().enumerate() {
            let top = regime
                .log_weights
                .iter()
                .map(|&l| q * l)
                .fold(T::neg_infinity(), T::max);
            log_scale[qi] = log_scale[qi] + top;
            for (i, &l) in regime.log_weights.iter().enumerate() {
                table[i * nq + qi] = (q * l - top).exp();
            }
        }
        powers.push(table);
    }
    let mut products = vec![T::one(); (n + 1) * nq];
    let mut sums = vec![T::zero(); (n + 1) * nq];
    descend(0, n, nq, &powers, &mut products, &mut sums);
    (0..nq).map(|qi| sums[qi].ln() + log_scale[qi]).collect()
}

fn descend<T: Real>(
    depth: usize,
    n: usize,
    nq: usize,
    powers: &[Vec<T>],
    products: &mut [T],
    sums: &mut [T],
) {
    if depth == n {
        for qi in 0..nq {
            sums[n * nq + qi] = products[n * nq + qi];
        }
        return;
    }
    let table = &powers[depth];
    let branching = table.len() / nq;
    for qi in 0..nq {
        sums[depth * nq + qi] = T::zero();
    }
    for i in 0..branching {
        for qi in 0..nq {
            products[(depth + 1) * nq + qi] = products[depth * nq + qi] * table[i * nq + qi];
        }
        descend(depth + 1, n, nq, powers, products, sums);
        for qi in 0..nq {
            sums[depth * nq + qi] = sums[depth * nq + qi] + sums[(depth + 1) * nq + qi];
        }
    }
}

/// Total log-mass of a level computed from [`level`]; zero for a probability
/// measure.
pub fn level_log_mass<T: Real>(spec: &MeasureSpec<T>, n: usize) -> Result<T> {
    let logs: Vec<T> = level(spec, n)?.map(|c| c.log_measure).collect();
    Ok(log_sum_exp(&logs))
}
