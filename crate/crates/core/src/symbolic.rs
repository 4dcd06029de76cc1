//! Words, switching schedules, Fibonacci substitution words and the interval
//! geometry of homogeneous Moran constructions.

use std::fmt;

use crate::error::{Error, Result};
use crate::real::{lit, Real};

/// Largest prefix of the Fibonacci fixed point we are willing to materialise.
pub const FIBONACCI_CAP: usize = 10_000_000;

/// Finite address in the construction tree. Branch indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word {
    indices: Vec<u32>,
}

impl Word {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(indices: Vec<u32>) -> Self {
        Self { indices }
    }

    pub fn depth(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn child(&self, index: u32) -> Word {
        let mut indices = Vec::with_capacity(self.indices.len() + 1);
        indices.extend_from_slice(&self.indices);
        indices.push(index);
        Word { indices }
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.indices.starts_with(&self.indices)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut indices = self.indices.clone();
        indices.extend_from_slice(&other.indices);
        Word { indices }
    }

    pub fn prefix(&self, depth: usize) -> Word {
        Word {
            indices: self.indices[..depth.min(self.indices.len())].to_vec(),
        }
    }
}

impl From<Vec<u32>> for Word {
    fn from(indices: Vec<u32>) -> Self {
        Self { indices }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.indices.is_empty() {
            return f.write_str("()");
        }
        let parts: Vec<String> = self.indices.iter().map(u32::to_string).collect();
        f.write_str(&parts.join("."))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Letter {
    A,
    B,
}

impl Letter {
    pub fn as_char(self) -> char {
        match self {
            Letter::A => 'a',
            Letter::B => 'b',
        }
    }
}

/// Position of a level inside a switching schedule: odd phases cover
/// `t_{2k-1} <= j < t_{2k}`, even phases `t_{2k} <= j < t_{2k+1}`.
/// Indices below `t_1` are reported as even.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchedulePhase {
    Odd,
    Even,
}

/// Increasing integer sequence `t_1 < t_2 < ...` that drives regime switches.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub enum Schedule {
    /// 1, 3, 6, 12, 24, ...
    Doubling,
    /// `t_k = k!`
    #[default]
    Factorial,
    Custom(Vec<u64>),
}

impl Schedule {
    pub fn custom(values: Vec<u64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSpec("custom schedule must not be empty".into()));
        }
        if values[0] < 1 {
            return Err(Error::InvalidSpec("schedule values must be positive".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec(
                "schedule values must be strictly increasing".into(),
            ));
        }
        Ok(Schedule::Custom(values))
    }

    /// `t_k` for `k >= 1`.
    pub fn value(&self, k: usize) -> Result<u64> {
        if k == 0 {
            return Err(Error::Domain {
                value: 0.0,
                domain: "k >= 1",
            });
        }
        match self {
            Schedule::Doubling => match k {
                1 => Ok(1),
                2 => Ok(3),
                _ => u32::try_from(k - 2)
                    .ok()
                    .and_then(|shift| 1u64.checked_shl(shift))
                    .and_then(|pow| pow.checked_mul(3))
                    .ok_or(Error::Overflow { k }),
            },
            Schedule::Factorial => {
                let mut acc: u64 = 1;
                for i in 2..=k as u64 {
                    acc = acc.checked_mul(i).ok_or(Error::Overflow { k })?;
                }
                Ok(acc)
            }
            Schedule::Custom(values) => values.get(k - 1).copied().ok_or(Error::ScheduleExhausted {
                k,
                len: values.len(),
            }),
        }
    }

    /// All `t_k <= limit`, in order.
    pub fn values_up_to(&self, limit: u64) -> Vec<u64> {
        let mut out = Vec::new();
        let mut k = 1;
        while let Ok(t) = self.value(k) {
            if t > limit {
                break;
            }
            out.push(t);
            k += 1;
        }
        out
    }

    /// Phase of index `j`; the phase of the last listed interval of a custom
    /// schedule continues indefinitely.
    pub fn phase(&self, j: u64) -> SchedulePhase {
        let mut count = 0usize;
        let mut k = 1;
        while let Ok(t) = self.value(k) {
            if t > j {
                break;
            }
            count = k;
            k += 1;
        }
        if count % 2 == 1 {
            SchedulePhase::Odd
        } else {
            SchedulePhase::Even
        }
    }

    /// Phases of indices `from..from + len`.
    pub fn phases(&self, from: u64, len: usize) -> Vec<SchedulePhase> {
        let end = from + len as u64;
        let ts = self.values_up_to(end);
        let mut out = Vec::with_capacity(len);
        let mut count = ts.iter().take_while(|&&t| t <= from).count();
        for j in from..end {
            while count < ts.len() && ts[count] <= j {
                count += 1;
            }
            out.push(if count % 2 == 1 {
                SchedulePhase::Odd
            } else {
                SchedulePhase::Even
            });
        }
        out
    }
}

/// Prefix of length `n` of the fixed point of `a -> ab, b -> a`.
pub fn fibonacci_word(n: usize) -> Result<Vec<Letter>> {
    if n == 0 {
        return Err(Error::Domain {
            value: 0.0,
            domain: "n >= 1",
        });
    }
    if n > FIBONACCI_CAP {
        return Err(Error::CapExceeded {
            what: "fibonacci word length",
            requested: n as u128,
            cap: FIBONACCI_CAP as u128,
        });
    }
    // F^k(a) = F^{k-1}(a) F^{k-2}(a), and F^{k-2}(a) is a prefix of the word.
    let mut word = vec![Letter::A, Letter::B];
    let mut prev_len = 1;
    while word.len() < n {
        let cur = word.len();
        word.extend_from_within(0..prev_len);
        prev_len = cur;
    }
    word.truncate(n);
    Ok(word)
}

/// Number of `a` letters in the length-`n` prefix and its share of `n`.
pub fn letter_frequency(n: usize) -> Result<(usize, f64)> {
    let word = fibonacci_word(n)?;
    let count = word.iter().filter(|&&l| l == Letter::A).count();
    Ok((count, count as f64 / n as f64))
}

pub fn schedule_value(schedule: &Schedule, k: usize) -> Result<u64> {
    schedule.value(k)
}

pub fn regime_letter(schedule: &Schedule, j: u64) -> SchedulePhase {
    schedule.phase(j)
}

/// Maps a level index (1-based) to one of a small set of regimes.
#[derive(Debug, Clone, PartialEq)]
pub enum RegimeRule {
    Constant(usize),
    /// Regime 0 on letter `a` of the Fibonacci word, regime 1 on `b`.
    Fibonacci,
    Switching {
        schedule: Schedule,
        odd: usize,
        even: usize,
        /// Overrides the regime of level 1.
        first: Option<usize>,
        /// Level `j` takes the phase of index `j - 1`, which turns the
        /// half-open phase intervals into `N_m < j <= N_{m+1}`.
        right_closed: bool,
    },
}

impl RegimeRule {
    /// Regimes of levels `1..=n`.
    pub fn sequence(&self, n: usize) -> Result<Vec<usize>> {
        match self {
            RegimeRule::Constant(r) => Ok(vec![*r; n]),
            RegimeRule::Fibonacci => {
                if n == 0 {
                    return Ok(Vec::new());
                }
                Ok(fibonacci_word(n)?
                    .into_iter()
                    .map(|l| match l {
                        Letter::A => 0,
                        Letter::B => 1,
                    })
                    .collect())
            }
            RegimeRule::Switching {
                schedule,
                odd,
                even,
                first,
                right_closed,
            } => {
                let from = if *right_closed { 0 } else { 1 };
                let mut out: Vec<usize> = schedule
                    .phases(from, n)
                    .into_iter()
                    .map(|p| match p {
                        SchedulePhase::Odd => *odd,
                        SchedulePhase::Even => *even,
                    })
                    .collect();
                if let (Some(f), Some(slot)) = (first, out.first_mut()) {
                    *slot = *f;
                }
                Ok(out)
            }
        }
    }

    pub fn at(&self, j: usize) -> Result<usize> {
        if j == 0 {
            return Err(Error::Domain {
                value: 0.0,
                domain: "level index >= 1",
            });
        }
        match self {
            RegimeRule::Constant(r) => Ok(*r),
            RegimeRule::Fibonacci => Ok(self.sequence(j)?[j - 1]),
            RegimeRule::Switching {
                schedule,
                odd,
                even,
                first,
                right_closed,
            } => {
                if j == 1 {
                    if let Some(f) = first {
                        return Ok(*f);
                    }
                }
                let idx = if *right_closed { j as u64 - 1 } else { j as u64 };
                Ok(match schedule.phase(idx) {
                    SchedulePhase::Odd => *odd,
                    SchedulePhase::Even => *even,
                })
            }
        }
    }

    /// Levels `d` with `regime(d) != regime(d + 1)`, for `1 <= d < max_depth`.
    pub fn flip_depths(&self, max_depth: usize) -> Result<Vec<usize>> {
        let seq = self.sequence(max_depth)?;
        Ok((1..max_depth)
            .filter(|&d| seq[d - 1] != seq[d])
            .collect())
    }
}

/// Branching count and contraction ratio of one regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelShape<T> {
    pub branching: usize,
    pub ratio: T,
}

/// Homogeneous Moran structure: every level uses the shape of its regime.
#[derive(Debug, Clone, PartialEq)]
pub struct MoranSpec<T> {
    pub shapes: Vec<LevelShape<T>>,
    pub rule: RegimeRule,
}

impl<T: Real> MoranSpec<T> {
    pub fn new(shapes: Vec<LevelShape<T>>, rule: RegimeRule) -> Result<Self> {
        if shapes.is_empty() {
            return Err(Error::InvalidSpec("at least one level shape required".into()));
        }
        for (i, s) in shapes.iter().enumerate() {
            if s.branching < 2 {
                return Err(Error::InvalidSpec(format!(
                    "shape {i}: branching {} must be at least 2",
                    s.branching
                )));
            }
            if !(s.ratio > T::zero() && s.ratio < T::one()) {
                return Err(Error::InvalidSpec(format!(
                    "shape {i}: ratio {} must lie in (0, 1)",
                    s.ratio
                )));
            }
            let fill = T::from_usize(s.branching).unwrap() * s.ratio;
            if fill > T::one() + T::epsilon() * lit(8.0) {
                return Err(Error::InvalidSpec(format!(
                    "shape {i}: branching * ratio = {fill} exceeds 1"
                )));
            }
        }
        let max_regime = match &rule {
            RegimeRule::Constant(r) => *r,
            RegimeRule::Fibonacci => 1,
            RegimeRule::Switching {
                odd, even, first, ..
            } => (*odd).max(*even).max(first.unwrap_or(0)),
        };
        if max_regime >= shapes.len() {
            return Err(Error::InvalidSpec(format!(
                "regime rule refers to shape {max_regime}, only {} defined",
                shapes.len()
            )));
        }
        Ok(Self { shapes, rule })
    }

    pub fn uniform(branching: usize, ratio: T) -> Result<Self> {
        Self::new(vec![LevelShape { branching, ratio }], RegimeRule::Constant(0))
    }

    pub fn shape_at(&self, level: usize) -> Result<LevelShape<T>> {
        Ok(self.shapes[self.rule.at(level)?])
    }

    pub fn shape_sequence(&self, n: usize) -> Result<Vec<LevelShape<T>>> {
        Ok(self
            .rule
            .sequence(n)?
            .into_iter()
            .map(|r| self.shapes[r])
            .collect())
    }

    /// Relative gap between neighbouring children of a parent of length 1.
    pub fn relative_gap(shape: &LevelShape<T>) -> T {
        let n = T::from_usize(shape.branching).unwrap();
        (T::one() - n * shape.ratio) / (n - T::one())
    }

    pub fn validate_word(&self, word: &Word) -> Result<()> {
        let shapes = self.shape_sequence(word.depth())?;
        for (k, (&idx, shape)) in word.indices().iter().zip(&shapes).enumerate() {
            if idx == 0 || idx as usize > shape.branching {
                return Err(Error::InvalidBranchIndex {
                    level: k + 1,
                    index: idx,
                    branching: shape.branching,
                });
            }
        }
        Ok(())
    }
}

/// Embedded interval `[left, left + length]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderGeom<T> {
    pub left: T,
    pub length: T,
}

impl<T: Real> CylinderGeom<T> {
    pub fn right(&self) -> T {
        self.left + self.length
    }
}

pub fn children<T: Real>(word: &Word, spec: &MoranSpec<T>) -> Result<Vec<Word>> {
    let shape = spec.shape_at(word.depth() + 1)?;
    Ok((1..=shape.branching as u32).map(|j| word.child(j)).collect())
}

fn degenerate<T: Real>(shape: &LevelShape<T>) -> bool {
    MoranSpec::relative_gap(shape) <= T::epsilon() * lit(16.0)
}

/// Places a cylinder with flush-left/flush-right children and equal gaps.
pub fn embed<T: Real>(word: &Word, spec: &MoranSpec<T>) -> Result<CylinderGeom<T>> {
    spec.validate_word(word)?;
    let shapes = spec.shape_sequence(word.depth())?;
    for (k, s) in shapes.iter().enumerate() {
        if degenerate(s) {
            return Err(Error::DegenerateGap { level: k + 1 });
        }
    }
    Ok(place(word, &shapes))
}

/// Like [`embed`] but tolerates touching siblings (zero gap).
pub fn embed_touching<T: Real>(word: &Word, spec: &MoranSpec<T>) -> Result<CylinderGeom<T>> {
    spec.validate_word(word)?;
    let shapes = spec.shape_sequence(word.depth())?;
    Ok(place(word, &shapes))
}

pub(crate) fn place<T: Real>(word: &Word, shapes: &[LevelShape<T>]) -> CylinderGeom<T> {
    let mut left = T::zero();
    let mut length = T::one();
    for (&idx, shape) in word.indices().iter().zip(shapes) {
        let gap = MoranSpec::relative_gap(shape).max(T::zero());
        let step = (shape.ratio + gap) * length;
        left = left + T::from_u32(idx - 1).unwrap() * step;
        length = length * shape.ratio;
    }
    CylinderGeom { left, length }
}
