//! Scalar abstraction and log-space arithmetic shared by every module.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// floating point scalar the library is generic over: f32 or f64
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `ln(exp(a) + exp(b))` without overflow; either side may be `-inf`.
#[inline]
pub fn log_add<T: Real>(a: T, b: T) -> T {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == T::neg_infinity() {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// log(sum(exp(x_i))) by factoring out the max; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    if max == T::infinity() {
        return max;
    }
    let sum = xs.iter().fold(T::zero(), |acc, &x| acc + (x - max).exp());
    max + sum.ln()
}

/// Streaming log-sum-exp with a running maximum.
#[derive(Debug, Clone, Copy)]
pub struct LogAccumulator<T> {
    max: T,
    scaled: T,
}

impl<T: Real> Default for LogAccumulator<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> LogAccumulator<T> {
    pub fn new() -> Self {
        Self {
            max: T::neg_infinity(),
            scaled: T::zero(),
        }
    }

    #[inline]
    pub fn push(&mut self, x: T) {
        if x == T::neg_infinity() {
            return;
        }
        if x <= self.max {
            self.scaled = self.scaled + (x - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - x).exp() + T::one();
            self.max = x;
        }
    }

    pub fn value(&self) -> T {
        if self.max == T::neg_infinity() {
            T::neg_infinity()
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Table of `ln k!` built by cumulative summation.
#[derive(Debug, Clone)]
pub struct LogFactorials<T> {
    table: Vec<T>,
}

impl<T: Real> LogFactorials<T> {
    pub fn new(max: usize) -> Self {
        let mut table = Vec::with_capacity(max + 1);
        table.push(T::zero());
        let mut acc = 0.0f64;
        for k in 1..=max {
            acc += (k as f64).ln();
            table.push(lit(acc));
        }
        Self { table }
    }

    #[inline]
    pub fn ln_factorial(&self, k: usize) -> T {
        self.table[k]
    }

    #[inline]
    pub fn ln_choose(&self, n: usize, k: usize) -> T {
        self.table[n] - self.table[k] - self.table[n - k]
    }

    pub fn max(&self) -> usize {
        self.table.len() - 1
    }
}

/// `ln sum_i w_i^q` given `ln w_i`, together with its derivative in `q`
/// (the `w^q`-weighted mean of `ln w`).
pub fn log_moment<T: Real>(log_weights: &[T], q: T) -> (T, T) {
    let scaled: Vec<T> = log_weights.iter().map(|&l| q * l).collect();
    let value = log_sum_exp(&scaled);
    let mut slope = T::zero();
    for (&l, &s) in log_weights.iter().zip(&scaled) {
        slope = slope + l * (s - value).exp();
    }
    (value, slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_handles_infinities() {
        assert_eq!(log_add(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
        assert_eq!(log_add(f64::NEG_INFINITY, 1.5), 1.5);
        assert!((log_add(0.0f64, 0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn accumulator_matches_batch() {
        let xs = [-1000.0, -3.0, 2.0, 700.0, -2.5, 699.0];
        let mut acc = LogAccumulator::new();
        for &x in &xs {
            acc.push(x);
        }
        assert!((acc.value() - log_sum_exp(&xs)).abs() < 1e-12);
        assert_eq!(LogAccumulator::<f64>::new().value(), f64::NEG_INFINITY);
    }

    #[test]
    fn log_factorials_small() {
        let lf = LogFactorials::<f64>::new(10);
        assert!((lf.ln_factorial(5) - 120f64.ln()).abs() < 1e-13);
        assert!((lf.ln_choose(10, 3) - 120f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_moment_slope_by_differences() {
        let lw = [0.2f64.ln(), 0.3f64.ln(), 0.5f64.ln()];
        let q = 1.7;
        let h = 1e-6;
        let (_, slope) = log_moment(&lw, q);
        let fd = (log_moment(&lw, q + h).0 - log_moment(&lw, q - h).0) / (2.0 * h);
        assert!((slope - fd).abs() < 1e-8);
    }
}
