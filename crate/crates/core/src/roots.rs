//! Scalar root bracketing and one-dimensional minimisation.

use crate::error::{Error, Result};
use crate::real::{lit, to_f64, Real};

#[derive(Debug, Clone, Copy)]
pub struct BisectionOptions {
    pub initial: f64,
    pub limit: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        Self {
            initial: 64.0,
            limit: 1e3,
            tolerance: 1e-12,
            max_iterations: 200,
        }
    }
}

/// Root of `f` starting from `[-initial, initial]` and doubling the bracket
/// until a sign change appears or the bound passes `limit`.
pub fn bisect<T: Real, F: Fn(T) -> T>(f: F, options: BisectionOptions) -> Result<T> {
    let mut half = lit::<T>(options.initial);
    let limit = lit::<T>(options.limit);
    let (mut lo, mut hi, mut f_lo, mut f_hi);
    loop {
        lo = -half;
        hi = half;
        f_lo = f(lo);
        f_hi = f(hi);
        if f_lo == T::zero() {
            return Ok(lo);
        }
        if f_hi == T::zero() {
            return Ok(hi);
        }
        if (f_lo < T::zero()) != (f_hi < T::zero()) {
            break;
        }
        if half >= limit {
            return Err(Error::BracketFailure {
                limit: options.limit,
            });
        }
        half = (half + half).min(limit);
    }
    let tol = lit::<T>(options.tolerance);
    let mut mid = (lo + hi) / lit(2.0);
    for _ in 0..options.max_iterations {
        mid = (lo + hi) / lit(2.0);
        let f_mid = f(mid);
        if f_mid.abs() <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if (f_mid < T::zero()) == (f_lo < T::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Minimiser and minimum of a unimodal `f` on `[a, b]`.
pub fn golden_section<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, x_tol: T) -> (T, T) {
    let inv_phi = lit::<T>((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (a, b);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let floor = T::epsilon() * (a.abs() + b.abs() + T::one());
    while (b - a).abs() > x_tol.max(floor) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = (a + b) / lit(2.0);
    let fx = f(x);
    [(x, fx), (c, fc), (d, fd)]
        .into_iter()
        .min_by(|l, r| to_f64(l.1).total_cmp(&to_f64(r.1)))
        .unwrap()
}
