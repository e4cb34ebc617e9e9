//! Sparsity likelihood scores.
//!
//! A p-value `p` is scored by
//!
//! ```text
//!   l(p) = log(1 + (λ1 log N / N) f1(p) + (λ2 / sqrt(N log N)) f2(p))
//!   f1(p) = 1 / (p (2 - log p)^2) - 1/2
//!   f2(p) = 1 / sqrt(p) - 2
//! ```
//!
//! and a vector of N p-values by the sum of the per-stream scores. Both `f1`
//! and `f2` integrate to zero on (0, 1], so `exp(l(p))` is a density on the
//! unit interval and `exp` of the aggregate score has mean one under
//! independent uniform p-values.

use crate::error::{Error, Result};
use crate::real::Real;

/// A p-value in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PValue<T>(T);

impl<T: Real> PValue<T> {
    pub fn new(value: T) -> Result<Self> {
        if value > T::zero() && value <= T::one() {
            Ok(Self(value))
        } else {
            Err(Error::PValueDomain(value.to_f64().unwrap_or(f64::NAN)))
        }
    }

    /// Clamps `value` into `[p_floor, 1]`. NaN maps to 1.
    #[inline]
    pub fn clamped(value: T) -> Self {
        if value.is_nan() {
            return Self(T::one());
        }
        Self(value.max(T::p_floor()).min(T::one()))
    }

    #[inline]
    pub fn get(self) -> T {
        self.0
    }
}

/// `(N, λ1, λ2)` for the sparsity likelihood score, with the two mixing
/// weights precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityParams<T> {
    num_streams: usize,
    lambda1: T,
    lambda2: T,
    weight1: T,
    weight2: T,
}

impl<T: Real> SparsityParams<T> {
    /// Validates the parameters. The score argument is checked at `p = 1`
    /// only: `f1` and `f2` are decreasing on `(0, 1]`, so positivity there
    /// implies positivity everywhere.
    pub fn new(num_streams: usize, lambda1: T, lambda2: T) -> Result<Self> {
        if num_streams < 2 {
            return Err(Error::InvalidSparsity(format!(
                "num_streams must be at least 2, got {num_streams}"
            )));
        }
        if !(lambda1 >= T::zero()) || !lambda1.is_finite() {
            return Err(Error::InvalidSparsity(format!("lambda1 must be >= 0, got {lambda1}")));
        }
        if !(lambda2 > T::zero()) || !lambda2.is_finite() {
            return Err(Error::InvalidSparsity(format!("lambda2 must be > 0, got {lambda2}")));
        }
        let n = T::from_usize(num_streams).expect("stream count representable");
        let log_n = n.ln();
        let weight1 = lambda1 * log_n / n;
        let weight2 = lambda2 / (n * log_n).sqrt();
        // f1(1) = -1/4, f2(1) = -1
        let at_one = T::one() - weight1 * T::lit(0.25) - weight2;
        if !(at_one > T::zero()) {
            return Err(Error::InvalidSparsity(format!(
                "score argument at p = 1 is {at_one}; need 1 - λ1 logN/(4N) - λ2/sqrt(N logN) > 0"
            )));
        }
        Ok(Self { num_streams, lambda1, lambda2, weight1, weight2 })
    }

    pub fn num_streams(&self) -> usize {
        self.num_streams
    }

    pub fn lambda1(&self) -> T {
        self.lambda1
    }

    pub fn lambda2(&self) -> T {
        self.lambda2
    }

    /// `λ1 log N / N`.
    pub fn weight1(&self) -> T {
        self.weight1
    }

    /// `λ2 / sqrt(N log N)`.
    pub fn weight2(&self) -> T {
        self.weight2
    }
}

/// `1 / (p (2 - log p)^2) - 1/2`.
#[inline]
pub fn f1<T: Real>(p: PValue<T>) -> T {
    let p = p.get();
    let u = T::lit(2.0) - p.ln();
    T::one() / (p * u * u) - T::lit(0.5)
}

/// `1 / sqrt(p) - 2`.
#[inline]
pub fn f2<T: Real>(p: PValue<T>) -> T {
    T::one() / p.get().sqrt() - T::lit(2.0)
}

/// Per-stream score `l(p)`.
#[inline]
pub fn stream_score<T: Real>(params: &SparsityParams<T>, p: PValue<T>) -> T {
    let arg = T::one() + params.weight1 * f1(p) + params.weight2 * f2(p);
    debug_assert!(arg > T::zero(), "score argument must be positive");
    arg.ln()
}

/// Sum of [`stream_score`] over `pvec`, in index order.
pub fn aggregate_score<T: Real>(params: &SparsityParams<T>, pvec: &[PValue<T>]) -> Result<T> {
    if pvec.len() != params.num_streams {
        return Err(Error::LengthMismatch { expected: params.num_streams, got: pvec.len() });
    }
    Ok(sum_scores(params, pvec.iter().copied()))
}

/// Sums scores from an iterator in iteration order. Callers are responsible
/// for supplying exactly `num_streams` p-values.
#[inline]
pub(crate) fn sum_scores<T: Real>(
    params: &SparsityParams<T>,
    pvals: impl Iterator<Item = PValue<T>>,
) -> T {
    pvals.fold(T::zero(), |acc, p| acc + stream_score(params, p))
}

/// `sqrt(log γ / log log γ)`, the default second mixing weight for a target
/// average run length `γ`.
pub fn default_lambda2<T: Real>(gamma: T) -> Result<T> {
    if !(gamma > T::E().exp()) || !gamma.is_finite() {
        return Err(Error::Domain(format!("default_lambda2 needs gamma > e^e, got {gamma}")));
    }
    let log_gamma = gamma.ln();
    Ok((log_gamma / log_gamma.ln()).sqrt())
}
